//! Interval hits, empirical coverage and the Kupiec and Christoffersen
//! likelihood-ratio backtests.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{IntervalSet, Method};
use crate::stats::{chi2_sf, xlogy};
use crate::timeseries::{HourlyValues, HOURS};

pub const DEFAULT_SIGNIFICANCE: f64 = 0.05;

/// Levels reported in the pass-count table.
pub const PASS_COUNT_LEVELS: [f64; 3] = [0.5, 0.8, 0.98];

/// Interval hits for one nominal coverage, one entry per `(day, hour)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitSeries {
    pub level: f64,
    pub first_day: usize,
    pub n_days: usize,
    pub hits: Vec<bool>,
}

impl HitSeries {
    /// Hits of one hour across days.
    pub fn hour(&self, hour: usize) -> Vec<bool> {
        self.hits.iter().skip(hour - 1).step_by(HOURS).copied().collect()
    }
}

/// Closed-interval membership of the realized prices.
pub fn compute_hits(prices: &HourlyValues, intervals: &IntervalSet, level: f64) -> Result<HitSeries> {
    let li = intervals.level_index(level)?;
    let days = intervals.days();
    if days.start < prices.first_day || days.end > prices.days().end {
        return Err(Error::MisalignedIndex(format!(
            "intervals cover days {days:?}, prices {:?}",
            prices.days()
        )));
    }
    let mut hits = Vec::with_capacity(HOURS * days.len());
    for day in days.clone() {
        for hour in 1..=HOURS {
            let (lo, hi) = intervals.bounds(li, day, hour);
            let p = prices.get(day, hour);
            hits.push(lo <= p && p <= hi);
        }
    }
    Ok(HitSeries {
        level,
        first_day: days.start,
        n_days: days.len(),
        hits,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageStats {
    pub per_hour: Vec<f64>,
    /// Mean of the hourly coverages.
    pub average: f64,
    /// `average - level`.
    pub ace: f64,
}

pub fn coverage_stats(hits: &HitSeries) -> Result<CoverageStats> {
    if hits.n_days == 0 {
        return Err(Error::InvalidParameter("empty hit series".into()));
    }
    let per_hour: Vec<f64> = (1..=HOURS)
        .map(|h| hits.hour(h).iter().filter(|&&x| x).count() as f64 / hits.n_days as f64)
        .collect();
    let average = per_hour.iter().sum::<f64>() / HOURS as f64;
    Ok(CoverageStats {
        per_hour,
        average,
        ace: average - hits.level,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KupiecResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Unconditional coverage test of a hit sequence against the nominal hit
/// rate `1 - alpha`.
pub fn kupiec_test(hits: &[bool], alpha: f64) -> Result<KupiecResult> {
    if hits.is_empty() {
        return Err(Error::SampleTooSmall { needed: 1, got: 0 });
    }
    check_rate(alpha)?;
    let statistic = lr_uc(hits, 1.0 - alpha);
    Ok(KupiecResult {
        statistic,
        p_value: chi2_sf(statistic, 1.0),
    })
}

fn check_rate(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha {alpha} outside (0, 1)")))
    }
}

fn lr_uc(hits: &[bool], pi0: f64) -> f64 {
    let n = hits.len() as f64;
    let n1 = hits.iter().filter(|&&h| h).count() as f64;
    let n0 = n - n1;
    let pi_hat = n1 / n;
    let null = xlogy(n0, 1.0 - pi0) + xlogy(n1, pi0);
    let alt = xlogy(n0, 1.0 - pi_hat) + xlogy(n1, pi_hat);
    (-2.0 * (null - alt)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChristoffersenResult {
    pub lr_uc: f64,
    pub lr_ind: f64,
    pub lr_cc: f64,
    pub p_value: f64,
    /// Transition counts `[n00, n01, n10, n11]`.
    pub transitions: [usize; 4],
}

/// Conditional coverage test: Kupiec's statistic plus the likelihood ratio
/// of a first-order Markov chain against independent hits, on `chi2(2)`.
pub fn christoffersen_test(hits: &[bool], alpha: f64) -> Result<ChristoffersenResult> {
    if hits.len() < 2 {
        return Err(Error::SampleTooSmall {
            needed: 2,
            got: hits.len(),
        });
    }
    check_rate(alpha)?;
    let mut t = [0usize; 4];
    for w in hits.windows(2) {
        t[2 * w[0] as usize + w[1] as usize] += 1;
    }
    let [n00, n01, n10, n11] = t.map(|c| c as f64);
    let pi01 = if n00 + n01 > 0.0 { n01 / (n00 + n01) } else { 0.0 };
    let pi11 = if n10 + n11 > 0.0 { n11 / (n10 + n11) } else { 0.0 };
    let pi = (n01 + n11) / (n00 + n01 + n10 + n11);
    let iid = xlogy(n00 + n10, 1.0 - pi) + xlogy(n01 + n11, pi);
    let markov = xlogy(n00, 1.0 - pi01) + xlogy(n01, pi01) + xlogy(n10, 1.0 - pi11) + xlogy(n11, pi11);
    let lr_ind = (-2.0 * (iid - markov)).max(0.0);
    let lr_uc = lr_uc(hits, 1.0 - alpha);
    let lr_cc = lr_uc + lr_ind;
    Ok(ChristoffersenResult {
        lr_uc,
        lr_ind,
        lr_cc,
        p_value: chi2_sf(lr_cc, 2.0),
        transitions: t,
    })
}

/// Backtest results of one hour at one level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HourTest {
    pub hour: usize,
    pub coverage: f64,
    pub kupiec: KupiecResult,
    pub christoffersen: ChristoffersenResult,
    /// Christoffersen p-value at or above the significance level.
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: f64,
    pub coverage: CoverageStats,
    pub hours: Vec<HourTest>,
    pub pass_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub method: Method,
    pub significance: f64,
    pub n_days: usize,
    pub levels: Vec<LevelReport>,
}

impl CoverageReport {
    pub fn level(&self, level: f64) -> Option<&LevelReport> {
        self.levels.iter().find(|l| (l.level - level).abs() < 1e-9)
    }

    /// Writes one row per level and hour, plus an `all` row per level with
    /// the daily-average coverage and ACE.
    pub fn write_csv(&self, path: &Path, config_hash: Option<&str>) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        if let Some(h) = config_hash {
            writeln!(out, "# config_hash={h}").map_err(io)?;
        }
        writeln!(
            out,
            "method,level,hour,coverage,ace,kupiec_lr,kupiec_p,lr_uc,lr_ind,lr_cc,cc_p,pass"
        )
        .map_err(io)?;
        for lr in &self.levels {
            let pct = (lr.level * 100.0).round() as u32;
            for t in &lr.hours {
                let c = &t.christoffersen;
                writeln!(
                    out,
                    "{},{pct},{},{},{},{},{},{},{},{},{},{}",
                    self.method,
                    t.hour,
                    t.coverage,
                    t.coverage - lr.level,
                    t.kupiec.statistic,
                    t.kupiec.p_value,
                    c.lr_uc,
                    c.lr_ind,
                    c.lr_cc,
                    c.p_value,
                    t.pass as u8
                )
                .map_err(io)?;
            }
            writeln!(
                out,
                "{},{pct},all,{},{},,,,,,,{}",
                self.method, lr.coverage.average, lr.coverage.ace, lr.pass_count
            )
            .map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

/// Coverage and per-hour backtests at every level of `intervals`.
pub fn coverage_report(prices: &HourlyValues, intervals: &IntervalSet, significance: f64) -> Result<CoverageReport> {
    if !(significance > 0.0 && significance < 1.0) {
        return Err(Error::InvalidParameter(format!("significance {significance} outside (0, 1)")));
    }
    let mut levels = Vec::with_capacity(intervals.levels.len());
    for &level in &intervals.levels {
        let hits = compute_hits(prices, intervals, level)?;
        let coverage = coverage_stats(&hits)?;
        let alpha = 1.0 - level;
        let mut hours = Vec::with_capacity(HOURS);
        for hour in 1..=HOURS {
            let h = hits.hour(hour);
            let kupiec = kupiec_test(&h, alpha)?;
            let christoffersen = christoffersen_test(&h, alpha)?;
            hours.push(HourTest {
                hour,
                coverage: coverage.per_hour[hour - 1],
                kupiec,
                christoffersen,
                pass: christoffersen.p_value >= significance,
            });
        }
        let pass_count = hours.iter().filter(|t| t.pass).count();
        levels.push(LevelReport {
            level,
            coverage,
            hours,
            pass_count,
        });
    }
    Ok(CoverageReport {
        method: intervals.method,
        significance,
        n_days: intervals.n_days,
        levels,
    })
}

/// Hours (out of 24) passing the Christoffersen test, per method and level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassCountTable {
    pub levels: Vec<f64>,
    pub rows: Vec<(Method, Vec<usize>)>,
}

impl PassCountTable {
    /// Plain-text table with one row per method and one column per level.
    pub fn render(&self) -> String {
        let mut s = format!("{:<8}", "method");
        for l in &self.levels {
            s.push_str(&format!("{:>6}", format!("{}%", (l * 100.0).round() as u32)));
        }
        s.push('\n');
        for (m, counts) in &self.rows {
            s.push_str(&format!("{:<8}", m.as_str()));
            for c in counts {
                s.push_str(&format!("{c:>6}"));
            }
            s.push('\n');
        }
        s
    }
}

pub fn pass_count_table(reports: &[CoverageReport], levels: &[f64]) -> Result<PassCountTable> {
    let rows = reports
        .iter()
        .map(|r| {
            let counts = levels
                .iter()
                .map(|&l| r.level(l).map(|lr| lr.pass_count).ok_or(Error::LevelNotOnGrid(l)))
                .collect::<Result<_>>()?;
            Ok((r.method, counts))
        })
        .collect::<Result<_>>()?;
    Ok(PassCountTable {
        levels: levels.to_vec(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn seq(bits: &[u8]) -> Vec<bool> {
        bits.iter().map(|&b| b == 1).collect()
    }

    fn one_level(lower: f64, upper: f64, n_days: usize) -> IntervalSet {
        IntervalSet {
            method: Method::Hs,
            start_date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            first_day: 3,
            n_days,
            levels: vec![0.5],
            lower: vec![vec![lower; HOURS * n_days]],
            upper: vec![vec![upper; HOURS * n_days]],
        }
    }

    #[test]
    fn hits_use_closed_intervals() {
        let iv = one_level(1.0, 2.0, 2);
        let mut prices = vec![1.0; HOURS * 5];
        prices[HOURS * 3] = 2.0;
        prices[HOURS * 3 + 1] = 2.5;
        let p = HourlyValues::new(0, prices).unwrap();
        let hits = compute_hits(&p, &iv, 0.5).unwrap();
        assert!(hits.hits[0]);
        assert!(!hits.hits[1]);
        assert_eq!(hits.hits.iter().filter(|&&h| h).count(), 2 * HOURS - 1);
        assert!(matches!(compute_hits(&p, &iv, 0.8), Err(Error::LevelNotOnGrid(_))));
        let short = HourlyValues::new(0, vec![1.0; HOURS * 4]).unwrap();
        assert!(matches!(compute_hits(&short, &iv, 0.5), Err(Error::MisalignedIndex(_))));
    }

    #[test]
    fn degenerate_interval_and_misses() {
        let iv = one_level(7.0, 7.0, 1);
        let p = HourlyValues::new(3, vec![7.0; HOURS]).unwrap();
        assert!(compute_hits(&p, &iv, 0.5).unwrap().hits.iter().all(|&h| h));
        let p = HourlyValues::new(3, vec![8.0; HOURS]).unwrap();
        assert!(compute_hits(&p, &iv, 0.5).unwrap().hits.iter().all(|&h| !h));
    }

    #[test]
    fn coverage_and_ace() {
        let all = HitSeries {
            level: 0.8,
            first_day: 0,
            n_days: 2,
            hits: vec![true; 2 * HOURS],
        };
        let s = coverage_stats(&all).unwrap();
        assert_eq!(s.average, 1.0);
        assert!((s.ace - 0.2).abs() < 1e-15);
        let half = HitSeries {
            level: 0.5,
            first_day: 0,
            n_days: 2,
            hits: (0..2 * HOURS).map(|i| i < HOURS).collect(),
        };
        assert_eq!(coverage_stats(&half).unwrap().ace, 0.0);
        let four = HitSeries {
            level: 0.5,
            first_day: 0,
            n_days: 4,
            hits: [1, 1, 0, 1].iter().flat_map(|&b| vec![b == 1; HOURS]).collect(),
        };
        assert_eq!(coverage_stats(&four).unwrap().per_hour[5], 0.75);
    }

    #[test]
    fn kupiec_reference_values() {
        let exact = kupiec_test(&seq(&[1, 0, 1, 0]), 0.5).unwrap();
        assert_eq!(exact.statistic, 0.0);
        assert_eq!(exact.p_value, 1.0);

        let hits: Vec<bool> = (0..778).map(|i| i % 2 == 0).collect();
        assert_eq!(kupiec_test(&hits, 0.5).unwrap().statistic, 0.0);

        // n = 778, pi0 = 0.8, 560 hits; 25-digit evaluation of the log-likelihood ratio
        let hits: Vec<bool> = (0..778).map(|i| i < 560).collect();
        let k = kupiec_test(&hits, 0.2).unwrap();
        assert!((k.statistic - 28.69828082434647238898391).abs() < 1e-9);
        assert!(((k.p_value - 8.457878308329244654237758e-8) / 8.457878308329244654237758e-8).abs() < 1e-8);
    }

    #[test]
    fn kupiec_empty_categories() {
        let all = kupiec_test(&[true; 50], 0.1).unwrap();
        // -2 * 50 ln 0.9
        assert!((all.statistic + 100.0 * 0.9f64.ln()).abs() < 1e-12);
        assert!(kupiec_test(&[], 0.1).is_err());
    }

    #[test]
    fn christoffersen_components() {
        // pi01 = pi11 = 1/2 and half hits at level 50%
        let h = seq(&[0, 0, 1, 1, 0]);
        let c = christoffersen_test(&h, 0.5).unwrap();
        assert_eq!(c.transitions, [1, 1, 1, 1]);
        assert!(c.lr_ind.abs() < 1e-12);
        assert!((c.lr_cc - c.lr_uc - c.lr_ind).abs() < 1e-10);

        let alt: Vec<bool> = (0..778).map(|i| i % 2 == 1).collect();
        let c = christoffersen_test(&alt, 0.5).unwrap();
        assert_eq!(c.lr_uc, 0.0);
        // 777 transitions, all switches: -2 [ (389 ln(389/777) + 388 ln(388/777)) ]
        assert!((c.lr_ind - 1077.1494315885127171).abs() < 1e-9);
        assert!(c.p_value < 1e-6);
        assert!((c.p_value / 1.2588e-234 - 1.0).abs() < 1e-3);
        assert!(christoffersen_test(&[true], 0.5).is_err());
    }

    #[test]
    fn pass_counts() {
        let mk = |passes: usize| LevelReport {
            level: 0.5,
            coverage: CoverageStats {
                per_hour: vec![0.5; HOURS],
                average: 0.5,
                ace: 0.0,
            },
            hours: Vec::new(),
            pass_count: passes,
        };
        let reports = vec![
            CoverageReport {
                method: Method::Qra,
                significance: 0.05,
                n_days: 10,
                levels: vec![mk(19)],
            },
            CoverageReport {
                method: Method::Cp,
                significance: 0.05,
                n_days: 10,
                levels: vec![mk(0)],
            },
        ];
        let t = pass_count_table(&reports, &[0.5]).unwrap();
        assert_eq!(t.rows, vec![(Method::Qra, vec![19]), (Method::Cp, vec![0])]);
        assert!(t.render().contains("50%"));
        assert!(pass_count_table(&reports, &[0.8]).is_err());
    }

    proptest! {
        #[test]
        fn kupiec_permutation_invariant(bits in prop::collection::vec(any::<bool>(), 2..300), rot in 0usize..300) {
            let mut shuffled = bits.clone();
            let n = shuffled.len();
            shuffled.rotate_left(rot % n);
            shuffled.reverse();
            let a = kupiec_test(&bits, 0.2).unwrap();
            let b = kupiec_test(&shuffled, 0.2).unwrap();
            prop_assert_eq!(a.statistic, b.statistic);
            let c = christoffersen_test(&bits, 0.2).unwrap();
            prop_assert!((c.lr_cc - c.lr_uc - c.lr_ind).abs() <= 1e-10);
            prop_assert!(c.lr_ind >= 0.0 && c.p_value >= 0.0 && c.p_value <= 1.0);
        }
    }
}
