//! Daily battery arbitrage driven by point and interval forecasts.
//!
//! Each day the trader buys `1/η` MWh in the hour with the cheapest forecast
//! and sells `η` MWh in a later hour with the dearest one, bidding at the
//! interval bounds. A leg that does not clear is replaced by a price-taker
//! trade at hour 1 of the next day.

use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{IntervalSet, Method};
use crate::timeseries::{HourlyValues, HOURS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatterySpec {
    /// Power and energy rating, MW / MWh.
    pub capacity_mw: f64,
    /// Efficiency of each leg.
    pub efficiency: f64,
    /// Lowest admissible state of charge as a fraction of capacity.
    pub min_soc_fraction: f64,
    /// Energy moved through the battery per daily cycle, MWh.
    pub daily_trade_energy: f64,
}

impl Default for BatterySpec {
    fn default() -> Self {
        Self {
            capacity_mw: 2.5,
            efficiency: 0.9,
            min_soc_fraction: 0.2,
            daily_trade_energy: 1.0,
        }
    }
}

impl BatterySpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return bad(format!("efficiency {} outside (0, 1]", self.efficiency));
        }
        if !(0.0..1.0).contains(&self.min_soc_fraction) {
            return bad(format!("min_soc_fraction {} outside [0, 1)", self.min_soc_fraction));
        }
        if !(self.daily_trade_energy > 0.0) {
            return bad("daily_trade_energy must be positive".into());
        }
        let usable = self.capacity_mw * (1.0 - self.min_soc_fraction);
        if self.daily_trade_energy / self.efficiency > usable {
            return bad(format!(
                "a daily cycle of {} MWh does not fit the usable {usable} MWh",
                self.daily_trade_energy
            ));
        }
        Ok(())
    }

    /// Energy bought per cycle.
    pub fn buy_volume(&self) -> f64 {
        self.daily_trade_energy / self.efficiency
    }

    /// Energy sold per cycle.
    pub fn sell_volume(&self) -> f64 {
        self.daily_trade_energy * self.efficiency
    }

    /// Energy traded on a day with a full cycle.
    pub fn cycle_volume(&self) -> f64 {
        self.sell_volume() + self.buy_volume()
    }
}

/// Buy and sell hours (1-based, `h1 < h2`) maximizing
/// `η P(h2) - P(h1) / η`; ties go to the earliest `h1`, then `h2`.
pub fn select_hours(point_fc: &[f64], efficiency: f64) -> (usize, usize) {
    assert_eq!(point_fc.len(), HOURS, "one forecast per hour");
    let mut best = (f64::NEG_INFINITY, 1, 2);
    for h1 in 1..HOURS {
        for h2 in h1 + 1..=HOURS {
            let v = efficiency * point_fc[h2 - 1] - point_fc[h1 - 1] / efficiency;
            if v > best.0 {
                best = (v, h1, h2);
            }
        }
    }
    (best.1, best.2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayOrders {
    pub day: usize,
    pub buy_hour: usize,
    pub sell_hour: usize,
    pub buy_limit: f64,
    pub sell_limit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub day: usize,
    pub date: NaiveDate,
    pub orders: DayOrders,
    pub accept_buy: bool,
    pub accept_sell: bool,
    /// Net cash of the day; `None` when an unwind was needed but the next
    /// day's price is not available.
    pub cash: Option<f64>,
    pub volume: f64,
}

impl LedgerEntry {
    pub fn resolved(&self) -> bool {
        self.cash.is_some()
    }
}

/// Settles one day's orders against realized prices.
pub fn settle_day(
    orders: &DayOrders,
    date: NaiveDate,
    prices_today: &[f64],
    next_day_h1: Option<f64>,
    battery: &BatterySpec,
) -> Result<LedgerEntry> {
    if prices_today.len() != HOURS {
        return Err(Error::DimensionMismatch {
            expected: HOURS,
            got: prices_today.len(),
        });
    }
    let (h1, h2) = (orders.buy_hour, orders.sell_hour);
    if !(1 <= h1 && h1 < h2 && h2 <= HOURS) {
        return Err(Error::InvalidParameter(format!("invalid hour pair ({h1}, {h2})")));
    }
    let (buy, sell) = (battery.buy_volume(), battery.sell_volume());
    let p1 = prices_today[h1 - 1];
    let p2 = prices_today[h2 - 1];
    let accept_buy = p1 <= orders.buy_limit;
    let accept_sell = p2 >= orders.sell_limit;
    let (cash, volume) = match (accept_buy, accept_sell) {
        (true, true) => (Some(sell * p2 - buy * p1), buy + sell),
        (false, false) => (Some(0.0), 0.0),
        (true, false) => match next_day_h1 {
            Some(p) => (Some(sell * p - buy * p1), buy + sell),
            None => (None, 0.0),
        },
        (false, true) => match next_day_h1 {
            Some(p) => (Some(sell * p2 - buy * p), buy + sell),
            None => (None, 0.0),
        },
    };
    Ok(LedgerEntry {
        day: orders.day,
        date,
        orders: *orders,
        accept_buy,
        accept_sell,
        cash,
        volume,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeLedger {
    /// `None` for the unlimited-bids benchmark.
    pub method: Option<Method>,
    pub level: Option<f64>,
    pub entries: Vec<LedgerEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerSummary {
    pub days: usize,
    pub unresolved_days: usize,
    pub total_cash: f64,
    pub total_volume: f64,
    /// `None` when nothing was traded.
    pub profit_per_mwh: Option<f64>,
}

impl TradeLedger {
    pub fn summary(&self) -> LedgerSummary {
        summarize(self.entries.iter())
    }

    pub fn total_volume(&self) -> f64 {
        self.entries.iter().map(|e| e.volume).sum()
    }

    /// Traded volume as a fraction of `benchmark`'s volume.
    pub fn relative_volume(&self, benchmark: &TradeLedger) -> f64 {
        self.total_volume() / benchmark.total_volume()
    }

    /// `date,h1,h2,buy_limit,sell_limit,accept_buy,accept_sell,cash,volume`;
    /// cash is empty on unresolved days.
    pub fn write_csv(&self, path: &Path, config_hash: Option<&str>) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        if let Some(h) = config_hash {
            writeln!(out, "# config_hash={h}").map_err(io)?;
        }
        out.write_all(self.to_csv().as_bytes()).map_err(io)?;
        out.flush().map_err(io)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("date,h1,h2,buy_limit,sell_limit,accept_buy,accept_sell,cash,volume\n");
        for e in &self.entries {
            let cash = e.cash.map(|c| c.to_string()).unwrap_or_default();
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{cash},{}\n",
                e.date.format("%Y-%m-%d"),
                e.orders.buy_hour,
                e.orders.sell_hour,
                e.orders.buy_limit,
                e.orders.sell_limit,
                e.accept_buy as u8,
                e.accept_sell as u8,
                e.volume
            ));
        }
        s
    }
}

fn summarize<'a>(entries: impl Iterator<Item = &'a LedgerEntry>) -> LedgerSummary {
    let mut s = LedgerSummary {
        days: 0,
        unresolved_days: 0,
        total_cash: 0.0,
        total_volume: 0.0,
        profit_per_mwh: None,
    };
    for e in entries {
        s.days += 1;
        match e.cash {
            Some(c) => s.total_cash += c,
            None => s.unresolved_days += 1,
        }
        s.total_volume += e.volume;
    }
    if s.total_volume > 0.0 {
        s.profit_per_mwh = Some(s.total_cash / s.total_volume);
    }
    s
}

fn run_with_limits(
    point_fc: &HourlyValues,
    prices: &HourlyValues,
    days: std::ops::Range<usize>,
    start_date: NaiveDate,
    battery: &BatterySpec,
    limits: impl Fn(usize, usize, usize) -> (f64, f64),
) -> Result<Vec<LedgerEntry>> {
    battery.validate()?;
    if days.start < point_fc.first_day || days.end > point_fc.days().end {
        return Err(Error::MisalignedIndex(format!(
            "trading days {days:?} outside point forecasts {:?}",
            point_fc.days()
        )));
    }
    if days.start < prices.first_day || days.end > prices.days().end {
        return Err(Error::MisalignedIndex(format!(
            "trading days {days:?} outside prices {:?}",
            prices.days()
        )));
    }
    days.map(|day| {
        let (h1, h2) = select_hours(point_fc.day(day), battery.efficiency);
        let (buy_limit, sell_limit) = limits(day, h1, h2);
        let orders = DayOrders {
            day,
            buy_hour: h1,
            sell_hour: h2,
            buy_limit,
            sell_limit,
        };
        let next = prices.contains_day(day + 1).then(|| prices.get(day + 1, 1));
        let date = start_date + chrono::Duration::days(day as i64);
        settle_day(&orders, date, prices.day(day), next, battery)
    })
    .collect()
}

/// Bids at the upper bound of the buy hour and offers at the lower bound of
/// the sell hour of the `level` interval.
pub fn run_strategy(
    point_fc: &HourlyValues,
    intervals: &IntervalSet,
    prices: &HourlyValues,
    level: f64,
    battery: &BatterySpec,
) -> Result<TradeLedger> {
    let li = intervals.level_index(level)?;
    let entries = run_with_limits(point_fc, prices, intervals.days(), intervals.start_date, battery, |d, h1, h2| {
        (intervals.bounds(li, d, h1).1, intervals.bounds(li, d, h2).0)
    })?;
    Ok(TradeLedger {
        method: Some(intervals.method),
        level: Some(level),
        entries,
    })
}

/// Price-taker benchmark: both legs always execute.
pub fn run_benchmark(
    point_fc: &HourlyValues,
    prices: &HourlyValues,
    days: std::ops::Range<usize>,
    start_date: NaiveDate,
    battery: &BatterySpec,
) -> Result<TradeLedger> {
    let entries = run_with_limits(point_fc, prices, days, start_date, battery, |_, _, _| {
        (f64::INFINITY, f64::NEG_INFINITY)
    })?;
    Ok(TradeLedger {
        method: None,
        level: None,
        entries,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeStats {
    pub from: NaiveDate,
    /// Exclusive end; `None` for the last regime.
    pub to: Option<NaiveDate>,
    pub summary: LedgerSummary,
    pub relative_volume: f64,
}

/// Aggregates per regime. `boundaries` split the ledger's date range; each
/// must fall after its first day and on or before its last day.
pub fn regime_report(ledger: &TradeLedger, benchmark: &TradeLedger, boundaries: &[NaiveDate]) -> Result<Vec<RegimeStats>> {
    let (Some(first), Some(last)) = (ledger.entries.first(), ledger.entries.last()) else {
        return Err(Error::InvalidParameter("empty ledger".into()));
    };
    let mut cuts = boundaries.to_vec();
    cuts.sort();
    cuts.dedup();
    for b in &cuts {
        if *b <= first.date || *b > last.date {
            return Err(Error::BoundaryOutOfRange(format!(
                "{b} not inside {}..={}",
                first.date, last.date
            )));
        }
    }
    let mut edges = vec![first.date];
    edges.extend(cuts);
    let mut out = Vec::with_capacity(edges.len());
    for (i, &from) in edges.iter().enumerate() {
        let to = edges.get(i + 1).copied();
        let inside = |d: NaiveDate| d >= from && to.is_none_or(|t| d < t);
        let summary = summarize(ledger.entries.iter().filter(|e| inside(e.date)));
        let bench = summarize(benchmark.entries.iter().filter(|e| inside(e.date)));
        out.push(RegimeStats {
            from,
            to,
            summary,
            relative_volume: summary.total_volume / bench.total_volume,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 3, 1).unwrap()
    }

    fn brute_force(fc: &[f64], eta: f64) -> (usize, usize) {
        let mut best = (f64::NEG_INFINITY, 0, 0);
        for h1 in 1..=24 {
            for h2 in 1..=24 {
                if h1 < h2 {
                    let v = eta * fc[h2 - 1] - fc[h1 - 1] / eta;
                    if v > best.0 {
                        best = (v, h1, h2);
                    }
                }
            }
        }
        (best.1, best.2)
    }

    #[test]
    fn hour_selection() {
        let inc: Vec<f64> = (0..24).map(|h| h as f64).collect();
        assert_eq!(select_hours(&inc, 0.9), (1, 24));
        assert_eq!(select_hours(&[40.0; 24], 0.9), (1, 2));
        let v: Vec<f64> = (1..=24)
            .map(|h: i32| if h <= 4 { 50.0 - 5.0 * h as f64 } else { 30.0 + 3.0 * (h.min(19) - 4) as f64 - (h - 19).max(0) as f64 })
            .collect();
        assert_eq!(select_hours(&v, 0.9), brute_force(&v, 0.9));
        assert_eq!(select_hours(&v, 0.9), (4, 19));
    }

    #[test]
    fn settlement_rules() {
        let b = BatterySpec::default();
        let mut prices = [25.0; 24];
        prices[2] = 20.0;
        prices[17] = 60.0;
        let open = DayOrders {
            day: 0,
            buy_hour: 3,
            sell_hour: 18,
            buy_limit: f64::INFINITY,
            sell_limit: f64::NEG_INFINITY,
        };
        let e = settle_day(&open, date(), &prices, None, &b).unwrap();
        assert!((e.cash.unwrap() - (0.9 * 60.0 - 20.0 / 0.9)).abs() < 1e-12);
        assert!((e.volume - (0.9 + 1.0 / 0.9)).abs() < 1e-15);

        let shut = DayOrders {
            buy_limit: 1.0,
            sell_limit: 100.0,
            ..open
        };
        let e = settle_day(&shut, date(), &prices, Some(30.0), &b).unwrap();
        assert_eq!((e.cash, e.volume), (Some(0.0), 0.0));

        let buy_only = DayOrders {
            buy_limit: 20.0,
            sell_limit: 61.0,
            ..open
        };
        let e = settle_day(&buy_only, date(), &prices, Some(30.0), &b).unwrap();
        assert!(e.accept_buy && !e.accept_sell);
        assert!((e.cash.unwrap() - (0.9 * 30.0 - 20.0 / 0.9)).abs() < 1e-12);
        let e = settle_day(&buy_only, date(), &prices, None, &b).unwrap();
        assert!(!e.resolved());

        let sell_only = DayOrders {
            buy_limit: 19.0,
            sell_limit: 60.0,
            ..open
        };
        let e = settle_day(&sell_only, date(), &prices, Some(30.0), &b).unwrap();
        assert!((e.cash.unwrap() - (0.9 * 60.0 - 30.0 / 0.9)).abs() < 1e-12);
    }

    #[test]
    fn battery_validation() {
        assert!(BatterySpec::default().validate().is_ok());
        let tiny = BatterySpec {
            capacity_mw: 1.0,
            ..Default::default()
        };
        assert!(tiny.validate().is_err());
        let bad = BatterySpec {
            efficiency: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn benchmark_on_constant_prices() {
        let p = HourlyValues::new(0, vec![50.0; 24 * 5]).unwrap();
        let l = run_benchmark(&p, &p, 0..5, date(), &BatterySpec::default()).unwrap();
        for e in &l.entries {
            assert!((e.cash.unwrap() - (0.9 - 1.0 / 0.9) * 50.0).abs() < 1e-12);
            assert_eq!(e.volume, 0.9 + 1.0 / 0.9);
        }
        assert_eq!(l.relative_volume(&l), 1.0);
        let s = l.summary();
        assert!((s.profit_per_mwh.unwrap() - s.total_cash / s.total_volume).abs() < 1e-12);
    }

    #[test]
    fn regimes_partition_the_ledger() {
        let p = HourlyValues::new(0, (0..24 * 10).map(|i| (i % 24) as f64 + (i / 24) as f64).collect()).unwrap();
        let b = BatterySpec::default();
        let l = run_benchmark(&p, &p, 0..9, date(), &b).unwrap();
        let whole = regime_report(&l, &l, &[]).unwrap();
        assert_eq!(whole.len(), 1);
        assert_eq!(whole[0].summary, l.summary());
        let cut = date() + chrono::Duration::days(4);
        let parts = regime_report(&l, &l, &[cut]).unwrap();
        let vol: f64 = parts.iter().map(|r| r.summary.total_volume).sum();
        assert!((vol - l.total_volume()).abs() < 1e-12);
        assert_eq!(parts[0].summary.days + parts[1].summary.days, 9);
        assert!(matches!(regime_report(&l, &l, &[date()]), Err(Error::BoundaryOutOfRange(_))));
        assert!(regime_report(&l, &l, &[date() + chrono::Duration::days(30)]).is_err());
    }

    proptest! {
        #[test]
        fn selection_matches_brute_force(fc in prop::collection::vec(-50.0f64..300.0, 24), eta in 0.5f64..1.0) {
            prop_assert_eq!(select_hours(&fc, eta), brute_force(&fc, eta));
        }

        #[test]
        fn cash_scales_with_prices(
            prices in prop::collection::vec(1.0f64..200.0, 48),
            c in 0.1f64..10.0,
            lim in 0.0f64..200.0,
        ) {
            let b = BatterySpec::default();
            let orders = DayOrders { day: 0, buy_hour: 2, sell_hour: 20, buy_limit: lim, sell_limit: lim };
            let a = settle_day(&orders, date(), &prices[..24], Some(prices[24]), &b).unwrap();
            let scaled: Vec<f64> = prices.iter().map(|p| p * c).collect();
            let orders_c = DayOrders { buy_limit: lim * c, sell_limit: lim * c, ..orders };
            let s = settle_day(&orders_c, date(), &scaled[..24], Some(scaled[24]), &b).unwrap();
            prop_assert_eq!((a.accept_buy, a.accept_sell), (s.accept_buy, s.accept_sell));
            prop_assert!((s.cash.unwrap() - c * a.cash.unwrap()).abs() <= 1e-9 * (1.0 + s.cash.unwrap().abs()));
        }
    }
}
