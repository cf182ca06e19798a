//! Pipeline configuration, presets and the configuration hash.

use std::path::PathBuf;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::factor::{DEFAULT_EPS_FLOOR, DEFAULT_K_MAX};
use crate::npit::Transform;
use crate::point::{Market, ModelSpec, MAX_LAG, PAPER_AVERAGING_WINDOWS};
use crate::prob::{level_indices, Method, ProbSettings};
use crate::synthetic::SyntheticSpec;
use crate::timeseries::HOURS;
use crate::trading::BatterySpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// 19 windows, 300 out-of-sample days.
    Desk,
    /// 673 windows over 2015-2023.
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    /// Market file for `source = "csv"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv_path: Option<PathBuf>,
    pub synthetic: SyntheticSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointConfig {
    pub tau_min_days: usize,
    pub tau_max_days: usize,
    pub tau_step_days: usize,
    pub include_solar: bool,
    pub transform: Transform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbConfig {
    pub calibration_days: usize,
    pub averaging_windows_days: Vec<usize>,
    pub k_max: usize,
    pub eps_floor: f64,
    pub methods: Vec<Method>,
    /// Nominal coverages in percent.
    pub levels_pct: Vec<u32>,
    /// Forecast days after the first calibration window; all remaining days
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_of_sample_days: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub significance: f64,
    pub pass_count_levels_pct: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TradeConfig {
    pub battery: BatterySpec,
    pub regime_boundaries: Vec<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub preset: Preset,
    pub market: Market,
    pub seed: u64,
    pub data: DataConfig,
    pub point: PointConfig,
    pub prob: ProbConfig,
    pub eval: EvalConfig,
    pub trade: TradeConfig,
}

/// Day indices of the pipeline stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayLayout {
    /// First day with point forecasts.
    pub point_start: usize,
    /// First out-of-sample day for probabilistic forecasts.
    pub prob_start: usize,
    /// End (exclusive) of the out-of-sample range.
    pub eval_end: usize,
}

impl DayLayout {
    pub fn point_days(&self) -> std::ops::Range<usize> {
        self.point_start..self.eval_end
    }

    pub fn eval_days(&self) -> std::ops::Range<usize> {
        self.prob_start..self.eval_end
    }
}

fn percent_levels(range: impl Iterator<Item = u32>) -> Vec<u32> {
    range.collect()
}

impl PipelineConfig {
    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Desk => Self::desk(),
            Preset::Paper => Self::paper(),
        }
    }

    fn desk() -> Self {
        let mut cfg = Self {
            preset: Preset::Desk,
            market: Market::Da,
            seed: 20240607,
            data: DataConfig {
                source: DataSource::Synthetic,
                csv_path: None,
                synthetic: SyntheticSpec {
                    start_date: NaiveDate::from_ymd_opt(2019, 10, 7).expect("valid date"),
                    ..Default::default()
                },
            },
            point: PointConfig {
                tau_min_days: 56,
                tau_max_days: 200,
                tau_step_days: 8,
                include_solar: true,
                transform: Transform::Npit,
            },
            prob: ProbConfig {
                calibration_days: 182,
                averaging_windows_days: vec![56, 64, 72, 184, 192, 200],
                k_max: DEFAULT_K_MAX,
                eps_floor: DEFAULT_EPS_FLOOR,
                methods: Method::ALL.to_vec(),
                levels_pct: percent_levels((50..=98).step_by(2)),
                out_of_sample_days: Some(300),
            },
            eval: EvalConfig {
                significance: 0.05,
                pass_count_levels_pct: vec![50, 80, 98],
            },
            trade: TradeConfig {
                battery: BatterySpec::default(),
                regime_boundaries: vec![NaiveDate::from_ymd_opt(2021, 1, 1).expect("valid date")],
            },
        };
        cfg.data.synthetic.n_days = cfg.required_synthetic_days();
        cfg
    }

    fn paper() -> Self {
        let start = NaiveDate::from_ymd_opt(2015, 1, 1).expect("valid date");
        let end = NaiveDate::from_ymd_opt(2023, 12, 31).expect("valid date");
        let n_days = (end - start).num_days() as usize + 1;
        let mut cfg = Self::desk();
        cfg.preset = Preset::Paper;
        cfg.data.synthetic.start_date = start;
        cfg.point.tau_min_days = 56;
        cfg.point.tau_max_days = 728;
        cfg.point.tau_step_days = 1;
        cfg.prob.averaging_windows_days = PAPER_AVERAGING_WINDOWS.to_vec();
        cfg.prob.out_of_sample_days = None;
        cfg.data.synthetic.n_days = n_days;
        let layout = cfg.layout(n_days).expect("paper preset layout");
        // keep the last day for the next-day unwind
        cfg.prob.out_of_sample_days = Some(layout.eval_end - layout.prob_start - 1);
        cfg.trade.regime_boundaries = vec![
            NaiveDate::from_ymd_opt(2021, 1, 1).expect("valid date"),
            NaiveDate::from_ymd_opt(2023, 1, 1).expect("valid date"),
        ];
        cfg
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the serialized configuration, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn tau_range(&self) -> Vec<usize> {
        let p = &self.point;
        (p.tau_min_days..=p.tau_max_days).step_by(p.tau_step_days.max(1)).collect()
    }

    /// `(T, N)` of the panel window behind each factor-method forecast.
    pub fn panel_shape(&self) -> (usize, usize) {
        (HOURS * (self.prob.calibration_days + 1), self.tau_range().len())
    }

    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec::new(self.market, self.point.include_solar).with_transform(self.point.transform)
    }

    pub fn prob_settings(&self) -> ProbSettings {
        ProbSettings {
            calibration_days: self.prob.calibration_days,
            averaging_windows: self.prob.averaging_windows_days.clone(),
            k_max: self.prob.k_max,
            eps_floor: self.prob.eps_floor,
            transform: self.point.transform,
        }
    }

    pub fn levels(&self) -> Vec<f64> {
        self.prob.levels_pct.iter().map(|&p| p as f64 / 100.0).collect()
    }

    pub fn pass_count_levels(&self) -> Vec<f64> {
        self.eval.pass_count_levels_pct.iter().map(|&p| p as f64 / 100.0).collect()
    }

    /// Stage boundaries for a panel of `n_days` days.
    pub fn layout(&self, n_days: usize) -> Result<DayLayout> {
        let taus = self.tau_range();
        let tau_max = *taus
            .last()
            .ok_or_else(|| Error::ConfigInvalid("empty window range".into()))?;
        let point_start = tau_max + MAX_LAG;
        let prob_start = point_start + self.prob.calibration_days;
        let eval_end = match self.prob.out_of_sample_days {
            Some(n) => prob_start + n,
            None => n_days,
        };
        if eval_end > n_days || eval_end <= prob_start {
            return Err(Error::ConfigInvalid(format!(
                "{n_days} days of data cannot hold {point_start} days of history, {} calibration days and {} forecast days",
                self.prob.calibration_days,
                eval_end.saturating_sub(prob_start)
            )));
        }
        Ok(DayLayout {
            point_start,
            prob_start,
            eval_end,
        })
    }

    /// Synthetic days needed for the configured ranges plus one day for the
    /// last unwind.
    pub fn required_synthetic_days(&self) -> usize {
        let tau_max = self.tau_range().last().copied().unwrap_or(0);
        tau_max + MAX_LAG + self.prob.calibration_days + self.prob.out_of_sample_days.unwrap_or(0) + 1
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        let p = &self.point;
        if p.tau_step_days == 0 || p.tau_min_days < 2 || p.tau_min_days > p.tau_max_days {
            return bad(format!(
                "window range {}..={} step {} is invalid",
                p.tau_min_days, p.tau_max_days, p.tau_step_days
            ));
        }
        let taus = self.tau_range();
        if self.prob.averaging_windows_days.is_empty() {
            return bad("no averaging windows".into());
        }
        for w in &self.prob.averaging_windows_days {
            if !taus.contains(w) {
                return bad(format!("averaging window {w} is not in the window range"));
            }
        }
        if self.prob.methods.is_empty() {
            return bad("method list is empty".into());
        }
        if self.prob.calibration_days < 2 {
            return bad("calibration_days must be at least 2".into());
        }
        if self.prob.k_max == 0 {
            return bad("k_max must be at least 1".into());
        }
        if !(self.prob.eps_floor > 0.0) {
            return bad("eps_floor must be positive".into());
        }
        if self.prob.levels_pct.is_empty() {
            return bad("no coverage levels".into());
        }
        for &l in self.prob.levels_pct.iter().chain(&self.eval.pass_count_levels_pct) {
            if level_indices(l as f64 / 100.0).is_err() {
                return bad(format!("coverage level {l}% does not map onto the percentile grid"));
            }
        }
        for l in &self.eval.pass_count_levels_pct {
            if !self.prob.levels_pct.contains(l) {
                return bad(format!("pass-count level {l}% is not among the forecast levels"));
            }
        }
        if !(self.eval.significance > 0.0 && self.eval.significance < 1.0) {
            return bad(format!("significance {} outside (0, 1)", self.eval.significance));
        }
        self.trade
            .battery
            .validate()
            .map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        match self.data.source {
            DataSource::Csv if self.data.csv_path.is_none() => {
                return bad("csv data source needs csv_path".into());
            }
            DataSource::Synthetic => {
                let s = &self.data.synthetic;
                if self.point.include_solar && !s.include_solar {
                    return bad("models use solar but the synthetic market has none".into());
                }
                if self.prob.out_of_sample_days.is_none() {
                    return bad("synthetic runs need out_of_sample_days".into());
                }
                let need = self.required_synthetic_days();
                if s.n_days < need {
                    return bad(format!("synthetic n_days {} is below the {need} days required", s.n_days));
                }
                let layout = self.layout(s.n_days)?;
                let first = s.start_date + chrono::Duration::days(layout.prob_start as i64);
                let last = s.start_date + chrono::Duration::days(layout.eval_end as i64 - 1);
                for b in &self.trade.regime_boundaries {
                    if *b <= first || *b > last {
                        return bad(format!("regime boundary {b} outside the forecast range {first}..={last}"));
                    }
                }
            }
            DataSource::Csv => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_preset_is_valid() {
        let cfg = PipelineConfig::preset(Preset::Desk);
        cfg.validate().unwrap();
        assert_eq!(cfg.tau_range().len(), 19);
        let layout = cfg.layout(cfg.data.synthetic.n_days).unwrap();
        assert_eq!(layout.eval_days().len(), 300);
        assert_eq!(layout.point_start, 207);
        assert_eq!(layout.prob_start, 389);
    }

    #[test]
    fn paper_preset_shape() {
        let cfg = PipelineConfig::preset(Preset::Paper);
        cfg.validate().unwrap();
        assert_eq!(cfg.panel_shape(), (4392, 673));
        let layout = cfg.layout(cfg.data.synthetic.n_days).unwrap();
        let first = cfg.data.synthetic.start_date + chrono::Duration::days(layout.prob_start as i64);
        assert_eq!(first.format("%Y-%m").to_string(), "2017-07");
    }

    #[test]
    fn toml_round_trip_and_hash() {
        let cfg = PipelineConfig::preset(Preset::Desk);
        let text = cfg.to_toml();
        let back = PipelineConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        let mut other = cfg.clone();
        other.seed += 1;
        assert_ne!(other.hash(), cfg.hash());
        assert!(PipelineConfig::from_toml("seed = 1").is_err());
    }

    #[test]
    fn invalid_configs() {
        let base = PipelineConfig::preset(Preset::Desk);
        let mut c = base.clone();
        c.prob.methods.clear();
        assert!(matches!(c.validate(), Err(Error::ConfigInvalid(_))));
        let mut c = base.clone();
        c.prob.levels_pct.push(51);
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.prob.averaging_windows_days = vec![57];
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.data.synthetic.n_days = 500;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.trade.regime_boundaries = vec![NaiveDate::from_ymd_opt(2030, 1, 1).unwrap()];
        assert!(c.validate().is_err());
        let mut c = base;
        c.data.source = DataSource::Csv;
        assert!(c.validate().is_err());
    }
}
