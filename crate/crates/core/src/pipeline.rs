//! Stage orchestration over an artifact directory.
//!
//! Layout of the output directory:
//!
//! ```text
//! config.toml
//! panel.csv                        normalized market panel
//! forecast_panel.csv (+ .meta.json) point forecasts per window length
//! point_forecast.csv               averaged point forecast
//! surfaces/<method>.csv            99 percentiles per (date, hour)
//! intervals/<method>.csv           interval bounds per level
//! coverage/<method>.csv            coverage and backtests
//! trading/<method>_<level>.csv     ledgers; trading/benchmark.csv
//! trading_summary.json
//! reports/                         see `report`
//! ```
//!
//! Every file starts with (or, for JSON, contains) the hash of the
//! configuration that produced it.

use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::config::{DataSource, DayLayout, PipelineConfig};
use crate::error::{Error, Result};
use crate::evaluation::{coverage_report, CoverageReport};
use crate::point::{average_point_forecast, rolling_forecast, ForecastPanel};
use crate::prob::{assemble_intervals, forecast_surface, IntervalSet, Method};
use crate::report::emit_reports;
use crate::synthetic::generate_synthetic;
use crate::timeseries::{load_market_csv, normalize_calendar, HourlyPanel, HourlyValues, SeriesId, HOURS};
use crate::trading::{regime_report, run_benchmark, run_strategy, LedgerSummary, RegimeStats, TradeLedger};

pub const CONFIG_FILE: &str = "config.toml";
pub const PANEL_FILE: &str = "panel.csv";
pub const FORECAST_PANEL_FILE: &str = "forecast_panel.csv";
pub const POINT_FORECAST_FILE: &str = "point_forecast.csv";
pub const TRADING_SUMMARY_FILE: &str = "trading_summary.json";

/// Ledgers of one method at one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyResult {
    pub method: Method,
    pub level: f64,
    pub summary: LedgerSummary,
    pub relative_volume: f64,
    pub regimes: Vec<RegimeStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradingSummary {
    pub config_hash: String,
    pub benchmark: LedgerSummary,
    pub benchmark_regimes: Vec<RegimeStats>,
    pub strategies: Vec<StrategyResult>,
}

/// Outputs of the trading stage.
#[derive(Debug, Clone)]
pub struct TradeOutput {
    pub benchmark: TradeLedger,
    pub ledgers: Vec<TradeLedger>,
    pub summary: TradingSummary,
}

pub struct Pipeline {
    config: PipelineConfig,
    out_dir: PathBuf,
    hash: String,
}

fn missing(path: &Path) -> Error {
    Error::MissingStage(path.display().to_string())
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

impl Pipeline {
    /// Validates `config` and prepares `out_dir`.
    pub fn new(config: PipelineConfig, out_dir: impl Into<PathBuf>) -> Result<Self> {
        config.validate()?;
        let out_dir = out_dir.into();
        create_dir(&out_dir)?;
        let hash = config.hash();
        let cfg_path = out_dir.join(CONFIG_FILE);
        let text = format!("# config_hash={hash}\n{}", config.to_toml());
        std::fs::write(&cfg_path, text).map_err(|e| Error::io(&cfg_path, e))?;
        Ok(Self { config, out_dir, hash })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn path(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.out_dir.join(rel)
    }

    fn method_file(&self, dir: &str, method: Method) -> PathBuf {
        self.out_dir.join(dir).join(format!("{method}.csv"))
    }

    pub fn layout(&self, panel: &HourlyPanel) -> Result<DayLayout> {
        self.config.layout(panel.n_days)
    }

    /// Runs every stage in order.
    pub fn run_all(&self) -> Result<()> {
        let panel = self.data()?;
        let fp = self.point(&panel)?;
        let intervals = self.prob(&panel, &fp)?;
        let reports = self.eval(&panel, &intervals)?;
        let trades = self.trade(&panel, &fp, &intervals)?;
        self.report(&reports, &trades)
    }

    /// Builds the market panel from the configured source and writes it.
    pub fn data(&self) -> Result<HourlyPanel> {
        let panel = match self.config.data.source {
            DataSource::Synthetic => generate_synthetic(&self.config.data.synthetic, self.config.seed),
            DataSource::Csv => {
                let path = self.config.data.csv_path.as_deref().expect("validated");
                ingest_csv(path)
            }
        }
        .and_then(|p| {
            self.layout(&p)?;
            p.write_csv(&self.path(PANEL_FILE), Some(&self.hash))?;
            Ok(p)
        });
        panel.map_err(|e| e.in_stage("data"))
    }

    pub fn load_panel(&self) -> Result<HourlyPanel> {
        let path = self.path(PANEL_FILE);
        if !path.exists() {
            return Err(missing(&path).in_stage("data"));
        }
        ingest_csv(&path).map_err(|e| e.in_stage("data"))
    }

    /// Rolling point forecasts for every window and the averaged forecast.
    pub fn point(&self, panel: &HourlyPanel) -> Result<ForecastPanel> {
        let run = || -> Result<ForecastPanel> {
            let layout = self.layout(panel)?;
            let fp = rolling_forecast(panel, &self.config.model_spec(), &self.config.tau_range(), layout.point_days())?;
            fp.write(&self.path(FORECAST_PANEL_FILE), Some(&self.hash))?;
            let avg = average_point_forecast(&fp, &self.config.prob.averaging_windows_days)?;
            write_hourly(&self.path(POINT_FORECAST_FILE), "point_forecast", &avg, panel.start_date, &self.hash)?;
            Ok(fp)
        };
        run().map_err(|e| e.in_stage("point"))
    }

    pub fn load_forecast_panel(&self) -> Result<ForecastPanel> {
        let path = self.path(FORECAST_PANEL_FILE);
        if !path.exists() {
            return Err(missing(&path).in_stage("point"));
        }
        ForecastPanel::read(&path).map_err(|e| e.in_stage("point"))
    }

    /// Percentile surfaces and intervals for every configured method.
    pub fn prob(&self, panel: &HourlyPanel, fp: &ForecastPanel) -> Result<Vec<IntervalSet>> {
        let run = || -> Result<Vec<IntervalSet>> {
            let layout = self.layout(panel)?;
            let prices = target_prices(panel, &self.config)?;
            let settings = self.config.prob_settings();
            let levels = self.config.levels();
            create_dir(&self.path("surfaces"))?;
            create_dir(&self.path("intervals"))?;
            let mut out = Vec::with_capacity(self.config.prob.methods.len());
            for &m in &self.config.prob.methods {
                let surface = forecast_surface(m, fp, &prices, layout.eval_days(), &settings)?;
                surface.write_csv(&self.method_file("surfaces", m), Some(&self.hash))?;
                let iv = assemble_intervals(&surface, &levels)?;
                iv.write_csv(&self.method_file("intervals", m), Some(&self.hash))?;
                out.push(iv);
            }
            Ok(out)
        };
        run().map_err(|e| e.in_stage("prob"))
    }

    pub fn load_intervals(&self, panel: &HourlyPanel) -> Result<Vec<IntervalSet>> {
        self.config
            .prob
            .methods
            .iter()
            .map(|&m| {
                let path = self.method_file("intervals", m);
                if !path.exists() {
                    return Err(missing(&path));
                }
                IntervalSet::read_csv(&path, panel.start_date)
            })
            .collect::<Result<_>>()
            .map_err(|e| e.in_stage("prob"))
    }

    /// Coverage and backtests per method.
    pub fn eval(&self, panel: &HourlyPanel, intervals: &[IntervalSet]) -> Result<Vec<CoverageReport>> {
        let run = || -> Result<Vec<CoverageReport>> {
            let prices = target_prices(panel, &self.config)?;
            create_dir(&self.path("coverage"))?;
            intervals
                .iter()
                .map(|iv| {
                    let report = coverage_report(&prices, iv, self.config.eval.significance)?;
                    report.write_csv(&self.method_file("coverage", iv.method), Some(&self.hash))?;
                    Ok(report)
                })
                .collect()
        };
        run().map_err(|e| e.in_stage("eval"))
    }

    /// Coverage reports recomputed in memory, after checking the stage ran.
    pub fn load_eval(&self, panel: &HourlyPanel, intervals: &[IntervalSet]) -> Result<Vec<CoverageReport>> {
        let prices = target_prices(panel, &self.config).map_err(|e| e.in_stage("eval"))?;
        intervals
            .iter()
            .map(|iv| {
                let path = self.method_file("coverage", iv.method);
                if !path.exists() {
                    return Err(missing(&path));
                }
                coverage_report(&prices, iv, self.config.eval.significance)
            })
            .collect::<Result<_>>()
            .map_err(|e| e.in_stage("eval"))
    }

    /// Ledgers for every method and level plus the benchmark.
    pub fn trade(&self, panel: &HourlyPanel, fp: &ForecastPanel, intervals: &[IntervalSet]) -> Result<TradeOutput> {
        let run = || -> Result<TradeOutput> {
            let out = self.simulate(panel, fp, intervals)?;
            let dir = self.path("trading");
            create_dir(&dir)?;
            out.benchmark.write_csv(&dir.join("benchmark.csv"), Some(&self.hash))?;
            for l in &out.ledgers {
                let (m, level) = (l.method.expect("strategy ledger"), l.level.expect("strategy ledger"));
                let name = format!("{m}_{}.csv", (level * 100.0).round() as u32);
                l.write_csv(&dir.join(name), Some(&self.hash))?;
            }
            let path = self.path(TRADING_SUMMARY_FILE);
            let json = serde_json::to_string_pretty(&out.summary)?;
            std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
            Ok(out)
        };
        run().map_err(|e| e.in_stage("trade"))
    }

    /// Trading results recomputed in memory, after checking the stage ran.
    pub fn load_trade(&self, panel: &HourlyPanel, fp: &ForecastPanel, intervals: &[IntervalSet]) -> Result<TradeOutput> {
        let path = self.path(TRADING_SUMMARY_FILE);
        if !path.exists() {
            return Err(missing(&path).in_stage("trade"));
        }
        self.simulate(panel, fp, intervals).map_err(|e| e.in_stage("trade"))
    }

    fn simulate(&self, panel: &HourlyPanel, fp: &ForecastPanel, intervals: &[IntervalSet]) -> Result<TradeOutput> {
        let layout = self.layout(panel)?;
        let prices = target_prices(panel, &self.config)?;
        let point = average_point_forecast(fp, &self.config.prob.averaging_windows_days)?;
        let battery = &self.config.trade.battery;
        let bounds = &self.config.trade.regime_boundaries;
        let benchmark = run_benchmark(&point, &prices, layout.eval_days(), panel.start_date, battery)?;
        let benchmark_regimes = regime_report(&benchmark, &benchmark, bounds)?;
        let mut ledgers = Vec::new();
        let mut strategies = Vec::new();
        for iv in intervals {
            for &level in &iv.levels {
                let ledger = run_strategy(&point, iv, &prices, level, battery)?;
                strategies.push(StrategyResult {
                    method: iv.method,
                    level,
                    summary: ledger.summary(),
                    relative_volume: ledger.relative_volume(&benchmark),
                    regimes: regime_report(&ledger, &benchmark, bounds)?,
                });
                ledgers.push(ledger);
            }
        }
        let summary = TradingSummary {
            config_hash: self.hash.clone(),
            benchmark: benchmark.summary(),
            benchmark_regimes,
            strategies,
        };
        Ok(TradeOutput {
            benchmark,
            ledgers,
            summary,
        })
    }

    pub fn report(&self, reports: &[CoverageReport], trades: &TradeOutput) -> Result<()> {
        emit_reports(&self.path("reports"), &self.config, &self.hash, reports, &trades.summary)
            .map_err(|e| e.in_stage("report"))
    }
}

/// Reads a market file whose header names the series it holds.
pub fn ingest_csv(path: &Path) -> Result<HourlyPanel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let header = text
        .lines()
        .find(|l| !l.starts_with('#'))
        .ok_or_else(|| Error::MalformedHeader(format!("{} is empty", path.display())))?;
    let schema: Vec<SeriesId> = header
        .split(',')
        .skip(1)
        .map(|c| c.trim().parse())
        .collect::<Result<_>>()?;
    normalize_calendar(&load_market_csv(path, &schema)?)
}

fn target_prices(panel: &HourlyPanel, config: &PipelineConfig) -> Result<HourlyValues> {
    HourlyValues::new(0, panel.get(config.market.target())?.to_vec())
}

fn write_hourly(path: &Path, column: &str, values: &HourlyValues, start: NaiveDate, hash: &str) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(out, "# config_hash={hash}").map_err(io)?;
    writeln!(out, "date,hour,{column}").map_err(io)?;
    for day in values.days() {
        let date = start + chrono::Duration::days(day as i64);
        for hour in 1..=HOURS {
            writeln!(out, "{},{hour},{}", date.format("%Y-%m-%d"), values.get(day, hour)).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}
