//! Summary tables over the evaluation and trading results.
//!
//! * `ace_table.csv`: average coverage error, one row per level, one column
//!   per method.
//! * `pass_counts.csv` / `.txt`: hours passing the conditional coverage test
//!   per method at the pass-count levels.
//! * `profit_by_level.csv`: profit per MWh traded, level rows by method.
//! * `volume_table.csv`: traded volume relative to the benchmark, in percent.
//! * `regimes.csv`: per-regime trading results.

use std::fmt::Write as _;
use std::path::Path;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::evaluation::{pass_count_table, CoverageReport, LevelReport};
use crate::pipeline::TradingSummary;
use crate::prob::Method;
use crate::trading::{LedgerSummary, RegimeStats};

fn pct(level: f64) -> u32 {
    (level * 100.0).round() as u32
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write(dir: &Path, name: &str, hash: &str, body: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, format!("# config_hash={hash}\n{body}")).map_err(|e| Error::io(&path, e))
}

fn header(first: &str, methods: &[Method]) -> String {
    let mut s = first.to_string();
    for m in methods {
        let _ = write!(s, ",{m}");
    }
    s.push('\n');
    s
}

fn strategy<'a>(summary: &'a TradingSummary, m: Method, level: f64) -> Option<&'a crate::pipeline::StrategyResult> {
    summary
        .strategies
        .iter()
        .find(|s| s.method == m && (s.level - level).abs() < 1e-9)
}

fn regime_row(s: &mut String, label: &str, level: &str, r: &RegimeStats) {
    let LedgerSummary {
        days,
        unresolved_days,
        total_cash,
        total_volume,
        profit_per_mwh,
    } = r.summary;
    let _ = writeln!(
        s,
        "{label},{level},{},{},{days},{unresolved_days},{total_cash},{total_volume},{},{}",
        r.from,
        r.to.map(|d| d.to_string()).unwrap_or_default(),
        opt(profit_per_mwh),
        r.relative_volume
    );
}

/// Writes the report tables into `dir`.
pub fn emit_reports(
    dir: &Path,
    config: &PipelineConfig,
    hash: &str,
    reports: &[CoverageReport],
    trading: &TradingSummary,
) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::ConfigInvalid("method list is empty".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let methods: Vec<Method> = reports.iter().map(|r| r.method).collect();
    let levels = config.levels();

    let mut ace = header("level", &methods);
    for &l in &levels {
        let _ = write!(ace, "{}", pct(l));
        for r in reports {
            let lr: &LevelReport = r.level(l).ok_or(Error::LevelNotOnGrid(l))?;
            let _ = write!(ace, ",{}", lr.coverage.ace);
        }
        ace.push('\n');
    }
    write(dir, "ace_table.csv", hash, &ace)?;

    let table = pass_count_table(reports, &config.pass_count_levels())?;
    let mut pc = String::from("method");
    for l in &table.levels {
        let _ = write!(pc, ",{}", pct(*l));
    }
    pc.push('\n');
    for (m, counts) in &table.rows {
        let _ = write!(pc, "{m}");
        for c in counts {
            let _ = write!(pc, ",{c}");
        }
        pc.push('\n');
    }
    write(dir, "pass_counts.csv", hash, &pc)?;
    write(dir, "pass_counts.txt", hash, &table.render())?;

    let mut profit = header("level", &methods);
    let mut volume = header("level", &methods);
    for &l in &levels {
        let _ = write!(profit, "{}", pct(l));
        let _ = write!(volume, "{}", pct(l));
        for &m in &methods {
            let s = strategy(trading, m, l);
            let _ = write!(profit, ",{}", opt(s.and_then(|s| s.summary.profit_per_mwh)));
            let _ = write!(volume, ",{}", opt(s.map(|s| 100.0 * s.relative_volume)));
        }
        profit.push('\n');
        volume.push('\n');
    }
    write(dir, "profit_by_level.csv", hash, &profit)?;
    write(dir, "volume_table.csv", hash, &volume)?;

    let mut reg = String::from(
        "method,level,from,to,days,unresolved_days,total_cash,total_volume,profit_per_mwh,relative_volume\n",
    );
    for r in &trading.benchmark_regimes {
        regime_row(&mut reg, "benchmark", "", r);
    }
    for s in &trading.strategies {
        for r in &s.regimes {
            regime_row(&mut reg, s.method.as_str(), &pct(s.level).to_string(), r);
        }
    }
    write(dir, "regimes.csv", hash, &reg)
}
