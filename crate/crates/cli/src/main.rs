use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fqra_core::config::{DataSource, PipelineConfig, Preset};
use fqra_core::pipeline::{Pipeline, CONFIG_FILE};
use fqra_core::{Market, Method};

#[derive(Parser)]
#[command(name = "fqra", version, about = "Probabilistic price forecasting and battery trading pipeline")]
struct Cli {
    #[command(flatten)]
    opts: Opts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Opts {
    /// TOML configuration file. Without it the configuration stored in the
    /// output directory is reused, or the preset is used.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, conflicts_with = "config")]
    preset: Option<PresetArg>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Comma-separated, e.g. `HS,CP,sFQRA`.
    #[arg(long, global = true, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Comma-separated coverage levels in percent, e.g. `50,90`.
    #[arg(long, global = true, value_delimiter = ',')]
    levels: Option<Vec<u32>>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long, global = true, value_enum)]
    market: Option<MarketArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Desk,
    Paper,
}

#[derive(Clone, Copy, ValueEnum)]
enum MarketArg {
    Da,
    Ida,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize a market CSV into the output directory.
    Ingest {
        #[arg(long)]
        input: PathBuf,
    },
    /// Generate the synthetic market panel.
    Synth,
    /// Rolling point forecasts for every window length.
    Point,
    /// Percentile surfaces and intervals.
    Prob,
    /// Coverage and backtests.
    Eval,
    /// Battery trading simulation.
    Trade,
    /// Summary tables.
    Report,
    /// All stages in order.
    Run,
    /// Print the effective configuration.
    Config,
}

fn load_config(opts: &Opts) -> Result<PipelineConfig> {
    let stored = opts.out_dir.join(CONFIG_FILE);
    let mut cfg = match (&opts.config, opts.preset) {
        (Some(path), _) => read_config(path)?,
        (None, Some(p)) => PipelineConfig::preset(match p {
            PresetArg::Desk => Preset::Desk,
            PresetArg::Paper => Preset::Paper,
        }),
        (None, None) if stored.exists() => read_config(&stored)?,
        (None, None) => PipelineConfig::preset(Preset::Desk),
    };
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(ms) = &opts.methods {
        cfg.prob.methods = ms
            .iter()
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.parse::<Method>())
            .collect::<Result<_, _>>()?;
    }
    if let Some(ls) = &opts.levels {
        cfg.prob.levels_pct = ls.clone();
        cfg.eval.pass_count_levels_pct.retain(|l| ls.contains(l));
    }
    if let Some(m) = opts.market {
        cfg.market = match m {
            MarketArg::Da => Market::Da,
            MarketArg::Ida => Market::Ida,
        };
    }
    Ok(cfg)
}

fn read_config(path: &Path) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(PipelineConfig::from_toml(&text)?)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let mut cfg = load_config(&cli.opts)?;
    match &cli.command {
        Command::Ingest { input } => {
            cfg.data.source = DataSource::Csv;
            cfg.data.csv_path = Some(input.clone());
        }
        Command::Synth => cfg.data.source = DataSource::Synthetic,
        Command::Config => {
            cfg.validate()?;
            print!("{}", cfg.to_toml());
            return Ok(());
        }
        _ => {}
    }
    if cfg.prob.methods.is_empty() {
        bail!("method list is empty");
    }
    let p = Pipeline::new(cfg, &cli.opts.out_dir)?;
    let out = p.out_dir().display().to_string();
    match cli.command {
        Command::Ingest { .. } | Command::Synth => {
            let panel = p.data()?;
            println!("panel: {} days from {} -> {out}/panel.csv", panel.n_days, panel.start_date);
        }
        Command::Point => {
            let fp = p.point(&p.load_panel()?)?;
            println!("point: {} days x {} windows -> {out}/forecast_panel.csv", fp.n_days, fp.taus.len());
        }
        Command::Prob => {
            let panel = p.load_panel()?;
            let iv = p.prob(&panel, &p.load_forecast_panel()?)?;
            for i in &iv {
                println!("prob: {} {} days -> {out}/intervals/{}.csv", i.method, i.n_days, i.method);
            }
        }
        Command::Eval => {
            let panel = p.load_panel()?;
            let reports = p.eval(&panel, &p.load_intervals(&panel)?)?;
            print_coverage(&reports);
        }
        Command::Trade => {
            let panel = p.load_panel()?;
            let iv = p.load_intervals(&panel)?;
            let t = p.trade(&panel, &p.load_forecast_panel()?, &iv)?;
            println!("trade: benchmark cash {:.2}, volume {:.2}", t.summary.benchmark.total_cash, t.summary.benchmark.total_volume);
        }
        Command::Report => {
            let panel = p.load_panel()?;
            let fp = p.load_forecast_panel()?;
            let iv = p.load_intervals(&panel)?;
            let reports = p.load_eval(&panel, &iv)?;
            let trades = p.load_trade(&panel, &fp, &iv)?;
            p.report(&reports, &trades)?;
            println!("report -> {out}/reports");
        }
        Command::Run => {
            p.run_all()?;
            let text = std::fs::read_to_string(p.path("reports/pass_counts.txt"))?;
            print!("{}", text.lines().skip(1).map(|l| format!("{l}\n")).collect::<String>());
        }
        Command::Config => unreachable!(),
    }
    Ok(())
}

fn print_coverage(reports: &[fqra_core::evaluation::CoverageReport]) {
    for r in reports {
        let cov: Vec<String> = r
            .levels
            .iter()
            .map(|l| format!("{}%:{:.3}", (l.level * 100.0).round(), l.coverage.average))
            .collect();
        println!("eval: {} {}", r.method, cov.join(" "));
    }
}
