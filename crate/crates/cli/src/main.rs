use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use neuralgc::datagen::{
    read_panel_csv, read_truth_csv, simulate_lorenz96, simulate_var, write_panel_csv, write_truth_csv,
};
use neuralgc::evaluation::score_against_truth;
use neuralgc::experiment::{run_experiment, ExperimentConfig, ExperimentReport, Task};
use neuralgc::selfcheck::{gradient_suite, SUITE_TOLERANCE};

#[derive(Parser)]
#[command(name = "neuralgc", version, about = "Neural Granger-causality discovery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a panel and write panel.csv and truth.csv.
    Simulate(SimulateArgs),
    /// Run an experiment from a JSON config.
    Run(RunArgs),
    /// Sliding-window analysis of a panel CSV.
    SlidingWindow(SlidingArgs),
    /// AUROC and AUPR of a score matrix against a truth matrix.
    Score(ScoreArgs),
    /// Check reverse-mode gradients against finite differences.
    GradCheck(GradCheckArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// `var3` or `lorenz96`.
    #[arg(long, default_value = "var3")]
    task: String,
    /// Config file whose `var` / `lorenz` section supplies defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    num_series: Option<usize>,
    #[arg(long)]
    length: Option<usize>,
    /// Lorenz-96 forcing constant.
    #[arg(long)]
    forcing: Option<f64>,
    /// Comma-separated causal lags of the VAR process.
    #[arg(long, value_delimiter = ',')]
    lags: Option<Vec<usize>>,
    #[arg(long)]
    output_dir: PathBuf,
}

/// Flags that override fields of the experiment config file.
#[derive(Args)]
struct Overrides {
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    lr_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_lag: Option<usize>,
    #[arg(long)]
    standardize: Option<bool>,
    #[arg(long)]
    exclude_diagonal: bool,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    panel: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
}

impl Overrides {
    fn apply(self, cfg: &mut ExperimentConfig) {
        if let Some(v) = self.output_dir {
            cfg.output_dir = v;
        }
        if let Some(v) = self.seeds {
            cfg.seeds = v;
        }
        if let Some(v) = self.models {
            cfg.models = v;
        }
        if let Some(v) = self.lr_grid {
            cfg.lr_grid = v;
        }
        if let Some(v) = self.lambda_grid {
            cfg.lambda_grid = v;
        }
        if let Some(v) = self.epochs {
            cfg.train.epochs = v;
        }
        if let Some(v) = self.batch_size {
            cfg.train.batch_size = v;
        }
        if let Some(v) = self.max_lag {
            cfg.max_lag = v;
        }
        if let Some(v) = self.standardize {
            cfg.standardize = v;
        }
        if self.exclude_diagonal {
            cfg.include_diagonal = false;
        }
        if let Some(v) = self.threshold {
            cfg.threshold = v;
        }
        if let Some(v) = self.panel {
            cfg.panel_path = Some(v);
        }
        if let Some(v) = self.truth {
            cfg.truth_path = Some(v);
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct SlidingArgs {
    /// Config file; without one the standard EEG protocol is used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct ScoreArgs {
    /// Score matrix CSV with a header row, e.g. gc_scores.csv.
    #[arg(long)]
    scores: PathBuf,
    /// Headerless 0/1 truth matrix.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    exclude_diagonal: bool,
}

#[derive(Args)]
struct GradCheckArgs {
    #[arg(long, default_value_t = 100)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn simulate(args: SimulateArgs) -> Result<bool> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::new(Task::Var3, vec![], vec![0], &args.output_dir),
    };
    let panel = match args.task.as_str() {
        "var3" => {
            if let Some(p) = args.num_series {
                cfg.var.num_series = p;
            }
            if let Some(t) = args.length {
                cfg.var.length = t;
            }
            if let Some(l) = args.lags {
                cfg.var.causal_lags = l;
            }
            simulate_var(&cfg.var, args.seed)?
        }
        "lorenz96" => {
            if let Some(p) = args.num_series {
                cfg.lorenz.num_series = p;
            }
            if let Some(t) = args.length {
                cfg.lorenz.length = t;
            }
            if let Some(f) = args.forcing {
                cfg.lorenz.forcing = f;
            }
            simulate_lorenz96(&cfg.lorenz, args.seed)?
        }
        other => bail!("unknown simulation task {other:?}; expected var3 or lorenz96"),
    };
    let panel_path = args.output_dir.join("panel.csv");
    write_panel_csv(&panel_path, &panel)?;
    if let Some(truth) = &panel.truth {
        write_truth_csv(&args.output_dir.join("truth.csv"), truth)?;
    }
    println!("wrote {} rows x {} series to {}", panel.len(), panel.num_series(), panel_path.display());
    Ok(true)
}

fn print_report(report: &ExperimentReport) {
    for agg in &report.aggregate {
        let fmt = |s: &Option<neuralgc::experiment::Summary>| match s {
            Some(s) => format!("{:.4} ± {:.4}", s.mean, s.sd.unwrap_or(0.0)),
            None => "n/a".to_string(),
        };
        println!(
            "{:<10} completed {} failed {}  auroc {}  aupr {}",
            agg.model,
            agg.completed,
            agg.failed,
            fmt(&agg.auroc),
            fmt(&agg.aupr)
        );
    }
    for f in &report.failures {
        warn!("{f}");
    }
}

fn run(config: &Path, overrides: Overrides) -> Result<bool> {
    let mut cfg = ExperimentConfig::load(config).with_context(|| format!("loading {}", config.display()))?;
    overrides.apply(&mut cfg);
    let report = run_experiment(&cfg)?;
    print_report(&report);
    Ok(report.all_completed())
}

fn sliding(args: SlidingArgs) -> Result<bool> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => {
            let panel = args.overrides.panel.clone().context("--panel is required without --config")?;
            let out = args.overrides.output_dir.clone().unwrap_or_else(|| PathBuf::from("results"));
            ExperimentConfig::sliding_window_protocol(panel, out)
        }
    };
    args.overrides.apply(&mut cfg);
    cfg.task = Task::SlidingWindow;
    let report = run_experiment(&cfg)?;
    info!("{} windows analysed", report.windows.len());
    print_report(&report);
    Ok(report.all_completed())
}

fn score(args: ScoreArgs) -> Result<bool> {
    let scores = read_panel_csv(&args.scores)?;
    let truth = read_truth_csv(&args.truth)?;
    let m = score_against_truth(scores.data(), &truth, !args.exclude_diagonal)?;
    let out = serde_json::json!({
        "auroc": m.auroc,
        "aupr": m.aupr,
        "include_diagonal": !args.exclude_diagonal,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(true)
}

fn grad_check(args: GradCheckArgs) -> Result<bool> {
    let report = gradient_suite(args.points, args.seed)?;
    let mut ok = true;
    for case in &report {
        let status = if case.passed() { "ok" } else { "FAIL" };
        ok &= case.passed();
        println!("{status:<4} {:<26} max rel err {:.3e} over {} points", case.name, case.worst, case.points);
    }
    println!("tolerance {SUITE_TOLERANCE:e}: {}", if ok { "all passed" } else { "failures" });
    Ok(ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Run(a) => run(&a.config, a.overrides),
        Command::SlidingWindow(a) => sliding(a),
        Command::Score(a) => score(a),
        Command::GradCheck(a) => grad_check(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
