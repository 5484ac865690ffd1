use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Task};
use super::worker_pool;
use crate::datagen::{
    load_edge_list, load_replicated_panel, read_panel_csv, read_truth_csv, simulate_lorenz96, simulate_var,
    split_indices, standard_scale, LaggedDataset, TimeSeriesPanel,
};
use crate::error::{Error, Result};
use crate::evaluation::{extract_gc, lag_recovery, score_against_truth, threshold_gc, GCEstimate};
use crate::io::{binary_csv, matrix_csv, write_atomic};
use crate::models::{ModelConfig, ModelSpec};
use crate::training::{grid_search, GridPointResult, GridSearchResult, TrainConfig};

/// The hyperparameters chosen for one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub target: Option<usize>,
    pub learning_rate: f64,
    pub lambda: f64,
    pub val_mse: f64,
    pub best_epoch: usize,
}

/// Everything recorded about one (model, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub model: String,
    pub seed: u64,
    pub data_seed: u64,
    pub completed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub fits: Vec<FitSummary>,
    /// Mean of the selected validation MSEs over targets.
    pub val_mse: Option<f64>,
    pub auroc: Option<f64>,
    pub aupr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric_note: Option<String>,
    /// Lag scores averaged over targets.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_lag_scores: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lag_recovery: Option<bool>,
    pub grid: Vec<GridPointResult>,
    pub seconds: f64,
}

/// Mean and sample standard deviation over completed seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: Option<f64>,
    pub n: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = (n > 1).then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
        Some(Self { mean, sd, n })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub model: String,
    pub completed: usize,
    pub failed: usize,
    pub auroc: Option<Summary>,
    pub aupr: Option<Summary>,
    pub val_mse: Option<Summary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lag_recovery_hits: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub library_version: String,
    pub config: ExperimentConfig,
    pub runs: Vec<RunRecord>,
    pub aggregate: Vec<Aggregate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub windows: Vec<super::sliding::WindowRecord>,
    pub failures: Vec<String>,
}

impl ExperimentReport {
    pub fn all_completed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn aggregate_for(&self, model: &str) -> Option<&Aggregate> {
        self.aggregate.iter().find(|a| a.model == model)
    }
}

pub(super) fn aggregate(models: &[String], runs: &[RunRecord]) -> Vec<Aggregate> {
    models
        .iter()
        .map(|m| {
            let done: Vec<&RunRecord> = runs.iter().filter(|r| &r.model == m && r.completed).collect();
            let pick = |f: fn(&RunRecord) -> Option<f64>| Summary::of(&done.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
            let hits: Vec<bool> = done.iter().filter_map(|r| r.lag_recovery).collect();
            Aggregate {
                model: m.clone(),
                completed: done.len(),
                failed: runs.iter().filter(|r| &r.model == m && !r.completed).count(),
                auroc: pick(|r| r.auroc),
                aupr: pick(|r| r.aupr),
                val_mse: pick(|r| r.val_mse),
                lag_recovery_hits: (!hits.is_empty()).then(|| hits.iter().filter(|&&h| h).count()),
            }
        })
        .collect()
}

/// Directory holding the artifacts of one run.
pub fn run_dir(config: &ExperimentConfig, model: &str, seed: u64) -> PathBuf {
    config.output_dir.join(config.task.name()).join(model).join(seed.to_string())
}

/// Simulates or loads the panel for `data_seed`.
pub fn load_task_panel(config: &ExperimentConfig, data_seed: u64) -> Result<TimeSeriesPanel> {
    let path = || {
        config
            .panel_path
            .as_deref()
            .ok_or_else(|| Error::Config(format!("task {} needs panel_path", config.task.name())))
    };
    match config.task {
        Task::Var3 => simulate_var(&config.var, data_seed),
        Task::Lorenz96 => simulate_lorenz96(&config.lorenz, data_seed),
        Task::ReplicatedPanel => {
            let panel = load_replicated_panel(path()?)?;
            match &config.truth_path {
                Some(t) => {
                    let truth = load_edge_list(t, panel.series_names())?;
                    panel.with_truth(truth)
                }
                None => Ok(panel),
            }
        }
        Task::CsvPanel | Task::SlidingWindow => {
            let panel = read_panel_csv(path()?)?;
            match &config.truth_path {
                Some(t) => panel.with_truth(read_truth_csv(t)?),
                None => Ok(panel),
            }
        }
    }
}

pub(super) fn base_model_config(config: &ExperimentConfig, spec: ModelSpec, p: usize) -> Result<ModelConfig> {
    let target = spec.kind.is_component_wise().then_some(0);
    let mut base = ModelConfig::new(spec, p, config.max_lag, target)?;
    base.weight_normalization = config.weight_normalization;
    base.kernel = config.kernel;
    Ok(base)
}

/// Splits, optionally standardizes, and grid-searches one model.
pub(super) fn fit_dataset(
    config: &ExperimentConfig,
    spec: ModelSpec,
    dataset: &LaggedDataset,
    split: (Vec<usize>, Vec<usize>),
    seed: u64,
) -> Result<GridSearchResult> {
    let (train_idx, val_idx) = split;
    let data = if config.standardize {
        standard_scale(dataset, &train_idx)?.0
    } else {
        dataset.clone()
    };
    let base = base_model_config(config, spec, dataset.series())?;
    let train_cfg = TrainConfig {
        seed,
        ..config.train.clone()
    };
    grid_search(
        &base,
        &data.subset(&train_idx),
        &data.subset(&val_idx),
        &config.penalty_for(spec),
        &config.lr_grid,
        &config.lambda_grid,
        &train_cfg,
        seed,
    )
}

pub(super) fn fit_summaries(result: &GridSearchResult) -> Vec<FitSummary> {
    result
        .fits
        .iter()
        .map(|f| FitSummary {
            target: f.target,
            learning_rate: f.learning_rate,
            lambda: f.lambda,
            val_mse: f.val_mse,
            best_epoch: f.best_epoch,
        })
        .collect()
}

pub(super) fn history_csv(result: &GridSearchResult) -> String {
    let mut out = String::from("target,epoch,data_loss,penalty,val_mse,seconds\n");
    for f in &result.fits {
        let target = f.target.map_or_else(|| "all".to_string(), |t| t.to_string());
        for r in &f.history.records {
            out.push_str(&format!(
                "{target},{},{},{},{},{}\n",
                r.epoch, r.data_loss, r.penalty, r.val_mse, r.seconds
            ));
        }
    }
    out
}

fn with_header(names: &[String], body: String) -> String {
    format!("{}\n{body}", names.join(","))
}

/// Writes the score, scaled-score and binary matrices of an estimate.
pub(super) fn write_gc_files(dir: &Path, names: &[String], estimate: &GCEstimate) -> Result<()> {
    write_atomic(&dir.join("gc_scores.csv"), matrix_csv(Some(names), &estimate.series_scores).as_bytes())?;
    write_atomic(&dir.join("gc_scaled.csv"), matrix_csv(Some(names), &estimate.scaled_scores()).as_bytes())?;
    if let Some(b) = &estimate.binary {
        write_atomic(&dir.join("gc_binary.csv"), with_header(names, binary_csv(b)).as_bytes())?;
    }
    Ok(())
}

fn lag_scores_csv(estimate: &GCEstimate) -> Option<String> {
    let rows = estimate.lag_scores.as_ref()?;
    let mut out = String::from("effect,lag,score\n");
    for (i, row) in rows.iter().enumerate() {
        for (k, s) in row.iter().enumerate() {
            out.push_str(&format!("{i},{},{s}\n", k + 1));
        }
    }
    Some(out)
}

fn mean_lag_row(estimate: &GCEstimate) -> Option<Vec<f64>> {
    let rows = estimate.lag_scores.as_ref()?;
    let k = rows.first()?.len();
    Some(
        (0..k)
            .map(|l| rows.iter().map(|r| r[l]).sum::<f64>() / rows.len() as f64)
            .collect(),
    )
}

/// True lags shared by every target, when the panel records them.
fn shared_true_lags(panel: &TimeSeriesPanel) -> Option<Vec<usize>> {
    let rows = panel.truth_lags.as_ref()?;
    let first = rows.first()?;
    rows.iter().all(|r| r == first).then(|| {
        first
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1)
            .map(|(k, _)| k + 1)
            .collect()
    })
}

fn run_unit(config: &ExperimentConfig, spec: ModelSpec, seed: u64, data_seed: u64, panel: &TimeSeriesPanel) -> Result<RunRecord> {
    let start = Instant::now();
    let dir = run_dir(config, &spec.to_string(), seed);
    let dataset = LaggedDataset::from_panel(panel, config.max_lag)?;
    let split = split_indices(dataset.len(), config.train.val_fraction, seed)?;
    let result = fit_dataset(config, spec, &dataset, split, seed)?;
    let estimate = threshold_gc(&extract_gc(&result.models())?, config.threshold)?;

    let names = panel.series_names();
    write_gc_files(&dir, names, &estimate)?;
    write_atomic(&dir.join("history.csv"), history_csv(&result).as_bytes())?;
    if let Some(csv) = lag_scores_csv(&estimate) {
        write_atomic(&dir.join("lag_scores.csv"), csv.as_bytes())?;
    }

    let (mut auroc, mut aupr, mut note) = (None, None, None);
    if let Some(truth) = &panel.truth {
        write_atomic(&dir.join("truth.csv"), binary_csv(truth).as_bytes())?;
        match score_against_truth(&estimate.series_scores, truth, config.include_diagonal) {
            Ok(m) => {
                auroc = Some(m.auroc);
                aupr = Some(m.aupr);
            }
            Err(e @ Error::UndefinedMetric(_)) => note = Some(e.to_string()),
            Err(e) => return Err(e),
        }
    }
    let mean_lags = mean_lag_row(&estimate);
    let recovered = match (&mean_lags, shared_true_lags(panel)) {
        (Some(row), Some(truth)) if truth.iter().all(|&k| k <= row.len()) => Some(lag_recovery(row, &truth)),
        _ => None,
    };
    let fits = fit_summaries(&result);
    let record = RunRecord {
        model: spec.to_string(),
        seed,
        data_seed,
        completed: true,
        error: None,
        val_mse: Some(fits.iter().map(|f| f.val_mse).sum::<f64>() / fits.len() as f64),
        fits,
        auroc,
        aupr,
        metric_note: note,
        mean_lag_scores: mean_lags,
        lag_recovery: recovered,
        grid: result.points,
        seconds: start.elapsed().as_secs_f64(),
    };
    write_atomic(&dir.join("results.json"), serde_json::to_string_pretty(&record)?.as_bytes())?;
    Ok(record)
}

fn failed_record(spec: &str, seed: u64, data_seed: u64, error: &Error) -> RunRecord {
    RunRecord {
        model: spec.to_string(),
        seed,
        data_seed,
        completed: false,
        error: Some(error.to_string()),
        fits: Vec::new(),
        val_mse: None,
        auroc: None,
        aupr: None,
        metric_note: None,
        mean_lag_scores: None,
        lag_recovery: None,
        grid: Vec::new(),
        seconds: 0.0,
    }
}

/// Runs every (model, seed) pair of a validated config and writes all
/// artifacts under `output_dir/<task>/`. Failed runs are recorded in the
/// report; only invalid configs and unwritable summaries return `Err`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    if config.task == Task::SlidingWindow {
        return super::sliding::run_sliding_window(config);
    }
    let specs = config.model_specs()?;
    let pool = worker_pool()?;
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    let shared_panel = match config.task {
        Task::Var3 | Task::Lorenz96 => None,
        _ => Some(load_task_panel(config, 0)?),
    };
    for &seed in &config.seeds {
        let data_seed = config.data_seed.unwrap_or(seed);
        let panel = match &shared_panel {
            Some(p) => Ok(p.clone()),
            None => load_task_panel(config, data_seed),
        };
        for spec in &specs {
            let name = spec.to_string();
            log::info!("{} seed {seed}: {name}", config.task.name());
            let outcome = panel
                .as_ref()
                .map_err(|e| Error::Generation(e.to_string()))
                .and_then(|p| pool.install(|| run_unit(config, *spec, seed, data_seed, p)));
            match outcome {
                Ok(r) => runs.push(r),
                Err(e) => {
                    log::error!("{name} seed {seed} failed: {e}");
                    failures.push(format!("{name} seed {seed}: {e}"));
                    runs.push(failed_record(&name, seed, data_seed, &e));
                }
            }
        }
    }
    let report = ExperimentReport {
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        aggregate: aggregate(&config.models, &runs),
        runs,
        windows: Vec::new(),
        failures,
    };
    let path = config.output_dir.join(config.task.name()).join("results.json");
    write_atomic(&path, serde_json::to_string_pretty(&report)?.as_bytes())?;
    Ok(report)
}
