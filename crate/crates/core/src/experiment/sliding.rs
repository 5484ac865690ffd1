use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::{
    aggregate, fit_dataset, fit_summaries, history_csv, load_task_panel, run_dir, write_gc_files, ExperimentReport,
    FitSummary, RunRecord,
};
use super::worker_pool;
use crate::datagen::{chronological_split, sliding_windows, LaggedDataset, TimeSeriesPanel};
use crate::error::{Error, Result};
use crate::evaluation::{extract_gc, threshold_gc, GCEstimate};
use crate::io::write_atomic;
use crate::models::ModelSpec;

/// Outcome of one window of the sliding analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub model: String,
    pub seed: u64,
    pub index: usize,
    pub start_sample: usize,
    pub start_seconds: f64,
    pub train_samples: usize,
    pub val_samples: usize,
    pub completed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub fits: Vec<FitSummary>,
    /// Number of ones in the thresholded matrix.
    pub edges: Option<usize>,
}

/// Directory name of a window, keyed by its start time.
pub fn window_dir_name(start_seconds: f64) -> String {
    format!("{start_seconds}s")
}

struct WindowFit {
    estimate: GCEstimate,
    fits: Vec<FitSummary>,
    history: String,
    sizes: (usize, usize),
}

fn fit_window(config: &ExperimentConfig, spec: ModelSpec, window: &TimeSeriesPanel, seed: u64) -> Result<WindowFit> {
    let dataset = LaggedDataset::from_panel(window, config.max_lag)?;
    let split = chronological_split(dataset.len(), config.sliding.val_fraction)?;
    let sizes = (split.0.len(), split.1.len());
    let result = fit_dataset(config, spec, &dataset, split, seed)?;
    let estimate = threshold_gc(&extract_gc(&result.models())?, config.threshold)?;
    Ok(WindowFit {
        estimate,
        fits: fit_summaries(&result),
        history: history_csv(&result),
        sizes,
    })
}

/// Fits every window of a long recording and writes one score matrix and
/// one thresholded matrix per window plus a long-format table
/// `window,start_seconds,cause,effect,score,scaled,binary`.
pub fn run_sliding_window(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let panel = load_task_panel(config, 0)?;
    let s = &config.sliding;
    let windows = sliding_windows(&panel, s.window_len, s.overlap, Some(s.sampling_rate))?;
    if windows.len() < 2 {
        log::warn!("only {} window fits in {} samples", windows.len(), panel.len());
    }
    let pool = worker_pool()?;
    let names = panel.series_names().to_vec();
    let mut runs = Vec::new();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for spec in config.model_specs()? {
        for &seed in &config.seeds {
            let start = Instant::now();
            let dir = run_dir(config, &spec.to_string(), seed);
            let mut long = String::from("window,start_seconds,cause,effect,score,scaled,binary\n");
            let mut run_failed = None;
            for (index, window) in windows.iter().enumerate() {
                let secs = window.start_seconds.unwrap_or(0.0);
                let wdir = dir.join("windows").join(window_dir_name(secs));
                let outcome = pool.install(|| fit_window(config, spec, window, seed)).and_then(|fit| {
                    write_gc_files(&wdir, &names, &fit.estimate)?;
                    write_atomic(&wdir.join("history.csv"), fit.history.as_bytes())?;
                    Ok(fit)
                });
                let mut record = WindowRecord {
                    model: spec.to_string(),
                    seed,
                    index,
                    start_sample: window.start_sample,
                    start_seconds: secs,
                    train_samples: 0,
                    val_samples: 0,
                    completed: false,
                    error: None,
                    fits: Vec::new(),
                    edges: None,
                };
                match outcome {
                    Ok(fit) => {
                        let scaled = fit.estimate.scaled_scores();
                        let binary = fit.estimate.binary.as_ref().expect("thresholded");
                        for (i, row) in fit.estimate.series_scores.iter().enumerate() {
                            for (j, score) in row.iter().enumerate() {
                                long.push_str(&format!(
                                    "{index},{secs},{},{},{score},{},{}\n",
                                    names[j], names[i], scaled[i][j], binary[i][j]
                                ));
                            }
                        }
                        record.train_samples = fit.sizes.0;
                        record.val_samples = fit.sizes.1;
                        record.completed = true;
                        record.fits = fit.fits;
                        record.edges = Some(binary.iter().flatten().map(|&b| b as usize).sum());
                    }
                    Err(e) => {
                        let msg = format!("{spec} seed {seed} window {index} ({secs}s): {e}");
                        log::error!("{msg}");
                        failures.push(msg);
                        record.error = Some(e.to_string());
                        run_failed.get_or_insert_with(|| e.to_string());
                    }
                }
                records.push(record);
            }
            write_atomic(&dir.join("gc_long.csv"), long.as_bytes())?;
            runs.push(RunRecord {
                model: spec.to_string(),
                seed,
                data_seed: seed,
                completed: run_failed.is_none(),
                error: run_failed,
                fits: Vec::new(),
                val_mse: None,
                auroc: None,
                aupr: None,
                metric_note: None,
                mean_lag_scores: None,
                lag_recovery: None,
                grid: Vec::new(),
                seconds: start.elapsed().as_secs_f64(),
            });
        }
    }
    let report = ExperimentReport {
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        aggregate: aggregate(&config.models, &runs),
        runs,
        windows: records,
        failures,
    };
    let path = config.output_dir.join(config.task.name()).join("results.json");
    write_atomic(&path, serde_json::to_string_pretty(&report)?.as_bytes())
        .map_err(|e| Error::Usage(format!("could not write summary: {e}")))?;
    Ok(report)
}
