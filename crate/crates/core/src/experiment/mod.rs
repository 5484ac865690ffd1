//! End-to-end experiment runs driven by a JSON config.

mod config;
mod run;
mod sliding;

pub use config::{ExperimentConfig, SlidingConfig, Task};
pub use run::{
    load_task_panel, run_dir, run_experiment, Aggregate, ExperimentReport, FitSummary, RunRecord, Summary,
};
pub use sliding::{run_sliding_window, window_dir_name, WindowRecord};

use crate::error::{Error, Result};

/// Environment variable holding the number of worker threads.
pub const WORKERS_ENV: &str = "NGC_WORKERS";

/// A thread pool sized by `NGC_WORKERS`, or by the CPU count when unset.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("{WORKERS_ENV} must be a positive integer, got {v:?}")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("could not start worker pool: {e}")))
}
