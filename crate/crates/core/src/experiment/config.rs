use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datagen::{Lorenz96Config, VarConfig};
use crate::error::{Error, Result};
use crate::models::{KernelMode, ModelSpec};
use crate::penalties::{PenaltyConfig, PenaltyKind};
use crate::training::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Var3,
    Lorenz96,
    ReplicatedPanel,
    CsvPanel,
    SlidingWindow,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Var3 => "var3",
            Task::Lorenz96 => "lorenz96",
            Task::ReplicatedPanel => "replicated-panel",
            Task::CsvPanel => "csv-panel",
            Task::SlidingWindow => "sliding-window",
        }
    }
}

/// Settings for the windowed analysis of a long recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SlidingConfig {
    pub window_len: usize,
    pub overlap: f64,
    /// Samples per second, used to label windows by start time.
    pub sampling_rate: f64,
    /// Held-out fraction at the end of each window.
    pub val_fraction: f64,
}

impl Default for SlidingConfig {
    fn default() -> Self {
        Self {
            window_len: 2000,
            overlap: 0.5,
            sampling_rate: 100.0,
            val_fraction: 0.25,
        }
    }
}

/// A complete, self-describing experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    #[serde(default)]
    pub var: VarConfig,
    #[serde(default)]
    pub lorenz: Lorenz96Config,
    /// Data file for `replicated-panel`, `csv-panel` and `sliding-window`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub panel_path: Option<PathBuf>,
    /// Edge list (replicated panel) or truth CSV (csv panel).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_path: Option<PathBuf>,
    #[serde(default = "default_max_lag")]
    pub max_lag: usize,
    /// Model names such as `cMLP`, `cLSTMwF` or `cMLP_s`.
    pub models: Vec<String>,
    #[serde(default = "default_penalty")]
    pub penalty: PenaltyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default = "default_lr_grid")]
    pub lr_grid: Vec<f64>,
    #[serde(default = "default_lambda_grid")]
    pub lambda_grid: Vec<f64>,
    #[serde(default)]
    pub train: TrainConfig,
    /// Standardize every (lag, series) coordinate with training statistics.
    #[serde(default)]
    pub standardize: bool,
    #[serde(default = "default_true")]
    pub weight_normalization: bool,
    #[serde(default)]
    pub kernel: KernelMode,
    #[serde(default = "default_true")]
    pub include_diagonal: bool,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub sliding: SlidingConfig,
    pub seeds: Vec<u64>,
    /// Fixes the simulated data across seeds; by default each seed also
    /// draws its own data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_seed: Option<u64>,
    pub output_dir: PathBuf,
}

fn default_max_lag() -> usize {
    5
}

fn default_penalty() -> PenaltyKind {
    PenaltyKind::GroupLasso
}

fn default_lr_grid() -> Vec<f64> {
    vec![1.0, 0.1, 0.01, 0.001, 0.0001]
}

fn default_lambda_grid() -> Vec<f64> {
    vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7]
}

fn default_true() -> bool {
    true
}

fn default_threshold() -> f64 {
    0.5
}

impl ExperimentConfig {
    /// A config with defaults for everything but the required fields.
    pub fn new(task: Task, models: Vec<String>, seeds: Vec<u64>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            task,
            var: VarConfig::default(),
            lorenz: Lorenz96Config::default(),
            panel_path: None,
            truth_path: None,
            max_lag: default_max_lag(),
            models,
            penalty: default_penalty(),
            alpha: None,
            lr_grid: default_lr_grid(),
            lambda_grid: default_lambda_grid(),
            train: TrainConfig::default(),
            standardize: false,
            weight_normalization: true,
            kernel: KernelMode::default(),
            include_diagonal: true,
            threshold: default_threshold(),
            sliding: SlidingConfig::default(),
            seeds,
            data_seed: None,
            output_dir: output_dir.into(),
        }
    }

    /// The windowed protocol: cMLPwF with lag 3, learning rates
    /// `{0.001, 0.01}`, λ from 1e-5 to 1e-2, standardized inputs and a 0.5
    /// threshold on row-scaled scores.
    pub fn sliding_window_protocol(panel_path: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            panel_path: Some(panel_path.into()),
            max_lag: 3,
            lr_grid: vec![0.001, 0.01],
            lambda_grid: vec![1e-5, 1e-4, 1e-3, 1e-2],
            standardize: true,
            ..Self::new(Task::SlidingWindow, vec!["cMLPwF".into()], vec![0], output_dir)
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parsed model names; call after [`ExperimentConfig::validate`].
    pub fn model_specs(&self) -> Result<Vec<ModelSpec>> {
        self.models.iter().map(|m| m.parse()).collect()
    }

    /// The penalty used for `spec`. Decoupled models always use the L1
    /// penalty on their factors.
    pub fn penalty_for(&self, spec: ModelSpec) -> PenaltyConfig {
        let kind = if spec.kind.is_decoupled() && self.penalty == PenaltyKind::GroupLasso {
            PenaltyKind::DecoupledL1
        } else {
            self.penalty
        };
        PenaltyConfig {
            alpha: self.alpha.filter(|_| kind == PenaltyKind::SparseGroupLasso),
            ..PenaltyConfig::new(kind, 0.0)
        }
    }

    /// Checks every field and reports all problems at once.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.seeds.is_empty() {
            errs.push("seeds: at least one seed is required".to_string());
        }
        if self.models.is_empty() {
            errs.push("models: at least one model is required".to_string());
        }
        if self.max_lag == 0 {
            errs.push("max_lag: must be at least 1".to_string());
        }
        for m in &self.models {
            match m.parse::<ModelSpec>() {
                Err(e) => errs.push(format!("models: {e}")),
                Ok(spec) => {
                    if let Err(e) = self.penalty_for(spec).check_model(spec.kind) {
                        if self.penalty != PenaltyKind::SparseGroupLasso || self.alpha.is_some() {
                            errs.push(format!("penalty for {m}: {e}"));
                        }
                    }
                }
            }
        }
        if self.penalty == PenaltyKind::SparseGroupLasso && !matches!(self.alpha, Some(a) if a > 0.0 && a < 1.0) {
            errs.push("alpha: SparseGroupLasso needs alpha in (0, 1)".to_string());
        }
        if self.lr_grid.is_empty() || self.lr_grid.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            errs.push("lr_grid: must be a nonempty list of positive rates".to_string());
        }
        if self.lambda_grid.is_empty() || self.lambda_grid.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            errs.push("lambda_grid: must be a nonempty list of values >= 0".to_string());
        }
        errs.extend(
            self.train
                .violations()
                .into_iter()
                .filter(|v| !v.starts_with("learning_rate"))
                .map(|v| format!("train.{v}")),
        );
        if !(0.0..=1.0).contains(&self.threshold) {
            errs.push(format!("threshold: must lie in [0, 1], got {}", self.threshold));
        }
        match self.task {
            Task::Var3 => {
                let v = &self.var;
                if v.num_series == 0 || v.length == 0 {
                    errs.push("var: num_series and length must be positive".to_string());
                }
                if v.causal_lags.is_empty() || v.causal_lags.contains(&0) {
                    errs.push("var.causal_lags: must be a nonempty set of lags >= 1".to_string());
                }
                if !(v.density > 0.0 && v.density <= 1.0) {
                    errs.push(format!("var.density: must lie in (0, 1], got {}", v.density));
                }
                if v.length <= self.max_lag {
                    errs.push("var.length: must exceed max_lag".to_string());
                }
            }
            Task::Lorenz96 => {
                let l = &self.lorenz;
                if l.num_series < 4 {
                    errs.push(format!("lorenz.num_series: needs at least 4, got {}", l.num_series));
                }
                if !(l.dt > 0.0) || l.substeps == 0 {
                    errs.push("lorenz: dt must be positive and substeps at least 1".to_string());
                }
                if l.length <= self.max_lag {
                    errs.push("lorenz.length: must exceed max_lag".to_string());
                }
            }
            Task::ReplicatedPanel | Task::CsvPanel | Task::SlidingWindow => {
                match &self.panel_path {
                    None => errs.push(format!("panel_path: required for task {}", self.task.name())),
                    Some(p) if !p.is_file() => errs.push(format!("panel_path: {} does not exist", p.display())),
                    _ => {}
                }
                if let Some(p) = &self.truth_path {
                    if !p.is_file() {
                        errs.push(format!("truth_path: {} does not exist", p.display()));
                    }
                }
            }
        }
        if self.task == Task::SlidingWindow {
            let s = &self.sliding;
            if s.window_len <= self.max_lag {
                errs.push("sliding.window_len: must exceed max_lag".to_string());
            }
            if !(0.0..1.0).contains(&s.overlap) {
                errs.push(format!("sliding.overlap: must lie in [0, 1), got {}", s.overlap));
            }
            if !(s.sampling_rate > 0.0) {
                errs.push("sliding.sampling_rate: must be positive".to_string());
            }
            if !(s.val_fraction > 0.0 && s.val_fraction < 1.0) {
                errs.push("sliding.val_fraction: must lie in (0, 1)".to_string());
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }
}
