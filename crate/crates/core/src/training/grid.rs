use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train, TrainConfig, TrainHistory, TrainOutcome};
use crate::datagen::LaggedDataset;
use crate::error::{Error, Result};
use crate::models::{Model, ModelConfig};
use crate::penalties::PenaltyConfig;
use crate::rng::derive_seed;

/// Outcome of one (target, learning rate, λ) training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPointResult {
    pub target: Option<usize>,
    pub learning_rate: f64,
    pub lambda: f64,
    pub val_mse: Option<f64>,
    pub best_epoch: Option<usize>,
    /// Why the run failed; `None` for completed runs.
    pub error: Option<String>,
}

impl GridPointResult {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

/// The selected run for one target (or the single joint model).
#[derive(Debug, Clone)]
pub struct TargetFit {
    pub target: Option<usize>,
    pub learning_rate: f64,
    pub lambda: f64,
    pub val_mse: f64,
    pub best_epoch: usize,
    /// Best-validation snapshot of the selected run.
    pub model: Model,
    pub history: TrainHistory,
}

#[derive(Debug, Clone)]
pub struct GridSearchResult {
    /// One fit per target in target order, or a single joint fit.
    pub fits: Vec<TargetFit>,
    /// Every grid point, ordered by target, then learning rate, then λ as
    /// given in the grids.
    pub points: Vec<GridPointResult>,
}

impl GridSearchResult {
    pub fn models(&self) -> Vec<&Model> {
        self.fits.iter().map(|f| &f.model).collect()
    }
}

/// Seeds for the model of target slot `slot`, independent of the grid point
/// and of execution order.
pub fn target_seeds(seed: u64, slot: usize) -> (u64, u64) {
    (derive_seed(seed, "model", slot as u64), derive_seed(seed, "train", slot as u64))
}

/// Trains one model per grid point (and per target for component-wise
/// kinds) and keeps, per target, the run with the lowest validation MSE.
/// Ties go to the lower λ, then the lower learning rate.
#[allow(clippy::too_many_arguments)]
pub fn grid_search(
    base: &ModelConfig,
    train_set: &LaggedDataset,
    val_set: &LaggedDataset,
    penalty: &PenaltyConfig,
    lr_grid: &[f64],
    lambda_grid: &[f64],
    config: &TrainConfig,
    seed: u64,
) -> Result<GridSearchResult> {
    if lr_grid.is_empty() || lambda_grid.is_empty() {
        return Err(Error::Usage("learning-rate and λ grids must be nonempty".into()));
    }
    let targets: Vec<Option<usize>> = if base.kind.is_component_wise() {
        (0..base.num_series).map(Some).collect()
    } else {
        vec![None]
    };
    let mut units = Vec::new();
    for (slot, &target) in targets.iter().enumerate() {
        for &lr in lr_grid {
            for &lambda in lambda_grid {
                units.push((slot, target, lr, lambda));
            }
        }
    }

    let outcomes: Vec<Result<TrainOutcome>> = units
        .par_iter()
        .map(|&(slot, target, lr, lambda)| {
            let (model_seed, train_seed) = target_seeds(seed, slot);
            let model_config = ModelConfig {
                target,
                ..base.clone()
            };
            let model = Model::new(model_config, model_seed)?;
            let cfg = TrainConfig {
                learning_rate: lr,
                seed: train_seed,
                ..config.clone()
            };
            train(model, train_set, val_set, &penalty.with_lambda(lambda), &cfg)
        })
        .collect();

    let mut points = Vec::with_capacity(units.len());
    let mut best: Vec<Option<(usize, TrainOutcome)>> = vec![None; targets.len()];
    for (i, (&(slot, target, lr, lambda), outcome)) in units.iter().zip(outcomes).enumerate() {
        match outcome {
            Ok(out) => {
                points.push(GridPointResult {
                    target,
                    learning_rate: lr,
                    lambda,
                    val_mse: Some(out.best_val_mse),
                    best_epoch: Some(out.best_epoch),
                    error: None,
                });
                let better = match &best[slot] {
                    None => true,
                    Some((j, cur)) => {
                        let (_, _, cur_lr, cur_lambda) = units[*j];
                        out.best_val_mse
                            .partial_cmp(&cur.best_val_mse)
                            .unwrap_or(Ordering::Equal)
                            .then(lambda.total_cmp(&cur_lambda))
                            .then(lr.total_cmp(&cur_lr))
                            == Ordering::Less
                    }
                };
                if better {
                    best[slot] = Some((i, out));
                }
            }
            Err(e) => {
                log::warn!("grid point lr={lr} lambda={lambda} target={target:?} failed: {e}");
                points.push(GridPointResult {
                    target,
                    learning_rate: lr,
                    lambda,
                    val_mse: None,
                    best_epoch: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }

    let mut fits = Vec::with_capacity(targets.len());
    for (slot, chosen) in best.into_iter().enumerate() {
        let Some((i, out)) = chosen else {
            let causes: Vec<String> = points
                .iter()
                .filter(|p| p.target == targets[slot])
                .filter_map(|p| p.error.clone())
                .collect();
            return Err(Error::GridExhausted {
                count: causes.len(),
                causes: causes.join("; "),
            });
        };
        let (_, target, lr, lambda) = units[i];
        fits.push(TargetFit {
            target,
            learning_rate: lr,
            lambda,
            val_mse: out.best_val_mse,
            best_epoch: out.best_epoch,
            model: out.best_model,
            history: out.history,
        });
    }
    Ok(GridSearchResult { fits, points })
}
