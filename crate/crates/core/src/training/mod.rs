//! Mini-batch Adam on the penalized objective, and grid search with
//! validation-loss model selection.

mod adam;
mod grid;

pub use adam::{adam_step, Adam, AdamHyper, AdamState};
pub use grid::{grid_search, GridPointResult, GridSearchResult, TargetFit};

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, NodeId, Tensor};
use crate::datagen::LaggedDataset;
use crate::error::{Error, Result};
use crate::models::{Model, WindowBatch};
use crate::penalties::{penalty_term, PenaltyConfig};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 1024,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            val_fraction: 0.2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Every violated constraint, empty when the config is usable.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.batch_size == 0 {
            out.push("batch_size must be positive".to_string());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            out.push(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(b > 0.0 && b < 1.0) {
                out.push(format!("{name} must lie in (0, 1), got {b}"));
            }
        }
        if !(self.adam_eps > 0.0 && self.adam_eps.is_finite()) {
            out.push(format!("adam_eps must be positive, got {}", self.adam_eps));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            out.push(format!("val_fraction must lie in (0, 1), got {}", self.val_fraction));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v.join("; ")))
        }
    }

    pub fn adam(&self) -> AdamHyper {
        AdamHyper {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }
}

/// Averages over the epoch's mini-batches, weighted by batch size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub data_loss: f64,
    pub penalty: f64,
    pub val_mse: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `epoch,data_loss,penalty,val_mse,seconds` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,data_loss,penalty,val_mse,seconds\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.epoch, r.data_loss, r.penalty, r.val_mse, r.seconds
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub final_model: Model,
    /// Snapshot with the lowest validation MSE over epochs `1..`, or the
    /// initial model when no epoch ran.
    pub best_model: Model,
    pub best_epoch: usize,
    pub best_val_mse: f64,
    pub history: TrainHistory,
}

/// The target columns a model predicts: all series, or just its target.
fn model_targets(model: &Model, targets: &[f64], series: usize) -> Vec<f64> {
    match model.config().target {
        Some(i) if model.kind().is_component_wise() => targets.chunks(series).map(|row| row[i]).collect(),
        _ => targets.to_vec(),
    }
}

fn check_dataset(model: &Model, data: &LaggedDataset, what: &str) -> Result<()> {
    let cfg = model.config();
    if data.is_empty() {
        return Err(Error::Usage(format!("{what} set is empty")));
    }
    if data.series() != cfg.num_series || data.lags() != cfg.max_lag {
        return Err(Error::dim(
            "train",
            format!(
                "{what} windows are {}x{}, model expects {}x{}",
                data.lags(),
                data.series(),
                cfg.max_lag,
                cfg.num_series
            ),
        ));
    }
    Ok(())
}

/// Mean squared prediction error over every predicted entry.
pub fn mean_squared_error(model: &Model, data: &LaggedDataset) -> Result<f64> {
    check_dataset(model, data, "evaluation")?;
    let batch = data.full_batch()?;
    let pred = model.predict(&batch)?;
    let target = model_targets(model, data.targets(), data.series());
    let sse: f64 = pred.iter().zip(&target).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sse / target.len() as f64)
}

/// Losses of one mini-batch after `backward` has run.
pub struct BatchLoss {
    pub data: f64,
    pub penalty: f64,
    pub grads: Vec<Vec<f64>>,
}

/// Builds `outputs * MSE + λΩ` for a batch and differentiates it. The data
/// term sums the per-output MSEs so joint and component-wise models see the
/// same penalty scale.
pub fn batch_loss(model: &Model, batch: &WindowBatch, targets: &[f64], penalty: &PenaltyConfig) -> Result<BatchLoss> {
    let mut g = Graph::new();
    let nodes = model.bind(&mut g);
    let pred = model.forward(&mut g, &nodes, batch)?;
    let outputs = model.config().outputs();
    let target = g.leaf(Tensor::matrix(batch.len(), outputs, targets.to_vec())?);
    let mse = g.mse(pred, target)?;
    let data = g.scale(mse, outputs as f64)?;
    let loss = if penalty.lambda > 0.0 {
        let pen = penalty_term(&mut g, model, &nodes, penalty)?;
        g.add(data, pen)?
    } else {
        data
    };
    g.backward(loss)?;
    let grads = nodes
        .iter()
        .map(|&n: &NodeId| g.grad(n).map_or_else(|| vec![0.0; g.value(n).len()], <[f64]>::to_vec))
        .collect();
    let data_v = g.value(data).values()[0];
    let total = g.value(loss).values()[0];
    Ok(BatchLoss {
        data: data_v,
        penalty: total - data_v,
        grads,
    })
}

fn diverged(epoch: usize, detail: String) -> Error {
    Error::Diverged {
        epoch,
        last_finite_epoch: epoch.checked_sub(1),
        detail,
    }
}

/// Trains `model` with mini-batch Adam. Batches are reshuffled every epoch
/// from the `batching` stream of `config.seed`; the last partial batch is
/// kept.
pub fn train(
    mut model: Model,
    train_set: &LaggedDataset,
    val_set: &LaggedDataset,
    penalty: &PenaltyConfig,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    penalty.check_model(model.kind())?;
    check_dataset(&model, train_set, "training")?;
    check_dataset(&model, val_set, "validation")?;

    let mut adam = Adam::new(&model, config.adam());
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut shuffler = rng::stream(config.seed, "batching");
    let mut history = TrainHistory::default();
    let mut best_model = model.clone();
    let mut best_val = mean_squared_error(&model, val_set)?;
    let mut best_epoch = 0;
    let start = Instant::now();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffler);
        let mut data_sum = 0.0;
        let mut pen_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let (batch, targets) = train_set.batch(chunk)?;
            let targets = model_targets(&model, &targets, train_set.series());
            let step = batch_loss(&model, &batch, &targets, penalty)
                .and_then(|loss| adam.step(&mut model, &loss.grads).map(|_| loss))
                .map_err(|e| match e {
                    Error::Numeric { .. } => diverged(epoch, e.to_string()),
                    other => other,
                })?;
            if !(step.data.is_finite() && step.penalty.is_finite()) {
                return Err(diverged(epoch, "non-finite loss".into()));
            }
            data_sum += step.data * chunk.len() as f64;
            pen_sum += step.penalty * chunk.len() as f64;
        }
        let val_mse = mean_squared_error(&model, val_set).map_err(|e| diverged(epoch, e.to_string()))?;
        if !val_mse.is_finite() {
            return Err(diverged(epoch, "non-finite validation error".into()));
        }
        let n = train_set.len() as f64;
        history.records.push(EpochRecord {
            epoch,
            data_loss: data_sum / n,
            penalty: pen_sum / n,
            val_mse,
            seconds: start.elapsed().as_secs_f64(),
        });
        if epoch == 1 || val_mse < best_val {
            best_val = val_mse;
            best_model = model.clone();
            best_epoch = epoch;
        }
    }
    Ok(TrainOutcome {
        final_model: model,
        best_model,
        best_epoch,
        best_val_mse: best_val,
        history,
    })
}

#[cfg(test)]
mod tests;
