use rand::seq::SliceRandom;

use super::TimeSeriesPanel;
use crate::error::{Error, Result};
use crate::models::WindowBatch;
use crate::rng;

/// Lag windows cut from a panel together with the value each window
/// predicts. No window spans two replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct LaggedDataset {
    /// `n * lags * series` values; window row 0 is lag 1.
    inputs: Vec<f64>,
    /// `n * series` values.
    targets: Vec<f64>,
    lags: usize,
    series: usize,
}

impl LaggedDataset {
    pub fn from_panel(panel: &TimeSeriesPanel, lags: usize) -> Result<Self> {
        if lags == 0 {
            return Err(Error::Usage("max lag must be at least 1".into()));
        }
        let p = panel.num_series();
        let data = panel.data();
        let mut inputs = Vec::new();
        let mut targets = Vec::new();
        for range in panel.replicate_ranges() {
            if range.len() <= lags {
                return Err(Error::Usage(format!(
                    "replicate of length {} is too short for lag {lags}",
                    range.len()
                )));
            }
            for t in range.start + lags..range.end {
                for k in 1..=lags {
                    inputs.extend_from_slice(&data[t - k]);
                }
                targets.extend_from_slice(&data[t]);
            }
        }
        debug_assert_eq!(inputs.len(), targets.len() * lags);
        Ok(Self {
            inputs,
            targets,
            lags,
            series: p,
        })
    }

    pub fn from_parts(inputs: Vec<f64>, targets: Vec<f64>, lags: usize, series: usize) -> Result<Self> {
        if lags == 0 || series == 0 || targets.len() % series != 0 || inputs.len() != targets.len() * lags {
            return Err(Error::dim(
                "lagged_dataset",
                format!(
                    "{} inputs and {} targets do not form {lags}x{series} windows",
                    inputs.len(),
                    targets.len()
                ),
            ));
        }
        Ok(Self {
            inputs,
            targets,
            lags,
            series,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len() / self.series
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn lags(&self) -> usize {
        self.lags
    }

    pub fn series(&self) -> usize {
        self.series
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub(crate) fn inputs_mut(&mut self) -> &mut [f64] {
        &mut self.inputs
    }

    pub(crate) fn targets_mut(&mut self) -> &mut [f64] {
        &mut self.targets
    }

    /// Window `n` as `lags` rows of `series` values.
    pub fn window(&self, n: usize) -> &[f64] {
        let per = self.lags * self.series;
        &self.inputs[n * per..(n + 1) * per]
    }

    pub fn target(&self, n: usize) -> &[f64] {
        &self.targets[n * self.series..(n + 1) * self.series]
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut inputs = Vec::with_capacity(indices.len() * self.lags * self.series);
        let mut targets = Vec::with_capacity(indices.len() * self.series);
        for &n in indices {
            inputs.extend_from_slice(self.window(n));
            targets.extend_from_slice(self.target(n));
        }
        Self {
            inputs,
            targets,
            lags: self.lags,
            series: self.series,
        }
    }

    /// The windows at `indices` as a model batch plus their `n x p` targets.
    pub fn batch(&self, indices: &[usize]) -> Result<(WindowBatch, Vec<f64>)> {
        let sub = self.subset(indices);
        Ok((WindowBatch::new(sub.inputs, self.lags, self.series)?, sub.targets))
    }

    /// Every window in order.
    pub fn full_batch(&self) -> Result<WindowBatch> {
        WindowBatch::new(self.inputs.clone(), self.lags, self.series)
    }
}

fn validation_size(n: usize, val_fraction: f64) -> Result<usize> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::Usage(format!("validation fraction must lie in (0, 1), got {val_fraction}")));
    }
    let n_val = (n as f64 * val_fraction).ceil() as usize;
    if n_val == 0 || n_val >= n {
        return Err(Error::Usage(format!(
            "splitting {n} samples with fraction {val_fraction} leaves an empty side"
        )));
    }
    Ok(n_val)
}

/// Random partition of `0..n` into sorted `(train, validation)` index lists,
/// with `ceil(n * val_fraction)` validation samples.
pub fn split_indices(n: usize, val_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let n_val = validation_size(n, val_fraction)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, "split"));
    let mut val = order[..n_val].to_vec();
    let mut train = order[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    Ok((train, val))
}

/// The first samples train, the last `ceil(n * val_fraction)` validate.
pub fn chronological_split(n: usize, val_fraction: f64) -> Result<(Vec<usize>, Vec<usize>)> {
    let n_val = validation_size(n, val_fraction)?;
    Ok(((0..n - n_val).collect(), (n - n_val..n).collect()))
}

pub fn train_val_split(
    dataset: &LaggedDataset,
    val_fraction: f64,
    seed: u64,
) -> Result<(LaggedDataset, LaggedDataset)> {
    let (train, val) = split_indices(dataset.len(), val_fraction, seed)?;
    Ok((dataset.subset(&train), dataset.subset(&val)))
}
