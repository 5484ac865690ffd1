use serde::{Deserialize, Serialize};

use super::LaggedDataset;
use crate::error::{Error, Result};

/// Coordinates whose training sd falls below this pass through unscaled.
pub const SCALE_EPS: f64 = 1e-12;

/// Per-coordinate means and sample standard deviations. Input coordinates
/// are `(lag, series)` pairs laid out like a window; targets are per series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerStats {
    pub input_mean: Vec<f64>,
    pub input_sd: Vec<f64>,
    pub target_mean: Vec<f64>,
    pub target_sd: Vec<f64>,
}

fn column_stats(rows: &[usize], width: usize, values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let mut mean = vec![0.0; width];
    for &r in rows {
        for (m, v) in mean.iter_mut().zip(&values[r * width..(r + 1) * width]) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut sd = vec![0.0; width];
    if rows.len() > 1 {
        for &r in rows {
            for ((s, v), m) in sd.iter_mut().zip(&values[r * width..(r + 1) * width]).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        sd.iter_mut().for_each(|s| *s = (*s / (n - 1.0)).sqrt());
    }
    (mean, sd)
}

fn apply(values: &mut [f64], mean: &[f64], sd: &[f64]) {
    let width = mean.len();
    for row in values.chunks_mut(width) {
        for ((v, m), s) in row.iter_mut().zip(mean).zip(sd) {
            if *s >= SCALE_EPS {
                *v = (*v - m) / s;
            }
        }
    }
}

impl ScalerStats {
    pub fn fit(dataset: &LaggedDataset, train: &[usize]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Usage("scaler needs a nonempty training subset".into()));
        }
        let width = dataset.lags() * dataset.series();
        let (input_mean, input_sd) = column_stats(train, width, dataset.inputs());
        let (target_mean, target_sd) = column_stats(train, dataset.series(), dataset.targets());
        Ok(Self {
            input_mean,
            input_sd,
            target_mean,
            target_sd,
        })
    }

    pub fn transform(&self, dataset: &LaggedDataset) -> Result<LaggedDataset> {
        if self.input_mean.len() != dataset.lags() * dataset.series() || self.target_mean.len() != dataset.series() {
            return Err(Error::dim("standard_scale", "scaler fitted on a different window shape"));
        }
        let mut out = dataset.clone();
        apply(out.inputs_mut(), &self.input_mean, &self.input_sd);
        apply(out.targets_mut(), &self.target_mean, &self.target_sd);
        Ok(out)
    }
}

/// Standardizes every coordinate with statistics from the `train` samples
/// only; the result covers all samples.
pub fn standard_scale(dataset: &LaggedDataset, train: &[usize]) -> Result<(LaggedDataset, ScalerStats)> {
    let stats = ScalerStats::fit(dataset, train)?;
    Ok((stats.transform(dataset)?, stats))
}
