//! Granger-causality scores read off trained models, score scaling and
//! thresholding, and ranking metrics against a known adjacency.

mod metrics;

pub use metrics::{aupr, auroc, lag_recovery};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Body, Model, ModelKind, ModelParams};

/// Entry `[i][j]` of `series_scores` is the evidence that series `j`
/// Granger-causes series `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GCEstimate {
    pub kind: ModelKind,
    pub series_scores: Vec<Vec<f64>>,
    /// `[i][k-1]` is the importance of lag `k` for target `i`.
    pub lag_scores: Option<Vec<Vec<f64>>>,
    pub threshold: Option<f64>,
    pub binary: Option<Vec<Vec<u8>>>,
}

fn norm(values: impl Iterator<Item = f64>) -> f64 {
    values.map(|v| v * v).sum::<f64>().sqrt()
}

/// Score rows `(series, lags)` for the targets one model predicts.
fn model_rows(model: &Model) -> (Vec<Vec<f64>>, Option<Vec<Vec<f64>>>) {
    let cfg = model.config();
    let (p, k) = (cfg.num_series, cfg.max_lag);
    match model.params() {
        ModelParams::Var(_) | ModelParams::LeKVar(_) => {
            let coef = match model.params() {
                ModelParams::Var(v) => &v.coef,
                ModelParams::LeKVar(l) => &l.var.coef,
                _ => unreachable!(),
            };
            let a = coef.values();
            let row = |i: usize| &a[i * p * k..(i + 1) * p * k];
            let series = (0..p)
                .map(|i| (0..p).map(|j| norm(row(i)[j * k..(j + 1) * k].iter().copied())).collect())
                .collect();
            let lags = (0..p)
                .map(|i| (0..k).map(|l| norm((0..p).map(|j| row(i)[j * k + l]))).collect())
                .collect();
            (series, Some(lags))
        }
        ModelParams::Component { factors: Some(f), .. } => (
            vec![f.v.values().iter().map(|x| x.abs()).collect()],
            Some(vec![f.q.values().iter().map(|x| x.abs()).collect()]),
        ),
        ModelParams::Component { net, factors: None } => {
            let w = net.first_layer();
            let width = w.shape()[1];
            let vals = w.values();
            match net.body {
                Body::Mlp(_) => {
                    let block = |r: usize| vals[r * width..(r + 1) * width].iter().copied();
                    let series = (0..p)
                        .map(|j| norm((0..k).flat_map(|l| block(j * k + l))))
                        .collect();
                    let lags = (0..k).map(|l| norm((0..p).flat_map(|j| block(j * k + l)))).collect();
                    (vec![series], Some(vec![lags]))
                }
                Body::Lstm(_) => {
                    let series = (0..p)
                        .map(|j| norm(vals[j * width..(j + 1) * width].iter().copied()))
                        .collect();
                    (vec![series], None)
                }
            }
        }
    }
}

/// Assembles the `p x p` score matrix from one joint model or from one
/// component model per target.
pub fn extract_gc(models: &[&Model]) -> Result<GCEstimate> {
    let first = models.first().ok_or_else(|| Error::Usage("no models to read scores from".into()))?;
    let kind = first.kind();
    let p = first.config().num_series;
    if models.iter().any(|m| m.kind() != kind || m.config().num_series != p) {
        return Err(Error::Usage("models mix kinds or series counts".into()));
    }
    if !kind.is_component_wise() {
        if models.len() != 1 {
            return Err(Error::Usage(format!("expected one joint {} model", kind.name())));
        }
        let (series_scores, lag_scores) = model_rows(first);
        return Ok(GCEstimate {
            kind,
            series_scores,
            lag_scores,
            threshold: None,
            binary: None,
        });
    }
    let mut series: Vec<Option<Vec<f64>>> = vec![None; p];
    let mut lags: Vec<Option<Vec<f64>>> = vec![None; p];
    for m in models {
        let i = m
            .config()
            .target
            .ok_or_else(|| Error::Usage("component model without a target".into()))?;
        if series[i].is_some() {
            return Err(Error::Usage(format!("two models for target {i}")));
        }
        let (mut s, l) = model_rows(m);
        series[i] = s.pop();
        lags[i] = l.and_then(|mut l| l.pop());
    }
    let series_scores = series
        .into_iter()
        .enumerate()
        .map(|(i, row)| row.ok_or_else(|| Error::Usage(format!("no model for target {i}"))))
        .collect::<Result<Vec<_>>>()?;
    let lag_scores = lags.into_iter().collect::<Option<Vec<_>>>();
    Ok(GCEstimate {
        kind,
        series_scores,
        lag_scores,
        threshold: None,
        binary: None,
    })
}

/// `(x - min) / (max - min)`; a constant row maps to zeros.
pub fn min_max_scale(row: &[f64]) -> Vec<f64> {
    let min = row.iter().copied().fold(f64::INFINITY, f64::min);
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max > min {
        row.iter().map(|x| (x - min) / (max - min)).collect()
    } else {
        vec![0.0; row.len()]
    }
}

impl GCEstimate {
    /// Scores min-max scaled within each effect row.
    pub fn scaled_scores(&self) -> Vec<Vec<f64>> {
        self.series_scores.iter().map(|r| min_max_scale(r)).collect()
    }
}

/// Marks `binary[i][j] = 1` where the row-scaled score reaches `threshold`.
pub fn threshold_gc(estimate: &GCEstimate, threshold: f64) -> Result<GCEstimate> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Usage(format!("threshold must lie in [0, 1], got {threshold}")));
    }
    let binary = estimate
        .scaled_scores()
        .iter()
        .map(|r| r.iter().map(|&s| u8::from(s >= threshold)).collect())
        .collect();
    Ok(GCEstimate {
        threshold: Some(threshold),
        binary: Some(binary),
        ..estimate.clone()
    })
}

/// Flattens a score matrix and its truth in row-major order, optionally
/// skipping the diagonal.
pub fn flatten_pairs(scores: &[Vec<f64>], truth: &[Vec<u8>], include_diagonal: bool) -> Result<(Vec<f64>, Vec<u8>)> {
    let p = truth.len();
    if scores.len() != p || scores.iter().any(|r| r.len() != p) || truth.iter().any(|r| r.len() != p) {
        return Err(Error::dim("metric", format!("scores and truth must both be {p}x{p}")));
    }
    let mut s = Vec::with_capacity(p * p);
    let mut l = Vec::with_capacity(p * p);
    for i in 0..p {
        for j in 0..p {
            if include_diagonal || i != j {
                s.push(scores[i][j]);
                l.push(truth[i][j]);
            }
        }
    }
    Ok((s, l))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub auroc: f64,
    pub aupr: f64,
}

pub fn score_against_truth(scores: &[Vec<f64>], truth: &[Vec<u8>], include_diagonal: bool) -> Result<Metrics> {
    let (s, l) = flatten_pairs(scores, truth, include_diagonal)?;
    Ok(Metrics {
        auroc: auroc(&s, &l)?,
        aupr: aupr(&s, &l)?,
    })
}
