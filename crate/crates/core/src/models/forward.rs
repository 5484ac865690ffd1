//! Graph construction for every model family.

use super::config::{KernelMode, ModelKind};
use super::params::{Body, ComponentNetParams, DecouplingFactors, LeKVarParams, ModelParams, VarParams};
use crate::autodiff::{Graph, NodeId, Tensor};
use crate::error::{Error, Result};

/// `n` lag windows of shape `K x p`, stored row-major per window. Row 0 of
/// each window is lag 1 (the most recent observation).
#[derive(Debug, Clone, PartialEq)]
pub struct WindowBatch {
    values: Vec<f64>,
    n: usize,
    lags: usize,
    series: usize,
}

impl WindowBatch {
    pub fn new(values: Vec<f64>, lags: usize, series: usize) -> Result<Self> {
        let per = lags * series;
        if per == 0 || values.is_empty() || values.len() % per != 0 {
            return Err(Error::dim(
                "window_batch",
                format!("{} values do not form {lags}x{series} windows", values.len()),
            ));
        }
        Ok(Self {
            n: values.len() / per,
            values,
            lags,
            series,
        })
    }

    /// One window given as `K` rows of `p` values, most recent lag first.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let series = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != series) {
            return Err(Error::dim("window_batch", "ragged window rows"));
        }
        Self::new(rows.concat(), rows.len(), series)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn lags(&self) -> usize {
        self.lags
    }

    pub fn series(&self) -> usize {
        self.series
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Flattened as `[n, p*K]` with column `j*K + (k-1)` = series `j`, lag `k`.
    pub fn series_major(&self) -> Vec<f64> {
        let (k, p) = (self.lags, self.series);
        let mut out = vec![0.0; self.values.len()];
        for (w, win) in self.values.chunks_exact(k * p).enumerate() {
            let dst = &mut out[w * k * p..(w + 1) * k * p];
            for lag in 0..k {
                for j in 0..p {
                    dst[j * k + lag] = win[lag * p + j];
                }
            }
        }
        out
    }
}

struct Cursor<'a> {
    ids: &'a [NodeId],
    pos: usize,
}

impl Cursor<'_> {
    fn next(&mut self) -> Result<NodeId> {
        let id = self
            .ids
            .get(self.pos)
            .copied()
            .ok_or_else(|| Error::Usage("fewer bound parameters than the model needs".into()))?;
        self.pos += 1;
        Ok(id)
    }
}

fn check_dims(batch: &WindowBatch, p: usize, k: usize) -> Result<()> {
    if batch.series != p || batch.lags != k {
        return Err(Error::dim(
            "forward",
            format!("model expects {k}x{p} windows, got {}x{}", batch.lags, batch.series),
        ));
    }
    Ok(())
}

/// `x · coefᵀ + bias` where `x` is series-major `[n, p*K]`.
fn linear_lags(g: &mut Graph, coef: NodeId, bias: NodeId, x: NodeId) -> Result<NodeId> {
    let ct = g.transpose(coef)?;
    let y = g.matmul(x, ct)?;
    g.add_row(y, bias)
}

/// Applies ξ elementwise to `x` of shape `[n, m]`.
fn kernel_graph(g: &mut Graph, c: &mut Cursor, x: NodeId, normalize: bool) -> Result<NodeId> {
    let (w1, b1, w2, b2) = (c.next()?, c.next()?, c.next()?, c.next()?);
    let shape = g.value(x).shape().to_vec();
    let total = g.value(x).len();
    let col = g.reshape(x, vec![total, 1])?;
    let pre = g.matmul(col, w1)?;
    let pre = g.add_row(pre, b1)?;
    let hidden = g.sigmoid(pre)?;
    let w2 = if normalize { g.normalize_rows(w2)? } else { w2 };
    let w2t = g.transpose(w2)?;
    let out = g.matmul(hidden, w2t)?;
    let out = g.add_row(out, b2)?;
    g.reshape(out, shape)
}

pub(crate) fn model_graph(
    params: &ModelParams,
    kind: ModelKind,
    kernel: KernelMode,
    normalize: bool,
    g: &mut Graph,
    nodes: &[NodeId],
    batch: &WindowBatch,
) -> Result<NodeId> {
    let mut c = Cursor { ids: nodes, pos: 0 };
    match params {
        ModelParams::Var(v) => {
            check_dims(batch, v.num_series(), v.max_lag())?;
            let x = g.constant(vec![batch.n, batch.series * batch.lags], batch.series_major())?;
            let (coef, bias) = (c.next()?, c.next()?);
            linear_lags(g, coef, bias, x)
        }
        ModelParams::LeKVar(l) => {
            check_dims(batch, l.var.num_series(), l.var.max_lag())?;
            let x = g.constant(vec![batch.n, batch.series * batch.lags], batch.series_major())?;
            let (coef, bias) = (c.next()?, c.next()?);
            let x = match kernel {
                KernelMode::Learned => kernel_graph(g, &mut c, x, normalize)?,
                KernelMode::Identity => x,
            };
            linear_lags(g, coef, bias, x)
        }
        ModelParams::Component { net, factors } => {
            component_graph(g, &mut c, net, factors.is_some(), kind, normalize, batch)
        }
    }
}

fn component_graph(
    g: &mut Graph,
    c: &mut Cursor,
    net: &ComponentNetParams,
    decoupled: bool,
    kind: ModelKind,
    normalize: bool,
    batch: &WindowBatch,
) -> Result<NodeId> {
    if !kind.is_component_wise() {
        return Err(Error::Config(format!("{} is not a component-wise model", kind.name())));
    }
    if decoupled != kind.is_decoupled() {
        return Err(Error::Config(if decoupled {
            format!("decoupling factors supplied to {}", kind.name())
        } else {
            format!("{} requires decoupling factors", kind.name())
        }));
    }
    let (n, k, p) = (batch.n, batch.lags, batch.series);
    // Factor nodes come last in binding order.
    let factor_nodes = if decoupled {
        let len = c.ids.len();
        if len < 2 {
            return Err(Error::Usage("missing factor bindings".into()));
        }
        Some((c.ids[len - 2], c.ids[len - 1]))
    } else {
        None
    };
    let normalize_first = decoupled && normalize;

    let last_hidden = match &net.body {
        Body::Mlp(layers) => {
            if kind.is_recurrent() {
                return Err(Error::Config(format!("{} needs an LSTM body", kind.name())));
            }
            if layers[0].weight.shape()[0] != p * k {
                return Err(Error::dim(
                    "component_forward",
                    format!("first layer expects {} inputs, window has {}", layers[0].weight.shape()[0], p * k),
                ));
            }
            let mut x = g.constant(vec![n, p * k], batch.series_major())?;
            if let Some((v, q)) = factor_nodes {
                // scale[j*K + k] = v_j * q_k
                let s = g.outer(v, q)?;
                let s = g.reshape(s, vec![p * k])?;
                x = g.mul_row(x, s)?;
            }
            let mut h = x;
            for (idx, _) in layers.iter().enumerate() {
                let (w, b) = (c.next()?, c.next()?);
                let w = if idx == 0 && normalize_first { g.normalize_rows(w)? } else { w };
                let z = g.matmul(h, w)?;
                let z = g.add_row(z, b)?;
                h = g.sigmoid(z)?;
            }
            h
        }
        Body::Lstm(layers) => {
            if !kind.is_recurrent() {
                return Err(Error::Config(format!("{} needs a feed-forward body", kind.name())));
            }
            if layers[0].w_ih.shape()[0] != p {
                return Err(Error::dim(
                    "component_forward",
                    format!("LSTM expects {} series, window has {p}", layers[0].w_ih.shape()[0]),
                ));
            }
            let mut x = g.constant(vec![n, k * p], batch.values.clone())?;
            if let Some((v, q)) = factor_nodes {
                // scale[(k-1)*p + j] = q_k * v_j, matching the lag-major layout.
                let s = g.outer(q, v)?;
                let s = g.reshape(s, vec![k * p])?;
                x = g.mul_row(x, s)?;
            }
            // Oldest lag first.
            let mut seq: Vec<NodeId> = (0..k)
                .map(|step| {
                    let lag_row = k - 1 - step;
                    g.slice(x, 1, lag_row * p, (lag_row + 1) * p)
                })
                .collect::<Result<_>>()?;
            for (idx, layer) in layers.iter().enumerate() {
                let (w_ih, w_hh, bias) = (c.next()?, c.next()?, c.next()?);
                let w_ih = if idx == 0 && normalize_first { g.normalize_rows(w_ih)? } else { w_ih };
                seq = lstm_layer(g, &seq, w_ih, w_hh, bias, layer.hidden())?;
            }
            *seq.last().expect("K >= 1")
        }
    };
    let (w, b) = (c.next()?, c.next()?);
    let y = g.matmul(last_hidden, w)?;
    g.add_row(y, b)
}

fn lstm_layer(
    g: &mut Graph,
    inputs: &[NodeId],
    w_ih: NodeId,
    w_hh: NodeId,
    bias: NodeId,
    hidden: usize,
) -> Result<Vec<NodeId>> {
    let mut h: Option<NodeId> = None;
    let mut cell: Option<NodeId> = None;
    let mut outputs = Vec::with_capacity(inputs.len());
    for &x in inputs {
        let mut z = g.matmul(x, w_ih)?;
        if let Some(h) = h {
            let r = g.matmul(h, w_hh)?;
            z = g.add(z, r)?;
        }
        let z = g.add_row(z, bias)?;
        let i = g.slice(z, 1, 0, hidden)?;
        let f = g.slice(z, 1, hidden, 2 * hidden)?;
        let cand = g.slice(z, 1, 2 * hidden, 3 * hidden)?;
        let o = g.slice(z, 1, 3 * hidden, 4 * hidden)?;
        let i = g.sigmoid(i)?;
        let f = g.sigmoid(f)?;
        let cand = g.tanh(cand)?;
        let o = g.sigmoid(o)?;
        let write = g.mul(i, cand)?;
        let c_new = match cell {
            Some(prev) => {
                let keep = g.mul(f, prev)?;
                g.add(keep, write)?
            }
            None => write,
        };
        let act = g.tanh(c_new)?;
        let h_new = g.mul(o, act)?;
        cell = Some(c_new);
        h = Some(h_new);
        outputs.push(h_new);
    }
    Ok(outputs)
}

fn bind_constants(g: &mut Graph, tensors: &[&Tensor]) -> Vec<NodeId> {
    tensors.iter().map(|t| g.leaf((*t).clone())).collect()
}

/// `Σ_k A^{(k)} x_{t-k} + bias` for every window; returns `n x p` values.
pub fn var_forward(params: &VarParams, batch: &WindowBatch) -> Result<Vec<f64>> {
    let mut g = Graph::new();
    let nodes = bind_constants(&mut g, &[&params.coef, &params.bias]);
    let wrapped = ModelParams::Var(params.clone());
    let out = model_graph(&wrapped, ModelKind::Var, KernelMode::Learned, true, &mut g, &nodes, batch)?;
    Ok(g.value(out).values().to_vec())
}

/// `Σ_k A^{(k)} ξ(x_{t-k}) + bias` with ξ shared across every element.
pub fn lekvar_forward(
    params: &LeKVarParams,
    kernel: KernelMode,
    normalize: bool,
    batch: &WindowBatch,
) -> Result<Vec<f64>> {
    let mut g = Graph::new();
    let k = &params.kernel;
    let nodes = bind_constants(
        &mut g,
        &[&params.var.coef, &params.var.bias, &k.w1, &k.b1, &k.w2, &k.b2],
    );
    let wrapped = ModelParams::LeKVar(params.clone());
    let out = model_graph(&wrapped, ModelKind::LeKVar, kernel, normalize, &mut g, &nodes, batch)?;
    Ok(g.value(out).values().to_vec())
}

/// Scalar prediction of one component network for every window.
///
/// With factors, input `x_{t-k,j}` is scaled by `v_j q_k` and the first-layer
/// groups enter in unit-norm form when `normalize` is set.
pub fn component_forward(
    net: &ComponentNetParams,
    factors: Option<&DecouplingFactors>,
    kind: ModelKind,
    normalize: bool,
    batch: &WindowBatch,
) -> Result<Vec<f64>> {
    let wrapped = ModelParams::Component {
        net: net.clone(),
        factors: factors.cloned(),
    };
    let tensors: Vec<&Tensor> = wrapped.tensors().into_iter().map(|(_, t)| t).collect();
    let mut g = Graph::new();
    let nodes = bind_constants(&mut g, &tensors);
    let out = model_graph(&wrapped, kind, KernelMode::Learned, normalize, &mut g, &nodes, batch)?;
    Ok(g.value(out).values().to_vec())
}

/// `w / ‖w‖₂`, or `w` unchanged when the norm is at most `NORM_EPS`.
pub fn normalized_group(weights: &[f64]) -> Vec<f64> {
    let r = weights.iter().map(|x| x * x).sum::<f64>().sqrt();
    if r > crate::autodiff::NORM_EPS {
        weights.iter().map(|x| x / r).collect()
    } else {
        weights.to_vec()
    }
}
