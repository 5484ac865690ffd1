//! Predictive model families: VAR, LeKVAR (VAR over a learned shared
//! kernel), and component-wise MLP/LSTM networks with optional decoupling
//! factors.

mod checkpoint;
mod config;
mod forward;
mod params;

use std::ops::Range;

pub use checkpoint::Checkpoint;
pub use config::{KernelMode, ModelConfig, ModelKind, ModelSpec, DEFAULT_WIDTH};
pub use forward::{component_forward, lekvar_forward, normalized_group, var_forward, WindowBatch};
pub use params::{
    Body, ComponentNetParams, DecouplingFactors, DenseLayer, KernelParams, LeKVarParams, LstmLayer,
    ModelParams, VarParams,
};

use crate::autodiff::{Graph, NodeId, Tensor};
use crate::error::{Error, Result};

/// What a penalized weight group stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupRole {
    /// Every weight connecting cause series `cause` to the prediction of
    /// `effect` (`W^{(i,j)}`, or `A^{(1..K)}_{ij}` for VAR).
    Pair { effect: usize, cause: usize },
    /// Decoupling factor `v^i_j`.
    SeriesFactor { effect: usize, cause: usize },
    /// Decoupling factor `q^i_k` (1-based lag).
    LagFactor { effect: usize, lag: usize },
}

/// A contiguous slice of one parameter tensor seen by the penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightGroup {
    pub role: GroupRole,
    /// Index into [`Model::tensors`].
    pub param: usize,
    pub range: Range<usize>,
    /// Present when the group splits into `K` equal per-lag subgroups, lag 1
    /// first.
    pub num_lags: Option<usize>,
}

impl WeightGroup {
    pub fn name(&self) -> String {
        match self.role {
            GroupRole::Pair { effect, cause } => format!("W({effect},{cause})"),
            GroupRole::SeriesFactor { effect, cause } => format!("v({effect})[{cause}]"),
            GroupRole::LagFactor { effect, lag } => format!("q({effect})[{lag}]"),
        }
    }

    pub fn values<'a>(&self, model: &'a Model) -> &'a [f64] {
        &model.tensors()[self.param].1.values()[self.range.clone()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: ModelConfig,
    seed: u64,
    params: ModelParams,
}

impl Model {
    /// Fresh model with weights drawn from the `init` stream of `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = crate::rng::stream(seed, "init");
        let params = ModelParams::init(&config, &mut rng);
        Ok(Self { config, seed, params })
    }

    /// Wraps existing parameters, checking they fit `config`.
    pub fn from_parts(config: ModelConfig, seed: u64, params: ModelParams) -> Result<Self> {
        let template = Self::new(config.clone(), seed)?;
        let expected = template.tensors();
        let got = params.tensors();
        let same_layout = expected.len() == got.len()
            && expected
                .iter()
                .zip(&got)
                .all(|((na, a), (nb, b))| na == nb && a.shape() == b.shape());
        if !same_layout {
            return Err(Error::Config(format!(
                "parameters do not match a {} model with this configuration",
                config.kind.name()
            )));
        }
        Ok(Self { config, seed, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ModelParams {
        &mut self.params
    }

    pub fn kind(&self) -> ModelKind {
        self.config.kind
    }

    pub fn tensors(&self) -> Vec<(String, &Tensor)> {
        self.params.tensors()
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn factors(&self) -> Option<&DecouplingFactors> {
        match &self.params {
            ModelParams::Component { factors, .. } => factors.as_ref(),
            _ => None,
        }
    }

    /// Registers every parameter as a differentiable leaf.
    pub fn bind(&self, g: &mut Graph) -> Vec<NodeId> {
        self.tensors()
            .into_iter()
            .map(|(_, t)| g.leaf(t.clone().requiring_grad()))
            .collect()
    }

    /// Binds parameters as views into one flat vector node, in
    /// [`Model::flat_params`] order.
    pub fn bind_flat(&self, g: &mut Graph, flat: NodeId) -> Result<Vec<NodeId>> {
        if g.value(flat).len() != self.num_parameters() {
            return Err(Error::dim(
                "bind_flat",
                format!("{} values for {} parameters", g.value(flat).len(), self.num_parameters()),
            ));
        }
        let flat = g.reshape(flat, vec![self.num_parameters()])?;
        let mut offset = 0;
        let mut out = Vec::new();
        for (_, t) in self.tensors() {
            let s = g.slice(flat, 0, offset, offset + t.len())?;
            out.push(g.reshape(s, t.shape().to_vec())?);
            offset += t.len();
        }
        Ok(out)
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.tensors()
            .into_iter()
            .flat_map(|(_, t)| t.values().to_vec())
            .collect()
    }

    pub fn set_flat_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_parameters() {
            return Err(Error::dim(
                "set_flat_params",
                format!("{} values for {} parameters", values.len(), self.num_parameters()),
            ));
        }
        let mut offset = 0;
        for t in self.params.tensors_mut() {
            let n = t.len();
            t.set_values(values[offset..offset + n].to_vec())?;
            offset += n;
        }
        Ok(())
    }

    /// Predictions of shape `[n, outputs]` built from bound parameter nodes.
    pub fn forward(&self, g: &mut Graph, nodes: &[NodeId], batch: &WindowBatch) -> Result<NodeId> {
        forward::model_graph(
            &self.params,
            self.config.kind,
            self.config.kernel,
            self.config.weight_normalization,
            g,
            nodes,
            batch,
        )
    }

    /// Predictions as a flat `n x outputs` vector.
    pub fn predict(&self, batch: &WindowBatch) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let nodes: Vec<NodeId> = self.tensors().into_iter().map(|(_, t)| g.leaf(t.clone())).collect();
        let out = self.forward(&mut g, &nodes, batch)?;
        Ok(g.value(out).values().to_vec())
    }

    /// Keeps stored parameters in their canonical form after an update.
    pub fn after_step(&mut self) {
        if let (ModelParams::LeKVar(l), KernelMode::Learned, true) =
            (&mut self.params, self.config.kernel, self.config.weight_normalization)
        {
            l.project_kernel();
        }
    }

    /// The weight groups the sparsity penalty acts on.
    ///
    /// VAR/LeKVAR: one group per (i, j) holding `A^{(1..K)}_{ij}`.
    /// cMLP/cLSTM: one group per cause series in the first layer (for LSTM
    /// the input weights of all four gates). Decoupled variants: each entry
    /// of `v` and `q` as its own group.
    pub fn penalized_groups(&self) -> Vec<WeightGroup> {
        let (p, k) = (self.config.num_series, self.config.max_lag);
        let target = self.config.target.unwrap_or(0);
        match &self.params {
            ModelParams::Var(_) | ModelParams::LeKVar(_) => (0..p)
                .flat_map(|i| {
                    (0..p).map(move |j| WeightGroup {
                        role: GroupRole::Pair { effect: i, cause: j },
                        param: 0,
                        range: (i * p + j) * k..(i * p + j + 1) * k,
                        num_lags: Some(k),
                    })
                })
                .collect(),
            ModelParams::Component { net, factors: Some(_) } => {
                let n = net.tensors().len();
                let series = (0..p).map(|j| WeightGroup {
                    role: GroupRole::SeriesFactor { effect: target, cause: j },
                    param: n,
                    range: j..j + 1,
                    num_lags: None,
                });
                let lags = (0..k).map(|l| WeightGroup {
                    role: GroupRole::LagFactor { effect: target, lag: l + 1 },
                    param: n + 1,
                    range: l..l + 1,
                    num_lags: None,
                });
                series.chain(lags).collect()
            }
            ModelParams::Component { net, factors: None } => {
                let width = net.first_layer().shape()[1];
                let (span, num_lags) = match net.body {
                    Body::Mlp(_) => (k * width, Some(k)),
                    Body::Lstm(_) => (width, None),
                };
                (0..p)
                    .map(|j| WeightGroup {
                        role: GroupRole::Pair { effect: target, cause: j },
                        param: 0,
                        range: j * span..(j + 1) * span,
                        num_lags,
                    })
                    .collect()
            }
        }
    }
}
