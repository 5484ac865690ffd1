//! Structured sparsity penalties over weight groups, evaluated on the
//! autodiff graph so they can be added to a training loss.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, NodeId, Tensor};
use crate::error::{Error, Result};
use crate::models::{GroupRole, Model, ModelKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PenaltyKind {
    GroupLasso,
    SparseGroupLasso,
    HierarchicalGroupLasso,
    DecoupledL1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub kind: PenaltyKind,
    /// Overall strength; the penalty enters the loss as `lambda * Ω`.
    pub lambda: f64,
    /// Across/within trade-off for `SparseGroupLasso`, in (0, 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Strength on lag factors `q` for `DecoupledL1`; defaults to `lambda`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_lag: Option<f64>,
}

impl PenaltyConfig {
    pub fn new(kind: PenaltyKind, lambda: f64) -> Self {
        Self {
            kind,
            lambda,
            alpha: None,
            lambda_lag: None,
        }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self {
            lambda,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        match (self.kind, self.alpha) {
            (PenaltyKind::SparseGroupLasso, Some(a)) if a > 0.0 && a < 1.0 => {}
            (PenaltyKind::SparseGroupLasso, _) => {
                return Err(Error::Config("SparseGroupLasso needs alpha in (0, 1)".into()))
            }
            (_, Some(_)) => return Err(Error::Config("alpha applies only to SparseGroupLasso".into())),
            _ => {}
        }
        if let Some(l) = self.lambda_lag {
            if self.kind != PenaltyKind::DecoupledL1 {
                return Err(Error::Config("lambda_lag applies only to DecoupledL1".into()));
            }
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::Config(format!("lambda_lag must be finite and >= 0, got {l}")));
            }
        }
        Ok(())
    }

    /// Rejects penalty/model combinations that have no meaning.
    pub fn check_model(&self, kind: ModelKind) -> Result<()> {
        self.validate()?;
        match self.kind {
            PenaltyKind::DecoupledL1 if !kind.is_decoupled() => Err(Error::Config(format!(
                "DecoupledL1 needs decoupling factors; {} has none",
                kind.name()
            ))),
            PenaltyKind::HierarchicalGroupLasso if kind.is_recurrent() => Err(Error::Config(format!(
                "the hierarchical penalty does not apply to recurrent model {}",
                kind.name()
            ))),
            PenaltyKind::HierarchicalGroupLasso | PenaltyKind::SparseGroupLasso
                if kind.is_recurrent() || kind.is_decoupled() =>
            {
                Err(Error::Config(format!(
                    "{:?} needs per-lag weight groups, which {} does not have",
                    self.kind,
                    kind.name()
                )))
            }
            _ => Ok(()),
        }
    }
}

/// A 1-D group node that splits into `num_lags` equal consecutive subgroups,
/// lag 1 first.
#[derive(Debug, Clone, Copy)]
pub struct LaggedGroup {
    pub node: NodeId,
    pub num_lags: usize,
}

fn lag_block(g: &Graph, group: &LaggedGroup) -> Result<usize> {
    let len = g.value(group.node).len();
    if group.num_lags == 0 || len % group.num_lags != 0 || g.value(group.node).shape().len() != 1 {
        return Err(Error::Structure(format!(
            "group of {len} weights does not split into {} lag subgroups",
            group.num_lags
        )));
    }
    Ok(len / group.num_lags)
}

fn non_empty<T>(groups: &[T]) -> Result<()> {
    if groups.is_empty() {
        Err(Error::Usage("penalty needs at least one group".into()))
    } else {
        Ok(())
    }
}

/// `Σ_g ‖g‖₂`.
pub fn group_lasso(g: &mut Graph, groups: &[NodeId]) -> Result<NodeId> {
    non_empty(groups)?;
    let norms = groups.iter().map(|&n| g.l2_norm(n)).collect::<Result<Vec<_>>>()?;
    g.add_all(&norms)
}

/// `Σ_g [α‖g‖₂ + (1-α) Σ_k ‖g_k‖₂]`.
pub fn sparse_group_lasso(g: &mut Graph, groups: &[LaggedGroup], alpha: f64) -> Result<NodeId> {
    non_empty(groups)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let mut terms = Vec::new();
    for group in groups {
        let block = lag_block(g, group)?;
        let whole = g.l2_norm(group.node)?;
        terms.push(g.scale(whole, alpha)?);
        let mut lag_norms = Vec::with_capacity(group.num_lags);
        for k in 0..group.num_lags {
            let s = g.slice(group.node, 0, k * block, (k + 1) * block)?;
            lag_norms.push(g.l2_norm(s)?);
        }
        let within = g.add_all(&lag_norms)?;
        terms.push(g.scale(within, 1.0 - alpha)?);
    }
    g.add_all(&terms)
}

/// `Σ_g Σ_{k=1..K} ‖(g_k, ..., g_K)‖₂`: higher lags sit in more terms and
/// are shrunk first.
pub fn hierarchical_group_lasso(g: &mut Graph, groups: &[LaggedGroup]) -> Result<NodeId> {
    non_empty(groups)?;
    let mut terms = Vec::new();
    for group in groups {
        let block = lag_block(g, group)?;
        let len = block * group.num_lags;
        for k in 0..group.num_lags {
            let suffix = g.slice(group.node, 0, k * block, len)?;
            terms.push(g.l2_norm(suffix)?);
        }
    }
    g.add_all(&terms)
}

/// `λ_v Σ_j |v_j| + λ_q Σ_k |q_k|`.
pub fn decoupled_l1(g: &mut Graph, v: NodeId, q: NodeId, lambda_v: f64, lambda_q: f64) -> Result<NodeId> {
    let av = g.abs(v)?;
    let sv = g.sum(av)?;
    let sv = g.scale(sv, lambda_v)?;
    let aq = g.abs(q)?;
    let sq = g.sum(aq)?;
    let sq = g.scale(sq, lambda_q)?;
    g.add(sv, sq)
}

/// The λ-scaled penalty of `model` with parameters bound at `nodes`.
pub fn penalty_term(g: &mut Graph, model: &Model, nodes: &[NodeId], config: &PenaltyConfig) -> Result<NodeId> {
    config.check_model(model.kind())?;
    let groups = model.penalized_groups();

    if model.kind().is_decoupled() {
        // Every group is a single factor, so the group norm is |·| and all
        // norm-based kinds reduce to the L1 form.
        let first = groups.first().ok_or_else(|| Error::Usage("model has no penalized groups".into()))?;
        let v = nodes[first.param];
        let q_param = groups
            .iter()
            .find(|gr| matches!(gr.role, GroupRole::LagFactor { .. }))
            .map(|gr| gr.param)
            .ok_or_else(|| Error::Usage("decoupled model without lag factors".into()))?;
        let lambda_q = config.lambda_lag.unwrap_or(config.lambda);
        return decoupled_l1(g, v, nodes[q_param], config.lambda, lambda_q);
    }

    let mut flat_cache: Vec<Option<NodeId>> = vec![None; nodes.len()];
    let mut group_nodes = Vec::with_capacity(groups.len());
    for gr in &groups {
        let flat = match flat_cache[gr.param] {
            Some(f) => f,
            None => {
                let len = g.value(nodes[gr.param]).len();
                let f = g.reshape(nodes[gr.param], vec![len])?;
                flat_cache[gr.param] = Some(f);
                f
            }
        };
        let node = g.slice(flat, 0, gr.range.start, gr.range.end)?;
        group_nodes.push((node, gr.num_lags));
    }
    let lagged = || -> Result<Vec<LaggedGroup>> {
        group_nodes
            .iter()
            .map(|&(node, lags)| {
                lags.map(|num_lags| LaggedGroup { node, num_lags })
                    .ok_or_else(|| Error::Structure("group has no lag partition".into()))
            })
            .collect()
    };
    let raw = match config.kind {
        PenaltyKind::GroupLasso => {
            let ids: Vec<NodeId> = group_nodes.iter().map(|&(n, _)| n).collect();
            group_lasso(g, &ids)?
        }
        PenaltyKind::SparseGroupLasso => {
            let alpha = config.alpha.expect("validated");
            sparse_group_lasso(g, &lagged()?, alpha)?
        }
        PenaltyKind::HierarchicalGroupLasso => hierarchical_group_lasso(g, &lagged()?)?,
        PenaltyKind::DecoupledL1 => unreachable!("rejected by check_model"),
    };
    g.scale(raw, config.lambda)
}

/// Evaluates the λ-scaled penalty at the model's current parameters.
pub fn penalty_value(model: &Model, config: &PenaltyConfig) -> Result<f64> {
    let mut g = Graph::new();
    let nodes: Vec<NodeId> = model.tensors().into_iter().map(|(_, t)| g.leaf(t.clone())).collect();
    let out = penalty_term(&mut g, model, &nodes, config)?;
    Ok(g.value(out).values()[0])
}

/// Convenience for evaluating a penalty built from literal groups.
pub fn evaluate<F>(groups: &[Vec<f64>], build: F) -> Result<f64>
where
    F: FnOnce(&mut Graph, &[NodeId]) -> Result<NodeId>,
{
    let mut g = Graph::new();
    let ids = groups
        .iter()
        .map(|v| Ok(g.leaf(Tensor::vector(v.clone())?)))
        .collect::<Result<Vec<_>>>()?;
    let out = build(&mut g, &ids)?;
    Ok(g.value(out).values()[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ModelConfig, ModelSpec};

    fn gl(groups: &[Vec<f64>]) -> f64 {
        evaluate(groups, |g, ids| group_lasso(g, ids)).unwrap()
    }

    fn sgl(groups: &[Vec<f64>], lags: usize, alpha: f64) -> Result<f64> {
        evaluate(groups, |g, ids| {
            let lg: Vec<LaggedGroup> = ids.iter().map(|&node| LaggedGroup { node, num_lags: lags }).collect();
            sparse_group_lasso(g, &lg, alpha)
        })
    }

    fn hgl(groups: &[Vec<f64>], lags: usize) -> f64 {
        evaluate(groups, |g, ids| {
            let lg: Vec<LaggedGroup> = ids.iter().map(|&node| LaggedGroup { node, num_lags: lags }).collect();
            hierarchical_group_lasso(g, &lg)
        })
        .unwrap()
    }

    fn l1(v: Vec<f64>, q: Vec<f64>, lv: f64, lq: f64) -> f64 {
        evaluate(&[v, q], |g, ids| decoupled_l1(g, ids[0], ids[1], lv, lq)).unwrap()
    }

    #[test]
    fn group_lasso_examples() {
        assert_eq!(gl(&[vec![3.0, 4.0]]), 5.0);
        assert_eq!(gl(&[vec![0.0, 0.0], vec![0.0]]), 0.0);
        assert_eq!(gl(&[vec![1.0, 0.0], vec![0.0, 2.0]]), 3.0);
    }

    #[test]
    fn sparse_group_lasso_examples() {
        assert_eq!(sgl(&[vec![3.0, 4.0, 0.0, 0.0]], 2, 0.5).unwrap(), 5.0);
        let w = vec![vec![0.3, -1.2, 0.7, 2.0], vec![1.0, 1.0, -0.5, 0.25]];
        assert_eq!(sgl(&w, 2, 1.0).unwrap(), gl(&w));
        assert_eq!(sgl(&[vec![0.0; 4]], 2, 0.3).unwrap(), 0.0);
        let per_lag = (0.3f64.powi(2) + 1.2f64.powi(2)).sqrt() + (0.7f64.powi(2) + 4.0f64).sqrt();
        assert!((sgl(&w[..1], 2, 0.0).unwrap() - per_lag).abs() < 1e-15);
    }

    #[test]
    fn sparse_group_lasso_partition_mismatch() {
        assert!(matches!(sgl(&[vec![1.0, 2.0, 3.0]], 2, 0.5), Err(Error::Structure(_))));
    }

    #[test]
    fn hierarchical_examples() {
        // lag blocks of one weight each: (lag1, lag2)
        assert_eq!(hgl(&[vec![3.0, 4.0, 0.0, 0.0]], 2), 5.0);
        assert_eq!(hgl(&[vec![0.0, 0.0, 3.0, 4.0]], 2), 10.0);
        assert_eq!(hgl(&[vec![0.0; 6]], 3), 0.0);
    }

    #[test]
    fn decoupled_examples() {
        assert_eq!(l1(vec![1.0, -2.0], vec![3.0], 1.0, 1.0), 6.0);
        assert_eq!(l1(vec![1.0, -2.0], vec![3.0], 0.0, 0.0), 0.0);
        assert_eq!(l1(vec![0.0, 0.0], vec![3.0, -1.0], 1.0, 0.0), 0.0);
    }

    #[test]
    fn model_compatibility() {
        let hier = PenaltyConfig::new(PenaltyKind::HierarchicalGroupLasso, 0.1);
        assert!(matches!(hier.check_model(ModelKind::CLstm), Err(Error::Config(_))));
        assert!(hier.check_model(ModelKind::CMlp).is_ok());
        let l1 = PenaltyConfig::new(PenaltyKind::DecoupledL1, 0.1);
        assert!(l1.check_model(ModelKind::Var).is_err());
        assert!(l1.check_model(ModelKind::CLstmWf).is_ok());
        let mut sgl = PenaltyConfig::new(PenaltyKind::SparseGroupLasso, 0.1);
        assert!(sgl.validate().is_err());
        sgl.alpha = Some(0.5);
        assert!(sgl.validate().is_ok());
        assert!(PenaltyConfig::new(PenaltyKind::GroupLasso, -1.0).validate().is_err());
    }

    #[test]
    fn model_penalty_matches_direct_sums() {
        let cfg = ModelConfig::new(ModelSpec::new(ModelKind::Var, false), 3, 2, None).unwrap();
        let m = Model::new(cfg, 3).unwrap();
        let expect: f64 = m
            .penalized_groups()
            .iter()
            .map(|gr| gr.values(&m).iter().map(|x| x * x).sum::<f64>().sqrt())
            .sum();
        let got = penalty_value(&m, &PenaltyConfig::new(PenaltyKind::GroupLasso, 2.0)).unwrap();
        assert!((got - 2.0 * expect).abs() < 1e-12);

        let cfg = ModelConfig::new("cLSTMwF".parse().unwrap(), 3, 2, Some(0)).unwrap();
        let m = Model::new(cfg, 3).unwrap();
        // v = q = 1 at init: 3 + 2 entries.
        let got = penalty_value(&m, &PenaltyConfig::new(PenaltyKind::GroupLasso, 0.5)).unwrap();
        assert_eq!(got, 2.5);
        let mut cfg = PenaltyConfig::new(PenaltyKind::DecoupledL1, 1.0);
        cfg.lambda_lag = Some(0.0);
        assert_eq!(penalty_value(&m, &cfg).unwrap(), 3.0);
    }
}
