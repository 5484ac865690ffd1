//! Gradient self-check over every primitive, penalty and model kind.
//!
//! Each case builds a scalar function of one flat input vector and compares
//! reverse-mode gradients with central differences at random points.

use rand::Rng;

use crate::autodiff::{grad_check, Graph, NodeId, Tensor};
use crate::error::Result;
use crate::models::{Model, ModelConfig, ModelKind, ModelSpec, WindowBatch};
use crate::penalties::{decoupled_l1, group_lasso, hierarchical_group_lasso, sparse_group_lasso, LaggedGroup};
use crate::rng::indexed_stream;

pub const SUITE_STEP: f64 = 1e-5;
pub const SUITE_TOLERANCE: f64 = 1e-5;

/// Smallest `|x|` sampled for cases with a kink at zero.
const KINK_MARGIN: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckCase {
    pub name: String,
    pub points: usize,
    pub worst: f64,
}

impl CheckCase {
    pub fn passed(&self) -> bool {
        self.worst < SUITE_TOLERANCE
    }
}

type Build = Box<dyn Fn(&mut Graph, NodeId) -> Result<NodeId>>;

struct Case {
    name: String,
    dim: usize,
    kinked: bool,
    build: Build,
}

fn case(name: &str, dim: usize, kinked: bool, build: impl Fn(&mut Graph, NodeId) -> Result<NodeId> + 'static) -> Case {
    Case {
        name: name.to_string(),
        dim,
        kinked,
        build: Box::new(build),
    }
}

/// Reads `len` entries of `x` from `offset` as a tensor of `shape`.
fn part(g: &mut Graph, x: NodeId, offset: usize, shape: &[usize]) -> Result<NodeId> {
    let len: usize = shape.iter().product();
    let s = g.slice(x, 0, offset, offset + len)?;
    g.reshape(s, shape.to_vec())
}

/// Contracts `y` with fixed weights so every output coordinate matters.
fn project(g: &mut Graph, y: NodeId) -> Result<NodeId> {
    let n = g.value(y).len();
    let w: Vec<f64> = (0..n).map(|i| 0.5 + 0.37 * ((i * 7 % 11) as f64) / 11.0).collect();
    let flat = g.reshape(y, vec![n])?;
    let w = g.constant(vec![n], w)?;
    let prod = g.mul(flat, w)?;
    g.sum(prod)
}

fn primitive_cases() -> Vec<Case> {
    vec![
        case("add", 12, false, |g, x| {
            let (a, b) = (part(g, x, 0, &[2, 3])?, part(g, x, 6, &[2, 3])?);
            let y = g.add(a, b)?;
            let y = g.mul(y, y)?;
            project(g, y)
        }),
        case("sub", 12, false, |g, x| {
            let (a, b) = (part(g, x, 0, &[2, 3])?, part(g, x, 6, &[2, 3])?);
            let y = g.sub(a, b)?;
            let y = g.mul(y, y)?;
            project(g, y)
        }),
        case("mul", 12, false, |g, x| {
            let (a, b) = (part(g, x, 0, &[2, 3])?, part(g, x, 6, &[2, 3])?);
            let y = g.mul(a, b)?;
            project(g, y)
        }),
        case("scale", 6, false, |g, x| {
            let y = g.scale(x, -1.7)?;
            let y = g.mul(y, x)?;
            project(g, y)
        }),
        case("add_row", 9, false, |g, x| {
            let (a, b) = (part(g, x, 0, &[2, 3])?, part(g, x, 6, &[3])?);
            let y = g.add_row(a, b)?;
            let y = g.mul(y, y)?;
            project(g, y)
        }),
        case("mul_row", 9, false, |g, x| {
            let (a, b) = (part(g, x, 0, &[2, 3])?, part(g, x, 6, &[3])?);
            let y = g.mul_row(a, b)?;
            project(g, y)
        }),
        case("matmul", 14, false, |g, x| {
            let (a, b) = (part(g, x, 0, &[2, 3])?, part(g, x, 6, &[3, 2])?);
            let y = g.matmul(a, b)?;
            project(g, y)
        }),
        case("transpose", 6, false, |g, x| {
            let a = part(g, x, 0, &[2, 3])?;
            let y = g.transpose(a)?;
            let y = g.mul(y, y)?;
            project(g, y)
        }),
        case("sigmoid", 6, false, |g, x| {
            let y = g.sigmoid(x)?;
            project(g, y)
        }),
        case("tanh", 6, false, |g, x| {
            let y = g.tanh(x)?;
            project(g, y)
        }),
        case("abs", 6, true, |g, x| {
            let y = g.abs(x)?;
            project(g, y)
        }),
        case("sum", 6, false, |g, x| {
            let y = g.mul(x, x)?;
            g.sum(y)
        }),
        case("l2_norm", 6, false, |g, x| g.l2_norm(x)),
        case("normalize_rows", 6, false, |g, x| {
            let a = part(g, x, 0, &[2, 3])?;
            let y = g.normalize_rows(a)?;
            project(g, y)
        }),
        case("outer", 5, false, |g, x| {
            let (a, b) = (part(g, x, 0, &[2])?, part(g, x, 2, &[3])?);
            let y = g.outer(a, b)?;
            project(g, y)
        }),
        case("mse", 12, false, |g, x| {
            let (a, b) = (part(g, x, 0, &[2, 3])?, part(g, x, 6, &[2, 3])?);
            g.mse(a, b)
        }),
        case("concat", 10, false, |g, x| {
            let (a, b) = (part(g, x, 0, &[2, 2])?, part(g, x, 4, &[2, 3])?);
            let y = g.concat(&[a, b], 1)?;
            let y = g.mul(y, y)?;
            project(g, y)
        }),
        case("slice", 8, false, |g, x| {
            let a = part(g, x, 0, &[2, 4])?;
            let y = g.slice(a, 1, 1, 3)?;
            let y = g.mul(y, y)?;
            project(g, y)
        }),
        case("reshape", 6, false, |g, x| {
            let y = g.reshape(x, vec![3, 2])?;
            let y = g.mul(y, y)?;
            project(g, y)
        }),
    ]
}

fn penalty_cases() -> Vec<Case> {
    vec![
        case("group_lasso", 12, false, |g, x| {
            let groups = (0..3).map(|i| part(g, x, 4 * i, &[4])).collect::<Result<Vec<_>>>()?;
            group_lasso(g, &groups)
        }),
        case("sparse_group_lasso", 12, false, |g, x| {
            let groups = (0..2)
                .map(|i| Ok(LaggedGroup { node: part(g, x, 6 * i, &[6])?, num_lags: 3 }))
                .collect::<Result<Vec<_>>>()?;
            sparse_group_lasso(g, &groups, 0.4)
        }),
        case("hierarchical_group_lasso", 12, false, |g, x| {
            let groups = (0..2)
                .map(|i| Ok(LaggedGroup { node: part(g, x, 6 * i, &[6])?, num_lags: 3 }))
                .collect::<Result<Vec<_>>>()?;
            hierarchical_group_lasso(g, &groups)
        }),
        case("decoupled_l1", 7, true, |g, x| {
            let (v, q) = (part(g, x, 0, &[4])?, part(g, x, 4, &[3])?);
            decoupled_l1(g, v, q, 0.3, 0.7)
        }),
    ]
}

const MODEL_SERIES: usize = 3;
const MODEL_LAGS: usize = 2;
const MODEL_WINDOWS: usize = 4;

fn model_cases(seed: u64) -> Result<Vec<Case>> {
    let mut rng = indexed_stream(seed, "selfcheck.batch", 0);
    let per = MODEL_SERIES * MODEL_LAGS;
    let inputs: Vec<f64> = (0..MODEL_WINDOWS * per).map(|_| rng.random_range(-2.0..2.0)).collect();
    let mut cases = Vec::new();
    for kind in ModelKind::ALL {
        let target = kind.is_component_wise().then_some(0);
        let config = ModelConfig::new(ModelSpec::new(kind, false), MODEL_SERIES, MODEL_LAGS, target)?;
        let model = Model::new(config, seed)?;
        let outputs = model.config().outputs();
        let targets: Vec<f64> = (0..MODEL_WINDOWS * outputs).map(|_| rng.random_range(-1.0..1.0)).collect();
        let batch = WindowBatch::new(inputs.clone(), MODEL_LAGS, MODEL_SERIES)?;
        let dim = model.num_parameters();
        cases.push(case(kind.name(), dim, false, move |g, x| {
            let nodes = model.bind_flat(g, x)?;
            let pred = model.forward(g, &nodes, &batch)?;
            let t = g.constant(vec![MODEL_WINDOWS, outputs], targets.clone())?;
            g.mse(pred, t)
        }));
    }
    Ok(cases)
}

/// Runs every case at `points` random points with entries in `[-2, 2]`.
///
/// Points for functions with a kink at zero keep every entry at least
/// `KINK_MARGIN` away from it.
pub fn gradient_suite(points: usize, seed: u64) -> Result<Vec<CheckCase>> {
    let mut cases = primitive_cases();
    cases.extend(penalty_cases());
    cases.extend(model_cases(seed)?);
    let mut report = Vec::with_capacity(cases.len());
    for (index, c) in cases.iter().enumerate() {
        let mut rng = indexed_stream(seed, "selfcheck.points", index as u64);
        let mut worst = 0.0f64;
        for _ in 0..points {
            let values: Vec<f64> = (0..c.dim)
                .map(|_| loop {
                    let v: f64 = rng.random_range(-2.0..2.0);
                    if !c.kinked || v.abs() >= KINK_MARGIN {
                        break v;
                    }
                })
                .collect();
            let point = Tensor::vector(values)?;
            worst = worst.max(grad_check(&c.build, &point, SUITE_STEP)?);
        }
        report.push(CheckCase {
            name: c.name.clone(),
            points,
            worst,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covers_every_primitive_and_model_kind() {
        let report = gradient_suite(3, 7).unwrap();
        let names: Vec<&str> = report.iter().map(|c| c.name.as_str()).collect();
        for kind in ModelKind::ALL {
            assert!(names.contains(&kind.name()), "{names:?}");
        }
        assert!(names.contains(&"normalize_rows") && names.contains(&"decoupled_l1"));
        for c in &report {
            assert!(c.passed(), "{c:?}");
        }
    }
}
