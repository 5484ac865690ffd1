use super::graph::{Graph, NodeId};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Compares reverse-mode gradients of a scalar function against central
/// differences `(f(x+h e) - f(x-h e)) / 2h`.
///
/// `function` receives a fresh graph and the leaf holding the probe point and
/// must return a scalar node. Returns the largest
/// `|analytic - numeric| / max(1, |analytic|)` over all coordinates.
pub fn grad_check<F>(function: F, point: &Tensor, step: f64) -> Result<f64>
where
    F: Fn(&mut Graph, NodeId) -> Result<NodeId>,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Usage(format!("grad_check step must be positive, got {step}")));
    }
    let mut g = Graph::new();
    let x = g.leaf(point.clone().requiring_grad());
    let out = function(&mut g, x)?;
    if g.value(out).len() != 1 {
        return Err(Error::Usage("grad_check needs a scalar-valued function".into()));
    }
    g.backward(out)?;
    let analytic = g
        .grad(x)
        .map(<[f64]>::to_vec)
        .unwrap_or_else(|| vec![0.0; point.len()]);

    let eval = |values: Vec<f64>| -> Result<f64> {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::new(point.shape().to_vec(), values)?);
        let out = function(&mut g, x)?;
        let v = g.value(out).values()[0];
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Numeric {
                op: "grad_check",
                detail: "non-finite function value in probe region".into(),
            })
        }
    };

    let mut worst = 0.0f64;
    for (i, &a) in analytic.iter().enumerate() {
        let mut plus = point.values().to_vec();
        plus[i] += step;
        let mut minus = point.values().to_vec();
        minus[i] -= step;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * step);
        worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
    }
    Ok(worst)
}
