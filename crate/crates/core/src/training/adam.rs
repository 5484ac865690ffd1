use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Model;

/// Adam step sizes and moment decay rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

/// First and second moment estimates for one parameter group.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn zeros(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

/// One bias-corrected Adam update of `params` in place; `t` counts steps
/// from 1. `group` names the parameters in error messages.
pub fn adam_step(
    group: &str,
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    hyper: &AdamHyper,
    t: u64,
) -> Result<()> {
    if t == 0 {
        return Err(Error::Usage("Adam step counter starts at 1".into()));
    }
    if grads.len() != params.len() || state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::dim(
            "adam_step",
            format!(
                "{group}: {} params, {} grads, moments {}/{}",
                params.len(),
                grads.len(),
                state.m.len(),
                state.v.len()
            ),
        ));
    }
    check_finite(group, grads)?;
    let AdamHyper {
        learning_rate: lr,
        beta1: b1,
        beta2: b2,
        eps,
    } = *hyper;
    let c1 = 1.0 - b1.powf(t as f64);
    let c2 = 1.0 - b2.powf(t as f64);
    for (((w, &g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
    }
    Ok(())
}

fn check_finite(group: &str, grads: &[f64]) -> Result<()> {
    match grads.iter().position(|g| !g.is_finite()) {
        Some(i) => Err(Error::Numeric {
            op: "adam_step",
            detail: format!("non-finite gradient {} in parameter group {group} at index {i}", grads[i]),
        }),
        None => Ok(()),
    }
}

/// Adam over every parameter tensor of a model.
#[derive(Debug, Clone)]
pub struct Adam {
    hyper: AdamHyper,
    states: Vec<AdamState>,
    t: u64,
}

impl Adam {
    pub fn new(model: &Model, hyper: AdamHyper) -> Self {
        Self {
            hyper,
            states: model.tensors().iter().map(|(_, t)| AdamState::zeros(t.len())).collect(),
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Applies one update; gradients are checked before anything changes.
    pub fn step(&mut self, model: &mut Model, grads: &[Vec<f64>]) -> Result<()> {
        let names: Vec<String> = model.tensors().into_iter().map(|(n, _)| n).collect();
        if grads.len() != names.len() {
            return Err(Error::dim("adam", format!("{} gradients for {} tensors", grads.len(), names.len())));
        }
        for (name, g) in names.iter().zip(grads) {
            check_finite(name, g)?;
        }
        self.t += 1;
        for (((name, tensor), g), state) in names
            .iter()
            .zip(model.params_mut().tensors_mut())
            .zip(grads)
            .zip(&mut self.states)
        {
            let mut values = tensor.values().to_vec();
            adam_step(name, &mut values, g, state, &self.hyper, self.t)?;
            tensor.set_values(values)?;
        }
        model.after_step();
        Ok(())
    }
}
