use nalgebra::{DMatrix, Schur};
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::TimeSeriesPanel;
use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};

pub const STABILITY_RADIUS: f64 = 0.95;
pub const MAX_STABILITY_TRIES: usize = 1000;
const DIVERGENCE_BOUND: f64 = 1e6;

/// Sparse VAR generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VarConfig {
    pub num_series: usize,
    pub length: usize,
    /// 1-based lags that carry nonzero coefficients.
    pub causal_lags: Vec<usize>,
    /// Fraction of series (self included) that drive each target.
    pub density: f64,
    pub coeff: f64,
    pub noise_sd: f64,
    pub burn_in: usize,
    /// Starting state `x_0`; drawn from the noise distribution when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
}

impl Default for VarConfig {
    fn default() -> Self {
        Self {
            num_series: 10,
            length: 1000,
            causal_lags: vec![1, 2, 3],
            density: 0.2,
            coeff: 0.1,
            noise_sd: 0.1,
            burn_in: 200,
            initial: None,
        }
    }
}

impl VarConfig {
    pub fn max_lag(&self) -> usize {
        self.causal_lags.iter().copied().max().unwrap_or(0)
    }

    fn validate(&self) -> Result<()> {
        let p = self.num_series;
        if p == 0 || self.length == 0 {
            return Err(Error::Usage("VAR simulation needs p >= 1 and T >= 1".into()));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::Usage(format!("density must lie in (0, 1], got {}", self.density)));
        }
        if self.causal_lags.is_empty() || self.causal_lags.contains(&0) {
            return Err(Error::Usage("causal lags must be a nonempty set of lags >= 1".into()));
        }
        if !self.coeff.is_finite() || !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::Usage("coeff must be finite and noise_sd finite and >= 0".into()));
        }
        if let Some(init) = &self.initial {
            if init.len() != p {
                return Err(Error::Usage(format!("initial state has {} values, expected {p}", init.len())));
            }
        }
        Ok(())
    }
}

/// Coefficients of a generated VAR process.
#[derive(Debug, Clone, PartialEq)]
pub struct VarSystem {
    /// `coefficients[k-1][i][j]` = `A^{(k)}_{ij}`.
    pub coefficients: Vec<Vec<Vec<f64>>>,
    /// Selected cause sets; `support[i][j] = 1` iff `j` drives `i`.
    pub support: Vec<Vec<u8>>,
}

impl VarSystem {
    pub fn spectral_radius(&self) -> f64 {
        companion_spectral_radius(&self.coefficients)
    }
}

/// Largest eigenvalue modulus of the companion matrix of `A^{(1..K)}`.
pub fn companion_spectral_radius(coefficients: &[Vec<Vec<f64>>]) -> f64 {
    let k = coefficients.len();
    let p = coefficients.first().map_or(0, Vec::len);
    if k == 0 || p == 0 {
        return 0.0;
    }
    let n = k * p;
    let mut c = DMatrix::<f64>::zeros(n, n);
    for (lag, a) in coefficients.iter().enumerate() {
        for i in 0..p {
            for j in 0..p {
                c[(i, lag * p + j)] = a[i][j];
            }
        }
    }
    for r in p..n {
        c[(r, r - p)] = 1.0;
    }
    match Schur::try_new(c.clone(), 1e-13, 100_000) {
        Some(schur) => schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max),
        None => gelfand_radius(c),
    }
}

/// `‖C^n‖^(1/n)` for `n = 2^40` by repeated squaring, renormalizing to keep
/// the powers finite.
pub(super) fn gelfand_radius(mut c: DMatrix<f64>) -> f64 {
    let mut log_scale = 0.0;
    let mut power = 1.0;
    for _ in 0..40 {
        let norm = c.norm();
        if norm == 0.0 {
            return 0.0;
        }
        c /= norm;
        log_scale += norm.ln() / power;
        c = &c * &c;
        power *= 2.0;
    }
    (log_scale + c.norm().ln() / power).exp()
}

fn draw_system(config: &VarConfig, support_rng: &mut StreamRng, sign_rng: &mut StreamRng) -> VarSystem {
    let p = config.num_series;
    let n_causes = ((config.density * p as f64).ceil() as usize).clamp(1, p);
    let mut support = vec![vec![0u8; p]; p];
    let mut coefficients = vec![vec![vec![0.0; p]; p]; config.max_lag()];
    for i in 0..p {
        support[i][i] = 1;
        for pick in index::sample(support_rng, p - 1, n_causes - 1) {
            let j = if pick >= i { pick + 1 } else { pick };
            support[i][j] = 1;
        }
        for j in 0..p {
            if support[i][j] == 0 {
                continue;
            }
            // Self-edges stay positive so a lone series is a plain AR process.
            let sign = if i == j || sign_rng.random_bool(0.5) { 1.0 } else { -1.0 };
            for &lag in &config.causal_lags {
                coefficients[lag - 1][i][j] = config.coeff * sign;
            }
        }
    }
    VarSystem { coefficients, support }
}

/// Draws supports and signs until the process is stable.
pub fn var_system(config: &VarConfig, seed: u64) -> Result<VarSystem> {
    config.validate()?;
    let mut support_rng = rng::stream(seed, "var.support");
    let mut sign_rng = rng::stream(seed, "var.signs");
    for _ in 0..MAX_STABILITY_TRIES {
        let system = draw_system(config, &mut support_rng, &mut sign_rng);
        if system.spectral_radius() <= STABILITY_RADIUS {
            return Ok(system);
        }
    }
    Err(Error::Generation(format!(
        "no stable VAR found in {MAX_STABILITY_TRIES} draws (coeff {}); try a smaller coeff",
        config.coeff
    )))
}

/// Simulates a sparse stable VAR and records its support as ground truth.
pub fn simulate_var(config: &VarConfig, seed: u64) -> Result<TimeSeriesPanel> {
    let system = var_system(config, seed)?;
    let p = config.num_series;
    let k_max = config.max_lag();
    let mut noise = rng::stream(seed, "var.noise");
    let draw = |noise: &mut StreamRng| -> Vec<f64> {
        (0..p)
            .map(|_| config.noise_sd * noise.sample::<f64, _>(StandardNormal))
            .collect()
    };
    let total = config.burn_in + config.length;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(total);
    rows.push(config.initial.clone().unwrap_or_else(|| draw(&mut noise)));
    for t in 1..total {
        let mut x = draw(&mut noise);
        for lag in 1..=k_max.min(t) {
            let prev = &rows[t - lag];
            for (i, xi) in x.iter_mut().enumerate() {
                *xi += system.coefficients[lag - 1][i].iter().zip(prev).map(|(a, v)| a * v).sum::<f64>();
            }
        }
        rows.push(x);
    }
    rows.drain(..config.burn_in);
    let truth_lags = (0..p)
        .map(|_| (1..=k_max).map(|k| u8::from(config.causal_lags.contains(&k))).collect())
        .collect();
    let mut panel = TimeSeriesPanel::new(rows, TimeSeriesPanel::default_names(p))?.with_truth(system.support)?;
    panel.truth_lags = Some(truth_lags);
    Ok(panel)
}

/// Lorenz-96 generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Lorenz96Config {
    pub num_series: usize,
    pub length: usize,
    pub forcing: f64,
    /// Spacing of recorded samples.
    pub dt: f64,
    /// RK4 steps per recorded sample.
    pub substeps: usize,
    pub burn_in: usize,
    pub init_sd: f64,
    pub noise_sd: f64,
}

impl Default for Lorenz96Config {
    fn default() -> Self {
        Self {
            num_series: 20,
            length: 1000,
            forcing: 20.0,
            dt: 0.05,
            substeps: 10,
            burn_in: 1000,
            init_sd: 0.01,
            noise_sd: 0.01,
        }
    }
}

/// `dx_i/dt = (x_{i+1} - x_{i-2}) x_{i-1} - x_i + F` with cyclic indices.
pub fn lorenz96_derivative(x: &[f64], forcing: f64, out: &mut [f64]) {
    let p = x.len();
    for i in 0..p {
        let next = x[(i + 1) % p];
        let prev = x[(i + p - 1) % p];
        let prev2 = x[(i + p - 2) % p];
        out[i] = (next - prev2) * prev - x[i] + forcing;
    }
}

/// One classical Runge-Kutta step of size `h`.
pub fn rk4_step(x: &mut [f64], forcing: f64, h: f64) {
    let p = x.len();
    let mut k1 = vec![0.0; p];
    let mut k2 = vec![0.0; p];
    let mut k3 = vec![0.0; p];
    let mut k4 = vec![0.0; p];
    let mut tmp = vec![0.0; p];
    lorenz96_derivative(x, forcing, &mut k1);
    for i in 0..p {
        tmp[i] = x[i] + 0.5 * h * k1[i];
    }
    lorenz96_derivative(&tmp, forcing, &mut k2);
    for i in 0..p {
        tmp[i] = x[i] + 0.5 * h * k2[i];
    }
    lorenz96_derivative(&tmp, forcing, &mut k3);
    for i in 0..p {
        tmp[i] = x[i] + h * k3[i];
    }
    lorenz96_derivative(&tmp, forcing, &mut k4);
    for i in 0..p {
        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// `truth[i][j] = 1` for `j` in `{i-2, i-1, i, i+1}` (mod p).
pub fn lorenz96_truth(p: usize) -> Vec<Vec<u8>> {
    let mut truth = vec![vec![0u8; p]; p];
    for (i, row) in truth.iter_mut().enumerate() {
        for offset in [p - 2, p - 1, 0, 1] {
            row[(i + offset) % p] = 1;
        }
    }
    truth
}

pub fn simulate_lorenz96(config: &Lorenz96Config, seed: u64) -> Result<TimeSeriesPanel> {
    let p = config.num_series;
    if p < 4 {
        return Err(Error::Usage(format!("Lorenz-96 needs at least 4 series, got {p}")));
    }
    if !(config.dt > 0.0 && config.dt.is_finite()) || config.substeps == 0 || config.length == 0 {
        return Err(Error::Usage("Lorenz-96 needs dt > 0, substeps >= 1 and T >= 1".into()));
    }
    let mut init = rng::stream(seed, "lorenz.init");
    let mut noise = rng::stream(seed, "lorenz.noise");
    let mut x: Vec<f64> = (0..p)
        .map(|_| config.forcing + config.init_sd * init.sample::<f64, _>(StandardNormal))
        .collect();
    let h = config.dt / config.substeps as f64;
    let mut rows = Vec::with_capacity(config.length);
    for step in 0..config.burn_in + config.length {
        for _ in 0..config.substeps {
            rk4_step(&mut x, config.forcing, h);
        }
        if x.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_BOUND) {
            return Err(Error::Integration(format!(
                "trajectory left |x| <= {DIVERGENCE_BOUND} at recorded step {step}; use more substeps"
            )));
        }
        if step >= config.burn_in {
            rows.push(
                x.iter()
                    .map(|v| v + config.noise_sd * noise.sample::<f64, _>(StandardNormal))
                    .collect(),
            );
        }
    }
    TimeSeriesPanel::new(rows, TimeSeriesPanel::default_names(p))?.with_truth(lorenz96_truth(p))
}
