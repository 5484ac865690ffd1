use rand::Rng;
use rand_distr::Uniform;

use super::config::{KernelMode, ModelConfig, ModelKind, DEFAULT_WIDTH};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Uniform in [-a, a] with a = 1/sqrt(fan_in).
fn uniform<R: Rng>(shape: Vec<usize>, fan_in: usize, rng: &mut R) -> Tensor {
    let a = 1.0 / (fan_in as f64).sqrt();
    let dist = Uniform::new_inclusive(-a, a).expect("finite bound");
    let n = shape.iter().product();
    let values = (0..n).map(|_| rng.sample(dist)).collect();
    Tensor::new(shape, values).expect("finite init")
}

/// Linear autoregressive coefficients.
///
/// `coef` has shape `[p, p*K]`; entry `[i, j*K + (k-1)]` is `A^{(k)}_{ij}`, so
/// the lag vector of every (effect `i`, cause `j`) pair is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct VarParams {
    pub coef: Tensor,
    pub bias: Tensor,
}

impl VarParams {
    pub fn zeros(num_series: usize, max_lag: usize) -> Self {
        Self {
            coef: Tensor::zeros(vec![num_series, num_series * max_lag]),
            bias: Tensor::zeros(vec![num_series]),
        }
    }

    /// Builds parameters from `a[k-1][i][j] = A^{(k)}_{ij}`.
    pub fn from_lag_matrices(a: &[Vec<Vec<f64>>], bias: Vec<f64>) -> Result<Self> {
        let k = a.len();
        let p = bias.len();
        if k == 0 || a.iter().any(|m| m.len() != p || m.iter().any(|r| r.len() != p)) {
            return Err(Error::dim("var_params", format!("expected {k} matrices of {p}x{p}")));
        }
        let mut coef = vec![0.0; p * p * k];
        for (lag, m) in a.iter().enumerate() {
            for i in 0..p {
                for j in 0..p {
                    coef[i * p * k + j * k + lag] = m[i][j];
                }
            }
        }
        Ok(Self {
            coef: Tensor::matrix(p, p * k, coef)?,
            bias: Tensor::vector(bias)?,
        })
    }

    fn init<R: Rng>(p: usize, k: usize, rng: &mut R) -> Self {
        Self {
            coef: uniform(vec![p, p * k], p * k, rng),
            bias: uniform(vec![p], p * k, rng),
        }
    }

    pub fn num_series(&self) -> usize {
        self.coef.shape()[0]
    }

    pub fn max_lag(&self) -> usize {
        self.coef.shape()[1] / self.coef.shape()[0]
    }

    /// `A^{(lag)}_{ij}` with 1-based `lag`.
    pub fn coefficient(&self, lag: usize, i: usize, j: usize) -> f64 {
        let (p, k) = (self.num_series(), self.max_lag());
        self.coef.values()[i * p * k + j * k + lag - 1]
    }

    /// The lag vector `(A^{(1)}_{ij}, ..., A^{(K)}_{ij})`.
    pub fn pair(&self, i: usize, j: usize) -> &[f64] {
        let (p, k) = (self.num_series(), self.max_lag());
        &self.coef.values()[i * p * k + j * k..i * p * k + (j + 1) * k]
    }

    fn tensors(&self) -> Vec<(String, &Tensor)> {
        vec![("coef".into(), &self.coef), ("bias".into(), &self.bias)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.coef, &mut self.bias]
    }
}

/// The shared scalar kernel ξ: 1 -> H (sigmoid) -> 1 (linear).
#[derive(Debug, Clone, PartialEq)]
pub struct KernelParams {
    /// `[1, H]`
    pub w1: Tensor,
    /// `[H]`
    pub b1: Tensor,
    /// Output weights stored as a row `[1, H]`; used in unit-norm form.
    pub w2: Tensor,
    /// `[1]`
    pub b2: Tensor,
}

impl KernelParams {
    fn init<R: Rng>(width: usize, rng: &mut R) -> Self {
        Self {
            w1: uniform(vec![1, width], 1, rng),
            b1: uniform(vec![width], 1, rng),
            w2: uniform(vec![1, width], width, rng),
            b2: uniform(vec![1], width, rng),
        }
    }

    /// Evaluates ξ at one point, honouring output-weight normalization.
    pub fn eval(&self, x: f64, normalize: bool) -> f64 {
        let w2 = self.w2.values();
        let scale = if normalize { output_scale(w2) } else { 1.0 };
        let mut acc = 0.0;
        for ((a, b), c) in self.w1.values().iter().zip(self.b1.values()).zip(w2) {
            acc += c * scale * crate::autodiff::sigmoid(a * x + b);
        }
        acc + self.b2.values()[0]
    }
}

fn output_scale(w: &[f64]) -> f64 {
    let r = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if r > crate::autodiff::NORM_EPS {
        1.0 / r
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeKVarParams {
    pub var: VarParams,
    pub kernel: KernelParams,
}

impl LeKVarParams {
    /// Rescales the kernel output weights to unit norm. The forward pass
    /// already uses the normalized form, so predictions do not change.
    pub fn project_kernel(&mut self) {
        let w = self.kernel.w2.values_mut();
        let r = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r > crate::autodiff::NORM_EPS {
            for x in w.iter_mut() {
                *x /= r;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `[in, out]`
    pub weight: Tensor,
    /// `[out]`
    pub bias: Tensor,
}

impl DenseLayer {
    fn init<R: Rng>(input: usize, output: usize, rng: &mut R) -> Self {
        Self {
            weight: uniform(vec![input, output], input, rng),
            bias: uniform(vec![output], input, rng),
        }
    }
}

/// One LSTM layer. Gate columns are ordered input, forget, cell, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    /// `[in, 4H]`; row `j` holds every gate's weights for input `j`.
    pub w_ih: Tensor,
    /// `[H, 4H]`
    pub w_hh: Tensor,
    /// `[4H]`
    pub bias: Tensor,
}

impl LstmLayer {
    fn init<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            w_ih: uniform(vec![input, 4 * hidden], input, rng),
            w_hh: uniform(vec![hidden, 4 * hidden], hidden, rng),
            bias: uniform(vec![4 * hidden], hidden, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.shape()[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    /// The first layer takes the window flattened series-major: input
    /// column `j*K + (k-1)` is series `j` at lag `k`.
    Mlp(Vec<DenseLayer>),
    /// The first layer takes one time step (all series) at a time.
    Lstm(Vec<LstmLayer>),
}

/// Weights of one component network `g_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentNetParams {
    pub body: Body,
    pub readout: DenseLayer,
}

impl ComponentNetParams {
    fn init<R: Rng>(recurrent: bool, p: usize, k: usize, hidden: &[usize], rng: &mut R) -> Self {
        let last = *hidden.last().expect("validated non-empty");
        let body = if recurrent {
            let mut input = p;
            let layers = hidden
                .iter()
                .map(|&h| {
                    let l = LstmLayer::init(input, h, rng);
                    input = h;
                    l
                })
                .collect();
            Body::Lstm(layers)
        } else {
            let mut input = p * k;
            let layers = hidden
                .iter()
                .map(|&h| {
                    let l = DenseLayer::init(input, h, rng);
                    input = h;
                    l
                })
                .collect();
            Body::Mlp(layers)
        };
        Self {
            body,
            readout: DenseLayer::init(last, 1, rng),
        }
    }

    /// The first-layer matrix whose rows are the penalized input groups.
    pub fn first_layer(&self) -> &Tensor {
        match &self.body {
            Body::Mlp(layers) => &layers[0].weight,
            Body::Lstm(layers) => &layers[0].w_ih,
        }
    }

    pub(crate) fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        match &self.body {
            Body::Mlp(layers) => {
                for (i, l) in layers.iter().enumerate() {
                    out.push((format!("layer{i}.weight"), &l.weight));
                    out.push((format!("layer{i}.bias"), &l.bias));
                }
            }
            Body::Lstm(layers) => {
                for (i, l) in layers.iter().enumerate() {
                    out.push((format!("lstm{i}.w_ih"), &l.w_ih));
                    out.push((format!("lstm{i}.w_hh"), &l.w_hh));
                    out.push((format!("lstm{i}.bias"), &l.bias));
                }
            }
        }
        out.push(("readout.weight".into(), &self.readout.weight));
        out.push(("readout.bias".into(), &self.readout.bias));
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        match &mut self.body {
            Body::Mlp(layers) => {
                for l in layers {
                    out.push(&mut l.weight);
                    out.push(&mut l.bias);
                }
            }
            Body::Lstm(layers) => {
                for l in layers {
                    out.push(&mut l.w_ih);
                    out.push(&mut l.w_hh);
                    out.push(&mut l.bias);
                }
            }
        }
        out.push(&mut self.readout.weight);
        out.push(&mut self.readout.bias);
        out
    }
}

/// Series importances `v` (length p) and lag importances `q` (length K).
/// Stored unconstrained; GC readout uses magnitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct DecouplingFactors {
    pub v: Tensor,
    pub q: Tensor,
}

impl DecouplingFactors {
    pub fn ones(num_series: usize, max_lag: usize) -> Self {
        Self {
            v: Tensor::vector(vec![1.0; num_series]).expect("finite"),
            q: Tensor::vector(vec![1.0; max_lag]).expect("finite"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    Var(VarParams),
    LeKVar(LeKVarParams),
    Component {
        net: ComponentNetParams,
        factors: Option<DecouplingFactors>,
    },
}

impl ModelParams {
    pub(crate) fn init<R: Rng>(config: &ModelConfig, rng: &mut R) -> Self {
        let (p, k) = (config.num_series, config.max_lag);
        match config.kind {
            ModelKind::Var => ModelParams::Var(VarParams::init(p, k, rng)),
            ModelKind::LeKVar => {
                let var = VarParams::init(p, k, rng);
                let width = config.hidden.first().copied().unwrap_or(DEFAULT_WIDTH);
                let mut params = LeKVarParams {
                    var,
                    kernel: KernelParams::init(width, rng),
                };
                if config.kernel == KernelMode::Learned && config.weight_normalization {
                    params.project_kernel();
                }
                ModelParams::LeKVar(params)
            }
            kind => ModelParams::Component {
                net: ComponentNetParams::init(kind.is_recurrent(), p, k, &config.hidden, rng),
                factors: kind.is_decoupled().then(|| DecouplingFactors::ones(p, k)),
            },
        }
    }

    /// Named parameter tensors in binding order.
    pub fn tensors(&self) -> Vec<(String, &Tensor)> {
        match self {
            ModelParams::Var(v) => v.tensors(),
            ModelParams::LeKVar(l) => {
                let mut out = l.var.tensors();
                out.push(("kernel.w1".into(), &l.kernel.w1));
                out.push(("kernel.b1".into(), &l.kernel.b1));
                out.push(("kernel.w2".into(), &l.kernel.w2));
                out.push(("kernel.b2".into(), &l.kernel.b2));
                out
            }
            ModelParams::Component { net, factors } => {
                let mut out = net.tensors();
                if let Some(f) = factors {
                    out.push(("factors.v".into(), &f.v));
                    out.push(("factors.q".into(), &f.q));
                }
                out
            }
        }
    }

    /// Mutable tensors in the same order as [`ModelParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            ModelParams::Var(v) => v.tensors_mut(),
            ModelParams::LeKVar(l) => {
                let mut out = l.var.tensors_mut();
                out.push(&mut l.kernel.w1);
                out.push(&mut l.kernel.b1);
                out.push(&mut l.kernel.w2);
                out.push(&mut l.kernel.b2);
                out
            }
            ModelParams::Component { net, factors } => {
                let mut out = net.tensors_mut();
                if let Some(f) = factors {
                    out.push(&mut f.v);
                    out.push(&mut f.q);
                }
                out
            }
        }
    }
}
