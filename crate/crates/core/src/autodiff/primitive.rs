use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Norms at or below this value are treated as zero by `L2Norm` gradients and
/// by `NormalizeRows`, which then passes the row through unchanged.
pub const NORM_EPS: f64 = 1e-12;

/// The closed set of differentiable operations.
///
/// Shape rules are fixed per primitive; there is no implicit broadcasting
/// beyond `AddRow` and `MulRow`, which apply a length-`m` vector to every row
/// of an `n x m` matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    Add,
    Sub,
    /// Elementwise product.
    Mul,
    /// Multiplication by a constant.
    Scale(f64),
    AddRow,
    MulRow,
    MatMul,
    Transpose,
    Sigmoid,
    Tanh,
    Abs,
    Sum,
    /// Euclidean norm of the whole input.
    L2Norm,
    /// Each row divided by its Euclidean norm (a vector is one row).
    NormalizeRows,
    /// Outer product of two vectors.
    Outer,
    /// Mean of squared differences between two equally shaped inputs.
    MeanSquaredError,
    Concat { axis: usize },
    Slice { axis: usize, start: usize, end: usize },
    Reshape(Vec<usize>),
}

impl Primitive {
    pub fn name(&self) -> &'static str {
        match self {
            Primitive::Add => "add",
            Primitive::Sub => "sub",
            Primitive::Mul => "mul",
            Primitive::Scale(_) => "scale",
            Primitive::AddRow => "add_row",
            Primitive::MulRow => "mul_row",
            Primitive::MatMul => "matmul",
            Primitive::Transpose => "transpose",
            Primitive::Sigmoid => "sigmoid",
            Primitive::Tanh => "tanh",
            Primitive::Abs => "abs",
            Primitive::Sum => "sum",
            Primitive::L2Norm => "l2_norm",
            Primitive::NormalizeRows => "normalize_rows",
            Primitive::Outer => "outer",
            Primitive::MeanSquaredError => "mse",
            Primitive::Concat { .. } => "concat",
            Primitive::Slice { .. } => "slice",
            Primitive::Reshape(_) => "reshape",
        }
    }

    fn arity(&self) -> Option<usize> {
        match self {
            Primitive::Add
            | Primitive::Sub
            | Primitive::Mul
            | Primitive::AddRow
            | Primitive::MulRow
            | Primitive::MatMul
            | Primitive::Outer
            | Primitive::MeanSquaredError => Some(2),
            Primitive::Concat { .. } => None,
            _ => Some(1),
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn shapes(inputs: &[&Tensor]) -> String {
    inputs
        .iter()
        .map(|t| format!("{:?}", t.shape()))
        .collect::<Vec<_>>()
        .join(", ")
}

fn matrix_dims(prim: &Primitive, t: &Tensor, inputs: &[&Tensor]) -> Result<(usize, usize)> {
    match t.shape() {
        [r, c] => Ok((*r, *c)),
        _ => Err(Error::dim(
            prim.name(),
            format!("expected a matrix operand, got shapes {}", shapes(inputs)),
        )),
    }
}

fn finished(prim: &Primitive, shape: Vec<usize>, values: Vec<f64>) -> Result<Tensor> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric {
            op: prim.name(),
            detail: format!("non-finite output {} at index {i}", values[i]),
        });
    }
    Tensor::new(shape, values)
}

/// Evaluates one primitive on concrete inputs.
pub fn eval_primitive(prim: &Primitive, inputs: &[&Tensor]) -> Result<Tensor> {
    if let Some(n) = prim.arity() {
        if inputs.len() != n {
            return Err(Error::dim(
                prim.name(),
                format!("expected {n} inputs, got {}", inputs.len()),
            ));
        }
    } else if inputs.is_empty() {
        return Err(Error::dim(prim.name(), "expected at least one input"));
    }
    let mismatch = || Error::dim(prim.name(), format!("incompatible shapes {}", shapes(inputs)));

    match prim {
        Primitive::Add | Primitive::Sub | Primitive::Mul | Primitive::MeanSquaredError => {
            let (a, b) = (inputs[0], inputs[1]);
            if a.shape() != b.shape() {
                return Err(mismatch());
            }
            let zipped = a.values().iter().zip(b.values());
            match prim {
                Primitive::Add => finished(prim, a.shape().to_vec(), zipped.map(|(x, y)| x + y).collect()),
                Primitive::Sub => finished(prim, a.shape().to_vec(), zipped.map(|(x, y)| x - y).collect()),
                Primitive::Mul => finished(prim, a.shape().to_vec(), zipped.map(|(x, y)| x * y).collect()),
                _ => {
                    let mut acc = 0.0;
                    for (x, y) in zipped {
                        acc += (x - y) * (x - y);
                    }
                    finished(prim, vec![], vec![acc / a.len() as f64])
                }
            }
        }
        Primitive::Scale(c) => {
            let a = inputs[0];
            finished(prim, a.shape().to_vec(), a.values().iter().map(|x| c * x).collect())
        }
        Primitive::AddRow | Primitive::MulRow => {
            let (a, b) = (inputs[0], inputs[1]);
            let (n, m) = matrix_dims(prim, a, inputs)?;
            if b.shape() != [m] {
                return Err(mismatch());
            }
            let bv = b.values();
            let mut out = Vec::with_capacity(n * m);
            for row in a.values().chunks_exact(m) {
                if matches!(prim, Primitive::AddRow) {
                    out.extend(row.iter().zip(bv).map(|(x, y)| x + y));
                } else {
                    out.extend(row.iter().zip(bv).map(|(x, y)| x * y));
                }
            }
            finished(prim, vec![n, m], out)
        }
        Primitive::MatMul => {
            let (a, b) = (inputs[0], inputs[1]);
            let (n, k) = matrix_dims(prim, a, inputs)?;
            let (k2, m) = matrix_dims(prim, b, inputs)?;
            if k != k2 {
                return Err(mismatch());
            }
            finished(prim, vec![n, m], matmul(a.values(), b.values(), n, k, m))
        }
        Primitive::Transpose => {
            let a = inputs[0];
            let (r, c) = matrix_dims(prim, a, inputs)?;
            finished(prim, vec![c, r], transpose(a.values(), r, c))
        }
        Primitive::Sigmoid => {
            let a = inputs[0];
            finished(prim, a.shape().to_vec(), a.values().iter().map(|&x| sigmoid(x)).collect())
        }
        Primitive::Tanh => {
            let a = inputs[0];
            finished(prim, a.shape().to_vec(), a.values().iter().map(|x| x.tanh()).collect())
        }
        Primitive::Abs => {
            let a = inputs[0];
            finished(prim, a.shape().to_vec(), a.values().iter().map(|x| x.abs()).collect())
        }
        Primitive::Sum => {
            let mut acc = 0.0;
            for x in inputs[0].values() {
                acc += x;
            }
            finished(prim, vec![], vec![acc])
        }
        Primitive::L2Norm => finished(prim, vec![], vec![norm(inputs[0].values())]),
        Primitive::NormalizeRows => {
            let a = inputs[0];
            let (_, m) = a.as_matrix_dims().ok_or_else(mismatch)?;
            let mut out = Vec::with_capacity(a.len());
            for row in a.values().chunks_exact(m) {
                let r = norm(row);
                if r > NORM_EPS {
                    out.extend(row.iter().map(|x| x / r));
                } else {
                    out.extend_from_slice(row);
                }
            }
            finished(prim, a.shape().to_vec(), out)
        }
        Primitive::Outer => {
            let (a, b) = (inputs[0], inputs[1]);
            if a.shape().len() != 1 || b.shape().len() != 1 {
                return Err(mismatch());
            }
            let mut out = Vec::with_capacity(a.len() * b.len());
            for x in a.values() {
                out.extend(b.values().iter().map(|y| x * y));
            }
            finished(prim, vec![a.len(), b.len()], out)
        }
        Primitive::Concat { axis } => concat(prim, *axis, inputs),
        Primitive::Slice { axis, start, end } => {
            let a = inputs[0];
            let rank = a.shape().len();
            if rank == 0 || rank > 2 || *axis >= rank || start >= end || *end > a.shape()[*axis] {
                return Err(Error::dim(
                    prim.name(),
                    format!("cannot slice {start}..{end} on axis {axis} of {:?}", a.shape()),
                ));
            }
            let (r, c) = a.as_matrix_dims().expect("rank checked");
            let (shape, out) = if rank == 1 {
                (vec![end - start], a.values()[*start..*end].to_vec())
            } else if *axis == 0 {
                (vec![end - start, c], a.values()[start * c..end * c].to_vec())
            } else {
                let mut out = Vec::with_capacity(r * (end - start));
                for row in a.values().chunks_exact(c) {
                    out.extend_from_slice(&row[*start..*end]);
                }
                (vec![r, end - start], out)
            };
            finished(prim, shape, out)
        }
        Primitive::Reshape(shape) => {
            let a = inputs[0];
            if shape.iter().product::<usize>() != a.len() {
                return Err(Error::dim(
                    prim.name(),
                    format!("cannot reshape {:?} into {shape:?}", a.shape()),
                ));
            }
            finished(prim, shape.clone(), a.values().to_vec())
        }
    }
}

fn concat(prim: &Primitive, axis: usize, inputs: &[&Tensor]) -> Result<Tensor> {
    let first = inputs[0].shape();
    let bad = || Error::dim(prim.name(), format!("cannot concat shapes {} on axis {axis}", shapes(inputs)));
    match (first.len(), axis) {
        (1, 0) => {
            if inputs.iter().any(|t| t.shape().len() != 1) {
                return Err(bad());
            }
            let out: Vec<f64> = inputs.iter().flat_map(|t| t.values().iter().copied()).collect();
            finished(prim, vec![out.len()], out)
        }
        (2, 0) => {
            let c = first[1];
            if inputs.iter().any(|t| t.shape().len() != 2 || t.shape()[1] != c) {
                return Err(bad());
            }
            let out: Vec<f64> = inputs.iter().flat_map(|t| t.values().iter().copied()).collect();
            finished(prim, vec![out.len() / c, c], out)
        }
        (2, 1) => {
            let r = first[0];
            if inputs.iter().any(|t| t.shape().len() != 2 || t.shape()[0] != r) {
                return Err(bad());
            }
            let total: usize = inputs.iter().map(|t| t.shape()[1]).sum();
            let mut out = Vec::with_capacity(r * total);
            for i in 0..r {
                for t in inputs {
                    let c = t.shape()[1];
                    out.extend_from_slice(&t.values()[i * c..(i + 1) * c]);
                }
            }
            finished(prim, vec![r, total], out)
        }
        _ => Err(bad()),
    }
}

fn norm(xs: &[f64]) -> f64 {
    let mut acc = 0.0;
    for x in xs {
        acc += x * x;
    }
    acc.sqrt()
}

pub(crate) fn matmul(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    gemm(a, (k, 1), b, (m, 1), n, k, m)
}

/// `n x m` product of an `n x k` and a `k x m` operand given by
/// (row stride, column stride) pairs, so transposed views need no copy.
fn gemm(a: &[f64], sa: (usize, usize), b: &[f64], sb: (usize, usize), n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    if n == 0 || k == 0 || m == 0 {
        return out;
    }
    // SAFETY: every operand is a dense slice whose extent covers the
    // strided views described by the dimensions above.
    unsafe {
        matrixmultiply::dgemm(
            n,
            k,
            m,
            1.0,
            a.as_ptr(),
            sa.0 as isize,
            sa.1 as isize,
            b.as_ptr(),
            sb.0 as isize,
            sb.1 as isize,
            0.0,
            out.as_mut_ptr(),
            m as isize,
            1,
        );
    }
    out
}

fn transpose(a: &[f64], r: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = a[i * c + j];
        }
    }
    out
}

/// Vector-Jacobian products: given the upstream gradient `g` of the output,
/// returns the gradient contribution for each input. Inputs whose `needs`
/// flag is false may get an empty vector instead.
pub(crate) fn vjp(prim: &Primitive, inputs: &[&Tensor], out: &Tensor, g: &[f64], needs: &[bool]) -> Vec<Vec<f64>> {
    match prim {
        Primitive::Add => vec![g.to_vec(), g.to_vec()],
        Primitive::Sub => vec![g.to_vec(), g.iter().map(|x| -x).collect()],
        Primitive::Mul => {
            let (a, b) = (inputs[0].values(), inputs[1].values());
            vec![
                g.iter().zip(b).map(|(g, b)| g * b).collect(),
                g.iter().zip(a).map(|(g, a)| g * a).collect(),
            ]
        }
        Primitive::Scale(c) => vec![g.iter().map(|x| c * x).collect()],
        Primitive::AddRow => {
            let m = inputs[1].len();
            let mut gb = vec![0.0; m];
            for row in g.chunks_exact(m) {
                for (acc, x) in gb.iter_mut().zip(row) {
                    *acc += x;
                }
            }
            vec![g.to_vec(), gb]
        }
        Primitive::MulRow => {
            let (a, b) = (inputs[0].values(), inputs[1].values());
            let m = b.len();
            let mut ga = Vec::with_capacity(g.len());
            let mut gb = vec![0.0; m];
            for (grow, arow) in g.chunks_exact(m).zip(a.chunks_exact(m)) {
                ga.extend(grow.iter().zip(b).map(|(g, b)| g * b));
                for ((acc, g), a) in gb.iter_mut().zip(grow).zip(arow) {
                    *acc += g * a;
                }
            }
            vec![ga, gb]
        }
        Primitive::MatMul => {
            let (a, b) = (inputs[0], inputs[1]);
            let (n, k) = (a.shape()[0], a.shape()[1]);
            let m = b.shape()[1];
            let ga = if needs[0] {
                gemm(g, (m, 1), b.values(), (1, m), n, m, k)
            } else {
                Vec::new()
            };
            let gb = if needs[1] {
                gemm(a.values(), (1, k), g, (m, 1), k, n, m)
            } else {
                Vec::new()
            };
            vec![ga, gb]
        }
        Primitive::Transpose => {
            let (r, c) = (inputs[0].shape()[0], inputs[0].shape()[1]);
            vec![transpose(g, c, r)]
        }
        Primitive::Sigmoid => vec![g
            .iter()
            .zip(out.values())
            .map(|(g, y)| g * y * (1.0 - y))
            .collect()],
        Primitive::Tanh => vec![g
            .iter()
            .zip(out.values())
            .map(|(g, y)| g * (1.0 - y * y))
            .collect()],
        Primitive::Abs => vec![g
            .iter()
            .zip(inputs[0].values())
            .map(|(g, x)| if *x > 0.0 { *g } else if *x < 0.0 { -g } else { 0.0 })
            .collect()],
        Primitive::Sum => vec![vec![g[0]; inputs[0].len()]],
        Primitive::L2Norm => {
            let r = out.values()[0];
            if r > NORM_EPS {
                vec![inputs[0].values().iter().map(|x| g[0] * x / r).collect()]
            } else {
                vec![vec![0.0; inputs[0].len()]]
            }
        }
        Primitive::NormalizeRows => {
            let a = inputs[0];
            let (_, m) = a.as_matrix_dims().expect("checked in forward");
            let mut ga = Vec::with_capacity(a.len());
            for ((row, y), grow) in a.values().chunks_exact(m).zip(out.values().chunks_exact(m)).zip(g.chunks_exact(m)) {
                let r = norm(row);
                if r > NORM_EPS {
                    let mut dot = 0.0;
                    for (y, g) in y.iter().zip(grow) {
                        dot += y * g;
                    }
                    ga.extend(grow.iter().zip(y).map(|(g, y)| (g - y * dot) / r));
                } else {
                    ga.extend_from_slice(grow);
                }
            }
            vec![ga]
        }
        Primitive::Outer => {
            let (a, b) = (inputs[0].values(), inputs[1].values());
            let m = b.len();
            let mut ga = vec![0.0; a.len()];
            let mut gb = vec![0.0; m];
            for (i, grow) in g.chunks_exact(m).enumerate() {
                for j in 0..m {
                    ga[i] += grow[j] * b[j];
                    gb[j] += grow[j] * a[i];
                }
            }
            vec![ga, gb]
        }
        Primitive::MeanSquaredError => {
            let (a, b) = (inputs[0].values(), inputs[1].values());
            let scale = 2.0 * g[0] / a.len() as f64;
            let ga: Vec<f64> = a.iter().zip(b).map(|(x, y)| scale * (x - y)).collect();
            let gb = ga.iter().map(|x| -x).collect();
            vec![ga, gb]
        }
        Primitive::Concat { axis } => {
            let mut grads: Vec<Vec<f64>> = inputs.iter().map(|t| Vec::with_capacity(t.len())).collect();
            if inputs[0].shape().len() == 2 && *axis == 1 {
                let total = out.shape()[1];
                for grow in g.chunks_exact(total) {
                    let mut off = 0;
                    for (gi, t) in grads.iter_mut().zip(inputs) {
                        let c = t.shape()[1];
                        gi.extend_from_slice(&grow[off..off + c]);
                        off += c;
                    }
                }
            } else {
                let mut off = 0;
                for (gi, t) in grads.iter_mut().zip(inputs) {
                    gi.extend_from_slice(&g[off..off + t.len()]);
                    off += t.len();
                }
            }
            grads
        }
        Primitive::Slice { axis, start, end } => {
            let a = inputs[0];
            let mut ga = vec![0.0; a.len()];
            let (_, c) = a.as_matrix_dims().expect("checked in forward");
            if a.shape().len() == 1 {
                ga[*start..*end].copy_from_slice(g);
            } else if *axis == 0 {
                ga[start * c..end * c].copy_from_slice(g);
            } else {
                let w = end - start;
                for (i, grow) in g.chunks_exact(w).enumerate() {
                    ga[i * c + start..i * c + end].copy_from_slice(grow);
                }
            }
            vec![ga]
        }
        Primitive::Reshape(_) => vec![g.to_vec()],
    }
}
