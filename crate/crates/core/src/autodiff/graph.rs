use super::primitive::{eval_primitive, vjp, Primitive};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
struct Node {
    prim: Option<Primitive>,
    inputs: Vec<NodeId>,
    value: Tensor,
}

/// A single-use computation record. Nodes are appended in evaluation order,
/// so the node list is always a topological order and `backward` walks it in
/// reverse.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Adds an input tensor. Its `requires_grad` flag decides whether
    /// `backward` fills its gradient.
    pub fn leaf(&mut self, tensor: Tensor) -> NodeId {
        self.nodes.push(Node {
            prim: None,
            inputs: Vec::new(),
            value: tensor,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Adds a non-differentiable input.
    pub fn constant(&mut self, shape: Vec<usize>, values: Vec<f64>) -> Result<NodeId> {
        Ok(self.leaf(Tensor::new(shape, values)?))
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Gradient of the last `backward` loss with respect to a leaf.
    pub fn grad(&self, id: NodeId) -> Option<&[f64]> {
        self.nodes[id.0].value.grad()
    }

    fn check(&self, id: NodeId) -> Result<()> {
        if id.0 < self.nodes.len() {
            Ok(())
        } else {
            Err(Error::Usage(format!("node {} does not belong to this graph", id.0)))
        }
    }

    /// Evaluates `prim` on existing nodes and records the result.
    pub fn apply(&mut self, prim: Primitive, inputs: &[NodeId]) -> Result<NodeId> {
        for &id in inputs {
            self.check(id)?;
        }
        let values: Vec<&Tensor> = inputs.iter().map(|id| &self.nodes[id.0].value).collect();
        let mut out = eval_primitive(&prim, &values)?;
        out.set_requires_grad(values.iter().any(|t| t.requires_grad()));
        self.nodes.push(Node {
            prim: Some(prim),
            inputs: inputs.to_vec(),
            value: out,
        });
        Ok(NodeId(self.nodes.len() - 1))
    }

    /// Reverse pass from a scalar `loss`. Every node that requires a gradient
    /// receives d(loss)/d(node); contributions along fan-out paths are summed.
    /// Values are not modified. Calling it again overwrites earlier gradients.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Usage("backward called on an empty graph".into()));
        }
        self.check(loss)?;
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[loss.0].value.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            let Some(prim) = &node.prim else { continue };
            let Some(g) = grads[idx].take() else { continue };
            if !node.value.requires_grad() {
                continue;
            }
            if let Primitive::Slice { axis, start, end } = prim {
                // Scatter straight into the input gradient instead of
                // materialising a mostly-zero contribution.
                let input = &self.nodes[node.inputs[0].0].value;
                if input.requires_grad() {
                    let acc = grads[node.inputs[0].0].get_or_insert_with(|| vec![0.0; input.len()]);
                    let cols = if input.shape().len() == 2 { input.shape()[1] } else { input.len() };
                    scatter_slice(acc, &g, input.shape().len(), *axis, *start, *end, cols);
                }
                continue;
            }
            let inputs: Vec<&Tensor> = node.inputs.iter().map(|id| &self.nodes[id.0].value).collect();
            let needs: Vec<bool> = inputs.iter().map(|t| t.requires_grad()).collect();
            let contributions = vjp(prim, &inputs, &node.value, &g, &needs);
            for ((input, contrib), need) in node.inputs.iter().zip(contributions).zip(needs) {
                if !need {
                    continue;
                }
                match &mut grads[input.0] {
                    Some(acc) => {
                        for (a, c) in acc.iter_mut().zip(&contrib) {
                            *a += c;
                        }
                    }
                    slot @ None => *slot = Some(contrib),
                }
            }
        }
        for (idx, g) in grads.into_iter().enumerate() {
            if let Some(g) = g {
                self.nodes[idx].value.set_grad(g);
            }
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(Primitive::Add, &[a, b])
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(Primitive::Sub, &[a, b])
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(Primitive::Mul, &[a, b])
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        self.apply(Primitive::Scale(c), &[a])
    }

    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId> {
        self.apply(Primitive::AddRow, &[a, row])
    }

    pub fn mul_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId> {
        self.apply(Primitive::MulRow, &[a, row])
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(Primitive::MatMul, &[a, b])
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        self.apply(Primitive::Transpose, &[a])
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        self.apply(Primitive::Sigmoid, &[a])
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        self.apply(Primitive::Tanh, &[a])
    }

    pub fn abs(&mut self, a: NodeId) -> Result<NodeId> {
        self.apply(Primitive::Abs, &[a])
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        self.apply(Primitive::Sum, &[a])
    }

    pub fn l2_norm(&mut self, a: NodeId) -> Result<NodeId> {
        self.apply(Primitive::L2Norm, &[a])
    }

    pub fn normalize_rows(&mut self, a: NodeId) -> Result<NodeId> {
        self.apply(Primitive::NormalizeRows, &[a])
    }

    pub fn outer(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(Primitive::Outer, &[a, b])
    }

    pub fn mse(&mut self, pred: NodeId, target: NodeId) -> Result<NodeId> {
        self.apply(Primitive::MeanSquaredError, &[pred, target])
    }

    pub fn concat(&mut self, parts: &[NodeId], axis: usize) -> Result<NodeId> {
        self.apply(Primitive::Concat { axis }, parts)
    }

    pub fn slice(&mut self, a: NodeId, axis: usize, start: usize, end: usize) -> Result<NodeId> {
        self.apply(Primitive::Slice { axis, start, end }, &[a])
    }

    pub fn reshape(&mut self, a: NodeId, shape: Vec<usize>) -> Result<NodeId> {
        self.apply(Primitive::Reshape(shape), &[a])
    }

    /// Sums a non-empty list of scalar nodes left to right.
    pub fn add_all(&mut self, terms: &[NodeId]) -> Result<NodeId> {
        let (&first, rest) = terms
            .split_first()
            .ok_or_else(|| Error::Usage("add_all needs at least one term".into()))?;
        rest.iter().try_fold(first, |acc, &t| self.add(acc, t))
    }
}

fn scatter_slice(acc: &mut [f64], g: &[f64], rank: usize, axis: usize, start: usize, end: usize, cols: usize) {
    let add = |dst: &mut [f64], src: &[f64]| {
        for (a, x) in dst.iter_mut().zip(src) {
            *a += x;
        }
    };
    if rank == 1 {
        add(&mut acc[start..end], g);
    } else if axis == 0 {
        add(&mut acc[start * cols..end * cols], g);
    } else {
        let w = end - start;
        for (i, grow) in g.chunks_exact(w).enumerate() {
            add(&mut acc[i * cols + start..i * cols + end], grow);
        }
    }
}
