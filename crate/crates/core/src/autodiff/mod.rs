//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! A [`Graph`] records every primitive applied to its nodes. Calling
//! [`Graph::backward`] on a scalar node walks the record in reverse and fills
//! the gradient of every leaf created with [`Tensor::requiring_grad`].
//!
//! ```
//! use neuralgc::autodiff::{Graph, Tensor};
//!
//! let mut g = Graph::new();
//! let w = g.leaf(Tensor::vector(vec![3.0, 4.0]).unwrap().requiring_grad());
//! let n = g.l2_norm(w).unwrap();
//! g.backward(n).unwrap();
//! assert_eq!(g.grad(w).unwrap(), &[0.6, 0.8]);
//! ```
//!
//! The subgradient of the norm at zero is taken to be zero.

mod gradcheck;
mod graph;
mod primitive;
mod tensor;

pub use gradcheck::grad_check;
pub use graph::{Graph, NodeId};
pub use primitive::{eval_primitive, sigmoid, Primitive, NORM_EPS};
pub use tensor::Tensor;
