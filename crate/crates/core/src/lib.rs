//! Nonlinear Granger-causality discovery for multivariate time series.
//!
//! The crate provides component-wise MLP and LSTM forecasters, a VAR with a
//! learned element-wise kernel, decoupled series/lag importance factors with
//! in-forward weight normalization, structured sparsity penalties trained by
//! mini-batch Adam, synthetic data generators, and ranking metrics for
//! scoring recovered causal graphs.

pub mod autodiff;
pub mod datagen;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod io;
pub mod models;
pub mod penalties;
pub mod rng;
pub mod selfcheck;
pub mod training;

pub use error::{Error, Result};
