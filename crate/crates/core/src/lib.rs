//! Differentially private kernel learning through finite-dimensional
//! feature maps: Gaussian-process projections, random Fourier features,
//! and a functional-perturbation baseline.

// NaN-rejecting checks are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod data;
pub mod erm;
pub mod error;
pub mod experiment;
pub mod gp;
pub mod kernel;
pub mod linalg;
pub mod loss;
pub mod optim;
pub mod privacy;
pub mod rff;
pub mod rng;

pub use error::{Error, Result};
