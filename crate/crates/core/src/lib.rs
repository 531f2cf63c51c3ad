//! Chance-constrained predictive control for linear systems identified from
//! data: multi-step predictor identification with confidence ellipsoids,
//! constraint tightening against parametric and stochastic uncertainty, a
//! dense conic interior-point solver, and Monte Carlo certification.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod ident;
pub mod mathcore;
pub mod ocp;
pub mod solver;
pub mod system;
pub mod validate;

pub use error::{Error, Result};
