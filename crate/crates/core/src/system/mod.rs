//! Ground-truth linear system, simulation, moment propagation and condensing
//! into multi-step predictors.

pub mod model;
pub mod multistep;
pub mod simulate;

pub use model::{GaussianBelief, LinearSystem};
pub use multistep::{propagate_moments_multistep, propagate_moments_statespace, stack_inputs, MultiStepModel};
pub use simulate::{probing_inputs, random_system, random_system_with_noise, simulate, Trajectory};

/// Condensed multi-step predictor for horizon `n_steps`.
pub fn build_multistep(sys: &LinearSystem, n_steps: usize) -> MultiStepModel {
    MultiStepModel::from_system(sys, n_steps)
}
