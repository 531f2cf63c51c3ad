//! Multi-step predictor identification by generalized least squares, the
//! correlated residual covariance and confidence ellipsoids.

pub mod covariance;
pub mod ellipsoid;
pub mod estimate;
pub mod regression;

use serde::{Deserialize, Serialize};

pub use covariance::{residual_covariance, ResidualCovariance};
pub use ellipsoid::{confidence_set, ConfidenceEllipsoid};
pub use estimate::{mle_estimate, naive_ls, state_space_ls, ParameterEstimate};
pub use regression::{build_regression, RegressionProblem, Structure};

use crate::error::Result;
use crate::mathcore::{Matrix, SpdMatrix};
use crate::system::{MultiStepModel, Trajectory};

/// Source of the `G_{0,k}` entering the residual covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceMode {
    /// True `G_{0,k}` of the data-generating system.
    #[default]
    Oracle,
    /// `Ĝ_{0,k}` from a preliminary unweighted fit, followed by one weighted pass.
    PlugIn,
}

/// Noise description assumed known during identification: the disturbance
/// maps `G_{w,k}` and the covariances. `g0_true` is only read in oracle mode.
#[derive(Debug, Clone)]
pub struct NoiseKnowledge<'a> {
    pub truth: &'a MultiStepModel,
    pub sigma_eps: &'a SpdMatrix,
}

/// Identifies `θ_k` for `k = 1..=horizon`, each from its own regression.
pub fn identify_horizon(
    data: &Trajectory,
    horizon: usize,
    structure: Structure,
    mode: CovarianceMode,
    noise: &NoiseKnowledge<'_>,
) -> Result<Vec<ParameterEstimate>> {
    (1..=horizon).map(|k| identify_step(data, k, structure, mode, noise)).collect()
}

pub fn identify_step(
    data: &Trajectory,
    k: usize,
    structure: Structure,
    mode: CovarianceMode,
    noise: &NoiseKnowledge<'_>,
) -> Result<ParameterEstimate> {
    let reg = build_regression(data, k, structure)?;
    let g0: Matrix = match (structure, mode) {
        (Structure::Fir, _) => Matrix::zeros(reg.n, reg.n),
        (Structure::Full, CovarianceMode::Oracle) => noise.truth.g0(k).clone(),
        (Structure::Full, CovarianceMode::PlugIn) => naive_ls(&reg)?.g0_hat(),
    };
    let cov = residual_covariance(
        noise.truth.gw(k),
        &g0,
        &noise.truth.sigma_w,
        noise.sigma_eps,
        k,
        data.len(),
        structure,
    )?;
    mle_estimate(&reg, &cov)
}

/// Multi-step model whose `G_0`, `G_u` come from per-step estimates and whose
/// disturbance maps are taken as known.
pub fn predictor_from_estimates(estimates: &[ParameterEstimate], gw: &[Matrix], sigma_w: &SpdMatrix) -> Result<MultiStepModel> {
    let g0 = estimates.iter().map(|e| e.g0_hat()).collect();
    let gu = estimates.iter().map(|e| e.gu_hat()).collect();
    MultiStepModel::from_parts(g0, gu, gw[..estimates.len()].to_vec(), sigma_w.clone())
}
