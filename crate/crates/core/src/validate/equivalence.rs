use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ocp::{build_nominal_qp_multistep, build_nominal_qp_statespace, OcpSpec};
use crate::solver::{solve, SolverOptions, Status};
use crate::system::{LinearSystem, MultiStepModel};

/// Comparison of the state-space and multi-step chance-constrained QPs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    /// `‖u_ss - u_ms‖∞`.
    pub input_diff: f64,
    /// `|J_ss - J_ms| / max(1, |J_ss|)`.
    pub value_rel_diff: f64,
    pub status_statespace: Status,
    pub status_multistep: Status,
    pub tol: f64,
    pub pass: bool,
}

/// Solves both programs built from `sys` (the multi-step one by condensing).
pub fn equivalence_check(sys: &LinearSystem, spec: &OcpSpec, opts: &SolverOptions, tol: f64) -> Result<EquivalenceReport> {
    equivalence_against(sys, &MultiStepModel::from_system(sys, spec.horizon), spec, opts, tol)
}

/// Same comparison against an arbitrary multi-step model, e.g. a
/// deliberately mismatched one as a negative control.
pub fn equivalence_against(
    sys: &LinearSystem,
    model: &MultiStepModel,
    spec: &OcpSpec,
    opts: &SolverOptions,
    tol: f64,
) -> Result<EquivalenceReport> {
    let ss = solve(&build_nominal_qp_statespace(sys, spec)?, opts)?;
    let ms = solve(&build_nominal_qp_multistep(model, spec)?, opts)?;
    let input_diff = (&ss.primal - &ms.primal).amax();
    let value_rel_diff = (ss.objective - ms.objective).abs() / ss.objective.abs().max(1.0);
    let pass = ss.status == Status::Optimal && ms.status == Status::Optimal && input_diff <= tol;
    Ok(EquivalenceReport {
        input_diff,
        value_rel_diff,
        status_statespace: ss.status,
        status_multistep: ms.status,
        tol,
        pass,
    })
}
