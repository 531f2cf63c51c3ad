use std::io::Write;

use serde::{Deserialize, Serialize};

use super::violation::{estimate_violation, ViolationSource};
use crate::error::{ensure_dims, Error, Result};
use crate::ident::ParameterEstimate;
use crate::mathcore::{gaussian_backoff, Matrix, Vector};
use crate::ocp::robust::kron_lift;
use crate::ocp::{OcpSpec, TighteningTable};
use crate::system::{stack_inputs, LinearSystem, MultiStepModel};

/// Decomposition of one robust constraint `(j, k)` at a fixed input sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservatismRow {
    pub j: usize,
    pub k: usize,
    /// `c_p ‖H_j‖_{Σ_{x,k}}` on the estimated model (no parameter robustness).
    pub nominal_tightening: f64,
    /// `r_k ‖Σ_{θ,k}^{1/2}([x̄₀; u] ⊗ H_j)‖` at the inputs.
    pub parametric_term: f64,
    pub h_exact: f64,
    pub h_upper: f64,
    /// `1 - H_jᵀx̂_k - c_p ‖H_j‖_{Σ_{x,k}}` on the estimated model.
    pub nominal_slack: f64,
    /// `1 - H_jᵀx̂_k - parametric_term - c_p̃ h̄_{j,k}`.
    pub robust_slack: f64,
    /// Monte Carlo violation frequency on the true system.
    pub realized_violation: f64,
    /// `1 - p`.
    pub budget: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservatismReport {
    pub rows: Vec<ConservatismRow>,
}

impl ConservatismReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "j",
            "k",
            "nominal_tightening",
            "parametric_term",
            "h_exact",
            "h_upper",
            "nominal_slack",
            "robust_slack",
            "realized_violation",
            "budget",
        ])?;
        for r in &self.rows {
            let mut rec = vec![r.j.to_string(), r.k.to_string()];
            for v in [
                r.nominal_tightening,
                r.parametric_term,
                r.h_exact,
                r.h_upper,
                r.nominal_slack,
                r.robust_slack,
                r.realized_violation,
                r.budget,
            ] {
                rec.push(format!("{v:e}"));
            }
            out.write_record(rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Measures how much of the robust tightening is actually needed at the
/// inputs `u`: nominal versus parametric terms, exact versus bounded `h̄`,
/// and the realized violation on the true system.
#[allow(clippy::too_many_arguments)]
pub fn conservatism_report(
    sys_true: &LinearSystem,
    estimates: &[ParameterEstimate],
    gw: &[Matrix],
    spec: &OcpSpec,
    table: &TighteningTable,
    u: &[Vector],
    n_samples: usize,
    seed: u64,
) -> Result<ConservatismReport> {
    let (horizon, m) = (spec.horizon, spec.m());
    ensure_dims(estimates.len() >= horizon && table.steps.len() >= horizon && gw.len() >= horizon, || {
        format!("need {horizon} estimates, steps and disturbance maps")
    })?;
    let model = MultiStepModel::from_parts(
        estimates[..horizon].iter().map(|e| e.g0_hat()).collect(),
        estimates[..horizon].iter().map(|e| e.gu_hat()).collect(),
        gw[..horizon].to_vec(),
        sys_true.sigma_w.clone(),
    )?;
    let c_p = gaussian_backoff(spec.p)?;
    let realized = estimate_violation(ViolationSource::Truth(sys_true), u, spec, n_samples, seed)?;
    let mut ones_u = Vector::zeros(1 + horizon * m);
    ones_u[0] = 1.0;
    ones_u.rows_mut(1, horizon * m).copy_from(&stack_inputs(u));
    let cov0 = spec.init.cov.as_matrix();
    let mut rows = Vec::new();
    for k in 1..=horizon {
        let est = &estimates[k - 1];
        let step = &table.steps[k - 1];
        let mean = model.mean(k, &spec.init.mean, u);
        let cov = model.state_cov(k, cov0);
        for (j, h) in spec.hx.iter().enumerate() {
            let entry = table
                .entry(j, k)
                .ok_or_else(|| Error::DimensionMismatch(format!("tightening table lacks (j = {j}, k = {k})")))?;
            let hbar = table.constant(j, k).unwrap_or(entry.h_exact);
            let lift = kron_lift(h, &spec.init.mean, k, m, horizon, est.structure);
            let parametric_term = (&step.sqrt_cov * (lift * &ones_u)).norm() * step.radius;
            let spread = h.dot(&(&cov * h)).max(0.0).sqrt();
            let hx = h.dot(&mean);
            rows.push(ConservatismRow {
                j,
                k,
                nominal_tightening: c_p * spread,
                parametric_term,
                h_exact: entry.h_exact,
                h_upper: entry.h_upper,
                nominal_slack: 1.0 - hx - c_p * spread,
                robust_slack: 1.0 - hx - parametric_term - table.c_p_tilde * hbar,
                realized_violation: realized.row(j, k).map(|r| r.estimate).unwrap_or(f64::NAN),
                budget: 1.0 - spec.p,
            });
        }
    }
    Ok(ConservatismReport { rows })
}
