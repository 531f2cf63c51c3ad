use super::nominal::{push_input_rows, tracking_cost, Prediction};
use super::spec::OcpSpec;
use super::tightening::TighteningTable;
use crate::error::{ensure_dims, Error, Result};
use crate::ident::{ParameterEstimate, Structure};
use crate::mathcore::{Matrix, Vector};
use crate::solver::{ConicProgram, RowTag, VariableMap};
use crate::system::MultiStepModel;

/// Linear map `[1; u_{[0,N-1]}] ↦ [x̄₀; u_{[0,k-1]}] ⊗ H` restricted to the
/// parameters the estimate carries (`G_u` only for FIR).
pub(crate) fn kron_lift(h: &Vector, x0: &Vector, k: usize, m: usize, horizon: usize, structure: Structure) -> Matrix {
    let n = h.len();
    let head = match structure {
        Structure::Full => n * n,
        Structure::Fir => 0,
    };
    let mut lift = Matrix::zeros(head + n * k * m, 1 + horizon * m);
    for i in 0..head / n {
        lift.view_mut((i * n, 0), (n, 1)).copy_from(&(h * x0[i]));
    }
    for c in 0..k * m {
        lift.view_mut((head + c * n, 1 + c), (n, 1)).copy_from(h);
    }
    lift
}

/// Replaces `K` by an upper-triangular `R` with `‖K v‖ = ‖R v‖` for all `v`,
/// dropping trailing rows when `K` is tall.
fn compress(k: Matrix) -> Matrix {
    if k.nrows() <= k.ncols() {
        return k;
    }
    k.qr().r()
}

/// Robust chance-constrained SOCP over `u_{[0,N-1]}` from independently
/// identified per-step predictors. Each `(j, k ≥ 1)` gives
/// `H_jᵀx̄_k + r_k ‖Σ_{θ,k}^{1/2}([x̄₀; u_{[0,k-1]}] ⊗ H_j)‖ ≤ 1 - c_p̃ h̄_{j,k}`;
/// rows whose norm term vanishes identically are emitted as linear rows.
pub fn build_robust_socp_multistep(
    estimates: &[ParameterEstimate],
    gw: &[Matrix],
    spec: &OcpSpec,
    table: &TighteningTable,
) -> Result<ConicProgram> {
    spec.validate()?;
    let big_n = spec.horizon;
    let m = spec.m();
    ensure_dims(estimates.len() >= big_n && table.steps.len() >= big_n, || {
        format!("need {big_n} estimates and tightening steps")
    })?;
    let known = table.delta == 1.0 && table.p_tilde == spec.p;
    if !known && !(table.delta > spec.p && table.delta < 1.0) {
        return Err(Error::DeltaTooSmall { delta: table.delta, p: spec.p });
    }
    spec.check_initial_state(table.c_p_tilde)?;
    // Only the means of this model are used; the spread enters through h̄.
    let sigma_w = crate::mathcore::SpdMatrix::zeros(gw.first().map(|g| g.ncols()).unwrap_or(0));
    let model = MultiStepModel::from_parts(
        estimates[..big_n].iter().map(|e| e.g0_hat()).collect(),
        estimates[..big_n].iter().map(|e| e.gu_hat()).collect(),
        gw[..big_n].to_vec(),
        sigma_w,
    )?;
    ensure_dims(model.n == spec.n() && model.m == m, || "estimate dimensions differ from spec".into())?;
    let pred = Prediction::multistep(&model, spec);
    let (p, q, constant) = tracking_cost(&pred, &spec.q, &spec.r);
    let mut prog = ConicProgram::new(p, q, constant)?;
    prog.variables = VariableMap { horizon: big_n, m, input_offset: 0, auxiliary: Vec::new() };
    let x0 = &spec.init.mean;
    for k in 1..=big_n {
        let est = &estimates[k - 1];
        let step = &table.steps[k - 1];
        ensure_dims(step.k == k && step.sqrt_cov.nrows() == est.dof, || format!("tightening step {k}"))?;
        for (j, h) in spec.hx.iter().enumerate() {
            let hbar = table
                .constant(j, k)
                .ok_or_else(|| Error::DimensionMismatch(format!("tightening table lacks (j = {j}, k = {k})")))?;
            let a = pred.maps[k].transpose() * h;
            let rhs = 1.0 - table.c_p_tilde * hbar - h.dot(&pred.offsets[k]);
            let lift = kron_lift(h, x0, k, m, big_n, est.structure);
            let cone = compress(&step.sqrt_cov * lift * step.radius);
            if cone.amax() == 0.0 {
                prog.push_linear(a, rhs, RowTag::State { j, k });
            } else {
                let g = cone.column(0).into_owned();
                let f = cone.columns(1, big_n * m).into_owned();
                prog.push_soc(f, g, -a, rhs, RowTag::State { j, k });
            }
        }
    }
    push_input_rows(&mut prog, spec, 0);
    Ok(prog)
}
