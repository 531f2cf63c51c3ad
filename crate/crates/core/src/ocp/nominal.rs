use super::spec::OcpSpec;
use crate::error::{ensure_dims, Result};
use crate::mathcore::{gaussian_backoff, Matrix, SpdMatrix, Vector};
use crate::solver::{ConicProgram, RowTag, VariableMap};
use crate::system::{LinearSystem, MultiStepModel};

/// Predicted means `x̄_k = c_k + S_k u_{[0,N-1]}` for `k = 0..=N`, with the
/// decision-independent covariances `Σ_{x,k}`.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub offsets: Vec<Vector>,
    pub maps: Vec<Matrix>,
    pub covs: Vec<Matrix>,
}

impl Prediction {
    /// Condensed state-space recursion `x̄_{k+1} = A x̄_k + B u_k`,
    /// `Σ_{k+1} = A Σ_k Aᵀ + E Σ_w Eᵀ`.
    pub fn statespace(a: &Matrix, b: &Matrix, process_noise: &Matrix, spec: &OcpSpec) -> Self {
        let (n, m, big_n) = (spec.n(), spec.m(), spec.horizon);
        let mut offsets = vec![spec.init.mean.clone()];
        let mut maps = vec![Matrix::zeros(n, big_n * m)];
        let mut covs = vec![spec.init.cov.as_matrix().clone()];
        for k in 0..big_n {
            let mut s = a * &maps[k];
            let mut blk = s.view_mut((0, k * m), (n, m));
            blk += b;
            offsets.push(a * &offsets[k]);
            maps.push(s);
            let c = a * &covs[k] * a.transpose() + process_noise;
            covs.push((&c + c.transpose()) * 0.5);
        }
        Prediction { offsets, maps, covs }
    }

    /// Direct multi-step map `x̄_k = G_{0,k} x̄₀ + G_{u,k} u_{[0,k-1]}`.
    pub fn multistep(model: &MultiStepModel, spec: &OcpSpec) -> Self {
        let (n, m, big_n) = (spec.n(), spec.m(), spec.horizon);
        let cov0 = spec.init.cov.as_matrix();
        let mut offsets = vec![spec.init.mean.clone()];
        let mut maps = vec![Matrix::zeros(n, big_n * m)];
        let mut covs = vec![cov0.clone()];
        for k in 1..=big_n {
            offsets.push(model.g0(k) * &spec.init.mean);
            let mut s = Matrix::zeros(n, big_n * m);
            s.view_mut((0, 0), (n, k * m)).copy_from(model.gu(k));
            maps.push(s);
            let c = model.state_cov(k, cov0);
            covs.push((&c + c.transpose()) * 0.5);
        }
        Prediction { offsets, maps, covs }
    }

    pub fn horizon(&self) -> usize {
        self.maps.len() - 1
    }

    pub fn mean(&self, k: usize, u: &Vector) -> Vector {
        &self.offsets[k] + &self.maps[k] * u
    }
}

/// `Σ_{k=1}^N ‖x̄_k‖²_Q + Σ_{k=0}^{N-1} ‖u_k‖²_R` as `½ zᵀPz + qᵀz + constant`.
pub(crate) fn tracking_cost(pred: &Prediction, q: &SpdMatrix, r: &SpdMatrix) -> (Matrix, Vector, f64) {
    let dim = pred.maps[0].ncols();
    let m = r.dim();
    let qm = q.as_matrix();
    let mut hess = Matrix::zeros(dim, dim);
    let mut lin = Vector::zeros(dim);
    let mut constant = 0.0;
    for k in 1..=pred.horizon() {
        let s = &pred.maps[k];
        let qs = qm * s;
        hess += s.transpose() * &qs;
        lin += qs.transpose() * &pred.offsets[k];
        constant += pred.offsets[k].dot(&(qm * &pred.offsets[k]));
    }
    for k in 0..pred.horizon() {
        let mut blk = hess.view_mut((k * m, k * m), (m, m));
        blk += r.as_matrix();
    }
    let p = &hess + hess.transpose();
    (p, lin * 2.0, constant)
}

pub(crate) fn push_input_rows(prog: &mut ConicProgram, spec: &OcpSpec, offset: usize) {
    let m = spec.m();
    let rows = spec.inputs.rows();
    for k in 0..spec.horizon {
        for (i, (a, b)) in rows.iter().enumerate() {
            let mut full = Vector::zeros(prog.dim);
            full.rows_mut(offset + k * m, m).copy_from(a);
            prog.push_linear(full, *b, RowTag::Input { k, i });
        }
    }
}

/// QP over `u_{[0,N-1]}` with tightened mean constraints
/// `H_jᵀx̄_k ≤ 1 - c_p ‖H_j‖_{Σ_{x,k}}` for `k = 1..=N`.
pub(crate) fn nominal_program(pred: &Prediction, spec: &OcpSpec, backoff: f64) -> Result<ConicProgram> {
    spec.check_initial_state(backoff)?;
    let (p, q, constant) = tracking_cost(pred, &spec.q, &spec.r);
    let mut prog = ConicProgram::new(p, q, constant)?;
    prog.variables = VariableMap { horizon: spec.horizon, m: spec.m(), input_offset: 0, auxiliary: Vec::new() };
    for k in 1..=spec.horizon {
        for (j, h) in spec.hx.iter().enumerate() {
            let spread = h.dot(&(&pred.covs[k] * h)).max(0.0).sqrt();
            let a = pred.maps[k].transpose() * h;
            let b = 1.0 - backoff * spread - h.dot(&pred.offsets[k]);
            prog.push_linear(a, b, RowTag::State { j, k });
        }
    }
    push_input_rows(&mut prog, spec, 0);
    Ok(prog)
}

fn check_system(sys: &LinearSystem, spec: &OcpSpec) -> Result<()> {
    spec.validate()?;
    ensure_dims(sys.n() == spec.n() && sys.m() == spec.m(), || {
        format!("system is {}x{} but spec expects n = {}, m = {}", sys.n(), sys.m(), spec.n(), spec.m())
    })
}

/// Chance-constrained QP from the state-space recursion.
pub fn build_nominal_qp_statespace(sys: &LinearSystem, spec: &OcpSpec) -> Result<ConicProgram> {
    check_system(sys, spec)?;
    let pred = Prediction::statespace(&sys.a, &sys.b, &sys.process_noise(), spec);
    nominal_program(&pred, spec, gaussian_backoff(spec.p)?)
}

/// Chance-constrained QP from a multi-step predictor.
pub fn build_nominal_qp_multistep(model: &MultiStepModel, spec: &OcpSpec) -> Result<ConicProgram> {
    spec.validate()?;
    ensure_dims(model.n == spec.n() && model.m == spec.m(), || "model dimensions differ from spec".into())?;
    ensure_dims(model.horizon() >= spec.horizon, || {
        format!("model horizon {} shorter than {}", model.horizon(), spec.horizon)
    })?;
    let pred = Prediction::multistep(model, spec);
    nominal_program(&pred, spec, gaussian_backoff(spec.p)?)
}
