use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spec::OcpSpec;
use crate::error::{ensure_dims, Error, Result};
use crate::ident::{confidence_set, ConfidenceEllipsoid, ParameterEstimate, Structure};
use crate::mathcore::{
    block_diag_repeat, gaussian_backoff, kron, max_norm_affine_over_ball, operator_norm, serde_mat, sym_sqrt,
    vstack_vectors, Matrix, SpdMatrix, Vector,
};

/// `‖H‖_{Σ_{x,k}(θ̃)} = ‖a + M z‖` with `z = Σ_θ^{-1/2} θ̃` ranging over the
/// ball of radius `√level`.
///
/// `a` stacks the disturbance part `diag_k(Σ_w^{1/2}) G_{w,k}ᵀ H` over the
/// initial-state part `Σ_{x,0}^{1/2} Ĝ_{0,k}ᵀ H`; only the latter depends on
/// the parameters, so `M` is zero in its upper block.
#[derive(Debug, Clone)]
pub struct SpreadTerms {
    pub a: Vector,
    pub m: Matrix,
    pub radius: f64,
}

pub fn spread_terms(
    h: &Vector,
    est: &ParameterEstimate,
    ellipsoid: &ConfidenceEllipsoid,
    sigma_x0: &Matrix,
    sigma_w: &SpdMatrix,
    gw: &Matrix,
) -> Result<SpreadTerms> {
    let (n, k) = (est.n, est.k);
    let qw = sigma_w.dim();
    ensure_dims(h.len() == n && sigma_x0.shape() == (n, n), || "H / Σ_x0 dimensions".into())?;
    ensure_dims(gw.shape() == (n, k * qw), || format!("G_w,{k} has shape {:?}", gw.shape()))?;
    ensure_dims(ellipsoid.cov.nrows() == est.dof && ellipsoid.center.len() == est.dof, || {
        "ellipsoid does not match the estimate".into()
    })?;
    let sw_half = block_diag_repeat(&sigma_w.sqrt(), k);
    let sx_half = sym_sqrt(sigma_x0)?;
    let upper = &sw_half * (gw.transpose() * h);
    let lower = &sx_half * (est.g0_hat().transpose() * h);
    let a = vstack_vectors(&[&upper, &lower]);
    let mut m = Matrix::zeros(a.len(), est.dof);
    if est.structure == Structure::Full && ellipsoid.level > 0.0 {
        let theta_half = sym_sqrt(&ellipsoid.cov)?;
        let ht = Matrix::from_row_slice(1, n, h.as_slice());
        let lifted = kron(&sx_half, &ht) * theta_half.rows(0, n * n);
        m.view_mut((upper.len(), 0), (n, est.dof)).copy_from(&lifted);
    }
    Ok(SpreadTerms { a, m, radius: ellipsoid.level.max(0.0).sqrt() })
}

/// Worst-case spread `h̄_{j,k}` of `H_jᵀx_k` over the confidence ellipsoid.
pub fn tightening_constant_exact(
    h: &Vector,
    est: &ParameterEstimate,
    ellipsoid: &ConfidenceEllipsoid,
    sigma_x0: &Matrix,
    sigma_w: &SpdMatrix,
    gw: &Matrix,
) -> Result<f64> {
    let t = spread_terms(h, est, ellipsoid, sigma_x0, sigma_w, gw)?;
    max_norm_affine_over_ball(&t.a, &t.m, t.radius)
}

/// Triangle-inequality bound `√level ‖M‖₂ + ‖a‖ ≥ h̄_{j,k}`.
pub fn tightening_constant_upper(
    h: &Vector,
    est: &ParameterEstimate,
    ellipsoid: &ConfidenceEllipsoid,
    sigma_x0: &Matrix,
    sigma_w: &SpdMatrix,
    gw: &Matrix,
) -> Result<f64> {
    let t = spread_terms(h, est, ellipsoid, sigma_x0, sigma_w, gw)?;
    Ok(t.radius * operator_norm(&t.m) + t.a.norm())
}

/// Which constant the robust program subtracts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TighteningMode {
    #[default]
    Exact,
    Upper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TighteningEntry {
    pub j: usize,
    pub k: usize,
    pub h_exact: f64,
    pub h_upper: f64,
}

/// Per-step parametric uncertainty entering the cone rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepUncertainty {
    pub k: usize,
    /// `√χ²_dof(δ)`.
    pub radius: f64,
    /// `Σ_{θ,k}^{1/2}` in the coordinates of the estimate.
    #[serde(with = "serde_mat::matrix")]
    pub sqrt_cov: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TighteningTable {
    pub p: f64,
    /// 1 when the parameters are known exactly.
    pub delta: f64,
    /// `p / δ`.
    pub p_tilde: f64,
    pub c_p_tilde: f64,
    pub mode: TighteningMode,
    pub entries: Vec<TighteningEntry>,
    pub steps: Vec<StepUncertainty>,
}

/// `p̃ = p/δ`, rejecting `δ ≤ p` and `δ ≥ 1`.
pub fn inflated_probability(p: f64, delta: f64) -> Result<f64> {
    if !(delta > p && delta < 1.0) {
        return Err(Error::DeltaTooSmall { delta, p });
    }
    Ok(p / delta)
}

impl TighteningTable {
    /// Computes `h̄_{j,k}` (exact and bound) for all `j` and `k = 1..=N`.
    /// `gw[k-1]` is the known disturbance map `G_{w,k}`.
    pub fn compute(
        spec: &OcpSpec,
        estimates: &[ParameterEstimate],
        gw: &[Matrix],
        sigma_w: &SpdMatrix,
        delta: f64,
        mode: TighteningMode,
    ) -> Result<Self> {
        let p_tilde = inflated_probability(spec.p, delta)?;
        Self::build(spec, estimates, gw, sigma_w, Some(delta), p_tilde, mode)
    }

    /// Table for parameters known exactly: the confidence sets collapse to
    /// the estimates, no probability is spent on them and `p̃ = p`.
    /// The estimates' covariances are ignored.
    pub fn known_parameters(
        spec: &OcpSpec,
        estimates: &[ParameterEstimate],
        gw: &[Matrix],
        sigma_w: &SpdMatrix,
        mode: TighteningMode,
    ) -> Result<Self> {
        Self::build(spec, estimates, gw, sigma_w, None, spec.p, mode)
    }

    fn build(
        spec: &OcpSpec,
        estimates: &[ParameterEstimate],
        gw: &[Matrix],
        sigma_w: &SpdMatrix,
        delta: Option<f64>,
        p_tilde: f64,
        mode: TighteningMode,
    ) -> Result<Self> {
        let big_n = spec.horizon;
        ensure_dims(estimates.len() >= big_n && gw.len() >= big_n, || {
            format!("need {big_n} estimates and disturbance maps")
        })?;
        for (i, est) in estimates[..big_n].iter().enumerate() {
            est.validate()?;
            ensure_dims(est.k == i + 1 && est.n == spec.n() && est.m == spec.m(), || {
                format!("estimate {i} has k = {}, n = {}, m = {}", est.k, est.n, est.m)
            })?;
        }
        let sets: Vec<ConfidenceEllipsoid> = estimates[..big_n]
            .iter()
            .map(|e| match delta {
                Some(d) => confidence_set(e, d),
                None => Ok(ConfidenceEllipsoid {
                    center: e.theta_hat.clone(),
                    cov: Matrix::zeros(e.dof, e.dof),
                    level: 0.0,
                    delta: 1.0,
                    dof: e.dof,
                }),
            })
            .collect::<Result<_>>()?;
        let sigma_x0 = spec.init.cov.as_matrix();
        let pairs: Vec<(usize, usize)> =
            (1..=big_n).flat_map(|k| (0..spec.hx.len()).map(move |j| (j, k))).collect();
        let entries = pairs
            .par_iter()
            .map(|&(j, k)| {
                let t = spread_terms(&spec.hx[j], &estimates[k - 1], &sets[k - 1], sigma_x0, sigma_w, &gw[k - 1])?;
                Ok(TighteningEntry {
                    j,
                    k,
                    h_exact: max_norm_affine_over_ball(&t.a, &t.m, t.radius)?,
                    h_upper: t.radius * operator_norm(&t.m) + t.a.norm(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let steps = sets
            .iter()
            .enumerate()
            .map(|(i, s)| Ok(StepUncertainty { k: i + 1, radius: s.radius(), sqrt_cov: sym_sqrt(&s.cov)? }))
            .collect::<Result<Vec<_>>>()?;
        Ok(TighteningTable {
            p: spec.p,
            delta: delta.unwrap_or(1.0),
            p_tilde,
            c_p_tilde: gaussian_backoff(p_tilde)?,
            mode,
            entries,
            steps,
        })
    }

    pub fn entry(&self, j: usize, k: usize) -> Option<&TighteningEntry> {
        self.entries.iter().find(|e| e.j == j && e.k == k)
    }

    /// The constant applied for `(j, k)` under the table's mode.
    pub fn constant(&self, j: usize, k: usize) -> Option<f64> {
        self.entry(j, k).map(|e| match self.mode {
            TighteningMode::Exact => e.h_exact,
            TighteningMode::Upper => e.h_upper,
        })
    }

    /// CSV with columns `j,k,h_exact,h_upper,radius`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["j", "k", "h_exact", "h_upper", "radius"])?;
        for e in &self.entries {
            let radius = self.steps[e.k - 1].radius;
            out.write_record([
                e.j.to_string(),
                e.k.to_string(),
                format!("{:e}", e.h_exact),
                format!("{:e}", e.h_upper),
                format!("{:e}", radius),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}
