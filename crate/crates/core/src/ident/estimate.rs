use nalgebra::{Cholesky, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::covariance::ResidualCovariance;
use super::regression::{RegressionProblem, Structure};
use crate::error::{ensure_dims, Error, Result};
use crate::mathcore::linalg::symmetrize;
use crate::mathcore::{kron, BandCholesky, serde_mat, unvec, Matrix, SpdMatrix, Vector};
use crate::system::Trajectory;

/// Eigenvalues of a singular residual covariance below this fraction of the
/// largest are treated as exactly zero-variance directions.
pub const PROJECTION_TOL: f64 = 1e-9;
/// Information matrices with `λ_min ≤ INFORMATION_TOL · λ_max` are rejected.
pub const INFORMATION_TOL: f64 = 1e-10;

/// Estimate `θ̂_k = vec([Ĝ_{0,k}, Ĝ_{u,k}])` with covariance `Σ_{θ,k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterEstimate {
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub structure: Structure,
    #[serde(with = "serde_mat::vector")]
    pub theta_hat: Vector,
    pub cov: SpdMatrix,
    pub dof: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

impl ParameterEstimate {
    /// Wraps known predictor matrices with a zero covariance (perfect knowledge).
    pub fn exact(k: usize, g0: &Matrix, gu: &Matrix, structure: Structure) -> Result<Self> {
        let n = g0.nrows();
        ensure_dims(gu.nrows() == n && k > 0 && gu.ncols().is_multiple_of(k), || {
            format!("G_u shape {:?} for k = {k}", gu.shape())
        })?;
        let m = gu.ncols() / k;
        let mut theta = crate::mathcore::vec(gu);
        if structure == Structure::Full {
            theta = crate::mathcore::vstack_vectors(&[&crate::mathcore::vec(g0), &theta]);
        }
        let dof = theta.len();
        Ok(ParameterEstimate { k, n, m, structure, theta_hat: theta, cov: SpdMatrix::zeros(dof), dof, delta: None })
    }

    fn g0_len(&self) -> usize {
        match self.structure {
            Structure::Full => self.n * self.n,
            Structure::Fir => 0,
        }
    }

    /// `Ĝ_{0,k}`; zero for FIR estimates.
    pub fn g0_hat(&self) -> Matrix {
        match self.structure {
            Structure::Full => unvec(&self.theta_hat.rows(0, self.n * self.n).into_owned(), self.n, self.n)
                .expect("length checked at construction"),
            Structure::Fir => Matrix::zeros(self.n, self.n),
        }
    }

    pub fn gu_hat(&self) -> Matrix {
        let off = self.g0_len();
        let len = self.n * self.k * self.m;
        unvec(&self.theta_hat.rows(off, len).into_owned(), self.n, self.k * self.m).expect("length checked at construction")
    }

    /// Expands `θ` (FIR or full) into the full `[G_0, G_u]` parameter vector
    /// and its covariance (zero rows/columns for the `G_0` block under FIR).
    pub fn full_parameters(&self) -> (Vector, Matrix) {
        let nn = self.n * self.n;
        match self.structure {
            Structure::Full => (self.theta_hat.clone(), self.cov.as_matrix().clone()),
            Structure::Fir => {
                let d = nn + self.dof;
                let mut theta = Vector::zeros(d);
                theta.rows_mut(nn, self.dof).copy_from(&self.theta_hat);
                let mut cov = Matrix::zeros(d, d);
                cov.view_mut((nn, nn), (self.dof, self.dof)).copy_from(self.cov.as_matrix());
                (theta, cov)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let expect = self.structure.dof(self.n, self.m, self.k);
        ensure_dims(self.dof == expect, || format!("dof {} != {}", self.dof, expect))?;
        ensure_dims(self.theta_hat.len() == self.dof, || "theta_hat length".into())?;
        ensure_dims(self.cov.dim() == self.dof, || "covariance dimension".into())?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let est: ParameterEstimate = serde_json::from_str(s)?;
        est.validate()?;
        Ok(est)
    }
}

/// Maps stacked rows into a space where the residual has identity covariance.
enum Whitening {
    Cholesky(BandCholesky),
    /// `Λ^{-1/2} Vᵀ` restricted to eigenpairs above the projection threshold.
    Projection(Matrix),
}

impl Whitening {
    /// `bw` is the half bandwidth of `cov`.
    fn new(cov: &Matrix, bw: usize) -> Whitening {
        if let Some(l) = BandCholesky::new(cov, bw) {
            let piv = l.diagonal().map(|d| d * d);
            if piv.min() > PROJECTION_TOL * piv.max() {
                return Whitening::Cholesky(l);
            }
        }
        let eig = SymmetricEigen::new(symmetrize(cov));
        let lmax = eig.eigenvalues.max().max(0.0);
        let keep: Vec<usize> = (0..eig.eigenvalues.len())
            .filter(|&i| eig.eigenvalues[i] > PROJECTION_TOL * lmax)
            .collect();
        let mut w = Matrix::zeros(keep.len(), cov.nrows());
        for (r, &i) in keep.iter().enumerate() {
            let s = 1.0 / eig.eigenvalues[i].sqrt();
            w.row_mut(r).copy_from(&(eig.eigenvectors.column(i).transpose() * s));
        }
        Whitening::Projection(w)
    }

    fn apply(&self, x: &Matrix) -> Matrix {
        match self {
            Whitening::Cholesky(l) => l.solve_lower(x),
            Whitening::Projection(w) => w * x,
        }
    }
}

/// Solves the weighted normal equations from whitened data.
fn solve_whitened(phi: &Matrix, y: &Vector) -> Result<(Vector, Matrix)> {
    let info = symmetrize(&(phi.transpose() * phi));
    let (theta, cov) = solve_information(&info, &(phi.transpose() * y))?;
    Ok((theta, cov))
}

fn solve_information(info: &Matrix, rhs: &Vector) -> Result<(Vector, Matrix)> {
    if info.nrows() == 0 {
        return Ok((Vector::zeros(0), Matrix::zeros(0, 0)));
    }
    let ev = SymmetricEigen::new(info.clone()).eigenvalues;
    let (lmin, lmax) = (ev.min(), ev.max());
    if lmax <= 0.0 || lmin <= INFORMATION_TOL * lmax {
        return Err(Error::SingularInformation(if lmax > 0.0 { lmin / lmax } else { 0.0 }));
    }
    let ch = Cholesky::new(info.clone()).ok_or(Error::SingularInformation(lmin / lmax))?;
    let theta = ch.solve(rhs);
    let cov = symmetrize(&ch.inverse());
    Ok((theta, cov))
}

fn make_estimate(reg: &RegressionProblem, theta: Vector, cov: Matrix) -> Result<ParameterEstimate> {
    Ok(ParameterEstimate {
        k: reg.k,
        n: reg.n,
        m: reg.m,
        structure: reg.structure,
        dof: theta.len(),
        theta_hat: theta,
        cov: SpdMatrix::new(cov)?,
        delta: None,
    })
}

/// Generalized least squares weighted by the inverse residual covariance.
///
/// A singular residual covariance is handled by solving in the span of its
/// eigenvectors with eigenvalue above [`PROJECTION_TOL`]` · λ_max`.
pub fn mle_estimate(reg: &RegressionProblem, cov: &ResidualCovariance) -> Result<ParameterEstimate> {
    ensure_dims(cov.matrix.nrows() == reg.rows(), || {
        format!("residual covariance size {} vs {} regression rows", cov.matrix.nrows(), reg.rows())
    })?;
    let w = Whitening::new(&cov.matrix, (cov.k + 1) * cov.n);
    let phi = w.apply(&reg.regressor);
    let y = w.apply(&Matrix::from_column_slice(reg.rows(), 1, reg.targets.as_slice()));
    let (theta, sigma) = solve_whitened(&phi, &y.column(0).into_owned())?;
    make_estimate(reg, theta, sigma)
}

/// Unweighted least squares. The reported covariance is `(ΦᵀΦ)^{-1} s²` with
/// `s² = RSS / (rows - dof)`; a diagnostic without coverage guarantees.
pub fn naive_ls(reg: &RegressionProblem) -> Result<ParameterEstimate> {
    let (theta, inv) = solve_whitened(&reg.regressor, &reg.targets)?;
    let rss = (&reg.targets - &reg.regressor * &theta).norm_squared();
    let excess = reg.rows().saturating_sub(reg.dof());
    let s2 = if excess > 0 { rss / excess as f64 } else { 0.0 };
    make_estimate(reg, theta, inv * s2)
}

/// One-step least squares for noise-free measurements, summing the per-time
/// information `Φ_kᵀ Σ̃_w⁻¹ Φ_k` with `Σ̃_w = E Σ_w Eᵀ`.
///
/// With `Φ_k = v_kᵀ ⊗ I_n`, `v_k = [x_k; u_k]`, the sums collapse to
/// `(Σ v vᵀ) ⊗ Σ̃_w⁻¹` and `vec(Σ̃_w⁻¹ Σ x_{k+1} v_kᵀ)`. A singular `Σ̃_w` uses
/// its pseudo-inverse, which leaves the information singular.
pub fn state_space_ls(data: &Trajectory, sigma_w: &SpdMatrix, e: &Matrix) -> Result<ParameterEstimate> {
    let (n, m) = (data.n(), data.m());
    ensure_dims(e.nrows() == n && e.ncols() == sigma_w.dim(), || "E / Σ_w shapes".into())?;
    let t = data.len();
    let d = n + m;
    if n * t < n * d {
        return Err(Error::InsufficientData { rows: n * t, cols: n * d });
    }
    let sw = symmetrize(&(e * sigma_w.as_matrix() * e.transpose()));
    let sw_inv = pseudo_inverse(&sw);
    let mut gram = Matrix::zeros(d, d);
    let mut cross = Matrix::zeros(n, d);
    let mut v = Vector::zeros(d);
    for j in 0..t {
        v.rows_mut(0, n).copy_from(&data.measurements[j]);
        v.rows_mut(n, m).copy_from(&data.inputs[j]);
        gram += &v * v.transpose();
        cross += &data.measurements[j + 1] * v.transpose();
    }
    let info = symmetrize(&kron(&gram, &sw_inv));
    let rhs = crate::mathcore::vec(&(&sw_inv * cross));
    let (theta, cov) = solve_information(&info, &rhs)?;
    let reg_shape = RegressionProblem {
        k: 1,
        n,
        m,
        structure: Structure::Full,
        targets: Vector::zeros(0),
        regressor: Matrix::zeros(0, n * d),
    };
    make_estimate(&reg_shape, theta, cov)
}

fn pseudo_inverse(s: &Matrix) -> Matrix {
    let eig = SymmetricEigen::new(s.clone());
    let lmax = eig.eigenvalues.max().max(0.0);
    let inv = eig.eigenvalues.map(|l| if l > PROJECTION_TOL * lmax { 1.0 / l } else { 0.0 });
    symmetrize(&(&eig.eigenvectors * Matrix::from_diagonal(&inv) * eig.eigenvectors.transpose()))
}
