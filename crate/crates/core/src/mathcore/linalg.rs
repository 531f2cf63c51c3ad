use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dims, Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative asymmetry accepted by [`SpdMatrix`] and [`sym_sqrt`].
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Eigenvalues in `[-PSD_TOL * lambda_max, 0]` are clamped to zero.
pub const PSD_TOL: f64 = 1e-8;

/// Symmetric positive semidefinite matrix.
///
/// Construction symmetrizes the input after checking that the asymmetry is
/// within [`SYMMETRY_TOL`] and rejects eigenvalues below `-PSD_TOL * lambda_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "crate::mathcore::serde_mat::NestedRows", into = "crate::mathcore::serde_mat::NestedRows")]
pub struct SpdMatrix(Matrix);

impl SpdMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        let sym = symmetrize_checked(&m)?;
        let eig = SymmetricEigen::new(sym.clone());
        check_psd(&eig.eigenvalues)?;
        Ok(SpdMatrix(sym))
    }

    pub fn identity(n: usize) -> Self {
        SpdMatrix(Matrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        SpdMatrix(Matrix::zeros(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Result<Self> {
        Self::new(Matrix::from_diagonal(&Vector::from_column_slice(d)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn sqrt(&self) -> Matrix {
        // Already validated, cannot fail.
        sym_sqrt(&self.0).expect("validated PSD matrix")
    }

    /// True when the smallest eigenvalue exceeds `tol * max(1, lambda_max)`.
    pub fn is_positive_definite(&self, tol: f64) -> bool {
        let ev = SymmetricEigen::new(self.0.clone()).eigenvalues;
        let max = ev.max();
        ev.min() > tol * max.max(1.0)
    }

    /// `sqrt(h' S h)`, the weighted norm used throughout the constraint tightenings.
    pub fn weighted_norm(&self, h: &Vector) -> f64 {
        (h.dot(&(&self.0 * h))).max(0.0).sqrt()
    }
}

impl From<SpdMatrix> for Matrix {
    fn from(s: SpdMatrix) -> Matrix {
        s.0
    }
}

fn symmetrize_checked(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "expected square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix".into()));
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let asym = (m - m.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(asym / scale));
    }
    Ok((m + m.transpose()) * 0.5)
}

fn check_psd(ev: &Vector) -> Result<()> {
    if ev.is_empty() {
        return Ok(());
    }
    let max = ev.max();
    let min = ev.min();
    if min < 0.0 && min < -PSD_TOL * max.max(0.0) {
        return Err(Error::IndefiniteMatrix(min));
    }
    Ok(())
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = Matrix::zeros(ra * rb, ca * cb);
    for i in 0..ra {
        for j in 0..ca {
            let s = a[(i, j)];
            if s != 0.0 {
                out.view_mut((i * rb, j * cb), (rb, cb)).copy_from(&(b * s));
            }
        }
    }
    out
}

/// Stacks the columns of `a` into a single vector.
pub fn vec(a: &Matrix) -> Vector {
    // nalgebra storage is column-major.
    Vector::from_column_slice(a.as_slice())
}

/// Inverse of [`vec`].
pub fn unvec(v: &Vector, rows: usize, cols: usize) -> Result<Matrix> {
    ensure_dims(v.len() == rows * cols, || {
        format!("cannot reshape length {} into {}x{}", v.len(), rows, cols)
    })?;
    Ok(Matrix::from_column_slice(rows, cols, v.as_slice()))
}

/// Symmetric square root via eigendecomposition, clamping slightly negative
/// eigenvalues to zero.
pub fn sym_sqrt(a: &Matrix) -> Result<Matrix> {
    let sym = symmetrize_checked(a)?;
    if sym.nrows() == 0 {
        return Ok(sym);
    }
    let eig = SymmetricEigen::new(sym);
    check_psd(&eig.eigenvalues)?;
    let d = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    let s = v * Matrix::from_diagonal(&d) * v.transpose();
    Ok((&s + s.transpose()) * 0.5)
}

/// `diag_k(a)`: `k` copies of `a` on the block diagonal.
pub fn block_diag_repeat(a: &Matrix, k: usize) -> Matrix {
    let (r, c) = a.shape();
    let mut out = Matrix::zeros(r * k, c * k);
    for i in 0..k {
        out.view_mut((i * r, i * c), (r, c)).copy_from(a);
    }
    out
}

pub fn block_diag(blocks: &[&Matrix]) -> Matrix {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(*b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Horizontal concatenation; all blocks must share a row count.
pub fn hstack(blocks: &[&Matrix]) -> Result<Matrix> {
    let rows = blocks.first().map(|b| b.nrows()).unwrap_or(0);
    ensure_dims(blocks.iter().all(|b| b.nrows() == rows), || {
        "hstack row counts differ".into()
    })?;
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        out.view_mut((0, c), b.shape()).copy_from(*b);
        c += b.ncols();
    }
    Ok(out)
}

/// Vertical concatenation of vectors.
pub fn vstack_vectors(parts: &[&Vector]) -> Vector {
    let n = parts.iter().map(|p| p.len()).sum();
    let mut out = Vector::zeros(n);
    let mut i = 0;
    for p in parts {
        out.rows_mut(i, p.len()).copy_from(*p);
        i += p.len();
    }
    out
}

/// Largest singular value.
pub fn operator_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let g = if m.nrows() >= m.ncols() {
        m.transpose() * m
    } else {
        m * m.transpose()
    };
    SymmetricEigen::new(g).eigenvalues.max().max(0.0).sqrt()
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(a: &Matrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.complex_eigenvalues()
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max)
}

pub fn mat_pow(a: &Matrix, k: usize) -> Matrix {
    let mut out = Matrix::identity(a.nrows(), a.ncols());
    for _ in 0..k {
        out = a * out;
    }
    out
}

pub(crate) fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}
