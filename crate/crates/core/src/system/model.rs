use serde::{Deserialize, Serialize};

use crate::error::{ensure_dims, Error, Result};
use crate::mathcore::{serde_mat, Matrix, SpdMatrix, Vector};

/// `x_{k+1} = A x_k + B u_k + E w_k` with `w_k ~ N(0, Σ_w)` and measurement
/// noise `x̃_k = x_k + ε_k`, `ε_k ~ N(0, Σ_ε)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSystem {
    #[serde(with = "serde_mat::matrix")]
    pub a: Matrix,
    #[serde(with = "serde_mat::matrix")]
    pub b: Matrix,
    #[serde(with = "serde_mat::matrix")]
    pub e: Matrix,
    pub sigma_w: SpdMatrix,
    pub sigma_eps: SpdMatrix,
}

impl LinearSystem {
    pub fn new(a: Matrix, b: Matrix, e: Matrix, sigma_w: SpdMatrix, sigma_eps: SpdMatrix) -> Result<Self> {
        let sys = LinearSystem { a, b, e, sigma_w, sigma_eps };
        sys.validate()?;
        Ok(sys)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.nrows();
        ensure_dims(self.a.is_square(), || "A must be square".into())?;
        ensure_dims(self.b.nrows() == n, || format!("B has {} rows, expected {n}", self.b.nrows()))?;
        ensure_dims(self.e.nrows() == n, || format!("E has {} rows, expected {n}", self.e.nrows()))?;
        ensure_dims(self.sigma_w.dim() == self.e.ncols(), || {
            format!("Σ_w is {0}x{0}, expected {1}", self.sigma_w.dim(), self.e.ncols())
        })?;
        ensure_dims(self.sigma_eps.dim() == n, || {
            format!("Σ_ε is {0}x{0}, expected {n}", self.sigma_eps.dim())
        })?;
        for (name, m) in [("A", &self.a), ("B", &self.b), ("E", &self.e)] {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(name.into()));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn q(&self) -> usize {
        self.e.ncols()
    }

    /// `E Σ_w Eᵀ`.
    pub fn process_noise(&self) -> Matrix {
        &self.e * self.sigma_w.as_matrix() * self.e.transpose()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let sys: LinearSystem = serde_json::from_str(s)?;
        sys.validate()?;
        Ok(sys)
    }
}

/// Gaussian belief `N(mean, cov)` over the state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianBelief {
    #[serde(with = "serde_mat::vector")]
    pub mean: Vector,
    pub cov: SpdMatrix,
}

impl GaussianBelief {
    pub fn new(mean: Vector, cov: SpdMatrix) -> Result<Self> {
        ensure_dims(mean.len() == cov.dim(), || {
            format!("mean length {} vs covariance dim {}", mean.len(), cov.dim())
        })?;
        Ok(GaussianBelief { mean, cov })
    }

    pub fn deterministic(mean: Vector) -> Self {
        let n = mean.len();
        GaussianBelief { mean, cov: SpdMatrix::zeros(n) }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let sys = LinearSystem::new(
            Matrix::from_row_slice(2, 2, &[0.9, 0.1, 0.0, 0.8]),
            Matrix::from_row_slice(2, 1, &[0.0, 1.0]),
            Matrix::identity(2, 2),
            SpdMatrix::from_diagonal(&[0.01, 0.02]).unwrap(),
            SpdMatrix::zeros(2),
        )
        .unwrap();
        let s = sys.to_json().unwrap();
        assert!(s.contains("[\n      0.9,\n      0.1\n    ]"));
        assert_eq!(LinearSystem::from_json(&s).unwrap(), sys);
    }

    #[test]
    fn dimension_checks() {
        let r = LinearSystem::new(
            Matrix::identity(2, 2),
            Matrix::zeros(3, 1),
            Matrix::identity(2, 2),
            SpdMatrix::identity(2),
            SpdMatrix::zeros(2),
        );
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
    }
}
