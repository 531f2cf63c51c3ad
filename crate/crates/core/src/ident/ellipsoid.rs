use nalgebra::SymmetricEigen;

use super::estimate::ParameterEstimate;
use crate::error::{Error, Result};
use crate::mathcore::{chi2_quantile, Matrix, Vector};

/// `{θ : (θ - θ̂)ᵀ Σ_θ⁻¹ (θ - θ̂) ≤ level}` with `level = χ²_dof(δ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceEllipsoid {
    pub center: Vector,
    /// `Σ_θ`; the shape matrix is its inverse.
    pub cov: Matrix,
    pub level: f64,
    pub delta: f64,
    pub dof: usize,
}

impl ConfidenceEllipsoid {
    /// Radius of the ball in whitened coordinates `z = Σ_θ^{-1/2} θ̃`.
    pub fn radius(&self) -> f64 {
        self.level.sqrt()
    }

    pub fn shape(&self) -> Result<Matrix> {
        self.cov
            .clone()
            .try_inverse()
            .ok_or(Error::SingularInformation(0.0))
    }

    /// Squared Mahalanobis distance of `theta` from the center. Directions
    /// with zero variance admit no deviation (distance is infinite otherwise).
    pub fn distance2(&self, theta: &Vector) -> f64 {
        let d = theta - &self.center;
        let eig = SymmetricEigen::new(self.cov.clone());
        let lmax = eig.eigenvalues.amax();
        let scale = d.amax().max(self.center.amax()).max(1.0);
        let mut acc = 0.0;
        for i in 0..eig.eigenvalues.len() {
            let proj = eig.eigenvectors.column(i).dot(&d);
            let l = eig.eigenvalues[i];
            if l > 1e-14 * lmax {
                acc += proj * proj / l;
            } else if proj.abs() > 1e-12 * scale {
                return f64::INFINITY;
            }
        }
        acc
    }

    pub fn contains(&self, theta: &Vector) -> bool {
        self.distance2(theta) <= self.level
    }
}

/// Confidence ellipsoid at probability `delta` around the estimate.
pub fn confidence_set(est: &ParameterEstimate, delta: f64) -> Result<ConfidenceEllipsoid> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::DomainError(format!("delta = {delta} must lie in (0, 1)")));
    }
    Ok(ConfidenceEllipsoid {
        center: est.theta_hat.clone(),
        cov: est.cov.as_matrix().clone(),
        level: chi2_quantile(est.dof, delta)?,
        delta,
        dof: est.dof,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ident::Structure;
    use crate::mathcore::{GaussianSampler, Rng, SpdMatrix};

    fn estimate() -> ParameterEstimate {
        let cov = Matrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 0.5]);
        ParameterEstimate {
            k: 1,
            n: 1,
            m: 2,
            structure: Structure::Full,
            theta_hat: Vector::from_column_slice(&[0.5, -1.0, 2.0]),
            cov: SpdMatrix::new(cov).unwrap(),
            dof: 3,
            delta: None,
        }
    }

    #[test]
    fn center_always_inside_and_tiny_delta_degenerates() {
        let est = estimate();
        for d in [1e-12, 0.1, 0.9, 0.999] {
            assert!(confidence_set(&est, d).unwrap().contains(&est.theta_hat));
        }
        assert!(confidence_set(&est, 1e-12).unwrap().level < 1e-6);
        assert!(confidence_set(&est, 0.0).is_err());
        assert!(confidence_set(&est, 1.0).is_err());
    }

    #[test]
    fn membership_frequency_follows_chi2() {
        let est = estimate();
        let ell = confidence_set(&est, 0.9).unwrap();
        let sampler = GaussianSampler::new(est.theta_hat.clone(), est.cov.as_matrix()).unwrap();
        let mut rng = Rng::new(11, 0);
        let n = 100_000;
        let hits = (0..n).filter(|_| ell.contains(&sampler.sample(&mut rng))).count();
        let freq = hits as f64 / n as f64;
        assert!((freq - 0.9).abs() < 0.01, "{freq}");
    }

    #[test]
    fn distance_matches_explicit_inverse() {
        let est = estimate();
        let ell = confidence_set(&est, 0.5).unwrap();
        let theta = Vector::from_column_slice(&[1.0, 0.0, 1.0]);
        let d = &theta - &est.theta_hat;
        let direct = (d.transpose() * ell.shape().unwrap() * &d)[0];
        assert!((ell.distance2(&theta) - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn zero_covariance_only_contains_center() {
        let mut est = estimate();
        est.cov = SpdMatrix::zeros(3);
        let ell = confidence_set(&est, 0.9).unwrap();
        assert!(ell.contains(&est.theta_hat));
        let mut off = est.theta_hat.clone();
        off[0] += 1e-6;
        assert!(!ell.contains(&off));
    }
}
