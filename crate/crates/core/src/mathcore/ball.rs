use nalgebra::SymmetricEigen;

use super::linalg::{Matrix, Vector};
use crate::error::{ensure_dims, Result};

/// Exact `max_{‖z‖ ≤ r} ‖a + M z‖`.
///
/// The squared objective is a convex quadratic, so the maximum sits on the
/// sphere `‖z‖ = r`. Stationarity gives `z(μ) = (μ I - MᵀM)⁻¹ Mᵀa` with
/// `μ ≥ λ_max(MᵀM)`; `μ` is the root of the secular equation `‖z(μ)‖ = r`,
/// found in the eigenbasis of `MᵀM`. The hard case (gradient orthogonal to the
/// top eigenspace) is completed along the top eigenvector.
pub fn max_norm_affine_over_ball(a: &Vector, m: &Matrix, r: f64) -> Result<f64> {
    ensure_dims(m.nrows() == a.len(), || {
        format!("M has {} rows but a has length {}", m.nrows(), a.len())
    })?;
    if !(r >= 0.0) {
        return Err(crate::error::Error::DomainError(format!("radius {r} must be nonnegative")));
    }
    let z = maximizer(a, m, r);
    Ok((a + m * z).norm())
}

/// Maximizer `z*` on the ball; exposed for diagnostics.
pub fn maximizer(a: &Vector, m: &Matrix, r: f64) -> Vector {
    let d = m.ncols();
    if r == 0.0 || d == 0 || m.amax() == 0.0 {
        return Vector::zeros(d);
    }
    let h = m.transpose() * m;
    let g = m.transpose() * a;
    let eig = SymmetricEigen::new(h);
    let lambda = &eig.eigenvalues;
    let v = &eig.eigenvectors;
    let gamma = v.transpose() * &g;

    let lmax = lambda.max();
    let eig_tol = 1e-12 * lmax.abs().max(f64::MIN_POSITIVE);
    let top: Vec<usize> = (0..d).filter(|&i| lambda[i] >= lmax - eig_tol).collect();
    let gnorm = gamma.norm();
    let top_weight = top.iter().map(|&i| gamma[i] * gamma[i]).sum::<f64>().sqrt();

    let z_of = |mu: f64| -> Vector {
        let mut c = Vector::zeros(d);
        for i in 0..d {
            let gap = mu - lambda[i];
            if gap > 0.0 {
                c[i] = gamma[i] / gap;
            }
        }
        v * c
    };

    if top_weight <= 1e-13 * gnorm.max(f64::MIN_POSITIVE) {
        // hard case candidate: limit of z(μ) as μ ↓ λ_max restricted off the top space
        let mut c = Vector::zeros(d);
        for i in 0..d {
            if !top.contains(&i) {
                c[i] = gamma[i] / (lmax - lambda[i]);
            }
        }
        let z0 = v * c;
        let n0 = z0.norm();
        if n0 <= r {
            let t = (r * r - n0 * n0).max(0.0).sqrt();
            let dir = v.column(top[0]).into_owned();
            let zp = &z0 + &dir * t;
            let zm = &z0 - &dir * t;
            // both have equal quadratic value in exact arithmetic; pick the better one
            return if (a + m * &zp).norm() >= (a + m * &zm).norm() { zp } else { zm };
        }
    }

    // ψ(μ) = 1/‖z(μ)‖ - 1/r is increasing on (λ_max, ∞); bracket [λ_max, λ_max + ‖γ‖/r].
    let secular_norm = |mu: f64| -> (f64, f64) {
        // returns (‖z‖, d‖z‖²/dμ · (-1/2)) = (‖z‖, Σ γ²/(μ-λ)³)
        let mut s2 = 0.0;
        let mut s3 = 0.0;
        for i in 0..d {
            let gap = mu - lambda[i];
            if gap > 0.0 {
                let t = gamma[i] / gap;
                s2 += t * t;
                s3 += t * t / gap;
            }
        }
        (s2.sqrt(), s3)
    };
    let mut lo = lmax;
    let mut hi = lmax + gnorm / r;
    let mut mu = hi;
    for _ in 0..500 {
        let (nz, s3) = secular_norm(mu);
        if nz == 0.0 {
            hi = mu;
            mu = 0.5 * (lo + hi);
            continue;
        }
        let psi = 1.0 / nz - 1.0 / r;
        if psi < 0.0 {
            lo = mu;
        } else {
            hi = mu;
        }
        if psi.abs() <= 1e-15 / r {
            break;
        }
        let dpsi = s3 / (nz * nz * nz);
        let mut next = if dpsi > 0.0 { mu - psi / dpsi } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (hi - lo) <= 1e-16 * hi.abs().max(1.0) {
            mu = next;
            break;
        }
        mu = next;
    }
    let z = z_of(mu);
    // project onto the sphere to remove residual secular error
    let nz = z.norm();
    if nz > 0.0 {
        z * (r / nz)
    } else {
        z
    }
}
