//! χ² distribution: CDF, density and the quantile function used for the
//! confidence-ellipsoid levels and the Gaussian back-off constants.

use statrs::function::erf::{erf_inv, erfc};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};

pub fn chi2_cdf(dof: usize, q: f64) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    gamma_lr(dof as f64 / 2.0, q / 2.0)
}

pub fn chi2_pdf(dof: usize, q: f64) -> f64 {
    if q <= 0.0 {
        return if dof == 2 { 0.5 } else { 0.0 };
    }
    let k = dof as f64 / 2.0;
    ((k - 1.0) * q.ln() - q / 2.0 - k * std::f64::consts::LN_2 - ln_gamma(k)).exp()
}

/// Quantile `q` with `P(χ²_dof ≤ q) = prob`.
///
/// Newton iteration on the regularized lower incomplete gamma function from a
/// Wilson–Hilferty start, safeguarded by bisection on a maintained bracket.
pub fn chi2_quantile(dof: usize, prob: f64) -> Result<f64> {
    if dof == 0 {
        return Err(Error::DomainError("chi2 degrees of freedom must be >= 1".into()));
    }
    if !(0.0..1.0).contains(&prob) || prob.is_nan() {
        return Err(Error::DomainError(format!(
            "chi2 quantile probability {prob} outside [0, 1)"
        )));
    }
    if prob == 0.0 {
        return Ok(0.0);
    }
    let d = dof as f64;
    if dof == 2 {
        // closed form, exact up to rounding
        return Ok(-2.0 * (-prob).ln_1p());
    }

    let z = std::f64::consts::SQRT_2 * erf_inv(2.0 * prob - 1.0);
    let c = 2.0 / (9.0 * d);
    let mut q = (d * (1.0 - c + z * c.sqrt()).powi(3)).max(1e-300);

    let mut lo = 0.0_f64;
    let mut hi = q.max(1.0);
    while chi2_cdf(dof, hi) < prob {
        lo = hi;
        hi *= 2.0;
    }
    if q <= lo || q >= hi {
        q = 0.5 * (lo + hi);
    }

    for _ in 0..300 {
        let f = chi2_cdf(dof, q) - prob;
        if f < 0.0 {
            lo = lo.max(q);
        } else {
            hi = hi.min(q);
        }
        if f == 0.0 {
            break;
        }
        let dens = chi2_pdf(dof, q);
        let mut next = if dens > 0.0 && dens.is_finite() { q - f / dens } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - q).abs() <= 1e-15 * q.abs().max(f64::MIN_POSITIVE) || hi - lo <= 1e-15 * hi {
            q = next;
            break;
        }
        q = next;
    }
    Ok(q)
}

/// Standard normal quantile `Φ⁻¹(p)`, computed as `sign(2p-1) sqrt(χ²₁(|2p-1|))`.
///
/// For `p ≥ 0.5` this is the back-off constant `c_p` of a Gaussian chance constraint.
pub fn gaussian_backoff(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::DomainError(format!("probability {p} outside (0, 1)")));
    }
    let t = 2.0 * p - 1.0;
    let q = chi2_quantile(1, t.abs())?.sqrt();
    Ok(if t < 0.0 { -q } else { q })
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson on the χ²₁ density after the substitution q = t²,
    /// which removes the endpoint singularity: density(t²)·2t = sqrt(2/π) e^{-t²/2}.
    fn chi2_1_cdf_quadrature(q: f64) -> f64 {
        let b = q.sqrt();
        let n = 20_000;
        let h = b / n as f64;
        let f = |t: f64| (2.0 / std::f64::consts::PI).sqrt() * (-t * t / 2.0).exp();
        let mut s = f(0.0) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn zero_quantile() {
        assert_eq!(chi2_quantile(1, 0.0).unwrap(), 0.0);
        assert_eq!(chi2_quantile(7, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn two_dof_closed_form() {
        let q = chi2_quantile(2, 0.95).unwrap();
        assert!((q - 5.991464547107979).abs() < 1e-12);
    }

    #[test]
    fn one_dof_against_quadrature() {
        let q = chi2_quantile(1, 0.95).unwrap();
        assert!((q - 3.8415).abs() < 1e-4);
        assert!((chi2_1_cdf_quadrature(q) - 0.95).abs() < 1e-10);
    }

    #[test]
    fn cdf_round_trip() {
        for dof in [1, 2, 3, 5, 12, 40, 96] {
            for p in [1e-6, 0.01, 0.3, 0.5, 0.9, 0.99, 0.999999] {
                let q = chi2_quantile(dof, p).unwrap();
                assert!((chi2_cdf(dof, q) - p).abs() < 1e-10, "dof {dof} p {p}");
            }
        }
    }

    #[test]
    fn domain_errors() {
        assert!(chi2_quantile(1, 1.0).is_err());
        assert!(chi2_quantile(1, -0.1).is_err());
        assert!(chi2_quantile(0, 0.5).is_err());
    }

    #[test]
    fn backoff_constants() {
        assert_eq!(gaussian_backoff(0.5).unwrap(), 0.0);
        assert!((gaussian_backoff(0.975).unwrap() - 1.959963984540054).abs() < 1e-9);
        assert!((gaussian_backoff(0.025).unwrap() + 1.959963984540054).abs() < 1e-9);
        assert!((gaussian_backoff(0.9).unwrap() - 1.2815515655446004).abs() < 1e-12);
        assert!((normal_cdf(1.2815515655446004) - 0.9).abs() < 1e-10);
    }
}
