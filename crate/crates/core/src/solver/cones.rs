//! Nonnegative orthant and second-order cone primitives: Jordan algebra,
//! Nesterov-Todd scaling and step-to-boundary computations.

use crate::mathcore::{Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    Nonneg(usize),
    /// `{(t, v) : t ≥ ‖v‖}` of total dimension `d`.
    Soc(usize),
}

impl Cone {
    pub fn dim(self) -> usize {
        match self {
            Cone::Nonneg(d) | Cone::Soc(d) => d,
        }
    }

    /// Barrier degree contribution.
    pub fn degree(self) -> usize {
        match self {
            Cone::Nonneg(d) => d,
            Cone::Soc(_) => 1,
        }
    }

    /// Largest `t` with `x - t e` still in the cone (the smallest Jordan eigenvalue).
    pub fn min_eig(self, x: &[f64]) -> f64 {
        match self {
            Cone::Nonneg(_) => x.iter().copied().fold(f64::INFINITY, f64::min),
            Cone::Soc(_) => x[0] - norm(&x[1..]),
        }
    }

    pub fn add_identity(self, x: &mut [f64], t: f64) {
        match self {
            Cone::Nonneg(_) => x.iter_mut().for_each(|v| *v += t),
            Cone::Soc(_) => x[0] += t,
        }
    }

    /// Jordan product `x ∘ y`.
    pub fn product(self, x: &[f64], y: &[f64], out: &mut [f64]) {
        match self {
            Cone::Nonneg(_) => {
                for i in 0..x.len() {
                    out[i] = x[i] * y[i];
                }
            }
            Cone::Soc(_) => {
                out[0] = dot(x, y);
                for i in 1..x.len() {
                    out[i] = x[0] * y[i] + y[0] * x[i];
                }
            }
        }
    }

    /// Solves `λ ∘ x = y` for `x` with `λ` in the cone interior.
    pub fn inverse_product(self, lambda: &[f64], y: &[f64], out: &mut [f64]) {
        match self {
            Cone::Nonneg(_) => {
                for i in 0..y.len() {
                    out[i] = y[i] / lambda[i];
                }
            }
            Cone::Soc(_) => {
                let l0 = lambda[0];
                let det = l0 * l0 - dot(&lambda[1..], &lambda[1..]);
                let x0 = (l0 * y[0] - dot(&lambda[1..], &y[1..])) / det;
                out[0] = x0;
                for i in 1..y.len() {
                    out[i] = (y[i] - lambda[i] * x0) / l0;
                }
            }
        }
    }

    /// Largest `α ≥ 0` (possibly infinite) keeping `x + α dx` in the cone.
    pub fn max_step(self, x: &[f64], dx: &[f64]) -> f64 {
        match self {
            Cone::Nonneg(_) => {
                let mut a = f64::INFINITY;
                for i in 0..x.len() {
                    if dx[i] < 0.0 {
                        a = a.min(-x[i] / dx[i]);
                    }
                }
                a
            }
            Cone::Soc(_) => soc_max_step(x, dx),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn soc_max_step(x: &[f64], dx: &[f64]) -> f64 {
    let mut alpha = f64::INFINITY;
    if dx[0] < 0.0 {
        alpha = -x[0] / dx[0];
    }
    // x0(α)^2 - ‖x1(α)‖^2 = a α^2 + b α + c, positive at α = 0.
    let a = dx[0] * dx[0] - dot(&dx[1..], &dx[1..]);
    let b = 2.0 * (x[0] * dx[0] - dot(&x[1..], &dx[1..]));
    let c = (x[0] * x[0] - dot(&x[1..], &x[1..])).max(0.0);
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return alpha;
    }
    if a.abs() <= 1e-15 * scale {
        if b < 0.0 {
            alpha = alpha.min(-c / b);
        }
        return alpha;
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return alpha;
    }
    // Numerically stable roots.
    let sq = disc.sqrt();
    let t = -0.5 * (b + b.signum() * sq);
    let mut roots = [t / a, if t != 0.0 { c / t } else { f64::INFINITY }];
    roots.sort_by(|p, q| p.total_cmp(q));
    if let Some(r) = roots.iter().find(|&&r| r > 0.0) {
        alpha = alpha.min(*r);
    }
    alpha
}

/// Nesterov-Todd scaling `W` of one cone: symmetric, with `W z = W⁻¹ s = λ`.
#[derive(Debug, Clone)]
pub enum Scaling {
    Nonneg { w: Vec<f64> },
    Soc { eta: f64, wbar: Vec<f64> },
}

impl Scaling {
    pub fn new(cone: Cone, s: &[f64], z: &[f64]) -> Scaling {
        match cone {
            Cone::Nonneg(_) => Scaling::Nonneg { w: s.iter().zip(z).map(|(a, b)| (a / b).sqrt()).collect() },
            Cone::Soc(_) => {
                let s_res = (s[0] * s[0] - dot(&s[1..], &s[1..])).max(f64::MIN_POSITIVE).sqrt();
                let z_res = (z[0] * z[0] - dot(&z[1..], &z[1..])).max(f64::MIN_POSITIVE).sqrt();
                let sbar: Vec<f64> = s.iter().map(|v| v / s_res).collect();
                let zbar: Vec<f64> = z.iter().map(|v| v / z_res).collect();
                let gamma = ((1.0 + dot(&sbar, &zbar)) / 2.0).sqrt();
                let mut wbar = vec![0.0; s.len()];
                wbar[0] = (sbar[0] + zbar[0]) / (2.0 * gamma);
                for i in 1..s.len() {
                    wbar[i] = (sbar[i] - zbar[i]) / (2.0 * gamma);
                }
                Scaling::Soc { eta: (s_res / z_res).sqrt(), wbar }
            }
        }
    }

    /// `W x`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Scaling::Nonneg { w } => {
                for i in 0..x.len() {
                    out[i] = w[i] * x[i];
                }
            }
            Scaling::Soc { eta, wbar } => wbar_apply(wbar, *eta, false, x, out),
        }
    }

    /// `W⁻¹ x`.
    pub fn apply_inverse(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Scaling::Nonneg { w } => {
                for i in 0..x.len() {
                    out[i] = x[i] / w[i];
                }
            }
            Scaling::Soc { eta, wbar } => wbar_apply(wbar, 1.0 / eta, true, x, out),
        }
    }

    /// Dense `W²` (`squared = true`) or `W⁻²`.
    pub fn square_matrix(&self, inverse: bool) -> Matrix {
        let d = match self {
            Scaling::Nonneg { w } => w.len(),
            Scaling::Soc { wbar, .. } => wbar.len(),
        };
        if let Scaling::Nonneg { w } = self {
            return Matrix::from_diagonal(&Vector::from_iterator(
                d,
                w.iter().map(|v| if inverse { 1.0 / (v * v) } else { v * v }),
            ));
        }
        let mut out = Matrix::zeros(d, d);
        let mut e = vec![0.0; d];
        let mut t1 = vec![0.0; d];
        let mut t2 = vec![0.0; d];
        for j in 0..d {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            if inverse {
                self.apply_inverse(&e, &mut t1);
                self.apply_inverse(&t1, &mut t2);
            } else {
                self.apply(&e, &mut t1);
                self.apply(&t1, &mut t2);
            }
            out.column_mut(j).copy_from_slice(&t2);
        }
        (&out + out.transpose()) * 0.5
    }
}

/// `scale · W̄ x`, or `scale · J W̄ J x` when `reflect` (the inverse up to scale).
fn wbar_apply(wbar: &[f64], scale: f64, reflect: bool, x: &[f64], out: &mut [f64]) {
    let w0 = wbar[0];
    let w1 = &wbar[1..];
    let sign = if reflect { -1.0 } else { 1.0 };
    let x0 = x[0];
    let x1 = &x[1..];
    // With J x = (x0, -x1): J W̄ J x = (w0 x0 - w1ᵀx1, -x0 w1 + x1 + w1 (w1ᵀx1)/(1+w0)).
    let w1x1 = dot(w1, x1);
    out[0] = scale * (w0 * x0 + sign * w1x1);
    let coef = sign * x0 + w1x1 / (1.0 + w0);
    for i in 0..x1.len() {
        out[i + 1] = scale * (x1[i] + coef * w1[i]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathcore::Rng;

    fn interior(rng: &mut Rng, d: usize) -> Vec<f64> {
        let mut v: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
        v[0] = norm(&v[1..]) + 0.1 + rng.uniform();
        v
    }

    #[test]
    fn nt_scaling_maps_z_to_s() {
        let mut rng = Rng::new(1, 0);
        for d in [1usize, 2, 5] {
            for cone in [Cone::Soc(d + 1), Cone::Nonneg(d)] {
                let dim = cone.dim();
                let (s, z) = match cone {
                    Cone::Soc(_) => (interior(&mut rng, dim), interior(&mut rng, dim)),
                    Cone::Nonneg(_) => (
                        (0..dim).map(|_| rng.uniform() + 0.1).collect(),
                        (0..dim).map(|_| rng.uniform() + 0.1).collect(),
                    ),
                };
                let w = Scaling::new(cone, &s, &z);
                let mut wz = vec![0.0; dim];
                let mut winv_s = vec![0.0; dim];
                w.apply(&z, &mut wz);
                w.apply_inverse(&s, &mut winv_s);
                for i in 0..dim {
                    assert!((wz[i] - winv_s[i]).abs() < 1e-12, "{cone:?}");
                }
                let w2 = w.square_matrix(false);
                let w2inv = w.square_matrix(true);
                let zv = Vector::from_column_slice(&z);
                assert!((&w2 * &zv - Vector::from_column_slice(&s)).amax() < 1e-12);
                assert!((&w2 * &w2inv - Matrix::identity(dim, dim)).amax() < 1e-10);
                // λ lies in the cone interior.
                assert!(cone.min_eig(&wz) > 0.0);
            }
        }
    }

    #[test]
    fn jordan_inverse_product() {
        let mut rng = Rng::new(2, 0);
        let l = interior(&mut rng, 4);
        let y: Vec<f64> = (0..4).map(|_| rng.standard_normal()).collect();
        let mut x = vec![0.0; 4];
        let mut back = vec![0.0; 4];
        Cone::Soc(4).inverse_product(&l, &y, &mut x);
        Cone::Soc(4).product(&l, &x, &mut back);
        for i in 0..4 {
            assert!((back[i] - y[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn soc_step_lands_on_boundary() {
        let mut rng = Rng::new(3, 0);
        for _ in 0..200 {
            let x = interior(&mut rng, 3);
            let dx: Vec<f64> = (0..3).map(|_| rng.standard_normal() * 3.0).collect();
            let a = Cone::Soc(3).max_step(&x, &dx);
            if a.is_finite() {
                let y: Vec<f64> = x.iter().zip(&dx).map(|(p, q)| p + a * q).collect();
                assert!(Cone::Soc(3).min_eig(&y).abs() < 1e-8 * (1.0 + y[0].abs()));
                let inner: Vec<f64> = x.iter().zip(&dx).map(|(p, q)| p + 0.999 * a * q).collect();
                assert!(Cone::Soc(3).min_eig(&inner) >= -1e-12);
            } else {
                let y: Vec<f64> = x.iter().zip(&dx).map(|(p, q)| p + 1e6 * q).collect();
                assert!(Cone::Soc(3).min_eig(&y) >= -1e-6 * y[0].abs());
            }
        }
    }
}
