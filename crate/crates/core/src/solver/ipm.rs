//! Homogeneous self-dual embedding interior-point method for
//! `min ½xᵀPx + qᵀx  s.t.  Gx + s = h, s ∈ K` with `K` a product of a
//! nonnegative orthant and second-order cones.

use nalgebra::Cholesky;

use super::cones::{Cone, Scaling};
use super::{InitStrategy, SolverOptions, Status};
use crate::mathcore::{Matrix, Vector};

/// Threshold on `κ/τ` beyond which the embedding is declared infeasible.
const DIVERGENCE: f64 = 1e8;
/// Iterations allowed after the tolerances are first met.
const TAIL_ITERATIONS: usize = 6;

pub(crate) struct Canonical {
    pub p: Matrix,
    pub q: Vector,
    pub g: Matrix,
    pub h: Vector,
    pub cones: Vec<Cone>,
}

impl Canonical {
    fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.cones.len());
        let mut o = 0;
        for c in &self.cones {
            off.push(o);
            o += c.dim();
        }
        off
    }

    fn degree(&self) -> usize {
        self.cones.iter().map(|c| c.degree()).sum()
    }
}

#[derive(Clone)]
pub(crate) struct IpmResult {
    pub status: Status,
    pub x: Vector,
    pub z: Vector,
    pub iterations: usize,
}

struct State {
    x: Vector,
    s: Vector,
    z: Vector,
    tau: f64,
    kappa: f64,
}

struct Direction {
    x: Vector,
    s: Vector,
    z: Vector,
    tau: f64,
    kappa: f64,
}

/// Newton systems `[P Gᵀ; G -W²] [x; z] = [r1; r2]`, solved in the scaled
/// variable `z̃ = W z`: with `Ĝ = W⁻¹ G` this is `[P Ĝᵀ; Ĝ -I] [x; z̃] =
/// [r1; W⁻¹ r2]`, whose reduced matrix `P + ĜᵀĜ` stays well conditioned as
/// the scaling degenerates near the cone boundary (unlike `W²` itself).
struct Kkt<'a> {
    prob: &'a Canonical,
    scalings: &'a [Scaling],
    offsets: &'a [usize],
    g_hat: Matrix,
    chol: Cholesky<f64, nalgebra::Dyn>,
}

impl<'a> Kkt<'a> {
    fn new(prob: &'a Canonical, offsets: &'a [usize], scalings: &'a [Scaling]) -> Option<Kkt<'a>> {
        let n = prob.q.len();
        let mut g_hat = Matrix::zeros(prob.g.nrows(), n);
        let mut col = vec![0.0; prob.g.nrows()];
        for j in 0..n {
            let gj = prob.g.column(j);
            for (i, sc) in scalings.iter().enumerate() {
                let (o, d) = (offsets[i], prob.cones[i].dim());
                sc.apply_inverse(&gj.as_slice()[o..o + d], &mut col[o..o + d]);
            }
            g_hat.column_mut(j).copy_from_slice(&col);
        }
        let reduced = &prob.p + g_hat.transpose() * &g_hat;
        let reduced = (&reduced + reduced.transpose()) * 0.5;
        let scale = reduced.diagonal().amax().max(1.0);
        let mut reg = 1e-14 * scale;
        for _ in 0..8 {
            let mut m = reduced.clone();
            for i in 0..n {
                m[(i, i)] += reg;
            }
            if let Some(chol) = Cholesky::new(m) {
                return Some(Kkt { prob, scalings, offsets, g_hat, chol });
            }
            reg *= 100.0;
        }
        None
    }

    /// Takes `r1` and the scaled `W⁻¹ r2`; returns `(x, z, W z)`.
    fn solve(&self, r1: &Vector, r2s: &Vector) -> (Vector, Vector, Vector) {
        let p = &self.prob.p;
        let gh = &self.g_hat;
        let base = |e1: &Vector, e2: &Vector| {
            let x = self.chol.solve(&(e1 + gh.transpose() * e2));
            let zt = gh * &x - e2;
            (x, zt)
        };
        let (mut x, mut zt) = base(r1, r2s);
        let norm_r = r1.amax().max(r2s.amax()).max(1e-300);
        for _ in 0..5 {
            let e1 = r1 - p * &x - gh.transpose() * &zt;
            let e2 = r2s - gh * &x + &zt;
            if e1.amax().max(e2.amax()) <= 1e-15 * norm_r {
                break;
            }
            let (dx, dzt) = base(&e1, &e2);
            x += dx;
            zt += dzt;
        }
        let z = apply_scaling(self.scalings, self.prob, self.offsets, &zt, true);
        (x, z, zt)
    }
}

pub(crate) fn solve(prob: &Canonical, opts: &SolverOptions) -> IpmResult {
    let n = prob.q.len();
    let m = prob.h.len();
    let offsets = prob.offsets();
    let nu = prob.degree() as f64;
    let mut st = initial_point(prob, &offsets, opts.init);

    let norm_q = prob.q.amax();
    let norm_h = prob.h.amax();
    let mut last = IpmResult { status: Status::IterationLimit, x: Vector::zeros(n), z: Vector::zeros(m), iterations: 0 };
    // Once the tolerances are met, a few more iterations usually shrink the
    // gap by orders of magnitude, which matters for the primal accuracy. The
    // best iterate meeting the tolerances is returned.
    let mut best: Option<IpmResult> = None;
    let mut best_gap = f64::INFINITY;
    let mut extra = 0;
    let finish = |best: Option<IpmResult>, mut last: IpmResult, status: Status| -> IpmResult {
        best.unwrap_or_else(|| {
            last.status = status;
            last
        })
    };

    for it in 0..=opts.max_iterations {
        // Residuals of the embedding.
        let px = &prob.p * &st.x;
        let xpx = st.x.dot(&px);
        let gtz = prob.g.transpose() * &st.z;
        let gx = &prob.g * &st.x;
        let r_x = &px + &gtz + &prob.q * st.tau;
        let r_z = &gx + &st.s - &prob.h * st.tau;
        let r_tau = prob.q.dot(&st.x) + prob.h.dot(&st.z) + st.kappa + xpx / st.tau;
        if !(r_x.iter().chain(r_z.iter()).all(|v| v.is_finite()) && r_tau.is_finite()) {
            return finish(best, last, Status::NumericalFailure);
        }

        // Convergence on the normalized iterate.
        let t = st.tau;
        let primal_obj = 0.5 * xpx / (t * t) + prob.q.dot(&st.x) / t;
        let dual_obj = -0.5 * xpx / (t * t) - prob.h.dot(&st.z) / t;
        let gap = (primal_obj - dual_obj).abs();
        let gap_rel = gap / primal_obj.abs().min(dual_obj.abs()).max(1.0);
        let res_p = (&gx + &st.s - &prob.h * t).amax() / t;
        let res_d = (&px + &gtz + &prob.q * t).amax() / t;
        last = IpmResult { status: Status::IterationLimit, x: &st.x / t, z: &st.z / t, iterations: it };
        if res_p <= opts.feasibility_tolerance * (1.0 + norm_h)
            && res_d <= opts.feasibility_tolerance * (1.0 + norm_q)
            && (gap <= opts.gap_tolerance || gap_rel <= opts.gap_tolerance)
        {
            if gap < best_gap {
                best_gap = gap;
                best = Some(IpmResult { status: Status::Optimal, ..last.clone() });
            }
            extra += 1;
            if extra > TAIL_ITERATIONS || gap <= 1e-15 * (1.0 + primal_obj.abs()) {
                return finish(best, last, Status::Optimal);
            }
        } else if best.is_some() {
            return finish(best, last, Status::Optimal);
        }

        // Infeasibility certificates.
        let hz = prob.h.dot(&st.z);
        let qx = prob.q.dot(&st.x);
        let tol = opts.feasibility_tolerance;
        if best.is_none() && hz < 0.0 && gtz.amax() <= tol * (-hz) && (st.kappa / st.tau > 1.0) {
            last.status = Status::Infeasible;
            return last;
        }
        if best.is_none() && qx < 0.0 && px.amax() <= tol * (-qx) && (&gx + &st.s).amax() <= tol * (-qx) && st.kappa / st.tau > 1.0 {
            last.status = Status::Infeasible;
            return last;
        }
        if best.is_none() && st.kappa / st.tau > DIVERGENCE {
            last.status = Status::Infeasible;
            return last;
        }
        if it == opts.max_iterations {
            break;
        }

        // Scaling and the reduced factorization.
        let scalings: Vec<Scaling> = prob
            .cones
            .iter()
            .zip(&offsets)
            .map(|(c, &o)| {
                let d = c.dim();
                Scaling::new(*c, &st.s.as_slice()[o..o + d], &st.z.as_slice()[o..o + d])
            })
            .collect();
        let kkt = match Kkt::new(prob, &offsets, &scalings) {
            Some(k) => k,
            None => return finish(best, last, Status::NumericalFailure),
        };
        let lambda = apply_scaling(&scalings, prob, &offsets, &st.z, false);
        let (dx2, dz2, w_dz2) = kkt.solve(&(-&prob.q), &apply_scaling(&scalings, prob, &offsets, &prob.h, true));
        let mu = (st.s.dot(&st.z) + st.tau * st.kappa) / (nu + 1.0);

        // Affine direction.
        let ds_aff = lambda.clone(); // λ ∖ (λ ∘ λ)
        let aff = direction(prob, &kkt, &offsets, &scalings, &st, &r_x, &r_z, r_tau, st.tau * st.kappa, &ds_aff, 1.0, &dx2, &dz2, &w_dz2);
        let alpha_aff = step_length(prob, &offsets, &st, &aff).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3);

        // Combined predictor-corrector direction.
        let w_inv_ds = apply_scaling(&scalings, prob, &offsets, &aff.s, true);
        let w_dz = apply_scaling(&scalings, prob, &offsets, &aff.z, false);
        let mut d_s = Vector::zeros(m);
        let mut tmp = vec![0.0; m.max(1)];
        for (c, &o) in prob.cones.iter().zip(&offsets) {
            let d = c.dim();
            let (l, a, b) = (&lambda.as_slice()[o..o + d], &w_inv_ds.as_slice()[o..o + d], &w_dz.as_slice()[o..o + d]);
            c.product(l, l, &mut tmp[..d]);
            let mut cross = vec![0.0; d];
            c.product(a, b, &mut cross);
            let out = &mut d_s.as_mut_slice()[o..o + d];
            for i in 0..d {
                out[i] = tmp[i] + cross[i];
            }
            c.add_identity(out, -sigma * mu);
        }
        let mut ds_tilde = Vector::zeros(m);
        for (c, &o) in prob.cones.iter().zip(&offsets) {
            let d = c.dim();
            c.inverse_product(&lambda.as_slice()[o..o + d], &d_s.as_slice()[o..o + d], &mut ds_tilde.as_mut_slice()[o..o + d]);
        }
        let d_kappa = st.tau * st.kappa + aff.tau * aff.kappa - sigma * mu;
        let dir = direction(prob, &kkt, &offsets, &scalings, &st, &r_x, &r_z, r_tau, d_kappa, &ds_tilde, 1.0 - sigma, &dx2, &dz2, &w_dz2);
        let alpha_max = step_length(prob, &offsets, &st, &dir);
        let alpha = (opts.step_fraction * alpha_max).min(1.0);
        if !(alpha > 1e-12) {
            return finish(best, last, Status::NumericalFailure);
        }
        st.x += &dir.x * alpha;
        st.s += &dir.s * alpha;
        st.z += &dir.z * alpha;
        st.tau += dir.tau * alpha;
        st.kappa += dir.kappa * alpha;
        // Rescale the embedding to keep τ + κ of order one.
        let scale = st.tau.max(st.kappa);
        if !(1e-6..=1e6).contains(&scale) {
            st.x /= scale;
            st.s /= scale;
            st.z /= scale;
            st.tau /= scale;
            st.kappa /= scale;
        }
    }
    finish(best, last, Status::IterationLimit)
}

#[allow(clippy::too_many_arguments)]
fn direction(
    prob: &Canonical,
    kkt: &Kkt<'_>,
    offsets: &[usize],
    scalings: &[Scaling],
    st: &State,
    r_x: &Vector,
    r_z: &Vector,
    r_tau: f64,
    d_kappa: f64,
    ds_tilde: &Vector,
    weight: f64,
    dx2: &Vector,
    dz2: &Vector,
    w_dz2: &Vector,
) -> Direction {
    let rhs1 = -(r_x * weight);
    let rhs2 = -(apply_scaling(scalings, prob, offsets, r_z, true) * weight) + ds_tilde;
    let (dx1, dz1, _) = kkt.solve(&rhs1, &rhs2);
    let xi = &st.x / st.tau;
    let p_xi = &prob.p * &xi;
    let c = &prob.q + &p_xi * 2.0;
    let d_tau = weight * r_tau;
    let diff = dx2 - &xi;
    let den = diff.dot(&(&prob.p * &diff)) + w_dz2.norm_squared() + st.kappa / st.tau;
    let num = d_tau - d_kappa / st.tau + c.dot(&dx1) + prob.h.dot(&dz1);
    let dtau = num / den;
    let dx = dx1 + dx2 * dtau;
    let dz = dz1 + dz2 * dtau;
    // The linearized primal equation gives Δs without passing through the
    // (possibly very ill-conditioned) scaling, so primal residuals keep
    // contracting near the cone boundary.
    let ds = -(r_z * weight) - &prob.g * &dx + &prob.h * dtau;
    let dkappa = -(d_kappa + st.kappa * dtau) / st.tau;
    Direction { x: dx, s: ds, z: dz, tau: dtau, kappa: dkappa }
}

fn apply_scaling(scalings: &[Scaling], prob: &Canonical, offsets: &[usize], v: &Vector, inverse: bool) -> Vector {
    let mut out = Vector::zeros(v.len());
    for (i, sc) in scalings.iter().enumerate() {
        let d = prob.cones[i].dim();
        let o = offsets[i];
        let src = &v.as_slice()[o..o + d];
        let dst = &mut out.as_mut_slice()[o..o + d];
        if inverse {
            sc.apply_inverse(src, dst);
        } else {
            sc.apply(src, dst);
        }
    }
    out
}

fn step_length(prob: &Canonical, offsets: &[usize], st: &State, d: &Direction) -> f64 {
    let mut a = f64::INFINITY;
    for (c, &o) in prob.cones.iter().zip(offsets) {
        let n = c.dim();
        a = a.min(c.max_step(&st.s.as_slice()[o..o + n], &d.s.as_slice()[o..o + n]));
        a = a.min(c.max_step(&st.z.as_slice()[o..o + n], &d.z.as_slice()[o..o + n]));
    }
    if d.tau < 0.0 {
        a = a.min(-st.tau / d.tau);
    }
    if d.kappa < 0.0 {
        a = a.min(-st.kappa / d.kappa);
    }
    a
}

fn initial_point(prob: &Canonical, offsets: &[usize], init: InitStrategy) -> State {
    let n = prob.q.len();
    let m = prob.h.len();
    let unit = |v: &mut Vector| {
        for (c, &o) in prob.cones.iter().zip(offsets) {
            let d = c.dim();
            let sl = &mut v.as_mut_slice()[o..o + d];
            sl.iter_mut().for_each(|x| *x = 0.0);
            c.add_identity(sl, 1.0);
        }
    };
    match init {
        InitStrategy::Unit => {
            let mut s = Vector::zeros(m);
            unit(&mut s);
            let z = s.clone();
            State { x: Vector::zeros(n), s, z, tau: 1.0, kappa: 1.0 }
        }
        InitStrategy::Default => {
            // Least-squares start: (P + GᵀG) x = -q + Gᵀh, then shift s = h - Gx
            // and z = Gx - h into the cone interior.
            let mut mat = &prob.p + prob.g.transpose() * &prob.g;
            let scale = mat.diagonal().amax().max(1.0);
            for i in 0..n {
                mat[(i, i)] += 1e-8 * scale;
            }
            let rhs = -&prob.q + prob.g.transpose() * &prob.h;
            let x = match Cholesky::new(mat) {
                Some(ch) => ch.solve(&rhs),
                None => Vector::zeros(n),
            };
            let r = &prob.h - &prob.g * &x;
            let s = shift_into_cone(prob, offsets, &r);
            let z = shift_into_cone(prob, offsets, &(-&r));
            State { x, s, z, tau: 1.0, kappa: 1.0 }
        }
    }
}

fn shift_into_cone(prob: &Canonical, offsets: &[usize], v: &Vector) -> Vector {
    let mut out = v.clone();
    for (c, &o) in prob.cones.iter().zip(offsets) {
        let d = c.dim();
        let sl = &mut out.as_mut_slice()[o..o + d];
        let e = c.min_eig(sl);
        c.add_identity(sl, 1.0 + (-e).max(0.0));
    }
    out
}
