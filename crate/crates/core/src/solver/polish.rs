//! Active-set Newton refinement of an interior-point solution.
//!
//! The interior-point iterate stops at a small but nonzero barrier parameter,
//! which limits primal accuracy. With the active rows guessed from the
//! iterate (slack smaller than multiplier), the KKT conditions become a smooth
//! square system; a few Newton steps typically reach machine precision. The
//! result is kept only when its KKT residuals beat the original.

use super::{check_kkt, ConicProgram, Solution};
use crate::mathcore::{Matrix, Vector};

enum Active {
    Linear(usize),
    /// Cone row whose norm argument is nonzero at the solution.
    Soc(usize),
}

pub(crate) fn polish(prog: &ConicProgram, sol: &Solution) -> Option<Solution> {
    let z0 = &sol.primal;
    let mut active = Vec::new();
    let mut lambda = Vec::new();
    for (i, r) in prog.linear.iter().enumerate() {
        let slack = r.b - r.a.dot(z0);
        if slack < sol.linear_duals[i] {
            active.push(Active::Linear(i));
            lambda.push(sol.linear_duals[i]);
        }
    }
    for (i, r) in prog.soc.iter().enumerate() {
        let u = &r.f * z0 + &r.g;
        let slack = r.c.dot(z0) + r.d - u.norm();
        let y0 = sol.soc_duals[i][0];
        if slack < y0 {
            if u.norm() <= 1e-9 * (1.0 + r.g.norm()) {
                // Apex of the cone: not smooth, leave the iterate alone.
                return None;
            }
            active.push(Active::Soc(i));
            lambda.push(y0);
        }
    }
    let n = prog.dim;
    let na = active.len();
    if na > n {
        return None;
    }
    let mut z = z0.clone();
    let mut lam = Vector::from_vec(lambda);
    for _ in 0..6 {
        let mut jac = Matrix::zeros(n + na, n + na);
        let mut res = Vector::zeros(n + na);
        jac.view_mut((0, 0), (n, n)).copy_from(&prog.p);
        let mut grad = &prog.p * &z + &prog.q;
        for (a, act) in active.iter().enumerate() {
            let (g, phi) = match act {
                Active::Linear(i) => {
                    let r = &prog.linear[*i];
                    (r.a.clone(), r.a.dot(&z) - r.b)
                }
                Active::Soc(i) => {
                    let r = &prog.soc[*i];
                    let u = &r.f * &z + &r.g;
                    let nu = u.norm();
                    if nu == 0.0 {
                        return None;
                    }
                    let fu = r.f.transpose() * &u;
                    // Hessian of ‖Fz + g‖: Fᵀ(I/‖u‖ - uuᵀ/‖u‖³)F.
                    let hess = (r.f.transpose() * &r.f) / nu - (&fu * fu.transpose()) / (nu * nu * nu);
                    let mut blk = jac.view_mut((0, 0), (n, n));
                    blk += hess * lam[a];
                    (fu / nu - &r.c, nu - r.c.dot(&z) - r.d)
                }
            };
            grad += &g * lam[a];
            jac.view_mut((0, n + a), (n, 1)).copy_from(&g);
            jac.view_mut((n + a, 0), (1, n)).copy_from(&g.transpose());
            res[n + a] = phi;
        }
        res.rows_mut(0, n).copy_from(&grad);
        if res.amax() < 1e-15 * (1.0 + prog.q.amax()) {
            break;
        }
        let step = jac.lu().solve(&(-&res))?;
        z += step.rows(0, n);
        lam += step.rows(n, na);
        if !z.iter().chain(lam.iter()).all(|v| v.is_finite()) {
            return None;
        }
    }
    if lam.iter().any(|&l| l < 0.0) {
        return None;
    }
    let mut out = sol.clone();
    out.primal = z.clone();
    out.objective = prog.objective(&z);
    out.linear_duals.iter_mut().for_each(|y| *y = 0.0);
    for d in out.soc_duals.iter_mut() {
        d.fill(0.0);
    }
    for (a, act) in active.iter().enumerate() {
        match act {
            Active::Linear(i) => out.linear_duals[*i] = lam[a],
            Active::Soc(i) => {
                let r = &prog.soc[*i];
                let u = &r.f * &z + &r.g;
                let d = &mut out.soc_duals[*i];
                d[0] = lam[a];
                d.rows_mut(1, u.len()).copy_from(&(&u * (-lam[a] / u.norm())));
            }
        }
    }
    out.kkt = check_kkt(prog, &out).ok()?;
    (out.kkt.max() < sol.kkt.max()).then_some(out)
}
