//! Dense primal-dual interior-point solver for convex quadratic programs with
//! linear and second-order cone constraints, plus KKT certification.

pub mod cones;
mod ipm;
mod polish;
pub mod program;

use serde::{Deserialize, Serialize};

pub use program::{ConicProgram, LinearRow, RowTag, SocRow, VariableMap};

use crate::error::{ensure_dims, Error, Result};
use crate::mathcore::{serde_mat, Matrix, Vector};
use cones::Cone;
use ipm::Canonical;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    /// Primal infeasible, or dual infeasible (unbounded objective).
    Infeasible,
    IterationLimit,
    NumericalFailure,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Starting point of the interior-point iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// Least-squares primal estimate shifted into the cone interior.
    #[default]
    Default,
    /// `x = 0` and `s = z = e`.
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub gap_tolerance: f64,
    pub feasibility_tolerance: f64,
    pub step_fraction: f64,
    pub init: InitStrategy,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: 200,
            gap_tolerance: 1e-9,
            feasibility_tolerance: 1e-9,
            step_fraction: 0.99,
            init: InitStrategy::Default,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.gap_tolerance > 0.0 && self.feasibility_tolerance > 0.0) {
            return Err(Error::DomainError("solver tolerances must be positive".into()));
        }
        if !(self.step_fraction > 0.0 && self.step_fraction < 1.0) {
            return Err(Error::DomainError("step_fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Largest KKT violations of a candidate primal-dual pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct KktResiduals {
    /// `‖Pz + q + Σ aᵢyᵢ - Σ (cᵢ y0ᵢ + Fᵢᵀ y1ᵢ)‖∞`.
    pub stationarity: f64,
    /// Largest row violation `aᵀz - b` or `‖Fz + g‖ - cᵀz - d`, clipped at zero.
    pub primal: f64,
    /// Largest dual cone violation (`-yᵢ` or `‖y1‖ - y0`), clipped at zero.
    pub dual: f64,
    /// Largest per-row `|slack · multiplier|`.
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal).max(self.dual).max(self.complementarity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub status: Status,
    #[serde(with = "serde_mat::vector")]
    pub primal: Vector,
    pub objective: f64,
    /// Multipliers `yᵢ ≥ 0` of the linear rows.
    pub linear_duals: Vec<f64>,
    /// Multipliers `(y0, y1)` of the cone rows, `y0 ≥ ‖y1‖`.
    #[serde(with = "serde_mat::vectors")]
    pub soc_duals: Vec<Vector>,
    pub kkt: KktResiduals,
    pub iterations: usize,
}

impl Solution {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Contract for substituting another conic solver for the embedded one.
pub trait ConicBackend {
    fn name(&self) -> &str;
    fn solve(&self, prog: &ConicProgram, opts: &SolverOptions) -> Result<Solution>;
}

/// The embedded reference solver.
#[derive(Debug, Clone, Copy, Default)]
pub struct InteriorPoint;

impl ConicBackend for InteriorPoint {
    fn name(&self) -> &str {
        "interior-point"
    }

    fn solve(&self, prog: &ConicProgram, opts: &SolverOptions) -> Result<Solution> {
        solve(prog, opts)
    }
}

/// Presolved rows: where each original row went.
enum Placement {
    Linear(usize),
    /// Cone row reduced to a linear row; keeps `g` to rebuild the cone dual.
    ConeAsLinear(usize),
    Soc(usize),
    Dropped,
}

/// Solves the program. Deterministic; never panics on well-formed input.
pub fn solve(prog: &ConicProgram, opts: &SolverOptions) -> Result<Solution> {
    prog.validate()?;
    opts.validate()?;
    let n = prog.dim;

    // Presolve: drop empty linear rows, turn cones with F = 0 into linear rows.
    let mut lin_a: Vec<Vector> = Vec::new();
    let mut lin_b: Vec<f64> = Vec::new();
    let mut lin_place = Vec::with_capacity(prog.linear.len());
    let mut trivially_infeasible = false;
    for row in &prog.linear {
        if row.a.amax() == 0.0 {
            trivially_infeasible |= row.b < 0.0;
            lin_place.push(Placement::Dropped);
        } else {
            lin_place.push(Placement::Linear(lin_a.len()));
            lin_a.push(row.a.clone());
            lin_b.push(row.b);
        }
    }
    let mut soc_place = Vec::with_capacity(prog.soc.len());
    let mut socs: Vec<&SocRow> = Vec::new();
    for row in &prog.soc {
        if row.f.amax() == 0.0 {
            // ‖g‖ ≤ cᵀz + d  ⇔  -cᵀz ≤ d - ‖g‖
            let rhs = row.d - row.g.norm();
            if row.c.amax() == 0.0 {
                trivially_infeasible |= rhs < 0.0;
                soc_place.push(Placement::Dropped);
            } else {
                soc_place.push(Placement::ConeAsLinear(lin_a.len()));
                lin_a.push(-&row.c);
                lin_b.push(rhs);
            }
        } else {
            soc_place.push(Placement::Soc(socs.len()));
            socs.push(row);
        }
    }
    if trivially_infeasible {
        return Ok(Solution {
            status: Status::Infeasible,
            primal: Vector::zeros(n),
            objective: f64::NAN,
            linear_duals: vec![0.0; prog.linear.len()],
            soc_duals: prog.soc.iter().map(|r| Vector::zeros(r.g.len() + 1)).collect(),
            kkt: KktResiduals::default(),
            iterations: 0,
        });
    }

    let n_lin = lin_a.len();
    let total: usize = n_lin + socs.iter().map(|r| r.g.len() + 1).sum::<usize>();
    let mut g = Matrix::zeros(total, n);
    let mut h = Vector::zeros(total);
    let mut cones = Vec::new();
    for (i, a) in lin_a.iter().enumerate() {
        g.row_mut(i).copy_from(&a.transpose());
        h[i] = lin_b[i];
    }
    if n_lin > 0 {
        cones.push(Cone::Nonneg(n_lin));
    }
    let mut off = n_lin;
    let mut soc_offsets = Vec::with_capacity(socs.len());
    for r in &socs {
        let d = r.g.len() + 1;
        soc_offsets.push(off);
        g.row_mut(off).copy_from(&(-r.c.transpose()));
        h[off] = r.d;
        g.view_mut((off + 1, 0), (d - 1, n)).copy_from(&(-&r.f));
        h.rows_mut(off + 1, d - 1).copy_from(&r.g);
        cones.push(Cone::Soc(d));
        off += d;
    }
    let canon = Canonical { p: (&prog.p + prog.p.transpose()) * 0.5, q: prog.q.clone(), g, h, cones };
    let res = ipm::solve(&canon, opts);

    let linear_duals = lin_place
        .iter()
        .map(|pl| match pl {
            Placement::Linear(i) => res.z[*i],
            _ => 0.0,
        })
        .collect();
    let soc_duals = prog
        .soc
        .iter()
        .zip(&soc_place)
        .map(|(row, pl)| match pl {
            Placement::Soc(i) => res.z.rows(soc_offsets[*i], row.g.len() + 1).into_owned(),
            Placement::ConeAsLinear(i) => {
                let y0 = res.z[*i];
                let mut y = Vector::zeros(row.g.len() + 1);
                y[0] = y0;
                let gn = row.g.norm();
                if gn > 0.0 {
                    y.rows_mut(1, row.g.len()).copy_from(&(&row.g * (-y0 / gn)));
                }
                y
            }
            _ => Vector::zeros(row.g.len() + 1),
        })
        .collect();
    let mut sol = Solution {
        status: res.status,
        objective: prog.objective(&res.x),
        primal: res.x,
        linear_duals,
        soc_duals,
        kkt: KktResiduals::default(),
        iterations: res.iterations,
    };
    sol.kkt = check_kkt(prog, &sol)?;
    if sol.status == Status::Optimal {
        if let Some(better) = polish::polish(prog, &sol) {
            sol = better;
        }
    }
    Ok(sol)
}

/// KKT residuals of `sol` for `prog`; a pure diagnostic.
pub fn check_kkt(prog: &ConicProgram, sol: &Solution) -> Result<KktResiduals> {
    let z = &sol.primal;
    ensure_dims(z.len() == prog.dim, || "primal dimension".into())?;
    ensure_dims(sol.linear_duals.len() == prog.linear.len() && sol.soc_duals.len() == prog.soc.len(), || {
        "dual multiplier count".into()
    })?;
    let mut grad = &prog.p * z + &prog.q;
    let mut res = KktResiduals::default();
    for (row, &y) in prog.linear.iter().zip(&sol.linear_duals) {
        grad += &row.a * y;
        let slack = row.b - row.a.dot(z);
        res.primal = res.primal.max(-slack);
        res.dual = res.dual.max(-y);
        res.complementarity = res.complementarity.max((slack * y).abs());
    }
    for (row, y) in prog.soc.iter().zip(&sol.soc_duals) {
        ensure_dims(y.len() == row.g.len() + 1, || "cone dual dimension".into())?;
        let y1 = y.rows(1, row.g.len());
        grad -= &row.c * y[0] + row.f.transpose() * y1;
        let arg = &row.f * z + &row.g;
        let t = row.c.dot(z) + row.d;
        res.primal = res.primal.max(arg.norm() - t);
        res.dual = res.dual.max(y1.norm() - y[0]);
        res.complementarity = res.complementarity.max((y[0] * t + y1.dot(&arg)).abs());
    }
    res.stationarity = if grad.is_empty() { 0.0 } else { grad.amax() };
    res.primal = res.primal.max(0.0);
    res.dual = res.dual.max(0.0);
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prog(p: &[f64], q: &[f64]) -> ConicProgram {
        let n = q.len();
        ConicProgram::new(Matrix::from_row_slice(n, n, p), Vector::from_column_slice(q), 0.0).unwrap()
    }

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    #[test]
    fn unconstrained_qp() {
        let sol = solve(&prog(&[1., 0., 0., 1.], &[-1., -2.]), &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((&sol.primal - v(&[1., 2.])).amax() < 1e-9);
    }

    #[test]
    fn active_bound() {
        // (z-3)^2 = z^2 - 6z + 9
        let mut p = prog(&[2.], &[-6.]);
        p.constant = 9.0;
        p.push_linear(v(&[1.]), 1.0, RowTag::Other);
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.primal[0] - 1.0).abs() < 1e-8);
        assert!((sol.objective - 4.0).abs() < 1e-8);
        assert!((sol.linear_duals[0] - 4.0).abs() < 1e-6);
        assert!(sol.kkt.max() < 1e-8, "{:?}", sol.kkt);
    }

    #[test]
    fn linear_objective_over_disc() {
        let mut p = prog(&[0., 0., 0., 0.], &[1., 1.]);
        p.push_soc(Matrix::identity(2, 2), Vector::zeros(2), Vector::zeros(2), 1.0, RowTag::Other);
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        let r = -(0.5f64).sqrt();
        assert!((&sol.primal - v(&[r, r])).amax() < 1e-7);
        assert!((sol.objective + 2f64.sqrt()).abs() < 1e-8);
        assert!(sol.kkt.max() < 1e-8, "{:?}", sol.kkt);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let mut p = prog(&[1.], &[0.]);
        p.push_linear(v(&[1.]), 0.0, RowTag::Other);
        p.push_linear(v(&[-1.]), -1.0, RowTag::Other);
        assert_eq!(solve(&p, &SolverOptions::default()).unwrap().status, Status::Infeasible);
    }

    #[test]
    fn unbounded_linear_program_is_flagged() {
        let mut p = prog(&[0.], &[1.]);
        p.push_linear(v(&[1.]), 0.0, RowTag::Other);
        assert_eq!(solve(&p, &SolverOptions::default()).unwrap().status, Status::Infeasible);
    }

    #[test]
    fn presolve_turns_constant_cone_into_bound() {
        // ‖(3, 4)‖ ≤ z  ⇔  z ≥ 5
        let mut p = prog(&[2.], &[0.]);
        p.push_soc(Matrix::zeros(2, 1), v(&[3., 4.]), v(&[1.]), 0.0, RowTag::Other);
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.primal[0] - 5.0).abs() < 1e-8);
        assert!(sol.kkt.max() < 1e-7, "{:?}", sol.kkt);
        let mut bad = prog(&[2.], &[0.]);
        bad.push_soc(Matrix::zeros(2, 1), v(&[3., 4.]), v(&[0.]), 1.0, RowTag::Other);
        assert_eq!(solve(&bad, &SolverOptions::default()).unwrap().status, Status::Infeasible);
    }

    #[test]
    fn zero_program_has_zero_residuals() {
        let p = prog(&[0., 0., 0., 0.], &[0., 0.]);
        let sol = Solution {
            status: Status::Optimal,
            primal: v(&[3.0, -7.0]),
            objective: 0.0,
            linear_duals: vec![],
            soc_duals: vec![],
            kkt: KktResiduals::default(),
            iterations: 0,
        };
        assert_eq!(check_kkt(&p, &sol).unwrap().max(), 0.0);
        assert_eq!(solve(&p, &SolverOptions::default()).unwrap().status, Status::Optimal);
    }

    #[test]
    fn perturbed_primal_shows_violation() {
        let mut p = prog(&[2.], &[-6.]);
        p.push_linear(v(&[1.]), 1.0, RowTag::Other);
        let mut sol = solve(&p, &SolverOptions::default()).unwrap();
        sol.primal[0] += 1e-3;
        assert!(check_kkt(&p, &sol).unwrap().primal >= 1e-4);
    }

    #[test]
    fn solution_json_round_trip() {
        let mut p = prog(&[0., 0., 0., 0.], &[1., 1.]);
        p.push_soc(Matrix::identity(2, 2), Vector::zeros(2), Vector::zeros(2), 1.0, RowTag::State { j: 0, k: 1 });
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(Solution::from_json(&sol.to_json().unwrap()).unwrap(), sol);
        assert_eq!(ConicProgram::from_json(&p.to_json().unwrap()).unwrap(), p);
        assert!(sol.to_json().unwrap().contains("\"Optimal\""));
    }
}
