use serde::{Deserialize, Serialize};

use crate::error::{ensure_dims, Error, Result};
use crate::mathcore::{serde_mat, Matrix, SpdMatrix, Vector};
use crate::solver::{self, ConicProgram, RowTag, SolverOptions, Status};
use crate::system::GaussianBelief;

/// Admissible input set `U`, applied to every `u_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputSet {
    Unbounded,
    /// `lo ≤ u ≤ hi` componentwise.
    Box {
        #[serde(with = "serde_mat::vector")]
        lo: Vector,
        #[serde(with = "serde_mat::vector")]
        hi: Vector,
    },
    /// `H u ≤ h`.
    Polytope {
        #[serde(with = "serde_mat::matrix")]
        h: Matrix,
        #[serde(with = "serde_mat::vector")]
        b: Vector,
    },
}

impl InputSet {
    /// Rows `(a, b)` with `aᵀu ≤ b` describing the set for one input.
    pub fn rows(&self) -> Vec<(Vector, f64)> {
        match self {
            InputSet::Unbounded => Vec::new(),
            InputSet::Box { lo, hi } => {
                let m = lo.len();
                let mut rows = Vec::with_capacity(2 * m);
                for i in 0..m {
                    if hi[i].is_finite() {
                        let mut a = Vector::zeros(m);
                        a[i] = 1.0;
                        rows.push((a, hi[i]));
                    }
                    if lo[i].is_finite() {
                        let mut a = Vector::zeros(m);
                        a[i] = -1.0;
                        rows.push((a, -lo[i]));
                    }
                }
                rows
            }
            InputSet::Polytope { h, b } => {
                (0..h.nrows()).map(|i| (h.row(i).transpose(), b[i])).collect()
            }
        }
    }

    pub fn contains(&self, u: &Vector, tol: f64) -> bool {
        self.rows().iter().all(|(a, b)| a.dot(u) <= b + tol)
    }

    /// A point strictly inside the set with its margin to the nearest facet
    /// (Chebyshev center for polytopes).
    pub fn interior_point(&self, m: usize) -> Result<(Vector, f64)> {
        match self {
            InputSet::Unbounded => Ok((Vector::zeros(m), f64::INFINITY)),
            InputSet::Box { lo, hi } => {
                ensure_dims(lo.len() == m && hi.len() == m, || format!("input box must have {m} entries"))?;
                let mut c = Vector::zeros(m);
                let mut margin = f64::INFINITY;
                for i in 0..m {
                    let (l, h) = (lo[i], hi[i]);
                    c[i] = match (l.is_finite(), h.is_finite()) {
                        (true, true) => 0.5 * (l + h),
                        (true, false) => l + 1.0,
                        (false, true) => h - 1.0,
                        (false, false) => 0.0,
                    };
                    if l.is_finite() && h.is_finite() {
                        margin = margin.min(0.5 * (h - l));
                    } else if l.is_finite() || h.is_finite() {
                        margin = margin.min(1.0);
                    }
                }
                Ok((c, margin))
            }
            InputSet::Polytope { h, b } => {
                ensure_dims(h.ncols() == m && h.nrows() == b.len(), || "input polytope dimensions".into())?;
                // max t  s.t.  H u + t‖H_i‖ ≤ b,  t ≤ 1
                let mut prog = ConicProgram::new(Matrix::zeros(m + 1, m + 1), Vector::zeros(m + 1), 0.0)?;
                prog.q[m] = -1.0;
                for i in 0..h.nrows() {
                    let mut a = Vector::zeros(m + 1);
                    a.rows_mut(0, m).copy_from(&h.row(i).transpose());
                    a[m] = h.row(i).norm();
                    prog.push_linear(a, b[i], RowTag::Other);
                }
                let mut cap = Vector::zeros(m + 1);
                cap[m] = 1.0;
                prog.push_linear(cap, 1.0, RowTag::Other);
                let sol = solver::solve(&prog, &SolverOptions::default())?;
                let t = sol.primal[m];
                if sol.status != Status::Optimal || t <= 1e-9 {
                    return Err(Error::DomainError("input polytope has empty interior".into()));
                }
                Ok((sol.primal.rows(0, m).into_owned(), t))
            }
        }
    }
}

/// Data of the stochastic open-loop problem: horizon, quadratic weights,
/// state half-spaces `H_{x,j}ᵀ x ≤ 1`, input set, probability level and the
/// initial belief.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcpSpec {
    pub horizon: usize,
    pub q: SpdMatrix,
    pub r: SpdMatrix,
    #[serde(with = "serde_mat::vectors")]
    pub hx: Vec<Vector>,
    pub inputs: InputSet,
    pub p: f64,
    pub init: GaussianBelief,
}

impl OcpSpec {
    pub fn n(&self) -> usize {
        self.q.dim()
    }

    pub fn m(&self) -> usize {
        self.r.dim()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.n(), self.m());
        if self.horizon == 0 {
            return Err(Error::DomainError("horizon must be positive".into()));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::DomainError(format!("probability {} outside (0, 1)", self.p)));
        }
        for (name, w) in [("Q", &self.q), ("R", &self.r)] {
            if !w.is_positive_definite(0.0) {
                return Err(Error::DomainError(format!("{name} must be positive definite")));
            }
        }
        ensure_dims(self.init.dim() == n, || format!("initial belief has dimension {}, expected {n}", self.init.dim()))?;
        for (j, h) in self.hx.iter().enumerate() {
            ensure_dims(h.len() == n, || format!("H_x row {j} has length {}", h.len()))?;
        }
        self.inputs.interior_point(m)?;
        Ok(())
    }

    /// Checks the decision-free `k = 0` constraints `H_jᵀx̄₀ ≤ 1 - c‖H_j‖_{Σ_{x,0}}`.
    pub fn check_initial_state(&self, backoff: f64) -> Result<()> {
        for (j, h) in self.hx.iter().enumerate() {
            let lhs = h.dot(&self.init.mean);
            let rhs = 1.0 - backoff * self.init.cov.weighted_norm(h);
            if lhs > rhs {
                return Err(Error::InfeasibleInitialState { j, lhs, rhs });
            }
        }
        Ok(())
    }
}
