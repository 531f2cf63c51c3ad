use serde::{Deserialize, Serialize};

use crate::error::{ensure_dims, Result};
use crate::mathcore::{serde_mat, Matrix, Vector};

/// Provenance of a constraint row, used by reports and row-for-row comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RowTag {
    /// Chance constraint `j` at prediction step `k`.
    State { j: usize, k: usize },
    /// Input bound or polytope row `i` at step `k`.
    Input { k: usize, i: usize },
    /// Worst-case cost epigraph for a sampled scenario.
    Epigraph { scenario: usize },
    Other,
}

/// `aᵀz ≤ b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRow {
    #[serde(with = "serde_mat::vector")]
    pub a: Vector,
    pub b: f64,
    pub tag: RowTag,
}

/// `‖F z + g‖ ≤ cᵀz + d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocRow {
    #[serde(with = "serde_mat::matrix")]
    pub f: Matrix,
    #[serde(with = "serde_mat::vector")]
    pub g: Vector,
    #[serde(with = "serde_mat::vector")]
    pub c: Vector,
    pub d: f64,
    pub tag: RowTag,
}

/// Which decision components hold the input sequence `u_0, …, u_{N-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct VariableMap {
    pub horizon: usize,
    pub m: usize,
    /// Offset of `u_0` in the decision vector.
    pub input_offset: usize,
    /// Names of decision components outside the input block.
    pub auxiliary: Vec<String>,
}

/// `min ½ zᵀPz + qᵀz + constant` over linear and second-order cone rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicProgram {
    pub dim: usize,
    #[serde(with = "serde_mat::matrix")]
    pub p: Matrix,
    #[serde(with = "serde_mat::vector")]
    pub q: Vector,
    pub constant: f64,
    pub linear: Vec<LinearRow>,
    pub soc: Vec<SocRow>,
    pub variables: VariableMap,
}

impl ConicProgram {
    pub fn new(p: Matrix, q: Vector, constant: f64) -> Result<Self> {
        let dim = q.len();
        ensure_dims(p.shape() == (dim, dim), || format!("P shape {:?} for dimension {dim}", p.shape()))?;
        Ok(ConicProgram {
            dim,
            p,
            q,
            constant,
            linear: Vec::new(),
            soc: Vec::new(),
            variables: VariableMap::default(),
        })
    }

    pub fn objective(&self, z: &Vector) -> f64 {
        0.5 * z.dot(&(&self.p * z)) + self.q.dot(z) + self.constant
    }

    pub fn push_linear(&mut self, a: Vector, b: f64, tag: RowTag) {
        self.linear.push(LinearRow { a, b, tag });
    }

    pub fn push_soc(&mut self, f: Matrix, g: Vector, c: Vector, d: f64, tag: RowTag) {
        self.soc.push(SocRow { f, g, c, d, tag });
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim;
        ensure_dims(self.p.shape() == (n, n) && self.q.len() == n, || "cost dimensions".into())?;
        for (i, r) in self.linear.iter().enumerate() {
            ensure_dims(r.a.len() == n, || format!("linear row {i} has length {}", r.a.len()))?;
        }
        for (i, r) in self.soc.iter().enumerate() {
            ensure_dims(r.f.ncols() == n && r.c.len() == n && r.g.len() == r.f.nrows(), || {
                format!("cone row {i} dimensions")
            })?;
        }
        let finite = self.p.iter().chain(self.q.iter()).all(|v| v.is_finite())
            && self.linear.iter().all(|r| r.b.is_finite() && r.a.iter().all(|v| v.is_finite()))
            && self.soc.iter().all(|r| {
                r.d.is_finite() && r.f.iter().chain(r.g.iter()).chain(r.c.iter()).all(|v| v.is_finite())
            });
        if !finite {
            return Err(crate::Error::NonFinite("conic program data".into()));
        }
        Ok(())
    }

    /// Input sequence `u_0, …, u_{N-1}` read from a decision vector.
    pub fn inputs(&self, z: &Vector) -> Vec<Vector> {
        let VariableMap { horizon, m, input_offset, .. } = self.variables;
        (0..horizon).map(|k| z.rows(input_offset + k * m, m).into_owned()).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: ConicProgram = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }
}
