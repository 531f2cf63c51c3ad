use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mathcore::{Matrix, Vector};
use crate::system::Trajectory;

/// Which blocks of `[G_{0,k}, G_{u,k}]` are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    #[default]
    Full,
    /// Finite impulse response: `G_{0,k} = 0`, the initial-state columns are dropped.
    Fir,
}

impl Structure {
    pub fn dof(self, n: usize, m: usize, k: usize) -> usize {
        match self {
            Structure::Full => n * n + n * k * m,
            Structure::Fir => n * k * m,
        }
    }
}

/// Stacked regression `x̃_{[k,T]} = Φ̃ θ_k + w̃` for one prediction step `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionProblem {
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub structure: Structure,
    pub targets: Vector,
    pub regressor: Matrix,
}

impl RegressionProblem {
    pub fn dof(&self) -> usize {
        self.regressor.ncols()
    }

    pub fn rows(&self) -> usize {
        self.regressor.nrows()
    }
}

/// Rows `Φ̃_j = [x̃_jᵀ, u_{[j,j+k-1]}ᵀ] ⊗ I_n` for `j = 0..=T-k`.
pub fn build_regression(data: &Trajectory, k: usize, structure: Structure) -> Result<RegressionProblem> {
    let (n, m) = (data.n(), data.m());
    let t = data.len();
    if k == 0 {
        return Err(Error::DomainError("prediction step k must be >= 1".into()));
    }
    let dof = structure.dof(n, m, k);
    if t < k {
        return Err(Error::InsufficientData { rows: 0, cols: dof });
    }
    let nrows = t - k + 1;
    if n * nrows < dof {
        return Err(Error::InsufficientData { rows: n * nrows, cols: dof });
    }
    let offset = match structure {
        Structure::Full => n,
        Structure::Fir => 0,
    };
    let width = offset + k * m;
    let mut regressor = Matrix::zeros(n * nrows, dof);
    let mut targets = Vector::zeros(n * nrows);
    let mut v = Vector::zeros(width);
    for j in 0..nrows {
        if offset > 0 {
            v.rows_mut(0, n).copy_from(&data.measurements[j]);
        }
        for i in 0..k {
            v.rows_mut(offset + i * m, m).copy_from(&data.inputs[j + i]);
        }
        // (vᵀ ⊗ I_n): column block c is v[c] · I_n
        for c in 0..width {
            let s = v[c];
            if s != 0.0 {
                for r in 0..n {
                    regressor[(j * n + r, c * n + r)] = s;
                }
            }
        }
        targets.rows_mut(j * n, n).copy_from(&data.measurements[j + k]);
    }
    Ok(RegressionProblem { k, n, m, structure, targets, regressor })
}
