use serde::{Deserialize, Serialize};

use super::nominal::{push_input_rows, Prediction};
use super::spec::OcpSpec;
use super::tightening::inflated_probability;
use crate::error::{ensure_dims, Error, Result};
use crate::ident::{confidence_set, ParameterEstimate, Structure};
use crate::mathcore::{gaussian_backoff, serde_mat, sym_sqrt, Matrix, Rng, Vector};
use crate::solver::{ConicProgram, RowTag, VariableMap};

pub const DEFAULT_SCENARIOS: usize = 64;

/// Sampled-scenario inner approximation of the min-max problem over the
/// one-step parameter ellipsoid. Constraints and the worst-case cost are
/// enforced only at the sampled parameters, so a solution carries no
/// robustness guarantee; it is a baseline for comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioProgram {
    pub program: ConicProgram,
    /// Sampled `θ_1 = vec([A, B])` (or `vec(B)` for FIR), nominal first.
    #[serde(with = "serde_mat::vectors")]
    pub thetas: Vec<Vector>,
    /// `Σ_k tr(Q Σ_{x,k})` per scenario, included in the epigraph rows.
    pub trace_terms: Vec<f64>,
    /// Always false: sampled constraints do not cover the ellipsoid.
    pub robust: bool,
}

/// Scenario `i` uses its own random substream, so the first `n` scenarios are
/// the same for any larger count and the feasible sets are nested.
fn scenario_offset(i: usize, radius: f64, dim: usize, rng: &Rng) -> Vector {
    if i == 0 || dim == 0 {
        return Vector::zeros(dim);
    }
    let mut stream = rng.substream(i as u64);
    let z = stream.standard_normal_vector(dim);
    let dir = &z / z.norm();
    // odd scenarios on the boundary, even ones uniform in the ball
    let scale = if i % 2 == 1 { radius } else { radius * stream.uniform().powf(1.0 / dim as f64) };
    dir * scale
}

fn split_theta(theta: &Vector, n: usize, m: usize, structure: Structure) -> (Matrix, Matrix) {
    match structure {
        Structure::Full => (
            Matrix::from_column_slice(n, n, &theta.as_slice()[..n * n]),
            Matrix::from_column_slice(n, m, &theta.as_slice()[n * n..]),
        ),
        Structure::Fir => (Matrix::zeros(n, n), Matrix::from_column_slice(n, m, theta.as_slice())),
    }
}

/// Decision `[u_{[0,N-1]}; t]`, minimizing `t` subject to, for every sampled
/// `θ⁽ⁱ⁾`, the tightened mean constraints with `c_p̃` and
/// `Σ_k ‖x̄_k⁽ⁱ⁾‖²_Q + ‖u_k‖²_R + tr(Q Σ_{x,k}⁽ⁱ⁾) ≤ t`.
/// `process_noise` is `E Σ_w Eᵀ`.
pub fn formulate_minmax_statespace(
    est: &ParameterEstimate,
    spec: &OcpSpec,
    process_noise: &Matrix,
    delta: f64,
    n_scenarios: usize,
    rng: &Rng,
) -> Result<ScenarioProgram> {
    let p_tilde = inflated_probability(spec.p, delta)?;
    if n_scenarios == 0 {
        return Err(Error::DomainError("at least one scenario is required".into()));
    }
    spec.validate()?;
    est.validate()?;
    let (n, m, big_n) = (spec.n(), spec.m(), spec.horizon);
    ensure_dims(est.k == 1 && est.n == n && est.m == m, || "scenario baseline needs a one-step estimate".into())?;
    ensure_dims(process_noise.shape() == (n, n), || "process noise covariance dimensions".into())?;
    let backoff = gaussian_backoff(p_tilde)?;
    spec.check_initial_state(backoff)?;

    let set = confidence_set(est, delta)?;
    let half = sym_sqrt(&set.cov)?;
    let q_half = spec.q.sqrt();
    let r_half = spec.r.sqrt();
    let dim = big_n * m + 1;
    let mut prog = ConicProgram::new(Matrix::zeros(dim, dim), Vector::zeros(dim), 0.0)?;
    prog.q[dim - 1] = 1.0;
    prog.variables = VariableMap { horizon: big_n, m, input_offset: 0, auxiliary: vec!["t".into()] };

    let mut thetas = Vec::with_capacity(n_scenarios);
    let mut trace_terms = Vec::with_capacity(n_scenarios);
    for i in 0..n_scenarios {
        let theta = &set.center + &half * scenario_offset(i, set.radius(), est.dof, rng);
        let (a, b) = split_theta(&theta, n, m, est.structure);
        let pred = Prediction::statespace(&a, &b, process_noise, spec);
        let mut trace = 0.0;
        // ‖Y u + y‖² stacks Q^{1/2} x̄_k and R^{1/2} u_k
        let rows = big_n * (n + m);
        let mut y_map = Matrix::zeros(rows, dim);
        let mut y_off = Vector::zeros(rows);
        for k in 1..=big_n {
            trace += (spec.q.as_matrix() * &pred.covs[k]).trace();
            let r0 = (k - 1) * n;
            y_map.view_mut((r0, 0), (n, big_n * m)).copy_from(&(&q_half * &pred.maps[k]));
            y_off.rows_mut(r0, n).copy_from(&(&q_half * &pred.offsets[k]));
            for (j, h) in spec.hx.iter().enumerate() {
                let mut row = Vector::zeros(dim);
                row.rows_mut(0, big_n * m).copy_from(&(pred.maps[k].transpose() * h));
                let spread = h.dot(&(&pred.covs[k] * h)).max(0.0).sqrt();
                prog.push_linear(row, 1.0 - backoff * spread - h.dot(&pred.offsets[k]), RowTag::State { j, k });
            }
        }
        for k in 0..big_n {
            y_map.view_mut((big_n * n + k * m, k * m), (m, m)).copy_from(&r_half);
        }
        // ‖Yu + y‖² ≤ t - c  ⇔  ‖(2(Yu + y), 1 - t + c)‖ ≤ 1 + t - c
        let mut f = Matrix::zeros(rows + 1, dim);
        f.view_mut((0, 0), (rows, dim)).copy_from(&(y_map * 2.0));
        f[(rows, dim - 1)] = -1.0;
        let mut g = Vector::zeros(rows + 1);
        g.rows_mut(0, rows).copy_from(&(y_off * 2.0));
        g[rows] = 1.0 + trace;
        let mut c = Vector::zeros(dim);
        c[dim - 1] = 1.0;
        prog.push_soc(f, g, c, 1.0 - trace, RowTag::Epigraph { scenario: i });
        thetas.push(theta);
        trace_terms.push(trace);
    }
    push_input_rows(&mut prog, spec, 0);
    Ok(ScenarioProgram { program: prog, thetas, trace_terms, robust: false })
}
