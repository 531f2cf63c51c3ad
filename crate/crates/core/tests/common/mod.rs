#![allow(dead_code)]

use mspc::mathcore::{gaussian_backoff, Matrix, Rng, SpdMatrix, Vector};
use mspc::ocp::{build_nominal_qp_statespace, InputSet, OcpSpec};
use mspc::solver::{solve, SolverOptions, Status};
use mspc::system::{random_system, GaussianBelief, LinearSystem};

pub fn diag(d: &[f64]) -> SpdMatrix {
    SpdMatrix::from_diagonal(d).unwrap()
}

pub fn plain_spec(n: usize, m: usize, horizon: usize, p: f64, x0: Vector, cov0: SpdMatrix) -> OcpSpec {
    OcpSpec {
        horizon,
        q: SpdMatrix::identity(n),
        r: SpdMatrix::new(Matrix::identity(m, m) * 0.1).unwrap(),
        hx: Vec::new(),
        inputs: InputSet::Unbounded,
        p,
        init: GaussianBelief::new(x0, cov0).unwrap(),
    }
}

/// Random stable system with a chance-constrained problem whose state and
/// input constraints are active at the optimum. Half-spaces are scaled so
/// the unconstrained optimal mean trajectory violates them, and the input box
/// clips the unconstrained inputs.
pub fn active_instance(rng: &mut Rng, n: usize, m: usize, horizon: usize, p: f64) -> (LinearSystem, OcpSpec) {
    loop {
        let sys = random_system(n, m, n, 0.95, rng);
        let x0 = rng.standard_normal_vector(n) * 2.0;
        let mut spec = plain_spec(n, m, horizon, p, x0, diag(&vec![0.01; n]));
        let prog = build_nominal_qp_statespace(&sys, &spec).unwrap();
        let free = solve(&prog, &SolverOptions::default()).unwrap();
        if free.status != Status::Optimal {
            continue;
        }
        let u = free.primal.clone();
        let c = gaussian_backoff(p).unwrap();
        let pred = mspc::ocp::Prediction::statespace(&sys.a, &sys.b, &sys.process_noise(), &spec);
        let mut hx = Vec::new();
        for _ in 0..2 {
            let v = rng.standard_normal_vector(n);
            let reach = (1..=horizon)
                .map(|k| v.dot(&pred.mean(k, &u)) + c * v.dot(&(&pred.covs[k] * &v)).sqrt())
                .fold(f64::NEG_INFINITY, f64::max);
            let start = v.dot(&spec.init.mean) + c * spec.init.cov.weighted_norm(&v);
            if reach > 0.0 && start < 0.5 * reach {
                hx.push(v / (0.8 * reach));
            }
        }
        if hx.is_empty() {
            continue;
        }
        spec.hx = hx;
        let umax = u.amax();
        let bound = Vector::from_element(m, 0.9 * umax);
        spec.inputs = InputSet::Box { lo: -&bound, hi: bound };
        let prog = build_nominal_qp_statespace(&sys, &spec).unwrap();
        let sol = solve(&prog, &SolverOptions::default()).unwrap();
        if sol.status != Status::Optimal {
            continue;
        }
        let active_state = prog.linear.iter().zip(&sol.linear_duals).any(|(r, y)| {
            matches!(r.tag, mspc::solver::RowTag::State { .. }) && *y > 1e-6
        });
        let active_input = prog.linear.iter().zip(&sol.linear_duals).any(|(r, y)| {
            matches!(r.tag, mspc::solver::RowTag::Input { .. }) && *y > 1e-6
        });
        if active_state && active_input {
            return (sys, spec);
        }
    }
}
