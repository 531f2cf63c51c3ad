mod common;

use common::{active_instance, diag, plain_spec};
use mspc::ident::{confidence_set, ParameterEstimate, Structure};
use mspc::mathcore::{gaussian_backoff, kron, sym_sqrt, Matrix, Rng, SpdMatrix, Vector};
use mspc::ocp::*;
use mspc::solver::{solve, ConicProgram, SolverOptions, Status};
use mspc::system::{random_system, LinearSystem, MultiStepModel};
use mspc::Error;

fn solve_ok(prog: &ConicProgram) -> mspc::solver::Solution {
    let sol = solve(prog, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    sol
}

fn exact_estimates(model: &MultiStepModel, horizon: usize) -> Vec<ParameterEstimate> {
    (1..=horizon)
        .map(|k| ParameterEstimate::exact(k, model.g0(k), model.gu(k), Structure::Full).unwrap())
        .collect()
}

/// Estimates centred on the truth with covariance `scale · I`.
fn noisy_estimates(model: &MultiStepModel, horizon: usize, scale: f64) -> Vec<ParameterEstimate> {
    exact_estimates(model, horizon)
        .into_iter()
        .map(|mut e| {
            e.cov = SpdMatrix::new(Matrix::identity(e.dof, e.dof) * scale).unwrap();
            e
        })
        .collect()
}

fn gws(model: &MultiStepModel) -> Vec<Matrix> {
    (1..=model.horizon()).map(|k| model.gw(k).clone()).collect()
}

#[test]
fn median_probability_drops_the_backoff() {
    assert_eq!(gaussian_backoff(0.5).unwrap(), 0.0);
    let mut rng = Rng::new(1, 0);
    let sys = random_system(2, 1, 2, 0.9, &mut rng);
    let mut spec = plain_spec(2, 1, 5, 0.5, Vector::from_column_slice(&[0.2, -0.1]), diag(&[0.3, 0.3]));
    spec.hx = vec![Vector::from_column_slice(&[1.0, 0.5])];
    let prog = build_nominal_qp_statespace(&sys, &spec).unwrap();
    let model = MultiStepModel::from_system(&sys, 5);
    for row in &prog.linear {
        if let mspc::solver::RowTag::State { k, .. } = row.tag {
            let mean_only = 1.0 - spec.hx[0].dot(&(model.g0(k) * &spec.init.mean));
            assert_eq!(row.b, mean_only);
        }
    }
}

#[test]
fn scalar_unconstrained_matches_normal_equations() {
    let (a, b, big_n) = (0.8, 0.5, 6);
    let sys = LinearSystem::new(
        Matrix::from_element(1, 1, a),
        Matrix::from_element(1, 1, b),
        Matrix::from_element(1, 1, 1.0),
        diag(&[0.1]),
        SpdMatrix::zeros(1),
    )
    .unwrap();
    let spec = plain_spec(1, 1, big_n, 0.9, Vector::from_element(1, 2.0), diag(&[0.0]));
    let sol = solve_ok(&build_nominal_qp_statespace(&sys, &spec).unwrap());
    // x_k = a^k x0 + Σ_{i<k} a^{k-1-i} b u_i
    let phi = Matrix::from_fn(big_n, big_n, |k, i| if i <= k { a.powi((k - i) as i32) * b } else { 0.0 });
    let phi0 = Vector::from_fn(big_n, |k, _| a.powi(k as i32 + 1) * 2.0);
    let lhs = phi.transpose() * &phi + Matrix::identity(big_n, big_n) * 0.1;
    let rhs = -(phi.transpose() * phi0);
    let u = lhs.lu().solve(&rhs).unwrap();
    assert!((&sol.primal - u).amax() < 1e-8);
}

#[test]
fn condensed_programs_agree_in_data_and_minimizer() {
    let mut rng = Rng::new(2, 0);
    for _ in 0..5 {
        let (sys, spec) = active_instance(&mut rng, 3, 2, 8, 0.9);
        let ss = build_nominal_qp_statespace(&sys, &spec).unwrap();
        let ms = build_nominal_qp_multistep(&MultiStepModel::from_system(&sys, 8), &spec).unwrap();
        let scale = ss.p.amax().max(1.0);
        assert!((&ss.p - &ms.p).amax() <= 1e-12 * scale);
        assert!((&ss.q - &ms.q).amax() <= 1e-12 * scale);
        assert_eq!(ss.linear.len(), ms.linear.len());
        for (x, y) in ss.linear.iter().zip(&ms.linear) {
            assert_eq!(x.tag, y.tag);
            assert!((&x.a - &y.a).amax() <= 1e-12 && (x.b - y.b).abs() <= 1e-12);
        }
        let (s1, s2) = (solve_ok(&ss), solve_ok(&ms));
        assert!((&s1.primal - &s2.primal).amax() <= 1e-6);
        assert!((s1.objective - s2.objective).abs() <= 1e-6 * s1.objective.abs().max(1.0));
    }
}

#[test]
fn fir_program_ignores_initial_mean() {
    let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let sys = LinearSystem::new(a, Matrix::from_row_slice(2, 1, &[0.0, 1.0]), Matrix::identity(2, 2), diag(&[0.01, 0.01]), SpdMatrix::zeros(2)).unwrap();
    let mut model = MultiStepModel::from_system(&sys, 4);
    for g in model.g0.iter_mut() {
        g.fill(0.0);
    }
    let mut spec = plain_spec(2, 1, 4, 0.8, Vector::from_column_slice(&[0.1, 0.1]), diag(&[0.01, 0.01]));
    spec.hx = vec![Vector::from_column_slice(&[1.0, 1.0])];
    let p1 = build_nominal_qp_multistep(&model, &spec).unwrap();
    spec.init.mean = Vector::from_column_slice(&[-0.3, 0.2]);
    let p2 = build_nominal_qp_multistep(&model, &spec).unwrap();
    assert_eq!(p1.p, p2.p);
    assert_eq!(p1.q, p2.q);
    assert_eq!(p1.linear, p2.linear);
}

#[test]
fn perturbed_model_moves_the_optimizer() {
    let mut rng = Rng::new(3, 0);
    let (sys, spec) = active_instance(&mut rng, 2, 1, 6, 0.9);
    let truth = solve_ok(&build_nominal_qp_statespace(&sys, &spec).unwrap());
    let mut model = MultiStepModel::from_system(&sys, 6);
    for g in model.gu.iter_mut() {
        *g *= 1.2;
    }
    let other = solve_ok(&build_nominal_qp_multistep(&model, &spec).unwrap());
    assert!((&truth.primal - &other.primal).amax() > 1e-3);
}

#[test]
fn initial_state_violation_is_reported() {
    let mut rng = Rng::new(4, 0);
    let sys = random_system(2, 1, 2, 0.9, &mut rng);
    let mut spec = plain_spec(2, 1, 3, 0.9, Vector::from_column_slice(&[2.0, 0.0]), diag(&[0.1, 0.1]));
    spec.hx = vec![Vector::from_column_slice(&[1.0, 0.0])];
    assert!(matches!(build_nominal_qp_statespace(&sys, &spec), Err(Error::InfeasibleInitialState { j: 0, .. })));
}

fn random_tightening_instance(rng: &mut Rng, n: usize, m: usize, k: usize) -> (Vector, ParameterEstimate, Matrix, SpdMatrix, Matrix) {
    let sys = random_system(n, m, n, 0.9, rng);
    let model = MultiStepModel::from_system(&sys, k);
    let mut est = ParameterEstimate::exact(k, model.g0(k), model.gu(k), Structure::Full).unwrap();
    let l = Matrix::from_fn(est.dof, est.dof, |_, _| rng.standard_normal() * 0.05);
    est.cov = SpdMatrix::new(&l * l.transpose()).unwrap();
    let c = Matrix::from_fn(n, n, |_, _| rng.standard_normal() * 0.3);
    let h = rng.standard_normal_vector(n);
    (h, est, &c * c.transpose(), sys.sigma_w.clone(), model.gw(k).clone())
}

#[test]
fn tightening_reduces_without_initial_uncertainty() {
    let mut rng = Rng::new(5, 0);
    let (h, est, _, sw, gw) = random_tightening_instance(&mut rng, 3, 1, 3);
    let set = confidence_set(&est, 0.95).unwrap();
    let zero = Matrix::zeros(3, 3);
    let exact = tightening_constant_exact(&h, &est, &set, &zero, &sw, &gw).unwrap();
    let upper = tightening_constant_upper(&h, &est, &set, &zero, &sw, &gw).unwrap();
    let direct = (mspc::mathcore::block_diag_repeat(&sw.sqrt(), 3) * gw.transpose() * &h).norm();
    assert!((exact - direct).abs() <= 1e-14 * direct.max(1.0));
    assert!((upper - exact).abs() <= 1e-14 * direct.max(1.0));
}

#[test]
fn degenerate_ellipsoid_gives_nominal_spread() {
    let mut rng = Rng::new(6, 0);
    let (h, est, cov0, sw, gw) = random_tightening_instance(&mut rng, 2, 2, 2);
    let mut set = confidence_set(&est, 0.9).unwrap();
    set.level = 0.0;
    let exact = tightening_constant_exact(&h, &est, &set, &cov0, &sw, &gw).unwrap();
    let upper = tightening_constant_upper(&h, &est, &set, &cov0, &sw, &gw).unwrap();
    let g0 = est.g0_hat();
    let cov_k = &g0 * &cov0 * g0.transpose() + &gw * mspc::mathcore::block_diag_repeat(sw.as_matrix(), 2) * gw.transpose();
    let nominal = h.dot(&(cov_k * &h)).sqrt();
    assert!((exact - nominal).abs() < 1e-12);
    assert!((upper - nominal).abs() < 1e-12);
}

/// Best of raw boundary samples, polished by the fixed-point ascent
/// `z ← r ∇/‖∇‖` on `‖a + Mz‖²`, which never decreases the objective.
fn sampled_max(a: &Vector, m: &Matrix, r: f64, samples: usize, rng: &mut Rng) -> f64 {
    let d = m.ncols();
    let mut best = (f64::NEG_INFINITY, Vector::zeros(d));
    for _ in 0..samples {
        let z = rng.standard_normal_vector(d);
        let z = &z * (r / z.norm());
        let v = (a + m * &z).norm();
        if v > best.0 {
            best = (v, z);
        }
    }
    let mut z = best.1;
    for _ in 0..2000 {
        let grad = m.transpose() * (a + m * &z);
        if grad.norm() == 0.0 {
            break;
        }
        z = &grad * (r / grad.norm());
    }
    best.0.max((a + m * &z).norm())
}

#[test]
fn exact_constant_is_sandwiched() {
    let mut rng = Rng::new(7, 0);
    for trial in 0..20 {
        let k = 1 + trial % 3;
        let (h, est, cov0, sw, gw) = random_tightening_instance(&mut rng, 2, 1, k);
        let set = confidence_set(&est, 0.9).unwrap();
        let exact = tightening_constant_exact(&h, &est, &set, &cov0, &sw, &gw).unwrap();
        let upper = tightening_constant_upper(&h, &est, &set, &cov0, &sw, &gw).unwrap();
        let t = spread_terms(&h, &est, &set, &cov0, &sw, &gw).unwrap();
        let sampled = sampled_max(&t.a, &t.m, t.radius, 20_000, &mut rng);
        assert!(exact >= sampled - 1e-6, "exact {exact} sampled {sampled}");
        assert!(exact <= upper + 1e-12, "exact {exact} upper {upper}");
    }
}

#[test]
fn spread_terms_reproduce_perturbed_covariance() {
    // ‖a + M z‖² must equal Hᵀ Σ_{x,k}(θ̂ + Σ_θ^{1/2} z) H for any z.
    let mut rng = Rng::new(8, 0);
    let (n, k) = (2, 2);
    let (h, est, cov0, sw, gw) = random_tightening_instance(&mut rng, n, 1, k);
    let set = confidence_set(&est, 0.9).unwrap();
    let t = spread_terms(&h, &est, &set, &cov0, &sw, &gw).unwrap();
    let half = sym_sqrt(&set.cov).unwrap();
    for _ in 0..10 {
        let z = rng.standard_normal_vector(est.dof);
        let theta = &est.theta_hat + &half * &z;
        let g0 = Matrix::from_column_slice(n, n, &theta.as_slice()[..n * n]);
        let cov_k = &g0 * &cov0 * g0.transpose() + &gw * mspc::mathcore::block_diag_repeat(sw.as_matrix(), k) * gw.transpose();
        let lhs = (&t.a + &t.m * &z).norm_squared();
        assert!((lhs - h.dot(&(cov_k * &h))).abs() < 1e-10);
    }
    // the Kronecker identity the lift relies on
    let g = Matrix::from_fn(n, n, |_, _| rng.standard_normal());
    let ht = Matrix::from_row_slice(1, n, h.as_slice());
    let lhs = sym_sqrt(&cov0).unwrap() * g.transpose() * &h;
    let rhs = kron(&sym_sqrt(&cov0).unwrap(), &ht) * mspc::mathcore::vec(&g);
    assert!((lhs - rhs).amax() < 1e-12);
}

#[test]
fn robust_program_reduces_to_nominal_without_parameter_uncertainty() {
    let mut rng = Rng::new(9, 0);
    let (sys, spec) = active_instance(&mut rng, 2, 1, 6, 0.9);
    let model = MultiStepModel::from_system(&sys, 6);
    let est = exact_estimates(&model, 6);
    let delta = 1.0 - 1e-13;
    let table = TighteningTable::compute(&spec, &est, &gws(&model), &sys.sigma_w, delta, TighteningMode::Exact).unwrap();
    let robust = build_robust_socp_multistep(&est, &gws(&model), &spec, &table).unwrap();
    let nominal = build_nominal_qp_multistep(&model, &spec).unwrap();
    assert!(robust.soc.is_empty());
    assert_eq!(robust.linear.len(), nominal.linear.len());
    assert!((&robust.p - &nominal.p).amax() <= 1e-12);
    assert!((&robust.q - &nominal.q).amax() <= 1e-12);
    for (x, y) in robust.linear.iter().zip(&nominal.linear) {
        assert_eq!(x.tag, y.tag);
        assert!((&x.a - &y.a).amax() <= 1e-12);
        assert!((x.b - y.b).abs() <= 1e-12, "{} vs {}", x.b, y.b);
    }
}

#[test]
fn robust_cost_grows_with_parameter_uncertainty() {
    let mut rng = Rng::new(10, 0);
    let (sys, spec) = active_instance(&mut rng, 2, 1, 5, 0.8);
    let model = MultiStepModel::from_system(&sys, 5);
    let gw = gws(&model);
    let mut last = f64::NEG_INFINITY;
    for scale in [1e-8, 4e-8, 1.6e-7, 6.4e-7] {
        let est = noisy_estimates(&model, 5, scale);
        let table = TighteningTable::compute(&spec, &est, &gw, &sys.sigma_w, 0.95, TighteningMode::Exact).unwrap();
        let prog = build_robust_socp_multistep(&est, &gw, &spec, &table).unwrap();
        let sol = solve(&prog, &SolverOptions::default()).unwrap();
        if sol.status != Status::Optimal {
            break;
        }
        assert!(sol.objective >= last - 1e-7, "{} < {last}", sol.objective);
        last = sol.objective;
    }
    assert!(last.is_finite());
}

#[test]
fn upper_bound_and_higher_probability_are_more_conservative() {
    let mut rng = Rng::new(11, 0);
    let (sys, mut spec) = active_instance(&mut rng, 2, 1, 5, 0.8);
    for h in spec.hx.iter_mut() {
        *h *= 0.7;
    }
    let model = MultiStepModel::from_system(&sys, 5);
    let gw = gws(&model);
    let est = noisy_estimates(&model, 5, 1e-8);
    let cost = |spec: &OcpSpec, mode| {
        let table = TighteningTable::compute(spec, &est, &gw, &sys.sigma_w, 0.97, mode).unwrap();
        for e in &table.entries {
            assert!(e.h_exact <= e.h_upper + 1e-12);
        }
        solve_ok(&build_robust_socp_multistep(&est, &gw, spec, &table).unwrap()).objective
    };
    let exact = cost(&spec, TighteningMode::Exact);
    assert!(cost(&spec, TighteningMode::Upper) >= exact - 1e-7);
    let mut tighter = spec.clone();
    tighter.p = 0.81;
    assert!(cost(&tighter, TighteningMode::Exact) >= exact - 1e-7);
}

#[test]
fn robust_rows_at_step_zero_have_no_decisions() {
    let mut rng = Rng::new(12, 0);
    let (sys, spec) = active_instance(&mut rng, 2, 1, 4, 0.8);
    let model = MultiStepModel::from_system(&sys, 4);
    let est = noisy_estimates(&model, 4, 1e-6);
    let table = TighteningTable::compute(&spec, &est, &gws(&model), &sys.sigma_w, 0.9, TighteningMode::Exact).unwrap();
    let prog = build_robust_socp_multistep(&est, &gws(&model), &spec, &table).unwrap();
    // step-zero constraints are checked at build time and never emitted
    let tags = prog.linear.iter().map(|r| r.tag).chain(prog.soc.iter().map(|r| r.tag));
    assert!(tags.into_iter().all(|t| !matches!(t, mspc::solver::RowTag::State { k: 0, .. })));
    assert_eq!(prog.soc.len(), 4 * spec.hx.len());
}

#[test]
fn delta_must_exceed_p() {
    let mut rng = Rng::new(13, 0);
    let (sys, spec) = active_instance(&mut rng, 2, 1, 3, 0.9);
    let model = MultiStepModel::from_system(&sys, 3);
    let est = exact_estimates(&model, 3);
    let err = TighteningTable::compute(&spec, &est, &gws(&model), &sys.sigma_w, 0.85, TighteningMode::Exact);
    assert!(matches!(err, Err(Error::DeltaTooSmall { .. })));
    let one = ParameterEstimate::exact(1, &sys.a, &sys.b, Structure::Full).unwrap();
    let err = formulate_minmax_statespace(&one, &spec, &sys.process_noise(), 0.9, 4, &rng);
    assert!(matches!(err, Err(Error::DeltaTooSmall { .. })));
}

#[test]
fn single_nominal_scenario_matches_inflated_statespace_qp() {
    let mut rng = Rng::new(14, 0);
    let (sys, spec) = active_instance(&mut rng, 2, 1, 6, 0.8);
    let mut est = ParameterEstimate::exact(1, &sys.a, &sys.b, Structure::Full).unwrap();
    est.cov = SpdMatrix::new(Matrix::identity(est.dof, est.dof) * 1e-4).unwrap();
    let delta = 0.95;
    let sc = formulate_minmax_statespace(&est, &spec, &sys.process_noise(), delta, 1, &rng).unwrap();
    let base = solve_ok(&sc.program);
    let mut inflated = spec.clone();
    inflated.p = spec.p / delta;
    let qp = build_nominal_qp_statespace(&sys, &inflated).unwrap();
    let reference = solve_ok(&qp);
    let u = base.primal.rows(0, 6).into_owned();
    assert!((&u - &reference.primal).amax() < 1e-6);
    assert!((base.objective - reference.objective - sc.trace_terms[0]).abs() < 1e-6 * reference.objective.max(1.0));
}

#[test]
fn scenario_cost_is_monotone_in_count_and_continuous_in_uncertainty() {
    let mut rng = Rng::new(15, 0);
    let (sys, spec) = active_instance(&mut rng, 2, 1, 5, 0.8);
    let mut est = ParameterEstimate::exact(1, &sys.a, &sys.b, Structure::Full).unwrap();
    est.cov = SpdMatrix::new(Matrix::identity(est.dof, est.dof) * 1e-5).unwrap();
    let seed = Rng::new(99, 0);
    let mut last = f64::NEG_INFINITY;
    for count in [1, 4, 16, 32] {
        let sc = formulate_minmax_statespace(&est, &spec, &sys.process_noise(), 0.95, count, &seed).unwrap();
        let sol = solve_ok(&sc.program);
        assert!(sol.objective >= last - 1e-7);
        last = sol.objective;
    }
    est.cov = SpdMatrix::new(Matrix::identity(est.dof, est.dof) * 1e-18).unwrap();
    let sc = formulate_minmax_statespace(&est, &spec, &sys.process_noise(), 0.95, 8, &seed).unwrap();
    let sol = solve_ok(&sc.program);
    let mut inflated = spec.clone();
    inflated.p = spec.p / 0.95;
    let reference = solve_ok(&build_nominal_qp_statespace(&sys, &inflated).unwrap());
    assert!((sol.primal.rows(0, 5) - &reference.primal).amax() < 1e-6);
}

#[test]
fn exports_round_trip() {
    let mut rng = Rng::new(16, 0);
    let (sys, spec) = active_instance(&mut rng, 2, 1, 3, 0.8);
    let model = MultiStepModel::from_system(&sys, 3);
    let est = noisy_estimates(&model, 3, 1e-6);
    let table = TighteningTable::compute(&spec, &est, &gws(&model), &sys.sigma_w, 0.9, TighteningMode::Exact).unwrap();
    let prog = build_robust_socp_multistep(&est, &gws(&model), &spec, &table).unwrap();
    assert_eq!(ConicProgram::from_json(&prog.to_json().unwrap()).unwrap(), prog);
    let mut buf = Vec::new();
    table.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("j,k,h_exact,h_upper,radius"));
    assert_eq!(lines.count(), 3 * spec.hx.len());
    let spec_json = serde_json::to_string(&spec).unwrap();
    assert_eq!(serde_json::from_str::<OcpSpec>(&spec_json).unwrap(), spec);
}
