//! Solves the same chance-constrained problem twice on the true system:
//! once through the state-space recursion and once through the condensed
//! multi-step predictor. The optimizers agree to solver precision.

use mspc::mathcore::{Matrix, Rng, SpdMatrix, Vector};
use mspc::ocp::{build_nominal_qp_multistep, build_nominal_qp_statespace, InputSet, OcpSpec};
use mspc::solver::{solve, SolverOptions};
use mspc::system::{random_system_with_noise, GaussianBelief, MultiStepModel};
use mspc::validate::equivalence_check;

fn main() -> mspc::error::Result<()> {
    let mut rng = Rng::new(3, 0);
    let sys = random_system_with_noise(3, 2, 3, 0.9, SpdMatrix::from_diagonal(&[0.02; 3])?, SpdMatrix::zeros(3), &mut rng);
    let spec = OcpSpec {
        horizon: 6,
        q: SpdMatrix::new(Matrix::identity(3, 3))?,
        r: SpdMatrix::from_diagonal(&[0.1, 0.1])?,
        hx: vec![Vector::from_vec(vec![-2.0, 0.0, 0.0]), Vector::from_vec(vec![0.0, 1.0, 0.0])],
        inputs: InputSet::Box { lo: Vector::from_element(2, -1.0), hi: Vector::from_element(2, 1.0) },
        p: 0.9,
        init: GaussianBelief::new(Vector::from_vec(vec![1.0, -0.5, 0.3]), SpdMatrix::from_diagonal(&[0.01; 3])?)?,
    };

    let opts = SolverOptions::default();
    let ss = solve(&build_nominal_qp_statespace(&sys, &spec)?, &opts)?;
    let model = MultiStepModel::from_system(&sys, spec.horizon);
    let ms = solve(&build_nominal_qp_multistep(&model, &spec)?, &opts)?;
    println!("state-space objective  {:.10}", ss.objective);
    println!("multi-step objective   {:.10}", ms.objective);
    println!("max |u_ss - u_ms|      {:.3e}", (&ss.primal - &ms.primal).amax());

    let report = equivalence_check(&sys, &spec, &opts, 1e-6)?;
    println!("equivalence check: {}", if report.pass { "PASS" } else { "FAIL" });
    Ok(())
}
