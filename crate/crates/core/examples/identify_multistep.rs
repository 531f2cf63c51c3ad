//! Identifies the k-step predictors of a 2-state system from one simulated
//! trajectory and checks each estimate against its confidence ellipsoid.

use mspc::ident::{confidence_set, identify_horizon, CovarianceMode, NoiseKnowledge, ParameterEstimate, Structure};
use mspc::mathcore::{Matrix, Rng, SpdMatrix, Vector};
use mspc::system::{probing_inputs, simulate, GaussianBelief, LinearSystem, MultiStepModel};

fn main() -> mspc::error::Result<()> {
    let sys = LinearSystem::new(
        Matrix::from_row_slice(2, 2, &[0.9, 0.3, -0.2, 0.8]),
        Matrix::from_row_slice(2, 1, &[0.0, 1.0]),
        Matrix::identity(2, 2),
        SpdMatrix::from_diagonal(&[0.01, 0.01])?,
        SpdMatrix::from_diagonal(&[0.001, 0.001])?,
    )?;
    let horizon = 4;
    let truth = MultiStepModel::from_system(&sys, horizon);

    let mut rng = Rng::new(42, 0);
    let u = probing_inputs(1, 500, 1.0, &mut rng);
    let data = simulate(&sys, &GaussianBelief::deterministic(Vector::zeros(2)), &u, &mut rng)?;

    let noise = NoiseKnowledge { truth: &truth, sigma_eps: &sys.sigma_eps };
    let estimates = identify_horizon(&data, horizon, Structure::Full, CovarianceMode::Oracle, &noise)?;
    println!(" k  dof  ‖θ̂ - θ‖    tr Σθ      inside 95% set");
    for est in &estimates {
        let exact = ParameterEstimate::exact(est.k, truth.g0(est.k), truth.gu(est.k), Structure::Full)?;
        let set = confidence_set(est, 0.95)?;
        println!(
            "{:2}  {:3}  {:.3e}  {:.3e}  {}",
            est.k,
            est.dof,
            (&est.theta_hat - &exact.theta_hat).norm(),
            est.cov.as_matrix().trace(),
            set.contains(&exact.theta_hat)
        );
    }
    Ok(())
}
