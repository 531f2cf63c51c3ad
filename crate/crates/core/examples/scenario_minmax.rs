//! Scenario min-max baseline: the worst expected cost over sampled
//! parameters from the one-step confidence set, against the robust program.

use std::path::Path;

use mspc::cli::{true_cost, Experiment, ExperimentConfig};
use mspc::mathcore::Rng;
use mspc::ocp::formulate_minmax_statespace;
use mspc::solver::solve;

fn main() -> mspc::error::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/standard.json");
    let mut exp = Experiment::new(ExperimentConfig::load(&path)?)?;
    let data = exp.simulate()?;
    let estimates = exp.identify(&data)?;
    let spec = exp.cfg.ocp.clone();
    let delta = exp.cfg.identification.delta;

    for scenarios in [8, 32, 128] {
        let sp = formulate_minmax_statespace(&estimates[0], &spec, &exp.sys.process_noise(), delta, scenarios, &Rng::new(5, 0))?;
        let sol = solve(&sp.program, &exp.opts())?;
        let u = sp.program.inputs(&sol.primal);
        println!("{scenarios:4} scenarios: status {}, worst-case bound {:.4}, cost on truth {:.4}", sol.status, sol.objective, true_cost(&exp.sys, &spec, &u)?);
    }

    let table = exp.tightening(&spec, &estimates, delta)?;
    let robust = exp.robust_program(&spec, &estimates, &table)?;
    let sol = solve(&robust, &exp.opts())?;
    println!("robust program: cost on truth {:.4}", true_cost(&exp.sys, &spec, &robust.inputs(&sol.primal))?);
    Ok(())
}
