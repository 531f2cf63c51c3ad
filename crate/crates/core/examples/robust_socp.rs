//! Builds the robust second-order cone program from identified predictors
//! and compares its inputs and cost with the nominal program on the truth.

use std::path::Path;

use mspc::cli::{true_cost, Experiment, ExperimentConfig};
use mspc::ocp::build_nominal_qp_statespace;
use mspc::solver::solve;

fn main() -> mspc::error::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/standard.json");
    let mut exp = Experiment::new(ExperimentConfig::load(&path)?)?;
    let data = exp.simulate()?;
    let estimates = exp.identify(&data)?;
    let spec = exp.cfg.ocp.clone();
    let table = exp.tightening(&spec, &estimates, exp.cfg.identification.delta)?;
    let robust = exp.robust_program(&spec, &estimates, &table)?;
    println!("robust program: {} variables, {} linear rows, {} cone rows", robust.dim, robust.linear.len(), robust.soc.len());

    let sol = solve(&robust, &exp.opts())?;
    let nominal = build_nominal_qp_statespace(&exp.sys, &spec)?;
    let nsol = solve(&nominal, &exp.opts())?;
    let (ur, un) = (robust.inputs(&sol.primal), nominal.inputs(&nsol.primal));
    println!("status {} after {} iterations, KKT residual {:.2e}", sol.status, sol.iterations, sol.kkt.max());
    println!(" k   robust u    nominal u");
    for (k, (a, b)) in ur.iter().zip(&un).enumerate() {
        println!("{k:2}  {:+.5}   {:+.5}", a[0], b[0]);
    }
    println!("expected cost on the true system: robust {:.4}, nominal {:.4}", true_cost(&exp.sys, &spec, &ur)?, true_cost(&exp.sys, &spec, &un)?);
    Ok(())
}
