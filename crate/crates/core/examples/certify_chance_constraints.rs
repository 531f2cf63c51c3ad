//! Monte Carlo certification of the robust inputs: violation frequencies
//! per constraint and step with 99% Clopper-Pearson upper bounds, sampled
//! both from the identified parameter distribution and from the true system.

use std::path::Path;

use mspc::cli::{Experiment, ExperimentConfig};
use mspc::solver::solve;
use mspc::validate::{estimate_violation, ViolationSource};

fn main() -> mspc::error::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/standard.json");
    let mut exp = Experiment::new(ExperimentConfig::load(&path)?)?;
    let data = exp.simulate()?;
    let estimates = exp.identify(&data)?;
    let spec = exp.cfg.ocp.clone();
    let table = exp.tightening(&spec, &estimates, exp.cfg.identification.delta)?;
    let prog = exp.robust_program(&spec, &estimates, &table)?;
    let u = prog.inputs(&solve(&prog, &exp.opts())?.primal);

    let gw = exp.gw();
    let src = ViolationSource::Parameters { estimates: &estimates, gw: &gw, sigma_w: &exp.sys.sigma_w };
    let sampled = estimate_violation(src, &u, &spec, 100_000, 1)?;
    let truth = estimate_violation(ViolationSource::Truth(&exp.sys), &u, &spec, 100_000, 1)?;
    let budget = 1.0 - spec.p;
    println!("budget 1 - p = {budget:.2}");
    println!(" j  k   sampled  bound    true-system");
    for (a, b) in sampled.rows.iter().zip(&truth.rows) {
        println!("{:2} {:2}   {:.4}   {:.4}   {:.4}", a.j, a.k, a.estimate, a.upper, b.estimate);
    }
    println!("certified at budget + 0.01: {}", sampled.certifies(budget + 0.01));
    Ok(())
}
