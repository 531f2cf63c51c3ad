//! Tightening constants of the standard demo configuration: the exact
//! maximum over the confidence ellipsoid next to the cheaper upper bound.

use std::path::Path;

use mspc::cli::{Experiment, ExperimentConfig};
use mspc::ocp::{TighteningMode, TighteningTable};

fn main() -> mspc::error::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/standard.json");
    let mut exp = Experiment::new(ExperimentConfig::load(&path)?)?;
    let data = exp.simulate()?;
    let estimates = exp.identify(&data)?;
    let spec = &exp.cfg.ocp;
    let table = TighteningTable::compute(spec, &estimates, &exp.gw(), &exp.sys.sigma_w, exp.cfg.identification.delta, TighteningMode::Exact)?;

    println!("p = {}, δ = {}, p̃ = {:.4}, c(p̃) = {:.4}", table.p, table.delta, table.p_tilde, table.c_p_tilde);
    println!(" j  k   exact      upper      ratio");
    for e in &table.entries {
        println!("{:2} {:2}  {:.5}  {:.5}  {:.3}", e.j, e.k, e.h_exact, e.h_upper, e.h_upper / e.h_exact);
    }
    Ok(())
}
