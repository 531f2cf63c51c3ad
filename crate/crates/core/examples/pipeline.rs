//! End-to-end run of a configuration file (default: the standard demo),
//! writing every artifact to the configured output directory.
//!
//!     cargo run --release --example pipeline -- configs/stress.json

use std::path::PathBuf;

use mspc::cli::{run_pipeline, Experiment, ExperimentConfig};

fn main() -> mspc::error::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/standard.json"));
    let mut cfg = ExperimentConfig::load(&path)?;
    cfg.output = std::env::temp_dir().join("mspc-pipeline-example");
    let mut exp = Experiment::new(cfg)?;
    let out = run_pipeline(&mut exp)?;

    for t in &out.timings {
        println!("{:12} {:8.3} s", t.stage, t.seconds);
    }
    for s in &out.report.solutions {
        println!("{:24} {:?} cost on truth {:.4}", s.name, s.status, s.true_cost);
    }
    let c = &out.report.certification;
    println!("worst bound {:.4} vs budget {:.4}: {}", c.worst_upper, c.budget, if c.passed { "certified" } else { "not certified" });
    println!("artifacts in {}", exp.out_dir().display());
    Ok(())
}
