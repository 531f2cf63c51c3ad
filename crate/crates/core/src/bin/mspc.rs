use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mspc::cli::pipeline::{write_csv_with, write_text};
use mspc::cli::{run_compare, run_pipeline, run_until, validate_inputs, Depth, Experiment, ExperimentConfig};
use mspc::error::{Error, Result};
use mspc::solver::{solve, ConicProgram, SolverOptions};

#[derive(Parser)]
#[command(name = "mspc", version, about = "Chance-constrained predictive control from identified multi-step predictors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate identification data and write trajectory.csv.
    Simulate(Common),
    /// Simulate and identify every predictor step; writes estimates.json.
    Identify(Common),
    /// Solve a conic program from JSON, or the robust program of a config.
    Solve {
        #[arg(long, conflicts_with = "config", required_unless_present = "config")]
        program: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the robust program and certify it by sampling.
    Validate(Common),
    /// Run every stage and write report.json.
    Pipeline(Common),
    /// Equivalence, conservatism, scenario baseline and sweeps.
    Compare(Common),
}

fn experiment(c: &Common) -> Result<Experiment> {
    let cfg = ExperimentConfig::load(&c.config)?.with_overrides(c.seed, c.samples, c.out.clone())?;
    Experiment::new(cfg)
}

/// `Ok(true)` iff every requested certification passed.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate(c) => {
            let mut exp = experiment(&c)?;
            let data = exp.simulate()?;
            write_csv_with(exp.out_dir(), "trajectory.csv", |b| data.write_csv(b))?;
            Ok(true)
        }
        Command::Identify(c) => {
            run_until(&mut experiment(&c)?, Depth::Identify)?;
            Ok(true)
        }
        Command::Solve { program: Some(path), out, .. } => {
            let text = std::fs::read_to_string(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            let sol = solve(&ConicProgram::from_json(&text)?, &SolverOptions::default())?;
            match out {
                Some(dir) => write_text(&dir, "solution.json", &sol.to_json()?)?,
                None => println!("{}", sol.to_json()?),
            }
            Ok(true)
        }
        Command::Solve { config, seed, out, .. } => {
            let config = config.expect("clap requires --program or --config");
            run_until(&mut experiment(&Common { config, seed, out, samples: None })?, Depth::Solve)?;
            Ok(true)
        }
        Command::Validate(c) => {
            let mut exp = experiment(&c)?;
            let part = run_until(&mut exp, Depth::Validate)?;
            let (prog, sol) = part.robust.expect("validate depth solves");
            let v = validate_inputs(&mut exp, &part.estimates, &prog.inputs(&sol.primal))?;
            write_text(exp.out_dir(), "certification.json", &serde_json::to_string_pretty(&v.certification)?)?;
            report_certification(v.certification.worst_upper, v.certification.budget, v.certification.passed);
            Ok(v.certification.passed)
        }
        Command::Pipeline(c) => {
            let out = run_pipeline(&mut experiment(&c)?)?;
            let cert = &out.report.certification;
            report_certification(cert.worst_upper, cert.budget, cert.passed);
            Ok(cert.passed)
        }
        Command::Compare(c) => {
            let report = run_compare(&mut experiment(&c)?)?;
            println!("equivalence: {}", report.equivalence_verdict);
            Ok(true)
        }
    }
}

fn report_certification(worst: f64, budget: f64, passed: bool) {
    let verdict = if passed { "PASS" } else { "FAIL" };
    println!("certification: {verdict} (worst upper bound {worst:.5}, budget {budget:.5})");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = std::env::var("MSPC_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("warning: MSPC_THREADS ignored: {e}");
        }
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
