use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{derive_seed, ExperimentConfig, Purpose};
use crate::error::{Error, Result};
use crate::ident::{identify_horizon, NoiseKnowledge, ParameterEstimate};
use crate::mathcore::{Matrix, Rng, Vector};
use crate::ocp::{build_nominal_qp_multistep, build_nominal_qp_statespace, build_robust_socp_multistep, OcpSpec, TighteningTable};
use crate::solver::{solve, ConicProgram, Solution, SolverOptions, Status};
use crate::system::{probing_inputs, propagate_moments_statespace, simulate, GaussianBelief, LinearSystem, MultiStepModel, Trajectory};
use crate::validate::{equivalence_check, estimate_violation, EquivalenceReport, ViolationReport, ViolationSource};

/// Runs `f` as stage `name`, tagging failures with the stage.
pub(crate) fn stage<T>(timings: &mut Vec<StageTiming>, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f().map_err(|e| match e {
        Error::Stage { .. } => e,
        other => Error::Stage { stage: name.into(), message: other.to_string() },
    });
    timings.push(StageTiming { stage: name.into(), seconds: start.elapsed().as_secs_f64() });
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSummary {
    pub k: usize,
    pub dof: usize,
    pub theta_hat: Vec<f64>,
    pub cov_trace: f64,
    /// `√χ²_dof(δ)`.
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSummary {
    pub name: String,
    pub status: Status,
    pub objective: f64,
    pub inputs: Vec<Vec<f64>>,
    pub kkt_max: f64,
    pub iterations: usize,
    /// Expected cost of the inputs on the true system, including trace terms.
    pub true_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    /// `1 - p + slack`.
    pub budget: f64,
    pub worst_upper: f64,
    pub passed: bool,
}

/// Deterministic record of one pipeline run; wall-clock timings are kept
/// in a separate file so the report is reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub system: LinearSystem,
    pub estimates: Vec<EstimateSummary>,
    pub tightening: TighteningTable,
    pub solutions: Vec<SolutionSummary>,
    pub violation: ViolationReport,
    pub violation_true_system: ViolationReport,
    pub equivalence: EquivalenceReport,
    pub certification: Certification,
}

/// Everything shared by the commands: the resolved system, its condensed
/// model (for the known disturbance maps) and the identification data.
pub struct Experiment {
    pub cfg: ExperimentConfig,
    pub sys: LinearSystem,
    pub truth: MultiStepModel,
    pub timings: Vec<StageTiming>,
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn write_csv_with(dir: &Path, name: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    write_text(dir, name, &String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))?)
}

/// Expected tracking cost `Σ ‖x̄_k‖²_Q + tr(QΣ_{x,k}) + ‖u_k‖²_R` on `sys`.
pub fn true_cost(sys: &LinearSystem, spec: &OcpSpec, u: &[Vector]) -> Result<f64> {
    let moments = propagate_moments_statespace(sys, &spec.init, u)?;
    let q = spec.q.as_matrix();
    let mut cost = 0.0;
    for b in &moments[1..] {
        cost += b.mean.dot(&(q * &b.mean)) + (q * b.cov.as_matrix()).trace();
    }
    for uk in u {
        cost += uk.dot(&(spec.r.as_matrix() * uk));
    }
    Ok(cost)
}

pub(crate) fn summarize(name: &str, prog: &ConicProgram, sol: &Solution, sys: &LinearSystem, spec: &OcpSpec) -> Result<SolutionSummary> {
    let inputs = prog.inputs(&sol.primal);
    Ok(SolutionSummary {
        name: name.into(),
        status: sol.status,
        objective: sol.objective,
        inputs: inputs.iter().map(|v| v.iter().copied().collect()).collect(),
        kkt_max: sol.kkt.max(),
        iterations: sol.iterations,
        true_cost: true_cost(sys, spec, &inputs)?,
    })
}

impl Experiment {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        let mut timings = Vec::new();
        let sys = stage(&mut timings, "system", || cfg.system.resolve())?;
        if sys.n() != cfg.ocp.n() || sys.m() != cfg.ocp.m() {
            return Err(Error::Stage { stage: "system".into(), message: "system and ocp dimensions differ".into() });
        }
        let truth = MultiStepModel::from_system(&sys, cfg.k_max());
        Ok(Experiment { cfg, sys, truth, timings })
    }

    pub fn out_dir(&self) -> &Path {
        &self.cfg.output
    }

    pub fn gw(&self) -> Vec<Matrix> {
        (1..=self.truth.horizon()).map(|k| self.truth.gw(k).clone()).collect()
    }

    pub fn opts(&self) -> SolverOptions {
        SolverOptions::default()
    }

    /// Simulated identification data with white probing inputs.
    pub fn simulate_with(&self, t: usize, seed_index: u64) -> Result<Trajectory> {
        let cfg = &self.cfg;
        let sys = &self.sys;
        let mut rng = Rng::new(derive_seed(cfg.validation.seed, Purpose::Data, seed_index), 0);
        let init = cfg.identification.init.clone().unwrap_or_else(|| GaussianBelief::deterministic(Vector::zeros(sys.n())));
        let inputs = probing_inputs(sys.m(), t, cfg.identification.input_variance, &mut rng);
        simulate(sys, &init, &inputs, &mut rng)
    }

    pub fn simulate(&mut self) -> Result<Trajectory> {
        let t = self.cfg.identification.t;
        self.record("simulate", |e| e.simulate_with(t, 0))
    }

    pub fn identify_from(&self, data: &Trajectory) -> Result<Vec<ParameterEstimate>> {
        let id = &self.cfg.identification;
        let k_max = self.cfg.k_max();
        if id.perfect_information {
            return (1..=k_max)
                .map(|k| ParameterEstimate::exact(k, self.truth.g0(k), self.truth.gu(k), id.structure))
                .collect();
        }
        let noise = NoiseKnowledge { truth: &self.truth, sigma_eps: &self.sys.sigma_eps };
        identify_horizon(data, k_max, id.structure, id.covariance_mode, &noise)
    }

    pub fn identify(&mut self, data: &Trajectory) -> Result<Vec<ParameterEstimate>> {
        self.record("identify", |e| e.identify_from(data))
    }

    pub fn tightening(&self, spec: &OcpSpec, estimates: &[ParameterEstimate], delta: f64) -> Result<TighteningTable> {
        let mode = self.cfg.validation.tightening;
        if self.cfg.identification.perfect_information {
            TighteningTable::known_parameters(spec, estimates, &self.gw(), &self.sys.sigma_w, mode)
        } else {
            TighteningTable::compute(spec, estimates, &self.gw(), &self.sys.sigma_w, delta, mode)
        }
    }

    pub fn robust_program(&self, spec: &OcpSpec, estimates: &[ParameterEstimate], table: &TighteningTable) -> Result<ConicProgram> {
        build_robust_socp_multistep(estimates, &self.gw(), spec, table)
    }

    pub fn record<T>(&mut self, name: &str, f: impl FnOnce(&Self) -> Result<T>) -> Result<T> {
        let mut timings = std::mem::take(&mut self.timings);
        let out = stage(&mut timings, name, || f(self));
        self.timings = timings;
        out
    }
}

/// Outcome of the full pipeline.
pub struct PipelineOutcome {
    pub report: ExperimentReport,
    pub timings: Vec<StageTiming>,
}

/// Which stages the pipeline runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Depth {
    Identify,
    Solve,
    Validate,
}

pub struct PartialRun {
    pub estimates: Vec<ParameterEstimate>,
    pub table: Option<TighteningTable>,
    pub robust: Option<(ConicProgram, Solution)>,
}

/// simulate → identify → tighten → solve the robust program, writing each
/// artifact as soon as it exists.
pub fn run_until(exp: &mut Experiment, depth: Depth) -> Result<PartialRun> {
    let dir = exp.out_dir().to_path_buf();
    let data = exp.simulate()?;
    write_csv_with(&dir, "trajectory.csv", |b| data.write_csv(b))?;
    let estimates = exp.identify(&data)?;
    write_text(&dir, "estimates.json", &serde_json::to_string_pretty(&estimates)?)?;
    if depth == Depth::Identify {
        return Ok(PartialRun { estimates, table: None, robust: None });
    }
    let spec = exp.cfg.ocp.clone();
    let delta = exp.cfg.identification.delta;
    let table = exp.record("tightening", |e| e.tightening(&spec, &estimates, delta))?;
    write_csv_with(&dir, "tightening.csv", |b| table.write_csv(b))?;
    let prog = exp.record("build", |e| e.robust_program(&spec, &estimates, &table))?;
    write_text(&dir, "robust_program.json", &prog.to_json()?)?;
    let sol = exp.record("solve", |e| solve(&prog, &e.opts()))?;
    write_text(&dir, "robust_solution.json", &sol.to_json()?)?;
    if sol.status != Status::Optimal {
        return Err(Error::Stage { stage: "solve".into(), message: format!("robust program finished with status {}", sol.status) });
    }
    Ok(PartialRun { estimates, table: Some(table), robust: Some((prog, sol)) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub violation: ViolationReport,
    pub violation_true_system: ViolationReport,
    pub certification: Certification,
}

/// Certifies `u` by sampling parameters from the identified posterior
/// together with the noise. The true-system frequencies are reported
/// alongside but do not enter the verdict.
pub fn validate_inputs(exp: &mut Experiment, estimates: &[ParameterEstimate], u: &[Vector]) -> Result<Validation> {
    let dir = exp.out_dir().to_path_buf();
    let spec = exp.cfg.ocp.clone();
    let samples = exp.cfg.validation.samples;
    let vseed = derive_seed(exp.cfg.validation.seed, Purpose::Validation, 0);
    let (violation, violation_true_system) = exp.record("validate", |e| {
        let gw = e.gw();
        let src = ViolationSource::Parameters { estimates, gw: &gw, sigma_w: &e.sys.sigma_w };
        let a = estimate_violation(src, u, &spec, samples, vseed)?;
        let b = estimate_violation(ViolationSource::Truth(&e.sys), u, &spec, samples, vseed)?;
        Ok((a, b))
    })?;
    write_csv_with(&dir, "violation.csv", |b| violation.write_csv(b))?;
    write_csv_with(&dir, "violation_true_system.csv", |b| violation_true_system.write_csv(b))?;
    let budget = 1.0 - spec.p + exp.cfg.validation.slack;
    let certification = Certification { budget, worst_upper: violation.worst_upper, passed: violation.certifies(budget) };
    Ok(Validation { violation, violation_true_system, certification })
}

/// Full pipeline: identification, robust program, certification by
/// sampling parameters from the identified posterior, and the nominal
/// programs on the true system for reference.
pub fn run_pipeline(exp: &mut Experiment) -> Result<PipelineOutcome> {
    let dir = exp.out_dir().to_path_buf();
    let part = run_until(exp, Depth::Validate)?;
    let table = part.table.expect("solve depth");
    let (prog, sol) = part.robust.expect("solve depth");
    let spec = exp.cfg.ocp.clone();
    let u = prog.inputs(&sol.primal);

    let (reference, equivalence) = exp.record("reference", |e| {
        let opts = e.opts();
        let ss = build_nominal_qp_statespace(&e.sys, &spec)?;
        let ms = build_nominal_qp_multistep(&e.truth, &spec)?;
        let s1 = solve(&ss, &opts)?;
        let s2 = solve(&ms, &opts)?;
        let eq = equivalence_check(&e.sys, &spec, &opts, 1e-6)?;
        Ok((vec![summarize("nominal_statespace_true", &ss, &s1, &e.sys, &spec)?, summarize("nominal_multistep_true", &ms, &s2, &e.sys, &spec)?], eq))
    })?;

    let estimates = &part.estimates;
    let v = validate_inputs(exp, estimates, &u)?;
    let mut solutions = vec![summarize("robust", &prog, &sol, &exp.sys, &spec)?];
    solutions.extend(reference);
    let report = ExperimentReport {
        config: exp.cfg.clone(),
        system: exp.sys.clone(),
        estimates: summarize_estimates(estimates, &table),
        tightening: table,
        solutions,
        violation: v.violation,
        violation_true_system: v.violation_true_system,
        equivalence,
        certification: v.certification,
    };
    write_text(&dir, "report.json", &serde_json::to_string_pretty(&report)?)?;
    write_text(&dir, "timings.json", &serde_json::to_string_pretty(&exp.timings)?)?;
    Ok(PipelineOutcome { report, timings: exp.timings.clone() })
}

pub(crate) fn summarize_estimates(estimates: &[ParameterEstimate], table: &TighteningTable) -> Vec<EstimateSummary> {
    estimates
        .iter()
        .map(|e| EstimateSummary {
            k: e.k,
            dof: e.dof,
            theta_hat: e.theta_hat.iter().copied().collect(),
            cov_trace: e.cov.as_matrix().trace(),
            radius: table.steps.get(e.k - 1).map(|s| s.radius).unwrap_or(f64::NAN),
        })
        .collect()
}
