use serde::{Deserialize, Serialize};

use super::config::{derive_seed, Purpose};
use super::pipeline::{run_until, summarize, write_csv_with, write_text, Depth, Experiment, SolutionSummary};
use crate::error::{Error, Result};
use crate::mathcore::{Rng, Vector};
use crate::ocp::robust::kron_lift;
use crate::ocp::{build_nominal_qp_multistep, build_nominal_qp_statespace, formulate_minmax_statespace, OcpSpec};
use crate::solver::{solve, Status};
use crate::system::stack_inputs;
use crate::validate::{
    conservatism_report, equivalence_check, estimate_violation, ConservatismReport, EquivalenceReport, ViolationSource,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: String,
    pub status: Status,
    pub true_cost: f64,
    /// Largest per-(j,k) violation frequency on the true system.
    pub worst_violation: f64,
    pub robust: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRowT {
    pub t: usize,
    pub seed: usize,
    pub status: Status,
    pub true_cost: f64,
    /// Median over `(j, k)` of the parametric term at the reference inputs.
    pub parametric_median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRowP {
    pub p: f64,
    pub delta: f64,
    pub status: Status,
    pub true_cost: f64,
    pub worst_estimate: f64,
    pub worst_upper: f64,
    pub budget: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub equivalence: EquivalenceReport,
    pub equivalence_verdict: String,
    pub methods: Vec<MethodRow>,
    pub solutions: Vec<SolutionSummary>,
    pub conservatism: ConservatismReport,
    pub cost_vs_t: Vec<SweepRowT>,
    pub violation_vs_p: Vec<SweepRowP>,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// `r_k ‖Σ_{θ,k}^{1/2}([x̄₀; u] ⊗ H_j)‖` for all `(j, k ≥ 1)` at fixed inputs.
fn parametric_terms(
    spec: &OcpSpec,
    estimates: &[crate::ident::ParameterEstimate],
    table: &crate::ocp::TighteningTable,
    u: &[Vector],
) -> Vec<f64> {
    let (horizon, m) = (spec.horizon, spec.m());
    let mut ones_u = Vector::zeros(1 + horizon * m);
    ones_u[0] = 1.0;
    ones_u.rows_mut(1, horizon * m).copy_from(&stack_inputs(u));
    let mut out = Vec::new();
    for k in 1..=horizon {
        let step = &table.steps[k - 1];
        for h in &spec.hx {
            let lift = kron_lift(h, &spec.init.mean, k, m, horizon, estimates[k - 1].structure);
            out.push((&step.sqrt_cov * (lift * &ones_u)).norm() * step.radius);
        }
    }
    out
}

/// Equivalence of the state-space and condensed programs on the true model,
/// conservatism of the robust program, the scenario baseline, and sweeps
/// over data length and `p`.
pub fn run_compare(exp: &mut Experiment) -> Result<CompareReport> {
    let dir = exp.out_dir().to_path_buf();
    let cmp = exp.cfg.compare.clone().unwrap_or_default();
    let spec = exp.cfg.ocp.clone();
    let delta = exp.cfg.identification.delta;
    let part = run_until(exp, Depth::Solve)?;
    let table = part.table.clone().expect("solve depth");
    let (prog, sol) = part.robust.clone().expect("solve depth");
    let u_robust = prog.inputs(&sol.primal);
    let estimates = part.estimates;
    let vseed = derive_seed(exp.cfg.validation.seed, Purpose::Validation, 1);

    let equivalence = exp.record("equivalence", |e| equivalence_check(&e.sys, &spec, &e.opts(), 1e-6))?;

    let (methods, solutions) = exp.record("methods", |e| {
        let opts = e.opts();
        let mut methods = Vec::new();
        let mut solutions = Vec::new();
        let est_model = crate::ident::predictor_from_estimates(&estimates[..spec.horizon], &e.gw(), &e.sys.sigma_w)?;
        let mut candidates = vec![
            ("nominal_statespace_true", build_nominal_qp_statespace(&e.sys, &spec)?, false),
            ("nominal_multistep_true", build_nominal_qp_multistep(&e.truth, &spec)?, false),
            ("certainty_equivalent", build_nominal_qp_multistep(&est_model, &spec)?, false),
            ("robust", prog.clone(), true),
        ];
        let scenario_rng = Rng::new(derive_seed(e.cfg.validation.seed, Purpose::Scenarios, 0), 0);
        let baseline = formulate_minmax_statespace(
            &estimates[0],
            &spec,
            &e.sys.process_noise(),
            delta,
            e.cfg.validation.scenarios,
            &scenario_rng,
        )?;
        candidates.push(("scenario_minmax", baseline.program, false));
        for (name, p, robust) in candidates {
            let s = if name == "robust" { sol.clone() } else { solve(&p, &opts)? };
            let summary = summarize(name, &p, &s, &e.sys, &spec)?;
            let worst = if s.status == Status::Optimal {
                let u = p.inputs(&s.primal);
                let rep = estimate_violation(ViolationSource::Truth(&e.sys), &u, &spec, cmp.samples, vseed)?;
                rep.rows.iter().map(|r| r.estimate).fold(0.0, f64::max)
            } else {
                f64::NAN
            };
            methods.push(MethodRow { method: name.into(), status: s.status, true_cost: summary.true_cost, worst_violation: worst, robust });
            solutions.push(summary);
        }
        Ok((methods, solutions))
    })?;

    let conservatism = exp.record("conservatism", |e| {
        conservatism_report(&e.sys, &estimates, &e.gw(), &spec, &table, &u_robust, cmp.samples, vseed)
    })?;

    // reference inputs for the data-length sweep: the nominal optimizer on the truth
    let reference = solve(&build_nominal_qp_statespace(&exp.sys, &spec)?, &exp.opts())?;
    let u_ref = reference.primal.clone();
    let u_ref: Vec<Vector> = (0..spec.horizon).map(|k| u_ref.rows(k * spec.m(), spec.m()).into_owned()).collect();
    let cost_vs_t = exp.record("sweep_t", |e| {
        let mut rows = Vec::new();
        for &t in &cmp.t_values {
            for seed in 0..cmp.seeds {
                let data = e.simulate_with(t, 1 + (t as u64) * 1000 + seed as u64)?;
                let est = e.identify_from(&data)?;
                let tab = e.tightening(&spec, &est, delta)?;
                let prog = e.robust_program(&spec, &est, &tab)?;
                let s = solve(&prog, &e.opts())?;
                let cost = if s.status == Status::Optimal { super::pipeline::true_cost(&e.sys, &spec, &prog.inputs(&s.primal))? } else { f64::NAN };
                rows.push(SweepRowT {
                    t,
                    seed,
                    status: s.status,
                    true_cost: cost,
                    parametric_median: median(parametric_terms(&spec, &est, &tab, &u_ref)),
                });
            }
        }
        Ok(rows)
    })?;

    let violation_vs_p = exp.record("sweep_p", |e| {
        let mut rows = Vec::new();
        let gw = e.gw();
        for &p in &cmp.p_values {
            let mut s_p = spec.clone();
            s_p.p = p;
            let d = if delta > p { delta } else { 0.5 * (1.0 + p) };
            let tab = e.tightening(&s_p, &estimates, d)?;
            let prog = e.robust_program(&s_p, &estimates, &tab)?;
            let s = solve(&prog, &e.opts())?;
            let (cost, worst_estimate, worst_upper) = if s.status == Status::Optimal {
                let u = prog.inputs(&s.primal);
                let src = ViolationSource::Parameters { estimates: &estimates, gw: &gw, sigma_w: &e.sys.sigma_w };
                let rep = estimate_violation(src, &u, &s_p, cmp.samples, vseed)?;
                let worst = rep.rows.iter().map(|r| r.estimate).fold(0.0, f64::max);
                (super::pipeline::true_cost(&e.sys, &s_p, &u)?, worst, rep.worst_upper)
            } else {
                (f64::NAN, f64::NAN, f64::NAN)
            };
            rows.push(SweepRowP { p, delta: d, status: s.status, true_cost: cost, worst_estimate, worst_upper, budget: 1.0 - p });
        }
        Ok(rows)
    })?;

    let verdict = if equivalence.pass { "PASS" } else { "FAIL" };
    let report = CompareReport {
        equivalence,
        equivalence_verdict: verdict.into(),
        methods,
        solutions,
        conservatism,
        cost_vs_t,
        violation_vs_p,
    };
    write_outputs(&dir, &report, &table, &spec)?;
    write_text(&dir, "timings.json", &serde_json::to_string_pretty(&exp.timings)?)?;
    Ok(report)
}

fn write_outputs(dir: &std::path::Path, report: &CompareReport, table: &crate::ocp::TighteningTable, spec: &OcpSpec) -> Result<()> {
    write_text(dir, "compare_report.json", &serde_json::to_string_pretty(report)?)?;
    write_csv_with(dir, "conservatism.csv", |b| report.conservatism.write_csv(b))?;
    let rows_csv = |b: &mut Vec<u8>, header: &[&str], rows: Vec<Vec<String>>| -> Result<()> {
        let mut w = csv::Writer::from_writer(b);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush().map_err(Error::from)
    };
    write_csv_with(dir, "methods.csv", |b| {
        rows_csv(
            b,
            &["method", "status", "true_cost", "worst_violation", "robust"],
            report
                .methods
                .iter()
                .map(|m| vec![m.method.clone(), m.status.to_string(), format!("{:e}", m.true_cost), format!("{:e}", m.worst_violation), m.robust.to_string()])
                .collect(),
        )
    })?;
    write_csv_with(dir, "cost_vs_t.csv", |b| {
        rows_csv(
            b,
            &["t", "seed", "status", "true_cost", "parametric_median"],
            report
                .cost_vs_t
                .iter()
                .map(|r| vec![r.t.to_string(), r.seed.to_string(), r.status.to_string(), format!("{:e}", r.true_cost), format!("{:e}", r.parametric_median)])
                .collect(),
        )
    })?;
    write_csv_with(dir, "violation_vs_p.csv", |b| {
        rows_csv(
            b,
            &["p", "delta", "status", "true_cost", "worst_estimate", "worst_upper", "budget"],
            report
                .violation_vs_p
                .iter()
                .map(|r| {
                    vec![
                        format!("{:e}", r.p),
                        format!("{:e}", r.delta),
                        r.status.to_string(),
                        format!("{:e}", r.true_cost),
                        format!("{:e}", r.worst_estimate),
                        format!("{:e}", r.worst_upper),
                        format!("{:e}", r.budget),
                    ]
                })
                .collect(),
        )
    })?;
    write_csv_with(dir, "tightening_vs_k.csv", |b| {
        let mut rows = Vec::new();
        for j in 0..spec.hx.len() {
            for k in 1..=spec.horizon {
                let e = table.entry(j, k).ok_or_else(|| Error::DimensionMismatch(format!("missing ({j}, {k})")))?;
                let c = report.conservatism.rows.iter().find(|r| r.j == j && r.k == k);
                rows.push(vec![
                    j.to_string(),
                    k.to_string(),
                    format!("{:e}", e.h_exact),
                    format!("{:e}", e.h_upper),
                    format!("{:e}", c.map(|c| c.nominal_tightening).unwrap_or(f64::NAN)),
                    format!("{:e}", c.map(|c| c.parametric_term).unwrap_or(f64::NAN)),
                ]);
            }
        }
        rows_csv(b, &["j", "k", "h_exact", "h_upper", "nominal_tightening", "parametric_term"], rows)
    })?;
    Ok(())
}
