use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::binomial::clopper_pearson_upper;
use crate::error::{ensure_dims, Error, Result};
use crate::ident::{ParameterEstimate, Structure};
use crate::mathcore::{GaussianSampler, Matrix, Rng, SpdMatrix, Vector};
use crate::ocp::OcpSpec;
use crate::system::{stack_inputs, LinearSystem};

/// Confidence level of the reported upper bounds.
pub const REPORT_CONFIDENCE: f64 = 0.99;
/// Smallest accepted sample count.
pub const MIN_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// `x₀` and `w` drawn, dynamics fixed to the true system.
    NoiseOnly,
    /// Additionally `θ_k ~ N(θ̂_k, Σ_{θ,k})` per sample and step.
    NoiseAndParameters,
}

/// Where sampled trajectories come from.
#[derive(Debug, Clone, Copy)]
pub enum ViolationSource<'a> {
    Truth(&'a LinearSystem),
    /// Per-step estimates with known disturbance maps `gw[k-1] = G_{w,k}`.
    Parameters { estimates: &'a [ParameterEstimate], gw: &'a [Matrix], sigma_w: &'a SpdMatrix },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationRow {
    pub j: usize,
    pub k: usize,
    pub samples: u64,
    pub violations: u64,
    pub estimate: f64,
    /// One-sided Clopper-Pearson bound at [`REPORT_CONFIDENCE`].
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub mode: SamplingMode,
    pub confidence: f64,
    pub rows: Vec<ViolationRow>,
    pub worst_upper: f64,
}

impl ViolationReport {
    fn from_counts(mode: SamplingMode, r: usize, horizon: usize, samples: u64, counts: &[u64]) -> Self {
        let mut rows = Vec::with_capacity(counts.len());
        for k in 0..=horizon {
            for j in 0..r {
                let violations = counts[k * r + j];
                rows.push(ViolationRow {
                    j,
                    k,
                    samples,
                    violations,
                    estimate: violations as f64 / samples as f64,
                    upper: clopper_pearson_upper(violations, samples, REPORT_CONFIDENCE),
                });
            }
        }
        let worst_upper = rows.iter().map(|r| r.upper).fold(0.0, f64::max);
        ViolationReport { mode, confidence: REPORT_CONFIDENCE, rows, worst_upper }
    }

    /// True iff every row's upper bound is within `budget`.
    pub fn certifies(&self, budget: f64) -> bool {
        self.rows.iter().all(|r| r.upper <= budget)
    }

    pub fn row(&self, j: usize, k: usize) -> Option<&ViolationRow> {
        self.rows.iter().find(|r| r.j == j && r.k == k)
    }

    /// CSV with columns `j,k,samples,violations,estimate,upper`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["j", "k", "samples", "violations", "estimate", "upper"])?;
        for r in &self.rows {
            out.write_record([
                r.j.to_string(),
                r.k.to_string(),
                r.samples.to_string(),
                r.violations.to_string(),
                format!("{:e}", r.estimate),
                format!("{:e}", r.upper),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Per-step sampler of `[G_{0,k}, G_{u,k}]`.
struct ParameterDraw {
    structure: Structure,
    sampler: GaussianSampler,
    gw: Matrix,
}

impl ParameterDraw {
    fn predict(&self, n: usize, x0: &Vector, inputs: &Vector, noise: &Vector, rng: &mut Rng) -> Vector {
        let theta = self.sampler.sample(rng);
        let head = match self.structure {
            Structure::Full => n * n,
            Structure::Fir => 0,
        };
        let gu = Matrix::from_column_slice(n, inputs.len(), &theta.as_slice()[head..]);
        let mut x = gu * inputs + &self.gw * noise.rows(0, self.gw.ncols());
        if head > 0 {
            x += Matrix::from_column_slice(n, n, &theta.as_slice()[..head]) * x0;
        }
        x
    }
}

/// Monte Carlo frequency of `H_jᵀx_k > 1` for every `(j, k)`, `k = 0..=N`,
/// under the open-loop inputs `u`. Sample `i` draws from the stream
/// `(seed, i)`, and counts are summed as integers, so the report does not
/// depend on the thread count.
pub fn estimate_violation(
    source: ViolationSource<'_>,
    u: &[Vector],
    spec: &OcpSpec,
    n_samples: usize,
    seed: u64,
) -> Result<ViolationReport> {
    if n_samples < MIN_SAMPLES {
        return Err(Error::DomainError(format!("at least {MIN_SAMPLES} samples required, got {n_samples}")));
    }
    let (n, m, horizon, r) = (spec.n(), spec.m(), spec.horizon, spec.hx.len());
    ensure_dims(u.len() == horizon && u.iter().all(|v| v.len() == m), || {
        format!("expected {horizon} inputs of length {m}")
    })?;
    ensure_dims(spec.init.dim() == n, || "initial belief dimension".into())?;
    let init = GaussianSampler::new(spec.init.mean.clone(), spec.init.cov.as_matrix())?;
    let hx = &spec.hx;
    let tally = |x: &Vector, k: usize, counts: &mut [u64]| {
        for (j, h) in hx.iter().enumerate() {
            if h.dot(x) > 1.0 {
                counts[k * r + j] += 1;
            }
        }
    };
    let slots = (horizon + 1) * r;
    let (mode, counts) = match source {
        ViolationSource::Truth(sys) => {
            ensure_dims(sys.n() == n && sys.m() == m, || "system dimensions differ from spec".into())?;
            let w = GaussianSampler::zero_mean(&sys.sigma_w);
            let counts = run_samples(n_samples, slots, |i, counts| {
                let mut rng = Rng::new(seed, i as u64);
                let mut x = init.sample(&mut rng);
                tally(&x, 0, counts);
                for (k, uk) in u.iter().enumerate() {
                    x = &sys.a * &x + &sys.b * uk + &sys.e * w.sample(&mut rng);
                    tally(&x, k + 1, counts);
                }
            });
            (SamplingMode::NoiseOnly, counts)
        }
        ViolationSource::Parameters { estimates, gw, sigma_w } => {
            ensure_dims(estimates.len() >= horizon && gw.len() >= horizon, || {
                format!("need {horizon} estimates and disturbance maps")
            })?;
            let draws = estimates[..horizon]
                .iter()
                .zip(gw)
                .map(|(e, g)| {
                    e.validate()?;
                    ensure_dims(e.n == n && e.m == m, || format!("estimate k = {} dimensions", e.k))?;
                    Ok(ParameterDraw {
                        structure: e.structure,
                        sampler: GaussianSampler::new(e.theta_hat.clone(), e.cov.as_matrix())?,
                        gw: g.clone(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let w = GaussianSampler::zero_mean(sigma_w);
            let stacked_u: Vec<Vector> = (1..=horizon).map(|k| stack_inputs(&u[..k])).collect();
            let counts = run_samples(n_samples, slots, |i, counts| {
                let mut rng = Rng::new(seed, i as u64);
                let x0 = init.sample(&mut rng);
                tally(&x0, 0, counts);
                let noise: Vec<Vector> = (0..horizon).map(|_| w.sample(&mut rng)).collect();
                let noise = stack_inputs(&noise);
                for k in 1..=horizon {
                    let x = draws[k - 1].predict(n, &x0, &stacked_u[k - 1], &noise, &mut rng);
                    tally(&x, k, counts);
                }
            });
            (SamplingMode::NoiseAndParameters, counts)
        }
    };
    Ok(ViolationReport::from_counts(mode, r, horizon, n_samples as u64, &counts))
}

fn run_samples(n_samples: usize, slots: usize, sample: impl Fn(usize, &mut [u64]) + Sync) -> Vec<u64> {
    (0..n_samples)
        .into_par_iter()
        .fold(
            || vec![0u64; slots],
            |mut acc, i| {
                sample(i, &mut acc);
                acc
            },
        )
        .reduce(
            || vec![0u64; slots],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        )
}
