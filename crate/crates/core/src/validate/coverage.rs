use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::binomial::{binomial_band, clopper_pearson_lower, clopper_pearson_upper};
use crate::error::{Error, Result};
use crate::ident::{
    confidence_set, identify_step, state_space_ls, CovarianceMode, NoiseKnowledge, ParameterEstimate, Structure,
};
use crate::mathcore::Rng;
use crate::system::{probing_inputs, simulate, GaussianBelief, LinearSystem, MultiStepModel};

/// Estimator exercised by the coverage experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CoverageEstimator {
    /// Weighted least squares with the oracle residual covariance.
    #[default]
    Gls,
    /// One-step state-space estimator (`k = 1`, full structure only).
    StateSpaceLs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageConfig {
    pub system: LinearSystem,
    pub init: GaussianBelief,
    /// Data length `T`.
    pub t: usize,
    pub k: usize,
    pub deltas: Vec<f64>,
    pub runs: usize,
    pub structure: Structure,
    pub estimator: CoverageEstimator,
    pub input_variance: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub delta: f64,
    pub hits: u64,
    pub valid: u64,
    pub coverage: f64,
    /// Exact binomial 99% acceptance band for the hit count under rate `δ`.
    pub band: (u64, u64),
    pub within_band: bool,
    /// Two-sided 99% Clopper-Pearson interval for the coverage.
    pub ci: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub runs: usize,
    /// Runs whose identification failed (insufficient excitation or a
    /// singular information matrix); excluded from the rates.
    pub excluded: usize,
    pub rows: Vec<CoverageRow>,
}

fn estimate(cfg: &CoverageConfig, truth: &MultiStepModel, rng: &mut Rng) -> Result<ParameterEstimate> {
    let sys = &cfg.system;
    let inputs = probing_inputs(sys.m(), cfg.t, cfg.input_variance, rng);
    let data = simulate(sys, &cfg.init, &inputs, rng)?;
    match cfg.estimator {
        CoverageEstimator::Gls => {
            let noise = NoiseKnowledge { truth, sigma_eps: &sys.sigma_eps };
            identify_step(&data, cfg.k, cfg.structure, CovarianceMode::Oracle, &noise)
        }
        CoverageEstimator::StateSpaceLs => state_space_ls(&data, &sys.sigma_w, &sys.e),
    }
}

/// Repeats data generation and identification and counts how often the true
/// `θ_k` falls in the confidence ellipsoid for each `δ`.
pub fn coverage_experiment(cfg: &CoverageConfig) -> Result<CoverageSummary> {
    if cfg.estimator == CoverageEstimator::StateSpaceLs && (cfg.k != 1 || cfg.structure != Structure::Full) {
        return Err(Error::DomainError("state-space estimator requires k = 1 and full structure".into()));
    }
    if cfg.deltas.iter().any(|d| !(*d > 0.0 && *d < 1.0)) {
        return Err(Error::DomainError("coverage levels must lie in (0, 1)".into()));
    }
    let truth = MultiStepModel::from_system(&cfg.system, cfg.k);
    let theta = ParameterEstimate::exact(cfg.k, truth.g0(cfg.k), truth.gu(cfg.k), cfg.structure)?.theta_hat;
    let outcomes: Vec<Option<Vec<bool>>> = (0..cfg.runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = Rng::new(cfg.seed, i as u64);
            match estimate(cfg, &truth, &mut rng) {
                Ok(est) => Ok(Some(
                    cfg.deltas
                        .iter()
                        .map(|&d| confidence_set(&est, d).map(|s| s.contains(&theta)))
                        .collect::<Result<Vec<_>>>()?,
                )),
                Err(Error::InsufficientData { .. }) | Err(Error::SingularInformation(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let valid: Vec<&Vec<bool>> = outcomes.iter().flatten().collect();
    let n = valid.len() as u64;
    let rows = cfg
        .deltas
        .iter()
        .enumerate()
        .map(|(i, &delta)| {
            let hits = valid.iter().filter(|v| v[i]).count() as u64;
            let band = binomial_band(n, delta, 0.99);
            CoverageRow {
                delta,
                hits,
                valid: n,
                coverage: if n > 0 { hits as f64 / n as f64 } else { f64::NAN },
                band,
                within_band: n > 0 && hits >= band.0 && hits <= band.1,
                ci: (clopper_pearson_lower(hits, n, 0.995), clopper_pearson_upper(hits, n, 0.995)),
            }
        })
        .collect();
    Ok(CoverageSummary { runs: cfg.runs, excluded: cfg.runs - valid.len(), rows })
}
