use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ident::{CovarianceMode, Structure};
use crate::mathcore::{Rng, SpdMatrix};
use crate::ocp::{inflated_probability, OcpSpec, TighteningMode, DEFAULT_SCENARIOS};
use crate::system::{random_system_with_noise, GaussianBelief, LinearSystem};

/// Where the data-generating system comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemSource {
    Inline(LinearSystem),
    Random {
        n: usize,
        m: usize,
        q: usize,
        spectral_radius: f64,
        /// Diagonal entries of `Σ_w` (one value repeated if length 1).
        sigma_w: Vec<f64>,
        #[serde(default)]
        sigma_eps: Vec<f64>,
        seed: u64,
    },
}

fn expand(values: &[f64], dim: usize, what: &str) -> Result<SpdMatrix> {
    let diag: Vec<f64> = match values.len() {
        0 => vec![0.0; dim],
        1 => vec![values[0]; dim],
        l if l == dim => values.to_vec(),
        l => return Err(Error::Config(format!("{what} has {l} entries, expected 1 or {dim}"))),
    };
    SpdMatrix::from_diagonal(&diag)
}

impl SystemSource {
    pub fn resolve(&self) -> Result<LinearSystem> {
        match self {
            SystemSource::Inline(sys) => {
                sys.validate()?;
                Ok(sys.clone())
            }
            SystemSource::Random { n, m, q, spectral_radius, sigma_w, sigma_eps, seed } => {
                if !(*spectral_radius > 0.0) {
                    return Err(Error::Config("spectral_radius must be positive".into()));
                }
                let mut rng = Rng::new(*seed, 0);
                let sw = expand(sigma_w, *q, "sigma_w")?;
                let se = expand(sigma_eps, *n, "sigma_eps")?;
                Ok(random_system_with_noise(*n, *m, *q, *spectral_radius, sw, se, &mut rng))
            }
        }
    }
}

fn default_input_variance() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationConfig {
    /// Data length `T`.
    pub t: usize,
    /// Largest predictor step identified; defaults to the control horizon.
    #[serde(default)]
    pub k_max: Option<usize>,
    pub delta: f64,
    #[serde(default = "default_structure")]
    pub structure: Structure,
    #[serde(default)]
    pub covariance_mode: CovarianceMode,
    #[serde(default = "default_input_variance")]
    pub input_variance: f64,
    /// Initial belief of the identification experiment (zero if absent).
    #[serde(default)]
    pub init: Option<GaussianBelief>,
    /// Replace the estimates by the true predictors with zero covariance.
    #[serde(default)]
    pub perfect_information: bool,
}

fn default_structure() -> Structure {
    Structure::Full
}

fn default_samples() -> usize {
    100_000
}

fn default_slack() -> f64 {
    0.01
}

fn default_scenarios() -> usize {
    DEFAULT_SCENARIOS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    #[serde(default = "default_samples")]
    pub samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub tightening: TighteningMode,
    /// Certification passes iff every Clopper-Pearson bound is at most
    /// `1 - p + slack`.
    #[serde(default = "default_slack")]
    pub slack: f64,
    #[serde(default = "default_scenarios")]
    pub scenarios: usize,
}

/// Sweeps run by the `compare` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    pub t_values: Vec<usize>,
    pub p_values: Vec<f64>,
    pub seeds: usize,
    pub samples: usize,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig { t_values: vec![100, 200, 400, 800], p_values: vec![0.6, 0.7, 0.8, 0.9], seeds: 5, samples: 20_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub system: SystemSource,
    pub identification: IdentificationConfig,
    pub ocp: OcpSpec,
    pub validation: ValidationConfig,
    #[serde(default)]
    pub compare: Option<CompareConfig>,
    pub output: PathBuf,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Checks everything that can be checked without running a stage.
    pub fn validate(&self) -> Result<()> {
        inflated_probability(self.ocp.p, self.identification.delta)?;
        self.ocp.validate()?;
        let k_max = self.k_max();
        if k_max < self.ocp.horizon {
            return Err(Error::Config(format!("k_max {k_max} shorter than the horizon {}", self.ocp.horizon)));
        }
        if self.identification.t == 0 {
            return Err(Error::Config("identification needs t > 0".into()));
        }
        if self.validation.samples < crate::validate::MIN_SAMPLES {
            return Err(Error::Config(format!("validation needs at least {} samples", crate::validate::MIN_SAMPLES)));
        }
        if let SystemSource::Inline(sys) = &self.system {
            if sys.n() != self.ocp.n() || sys.m() != self.ocp.m() {
                return Err(Error::Config("system and ocp dimensions differ".into()));
            }
        }
        if let SystemSource::Random { n, m, .. } = &self.system {
            if *n != self.ocp.n() || *m != self.ocp.m() {
                return Err(Error::Config("system and ocp dimensions differ".into()));
            }
        }
        Ok(())
    }

    pub fn k_max(&self) -> usize {
        self.identification.k_max.unwrap_or(self.ocp.horizon)
    }

    /// Applies command-line overrides.
    pub fn with_overrides(mut self, seed: Option<u64>, samples: Option<usize>, out: Option<PathBuf>) -> Result<Self> {
        if let Some(s) = seed {
            self.validation.seed = s;
        }
        if let Some(n) = samples {
            self.validation.samples = n;
        }
        if let Some(o) = out {
            self.output = o;
        }
        self.validate()?;
        Ok(self)
    }
}

/// Independent master seeds for the stages of one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Data = 1,
    Validation = 2,
    Scenarios = 3,
    Sweep = 4,
}

/// SplitMix64 mix of the master seed and a purpose tag, so stages never
/// share a random stream.
pub fn derive_seed(master: u64, purpose: Purpose, index: u64) -> u64 {
    let mut z = master ^ ((purpose as u64) << 56) ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
