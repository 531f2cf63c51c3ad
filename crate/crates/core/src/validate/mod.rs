//! Monte Carlo certification of chance constraints, equivalence of the two
//! nominal formulations, identification coverage and conservatism.

pub mod binomial;
pub mod conservatism;
pub mod coverage;
pub mod equivalence;
pub mod violation;

pub use binomial::{binomial_band, binomial_cdf, clopper_pearson_lower, clopper_pearson_upper};
pub use conservatism::{conservatism_report, ConservatismReport, ConservatismRow};
pub use coverage::{coverage_experiment, CoverageConfig, CoverageEstimator, CoverageRow, CoverageSummary};
pub use equivalence::{equivalence_against, equivalence_check, EquivalenceReport};
pub use violation::{
    estimate_violation, SamplingMode, ViolationReport, ViolationRow, ViolationSource, MIN_SAMPLES, REPORT_CONFIDENCE,
};
