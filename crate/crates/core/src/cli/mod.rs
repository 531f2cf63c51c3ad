//! Configuration-driven experiment runner behind the `mspc` binary.

pub mod compare;
pub mod config;
pub mod pipeline;

pub use compare::{run_compare, CompareReport};
pub use config::{derive_seed, ExperimentConfig, Purpose};
pub use pipeline::{run_pipeline, run_until, true_cost, validate_inputs, Certification, Validation, Depth, Experiment, ExperimentReport, PipelineOutcome};
