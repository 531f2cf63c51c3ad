//! Chance-constrained optimal control programs: the nominal QPs from a
//! state-space or multi-step model, the robust SOCP from identified
//! predictors, and a sampled-scenario min-max baseline.

pub mod minmax;
pub mod nominal;
pub mod robust;
pub mod spec;
pub mod tightening;

pub use crate::solver::ConicProgram;
pub use minmax::{formulate_minmax_statespace, ScenarioProgram, DEFAULT_SCENARIOS};
pub use nominal::{build_nominal_qp_multistep, build_nominal_qp_statespace, Prediction};
pub use robust::build_robust_socp_multistep;
pub use spec::{InputSet, OcpSpec};
pub use tightening::{
    inflated_probability, spread_terms, tightening_constant_exact, tightening_constant_upper, SpreadTerms,
    TighteningEntry, TighteningMode, TighteningTable, StepUncertainty,
};
