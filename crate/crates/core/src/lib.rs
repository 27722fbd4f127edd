//! Immortal-time bias laboratory.
//!
//! * [`dag`]: time-varying causal DAGs, d-separation and path classification.
//! * [`design_library`]: the canonical DAG for each study-design descriptor and
//!   the path claims each one must satisfy.
//! * [`cohort`]: discrete-time cohort simulator with exact and Monte Carlo
//!   truth oracles.
//! * [`study_designs`]: compilers from raw cohorts to person-period datasets.
//! * [`estimators`]: rate ratios, discrete-time hazard models and cumulative
//!   incidence.

pub mod cohort;
pub mod dag;
pub mod design_library;
pub mod estimators;
pub mod study_designs;
