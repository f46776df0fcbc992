//! Survival analysis built on counting processes.
//!
//! The crate provides nonparametric estimators (Nelson-Aalen, Kaplan-Meier,
//! Aalen-Johansen, Turnbull, Dabrowska), weighted log-rank tests, regression
//! models (Cox, additive hazards, Buckley-James, Beran, parametric),
//! martingale-based variances with confidence intervals and simultaneous
//! bands, model diagnostics, and a deterministic simulation lab used for
//! calibration and oracle testing.
//!
//! Numerical conventions shared by all modules: 0/0 = 0 for hazard
//! increments, observation times compared exactly as f64, tied events
//! aggregated into single jumps, and censorings ordered after events at the
//! same time.

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod kernel;
pub mod logrank;
pub mod multistate;
pub mod npmle;
pub mod nonparam;
pub mod regress;
pub mod simlab;
pub mod stats;
pub mod step;
pub mod threads;

pub use data::{
    counting_and_risk, BivariatePair, IntervalCensoredRecord, IntervalCensoredSample,
    MultiStateHistory, RightCensoredRecord, RightCensoredSample, SubjectPath,
};
pub use error::{Error, Result};
pub use kernel::Kernel;
pub use step::{
    product_integral_matrix, product_integral_scalar, MatrixStepFunction, StepFunction,
};
