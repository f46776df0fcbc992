//! Regression models for censored data: Cox proportional hazards with the
//! Breslow baseline, Aalen's additive hazards model, the Buckley-James
//! accelerated-failure-time estimator, Beran's kernel-conditional hazard,
//! and fully parametric likelihood fits.

mod additive;
mod beran;
mod bj;
mod cox;
mod parametric;

pub use additive::{aalen_additive, aalen_smoothed_coefficients, AdditiveFit};
pub use beran::beran_conditional;
pub use bj::{buckley_james, BJFit, BJOptions};
pub use cox::{cox_fit, cox_score_test, smoothed_baseline, CoxFit, CoxOptions};
pub use parametric::{parametric_fit, Family, ParametricFit, ParametricOptions};

use crate::data::RightCensoredSample;
use crate::error::{Error, Result};

/// Covariate dimension shared by every record; errors on mismatch or
/// non-finite entries.
fn covariate_dim(sample: &RightCensoredSample) -> Result<usize> {
    let records = sample.records();
    let d = records[0].covariates.len();
    for (i, r) in records.iter().enumerate() {
        if r.covariates.len() != d {
            return Err(Error::validation(format!(
                "record {i} has {} covariates, expected {d}",
                r.covariates.len()
            )));
        }
        if r.covariates.iter().any(|z| !z.is_finite()) {
            return Err(Error::validation(format!("record {i} has a non-finite covariate")));
        }
    }
    Ok(d)
}

/// Errors unless at least one covariate column varies and none is constant.
fn require_varying_columns(sample: &RightCensoredSample, d: usize) -> Result<()> {
    let records = sample.records();
    for j in 0..d {
        let first = records[0].covariates[j];
        if records.iter().all(|r| r.covariates[j] == first) {
            return Err(Error::validation(format!(
                "covariate {j} is constant; its coefficient is not identifiable"
            )));
        }
    }
    Ok(())
}
