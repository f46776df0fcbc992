//! Beran's kernel-conditional Nelson-Aalen estimator: the cumulative
//! hazard at a covariate point z0, with subjects weighted by their kernel
//! distance from z0.

use crate::data::RightCensoredSample;
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::nonparam::{CurveEstimate, CurveKind};
use crate::step::StepFunction;

/// Conditional cumulative hazard A(t | z0) with weights
/// W_i = K((z_i - z0)/b) on the first covariate: jumps are
/// sum_events W_i / sum_at_risk W_l. The reported `n` is the number of
/// subjects with positive weight; the variance process is the weighted
/// analogue sum W_i^2 dN_i / (sum W_l Y_l)^2.
pub fn beran_conditional(
    sample: &RightCensoredSample,
    z0: f64,
    bandwidth: f64,
    kernel: Kernel,
) -> Result<CurveEstimate> {
    if !z0.is_finite() {
        return Err(Error::validation(format!("covariate point must be finite, got {z0}")));
    }
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(Error::domain(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let records = sample.records();
    if records.iter().any(|r| r.covariates.is_empty()) {
        return Err(Error::validation("every record needs a covariate"));
    }
    if records.iter().any(|r| !r.covariates[0].is_finite()) {
        return Err(Error::validation("non-finite covariate"));
    }
    let weights: Vec<f64> = records
        .iter()
        .map(|r| kernel.weight((r.covariates[0] - z0) / bandwidth))
        .collect();
    let effective = weights.iter().filter(|&&w| w > 0.0).count();
    if effective == 0 {
        return Err(Error::domain(format!(
            "no subjects within bandwidth {bandwidth} of z0 = {z0}"
        )));
    }

    let mut times = Vec::new();
    let mut hazard_jumps = Vec::new();
    let mut var_jumps = Vec::new();
    let mut last_observed = f64::NEG_INFINITY;
    for (r, &w) in records.iter().zip(&weights) {
        if w > 0.0 && r.time > last_observed {
            last_observed = r.time;
        }
    }
    for t in sample.distinct_event_times() {
        let mut num = 0.0;
        let mut num_sq = 0.0;
        let mut den = 0.0;
        for (r, &w) in records.iter().zip(&weights) {
            if r.time >= t {
                den += w;
            }
            if r.time == t && r.status == 1 {
                num += w;
                num_sq += w * w;
            }
        }
        if num > 0.0 {
            // den >= num because every event subject is in its own risk set
            times.push(t);
            hazard_jumps.push(num / den);
            var_jumps.push(num_sq / (den * den));
        }
    }
    let estimate = StepFunction::new(0.0, times.clone(), hazard_jumps)?;
    let variance = StepFunction::new(0.0, times, var_jumps)?;
    Ok(CurveEstimate {
        kind: CurveKind::CumulativeHazard,
        n: effective,
        sigma2: variance.clone(),
        estimate,
        variance,
        last_observed,
        exhausted_at: None,
    })
}
