//! Model checking for proportional hazards fits: martingale, deviance, and
//! Cox-Snell residuals, plus Arjas (total time on test) and Andersen plot
//! data.
//!
//! All quantities are built from the fitted baseline cumulative hazard, so
//! the accounting identity sum(martingale residuals) = 0 holds by
//! construction up to rounding.

use crate::data::{RightCensoredRecord, RightCensoredSample};
use crate::error::{Error, Result};
use crate::nonparam::{nelson_aalen, CurveEstimate};
use crate::regress::{cox_fit, CoxFit, CoxOptions};
use crate::step::StepFunction;
use serde::Serialize;

/// Per-subject residuals from a proportional hazards fit.
///
/// Order matches the sample's record order. The Cox-Snell residual is the
/// fitted cumulative hazard at the subject's time, the martingale residual
/// is the event indicator minus it, and the deviance residual is the
/// variance-stabilizing transform of the martingale residual.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualSet {
    pub martingale: Vec<f64>,
    pub deviance: Vec<f64>,
    pub cox_snell: Vec<f64>,
    /// Event indicators, copied from the sample.
    pub events: Vec<u8>,
    /// Coefficients of the fit the residuals were computed under.
    pub beta: Vec<f64>,
}

fn check_fit(fit: &CoxFit, sample: &RightCensoredSample) -> Result<()> {
    if !fit.converged {
        return Err(Error::validation("residuals need a converged fit"));
    }
    if fit.beta.len() != sample.n_covariates() {
        return Err(Error::validation(format!(
            "fit has {} coefficients but the sample has {} covariates",
            fit.beta.len(),
            sample.n_covariates()
        )));
    }
    Ok(())
}

fn linear_predictor(beta: &[f64], record: &RightCensoredRecord) -> f64 {
    beta.iter().zip(&record.covariates).map(|(b, z)| b * z).sum()
}

/// Martingale residuals D_i - exp(beta'Z_i) A0(T_i) at the fitted baseline,
/// together with the Cox-Snell and deviance residuals derived from them.
///
/// Their sum is zero up to rounding: the Breslow increments are built so
/// that the at-risk exponential mass at each event time integrates to the
/// event count.
pub fn martingale_residuals(fit: &CoxFit, sample: &RightCensoredSample) -> Result<ResidualSet> {
    check_fit(fit, sample)?;
    let mut martingale = Vec::with_capacity(sample.n());
    let mut cox_snell = Vec::with_capacity(sample.n());
    let mut events = Vec::with_capacity(sample.n());
    for r in sample.records() {
        let risk_score = linear_predictor(&fit.beta, r).exp();
        let rhat = risk_score * fit.breslow.value(r.time);
        cox_snell.push(rhat);
        martingale.push(r.status as f64 - rhat);
        events.push(r.status);
    }
    let deviance = deviance_residuals(&martingale, &events);
    Ok(ResidualSet {
        martingale,
        deviance,
        cox_snell,
        events,
        beta: fit.beta.clone(),
    })
}

/// Deviance transform sign(M) * sqrt(-2(M + D log(D - M))) with the
/// convention 0 log 0 = 0. The argument of the square root is nonnegative
/// whenever M <= D; rounding noise near zero is clamped.
pub fn deviance_residuals(martingale: &[f64], events: &[u8]) -> Vec<f64> {
    martingale
        .iter()
        .zip(events)
        .map(|(&m, &d)| {
            let d = d as f64;
            let dlog = if d == 0.0 { 0.0 } else { d * (d - m).ln() };
            let inside = -2.0 * (m + dlog);
            m.signum() * inside.max(0.0).sqrt()
        })
        .collect()
}

/// Cox-Snell residuals packaged for plotting: the residual sample with its
/// event indicators, the Nelson-Aalen curve computed on it, and the
/// diagnostic slope. Under a well-specified model the residuals behave
/// like censored unit exponentials, so the curve tracks the 45 degree line
/// and the slope is near one.
#[derive(Debug, Clone, Serialize)]
pub struct CoxSnellPlot {
    /// The residuals as a right-censored sample (time = residual).
    pub residuals: RightCensoredSample,
    /// Nelson-Aalen cumulative hazard of the residual sample.
    pub curve: CurveEstimate,
    /// Curve value at the 90th percentile of the residuals divided by that
    /// percentile; NaN when the percentile is zero.
    pub slope: f64,
}

pub fn cox_snell(fit: &CoxFit, sample: &RightCensoredSample) -> Result<CoxSnellPlot> {
    let set = martingale_residuals(fit, sample)?;
    let residuals = RightCensoredSample::from_times(&set.cox_snell, &set.events)?;
    let curve = nelson_aalen(&residuals)?;

    let mut sorted = set.cox_snell.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((0.9 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    let q = sorted[rank - 1];
    let slope = if q > 0.0 { curve.estimate.value(q) / q } else { f64::NAN };

    Ok(CoxSnellPlot { residuals, curve, slope })
}

/// One stratum of an Arjas plot: the cumulative expected event count at
/// each ordered event time in the stratum. Plotting `expected` against the
/// rank 1..=len gives the total time on test display; under the model it
/// tracks the unit-slope line.
#[derive(Debug, Clone, Serialize)]
pub struct ArjasStratum {
    pub label: i64,
    /// Ordered event times in the stratum (one entry per event, ties repeat).
    pub event_times: Vec<f64>,
    /// Expected events integrated through each entry of `event_times`.
    pub expected: Vec<f64>,
}

/// Arjas plot data: for each stratum, the expected number of events
/// accumulated through its m-th observed event. The expectation allocates
/// every pooled event to strata proportionally to their share of the
/// at-risk exponential mass, so summing the final entries over strata
/// recovers the total event count.
///
/// `strata` assigns a label to each record in sample order; labels are
/// reported ascending. A stratum whose members have no events yields empty
/// sequences.
pub fn arjas_plot_data(
    fit: &CoxFit,
    sample: &RightCensoredSample,
    strata: &[i64],
) -> Result<Vec<ArjasStratum>> {
    let records = sample.records();
    if fit.beta.len() != sample.n_covariates() {
        return Err(Error::validation(format!(
            "fit has {} coefficients but the sample has {} covariates",
            fit.beta.len(),
            sample.n_covariates()
        )));
    }
    if strata.len() != records.len() {
        return Err(Error::validation(format!(
            "{} stratum labels for {} records",
            strata.len(),
            records.len()
        )));
    }

    let mut labels: Vec<i64> = strata.to_vec();
    labels.sort_unstable();
    labels.dedup();
    let h = labels.len();
    let stratum_of: Vec<usize> =
        strata.iter().map(|l| labels.binary_search(l).unwrap()).collect();

    // risk weights shifted by the max linear predictor; every p_i is a
    // ratio of these, so the shift cancels and prevents overflow
    let eta: Vec<f64> = records.iter().map(|r| linear_predictor(&fit.beta, r)).collect();
    let shift = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = eta.iter().map(|e| (e - shift).exp()).collect();

    let times = sample.distinct_event_times();
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| records[b].time.partial_cmp(&records[a].time).unwrap());

    // sweep event times descending so the at-risk mass per stratum grows
    // by insertion only
    let mut pooled = 0.0;
    let mut per_stratum = vec![0.0; h];
    let mut next = 0;
    let mut increments = vec![vec![0.0; h]; times.len()];
    for ti in (0..times.len()).rev() {
        let t = times[ti];
        while next < order.len() && records[order[next]].time >= t {
            let i = order[next];
            pooled += weights[i];
            per_stratum[stratum_of[i]] += weights[i];
            next += 1;
        }
        let d_total = sample.events_at(t) as f64;
        for g in 0..h {
            increments[ti][g] = d_total * per_stratum[g] / pooled;
        }
    }

    // per-stratum event counts at each distinct event time
    let mut counts = vec![vec![0usize; h]; times.len()];
    for (i, r) in records.iter().enumerate() {
        if r.status == 1 {
            let ti = times.partition_point(|&u| u < r.time);
            counts[ti][stratum_of[i]] += 1;
        }
    }

    let mut out: Vec<ArjasStratum> = labels
        .iter()
        .map(|&label| ArjasStratum { label, event_times: Vec::new(), expected: Vec::new() })
        .collect();
    let mut cum = vec![0.0; h];
    for (ti, &t) in times.iter().enumerate() {
        for g in 0..h {
            cum[g] += increments[ti][g];
            for _ in 0..counts[ti][g] {
                out[g].event_times.push(t);
                out[g].expected.push(cum[g]);
            }
        }
    }
    Ok(out)
}

/// Andersen plot data for a binary stratifying covariate: per-stratum
/// baseline cumulative hazards from independent fits on the remaining
/// covariates, paired at pooled event times.
#[derive(Debug, Clone, Serialize)]
pub struct AndersenPlot {
    /// The two values of the stratifying covariate, ascending.
    pub levels: (f64, f64),
    /// Baseline cumulative hazards for the lower and higher level.
    pub baselines: (StepFunction, StepFunction),
    /// Pooled event times of both strata, truncated to the range where
    /// both strata are still observed.
    pub times: Vec<f64>,
    /// (lower-level baseline, higher-level baseline) at each pooled time.
    pub pairs: Vec<(f64, f64)>,
    /// Natural logs of the pairs, kept where both coordinates are positive.
    pub log_pairs: Vec<(f64, f64)>,
    /// Least-squares slope through the origin of the higher-level baseline
    /// on the lower-level one; near the hazard ratio under proportionality.
    pub slope: f64,
}

fn tag_stratum(err: Error, level: f64) -> Error {
    match err {
        Error::Validation(m) => Error::Validation(format!("stratum {level}: {m}")),
        Error::Domain(m) => Error::Domain(format!("stratum {level}: {m}")),
        Error::Numerical(m) => Error::Numerical(format!("stratum {level}: {m}")),
        Error::NonConvergence(m) => Error::NonConvergence(format!("stratum {level}: {m}")),
        other => other,
    }
}

/// Splits the sample on the two values of covariate column `strata_col`,
/// fits a proportional hazards model per stratum on the remaining columns,
/// and pairs the baseline cumulative hazards at pooled event times. With no
/// remaining columns the per-stratum baselines are Nelson-Aalen estimates.
///
/// The pairs stop at the earlier of the two strata's last observed times;
/// beyond it one curve would be flat for lack of data rather than lack of
/// events, which biases the slope.
pub fn andersen_plot_data(
    sample: &RightCensoredSample,
    strata_col: usize,
    options: CoxOptions,
) -> Result<AndersenPlot> {
    let records = sample.records();
    let d = sample.n_covariates();
    if strata_col >= d {
        return Err(Error::validation(format!(
            "stratifying column {strata_col} is out of range for {d} covariates"
        )));
    }
    let mut levels: Vec<f64> = records.iter().map(|r| r.covariates[strata_col]).collect();
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    levels.dedup();
    if levels.len() != 2 {
        return Err(Error::validation(format!(
            "stratifying covariate must take exactly 2 values, found {}",
            levels.len()
        )));
    }
    let (lo, hi) = (levels[0], levels[1]);

    let stratum_sample = |level: f64| -> Result<RightCensoredSample> {
        RightCensoredSample::new(
            records
                .iter()
                .filter(|r| r.covariates[strata_col] == level)
                .map(|r| RightCensoredRecord {
                    time: r.time,
                    status: r.status,
                    group: r.group,
                    covariates: r
                        .covariates
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != strata_col)
                        .map(|(_, &z)| z)
                        .collect(),
                })
                .collect(),
        )
    };
    let fit_stratum = |level: f64| -> Result<(CoxFit, f64)> {
        let stratum = stratum_sample(level)?;
        if stratum.n_events() == 0 {
            return Err(Error::validation(format!("stratum {level}: no events")));
        }
        let last_observed = stratum
            .records()
            .iter()
            .map(|r| r.time)
            .fold(f64::NEG_INFINITY, f64::max);
        let fit = cox_fit(&stratum, options).map_err(|e| tag_stratum(e, level))?;
        Ok((fit, last_observed))
    };
    let (fit_lo, seen_lo) = fit_stratum(lo)?;
    let (fit_hi, seen_hi) = fit_stratum(hi)?;

    let horizon = seen_lo.min(seen_hi);
    let mut times: Vec<f64> = fit_lo
        .breslow
        .jump_times()
        .iter()
        .chain(fit_hi.breslow.jump_times())
        .cloned()
        .filter(|&t| t <= horizon)
        .collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup();

    let pairs: Vec<(f64, f64)> = times
        .iter()
        .map(|&t| (fit_lo.breslow.value(t), fit_hi.breslow.value(t)))
        .collect();
    let log_pairs: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let slope = slope_through_origin(&pairs)?;

    Ok(AndersenPlot {
        levels: (lo, hi),
        baselines: (fit_lo.breslow, fit_hi.breslow),
        times,
        pairs,
        log_pairs,
        slope,
    })
}

/// Least-squares slope of y on x with the intercept pinned at zero.
pub fn slope_through_origin(points: &[(f64, f64)]) -> Result<f64> {
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in points {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::validation(format!("non-finite point ({x}, {y})")));
        }
        sxx += x * x;
        sxy += x * y;
    }
    if !(sxx > 0.0) {
        return Err(Error::domain("slope through origin needs a nonzero abscissa"));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::RightCensoredRecord;
    use crate::stats::normal_quantile;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn with_covariates(entries: &[(f64, u8, &[f64])]) -> RightCensoredSample {
        RightCensoredSample::new(
            entries
                .iter()
                .map(|&(time, status, z)| RightCensoredRecord {
                    time,
                    status,
                    group: None,
                    covariates: z.to_vec(),
                })
                .collect(),
        )
        .unwrap()
    }

    fn default_fit(sample: &RightCensoredSample) -> CoxFit {
        cox_fit(sample, CoxOptions::default()).unwrap()
    }

    #[test]
    fn null_model_residuals_use_nelson_aalen() {
        let sample = RightCensoredSample::from_times(
            &[1.0, 2.0, 2.0, 3.0, 4.0, 5.0],
            &[1, 1, 0, 1, 1, 0],
        )
        .unwrap();
        let fit = default_fit(&sample);
        let set = martingale_residuals(&fit, &sample).unwrap();
        let na = nelson_aalen(&sample).unwrap();
        for (r, m) in sample.records().iter().zip(&set.martingale) {
            assert_eq!(*m, r.status as f64 - na.estimate.value(r.time));
        }
    }

    #[test]
    fn censored_at_zero_has_zero_residual() {
        let sample = with_covariates(&[
            (0.0, 0, &[0.7]),
            (1.0, 1, &[0.3]),
            (2.0, 1, &[1.1]),
            (3.0, 1, &[-0.4]),
            (4.0, 0, &[0.9]),
        ]);
        let fit = default_fit(&sample);
        let set = martingale_residuals(&fit, &sample).unwrap();
        assert_eq!(set.martingale[0], 0.0);
        assert_eq!(set.cox_snell[0], 0.0);
        assert_eq!(set.deviance[0], 0.0);
    }

    #[test]
    fn residuals_match_hand_breslow_computation() {
        // n = 4 with risk sets {1,2,3,4}, {2,3,4}, {4}: the Breslow
        // increments and residuals are recomputed from scratch below
        let z = [0.0, 1.0, 0.0, 0.5];
        let sample = with_covariates(&[
            (1.0, 1, &z[0..1]),
            (2.0, 1, &z[1..2]),
            (3.0, 0, &z[2..3]),
            (4.0, 1, &z[3..4]),
        ]);
        let fit = default_fit(&sample);
        let b = fit.beta[0];
        let w: Vec<f64> = z.iter().map(|&zi| (b * zi).exp()).collect();

        let da1 = 1.0 / (w[0] + w[1] + w[2] + w[3]);
        let da2 = 1.0 / (w[1] + w[2] + w[3]);
        let da4 = 1.0 / w[3];
        let a0 = [da1, da1 + da2, da1 + da2, da1 + da2 + da4];
        let expected: Vec<f64> = (0..4)
            .map(|i| [1.0, 1.0, 0.0, 1.0][i] - w[i] * a0[i])
            .collect();

        let set = martingale_residuals(&fit, &sample).unwrap();
        for (got, want) in set.martingale.iter().zip(&expected) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
        let total: f64 = set.martingale.iter().sum();
        assert!(total.abs() < 1e-8);
    }

    #[test]
    fn residual_sum_is_zero_and_deviance_signs_agree() {
        let sample = with_covariates(&[
            (1.0, 1, &[0.3, -1.0]),
            (2.0, 1, &[1.1, 0.5]),
            (2.5, 0, &[-0.4, 0.2]),
            (3.0, 1, &[0.9, -0.3]),
            (4.0, 1, &[-1.2, 1.4]),
            (5.0, 0, &[0.1, 0.8]),
        ]);
        let fit = default_fit(&sample);
        let set = martingale_residuals(&fit, &sample).unwrap();
        let total: f64 = set.martingale.iter().sum();
        assert!(total.abs() < 1e-8, "residual sum {total}");
        for (m, dev) in set.martingale.iter().zip(&set.deviance) {
            assert!(
                m.signum() * dev.signum() >= 0.0 || *dev == 0.0,
                "martingale {m} vs deviance {dev}"
            );
        }
    }

    #[test]
    fn unconverged_fit_is_rejected() {
        let sample = with_covariates(&[(1.0, 1, &[0.3]), (2.0, 1, &[0.9]), (3.0, 0, &[0.1])]);
        let mut fit = default_fit(&sample);
        fit.converged = false;
        let err = martingale_residuals(&fit, &sample).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn deviance_closed_form_at_half() {
        // D = 1, M = 1/2: sign is positive and the radicand is
        // -2(1/2 + log(1/2))
        let dev = deviance_residuals(&[0.5], &[1]);
        assert_eq!(dev[0], (-2.0 * (0.5 + 0.5_f64.ln())).sqrt());
    }

    #[test]
    fn deviance_is_zero_at_zero_and_monotone() {
        assert_eq!(deviance_residuals(&[0.0], &[1])[0], 0.0);
        assert_eq!(deviance_residuals(&[0.0], &[0])[0], 0.0);
        for d in [0u8, 1u8] {
            let top = if d == 1 { 99 } else { 0 };
            let grid: Vec<f64> = (-300..=top).map(|k| k as f64 / 100.0).collect();
            let devs = deviance_residuals(&grid, &vec![d; grid.len()]);
            for w in devs.windows(2) {
                assert!(w[1] >= w[0], "not monotone: {} then {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn cox_snell_single_subject_jumps_to_one() {
        let sample = RightCensoredSample::from_times(&[3.0], &[1]).unwrap();
        let fit = default_fit(&sample);
        let plot = cox_snell(&fit, &sample).unwrap();
        assert_eq!(plot.curve.estimate.jump_times(), &[1.0]);
        assert_eq!(plot.curve.estimate.jump_sizes(), &[1.0]);
        assert_eq!(plot.slope, 1.0);
    }

    #[test]
    fn cox_snell_null_model_all_events_is_the_diagonal() {
        // with every subject an event, the residuals are the cumulative
        // hazard evaluated at the order statistics, so the residual curve
        // interpolates the 45 degree line at its own jumps
        let mut rng = ChaCha8Rng::seed_from_u64(61_006);
        let n = 500;
        let times: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
        let sample = RightCensoredSample::from_times(&times, &vec![1; n]).unwrap();
        let fit = default_fit(&sample);
        let plot = cox_snell(&fit, &sample).unwrap();

        let na = nelson_aalen(&sample).unwrap();
        for (r, rhat) in sample.records().iter().zip(
            martingale_residuals(&fit, &sample).unwrap().cox_snell.iter(),
        ) {
            assert_eq!(*rhat, na.estimate.value(r.time));
        }
        let sup = plot
            .curve
            .estimate
            .jump_times()
            .iter()
            .map(|&r| (plot.curve.estimate.value(r) - r).abs())
            .fold(0.0, f64::max);
        assert!(sup <= 0.25, "sup deviation {sup}");
    }

    #[test]
    fn cox_snell_slope_is_near_one_when_well_specified() {
        let mut rng = ChaCha8Rng::seed_from_u64(62_007);
        let n = 1000;
        let mut entries = Vec::with_capacity(n);
        for _ in 0..n {
            let z = normal_quantile(rng.gen()).unwrap();
            let t = -(1.0 - rng.gen::<f64>()).ln() * (-0.7 * z).exp();
            let c = -(1.0 - rng.gen::<f64>()).ln() / 0.3;
            entries.push((t.min(c), u8::from(t <= c), vec![z]));
        }
        let views: Vec<(f64, u8, &[f64])> =
            entries.iter().map(|(t, s, z)| (*t, *s, z.as_slice())).collect();
        let sample = with_covariates(&views);
        let plot = cox_snell(&default_fit(&sample), &sample).unwrap();
        assert!(
            (0.85..=1.15).contains(&plot.slope),
            "diagnostic slope {}",
            plot.slope
        );
    }

    #[test]
    fn cox_snell_at_the_last_event_is_total_breslow_mass() {
        let sample = with_covariates(&[
            (1.0, 1, &[0.4]),
            (2.0, 0, &[-0.2]),
            (3.0, 1, &[0.8]),
            (4.0, 1, &[0.1]),
        ]);
        let fit = default_fit(&sample);
        let set = martingale_residuals(&fit, &sample).unwrap();
        let risk_score = (fit.beta[0] * 0.1).exp();
        assert_eq!(set.cox_snell[3], risk_score * fit.breslow.final_value());
    }

    #[test]
    fn arjas_single_stratum_accounts_for_every_event() {
        let sample = with_covariates(&[
            (1.0, 1, &[0.3]),
            (2.0, 1, &[1.1]),
            (2.5, 0, &[-0.4]),
            (3.0, 1, &[0.9]),
            (4.0, 1, &[-1.2]),
            (5.0, 0, &[0.1]),
        ]);
        let fit = default_fit(&sample);
        let strata = vec![7_i64; sample.n()];
        let out = arjas_plot_data(&fit, &sample, &strata).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].label, 7);
        assert_eq!(out[0].expected.len(), sample.n_events());
        let last = *out[0].expected.last().unwrap();
        assert!((last - sample.n_events() as f64).abs() < 1e-8);
    }

    #[test]
    fn arjas_eventless_stratum_is_empty() {
        let sample = with_covariates(&[
            (1.0, 1, &[0.3]),
            (2.0, 1, &[1.1]),
            (3.0, 0, &[0.9]),
            (4.0, 0, &[-0.2]),
        ]);
        let fit = default_fit(&sample);
        let out = arjas_plot_data(&fit, &sample, &[0, 0, 1, 1]).unwrap();
        assert_eq!(out[0].event_times, vec![1.0, 2.0]);
        assert!(out[1].event_times.is_empty());
        assert!(out[1].expected.is_empty());
    }

    #[test]
    fn arjas_strata_on_the_model_covariate_balance_exactly() {
        // stratifying on a binary model covariate makes the final
        // observed-minus-expected the per-group score equation, which the
        // converged fit drives to zero
        let mut rng = ChaCha8Rng::seed_from_u64(63_008);
        let n = 120;
        let mut entries = Vec::with_capacity(n);
        let mut strata = Vec::with_capacity(n);
        for _ in 0..n {
            let z = f64::from(rng.gen::<f64>() < 0.5);
            let t = -(1.0 - rng.gen::<f64>()).ln() * (-0.7 * z).exp();
            let c = -(1.0 - rng.gen::<f64>()).ln() / 0.25;
            entries.push((t.min(c), u8::from(t <= c), vec![z]));
            strata.push(z as i64);
        }
        let views: Vec<(f64, u8, &[f64])> =
            entries.iter().map(|(t, s, z)| (*t, *s, z.as_slice())).collect();
        let sample = with_covariates(&views);
        let fit = default_fit(&sample);
        let out = arjas_plot_data(&fit, &sample, &strata).unwrap();
        for stratum in &out {
            let observed = stratum.expected.len() as f64;
            let expected = *stratum.expected.last().unwrap();
            assert!(
                (observed - expected).abs() < 1e-6,
                "stratum {}: O {} vs E {}",
                stratum.label,
                observed,
                expected
            );
        }
    }

    #[test]
    fn arjas_paths_stay_near_the_diagonal_when_well_specified() {
        // scaled sup |m - E(X_m)| behaves like a bridge sup; 3 standard
        // units is a ~99.7% envelope per stratum
        let mut rng = ChaCha8Rng::seed_from_u64(64_009);
        let mut passes = 0;
        let reps = 100;
        for _ in 0..reps {
            let n = 200;
            let mut entries = Vec::with_capacity(n);
            let mut strata = Vec::with_capacity(n);
            for _ in 0..n {
                let z = f64::from(rng.gen::<f64>() < 0.5);
                let t = -(1.0 - rng.gen::<f64>()).ln() * (-0.7 * z).exp();
                let c = -(1.0 - rng.gen::<f64>()).ln() / 0.25;
                entries.push((t.min(c), u8::from(t <= c), vec![z]));
                strata.push(z as i64);
            }
            let views: Vec<(f64, u8, &[f64])> =
                entries.iter().map(|(t, s, z)| (*t, *s, z.as_slice())).collect();
            let sample = with_covariates(&views);
            let fit = default_fit(&sample);
            let out = arjas_plot_data(&fit, &sample, &strata).unwrap();
            let ok = out.iter().all(|stratum| {
                let total = stratum.expected.len() as f64;
                if total == 0.0 {
                    return true;
                }
                let sup = stratum
                    .expected
                    .iter()
                    .enumerate()
                    .map(|(i, e)| ((i + 1) as f64 - e).abs())
                    .fold(0.0, f64::max);
                sup / total.sqrt() <= 3.0
            });
            passes += usize::from(ok);
        }
        assert!(passes >= 90, "only {passes}/{reps} reps inside the envelope");
    }

    #[test]
    fn andersen_without_remaining_covariates_reduces_to_nelson_aalen() {
        let entries = [
            (1.0, 1, 0.0),
            (2.0, 1, 0.0),
            (3.0, 0, 0.0),
            (1.5, 1, 1.0),
            (2.5, 1, 1.0),
            (4.0, 0, 1.0),
        ];
        let views: Vec<(f64, u8, Vec<f64>)> =
            entries.iter().map(|&(t, s, z)| (t, s, vec![z])).collect();
        let slices: Vec<(f64, u8, &[f64])> =
            views.iter().map(|(t, s, z)| (*t, *s, z.as_slice())).collect();
        let sample = with_covariates(&slices);
        let plot = andersen_plot_data(&sample, 0, CoxOptions::default()).unwrap();

        for (level, baseline) in [(0.0, &plot.baselines.0), (1.0, &plot.baselines.1)] {
            let times: Vec<f64> = entries
                .iter()
                .filter(|e| e.2 == level)
                .map(|e| e.0)
                .collect();
            let status: Vec<u8> = entries
                .iter()
                .filter(|e| e.2 == level)
                .map(|e| e.1)
                .collect();
            let na =
                nelson_aalen(&RightCensoredSample::from_times(&times, &status).unwrap()).unwrap();
            assert_eq!(baseline.jump_times(), na.estimate.jump_times());
            assert_eq!(baseline.jump_sizes(), na.estimate.jump_sizes());
        }
        // pooled event times stop at the shorter stratum's last observation
        assert_eq!(plot.times, vec![1.0, 1.5, 2.0, 2.5]);
    }

    fn proportional_sample(
        rng: &mut ChaCha8Rng,
        n: usize,
        log_ratio: f64,
    ) -> RightCensoredSample {
        let mut records = Vec::with_capacity(n);
        for i in 0..n {
            let z1 = f64::from(i % 2 == 0);
            let z2 = rng.gen::<f64>() * 2.0 - 1.0;
            let rate = (log_ratio * z1 + 0.5 * z2).exp();
            let t = -(1.0 - rng.gen::<f64>()).ln() / rate;
            let c = -(1.0 - rng.gen::<f64>()).ln() / 0.25;
            records.push(RightCensoredRecord {
                time: t.min(c),
                status: u8::from(t <= c),
                group: None,
                covariates: vec![z1, z2],
            });
        }
        RightCensoredSample::new(records).unwrap()
    }

    #[test]
    fn andersen_slope_recovers_the_hazard_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(65_010);
        let sample = proportional_sample(&mut rng, 1000, 0.7);
        let plot = andersen_plot_data(&sample, 0, CoxOptions::default()).unwrap();
        let ratio = 0.7_f64.exp();
        assert!(
            (0.85 * ratio..=1.15 * ratio).contains(&plot.slope),
            "slope {} vs ratio {}",
            plot.slope,
            ratio
        );
        assert!(plot.log_pairs.iter().all(|(x, y)| x.is_finite() && y.is_finite()));
    }

    #[test]
    fn andersen_identical_strata_have_unit_slope() {
        let mut rng = ChaCha8Rng::seed_from_u64(66_011);
        let sample = proportional_sample(&mut rng, 1000, 0.0);
        let plot = andersen_plot_data(&sample, 0, CoxOptions::default()).unwrap();
        assert!((plot.slope - 1.0).abs() <= 0.15, "slope {}", plot.slope);
    }

    #[test]
    fn andersen_rejects_bad_strata() {
        let three_levels = with_covariates(&[
            (1.0, 1, &[0.0]),
            (2.0, 1, &[1.0]),
            (3.0, 1, &[2.0]),
        ]);
        let err = andersen_plot_data(&three_levels, 0, CoxOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");

        let eventless = with_covariates(&[
            (1.0, 1, &[0.0]),
            (2.0, 1, &[0.0]),
            (3.0, 0, &[1.0]),
        ]);
        let err = andersen_plot_data(&eventless, 0, CoxOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("stratum 1")), "{err}");
    }

    #[test]
    fn andersen_names_the_failing_stratum() {
        // the high stratum separates on its remaining covariate, so its
        // fit diverges and the error says which stratum did
        let sample = with_covariates(&[
            (1.0, 1, &[0.0, 0.3]),
            (2.0, 1, &[0.0, -0.1]),
            (3.0, 1, &[0.0, 0.2]),
            (1.0, 1, &[1.0, 0.1]),
            (2.0, 1, &[1.0, 0.1]),
            (3.0, 1, &[1.0, 0.0]),
            (4.0, 1, &[1.0, 0.0]),
        ]);
        let err = andersen_plot_data(&sample, 0, CoxOptions::default()).unwrap_err();
        assert!(
            matches!(err, Error::NonConvergence(ref m) if m.contains("stratum 1")),
            "{err}"
        );
    }

    #[test]
    fn slope_through_origin_on_an_exact_line() {
        let points = [(1.0, 2.0), (2.0, 4.0), (3.0, 6.0)];
        assert_eq!(slope_through_origin(&points).unwrap(), 2.0);
        let err = slope_through_origin(&[(0.0, 1.0)]).unwrap_err();
        assert!(matches!(err, Error::Domain(_)), "{err}");
    }

    proptest! {
        #[test]
        fn residual_sum_vanishes_for_any_converged_fit(
            raw in proptest::collection::vec((0.1_f64..10.0, 0..=1_u8, -1.0_f64..1.0), 5..40)
        ) {
            let views: Vec<(f64, u8, Vec<f64>)> =
                raw.iter().map(|&(t, s, z)| (t, s, vec![z])).collect();
            let slices: Vec<(f64, u8, &[f64])> =
                views.iter().map(|(t, s, z)| (*t, *s, z.as_slice())).collect();
            let sample = with_covariates(&slices);
            prop_assume!(sample.n_events() > 0);
            let Ok(fit) = cox_fit(&sample, CoxOptions::default()) else {
                return Ok(());
            };
            prop_assume!(fit.converged);
            let set = martingale_residuals(&fit, &sample).unwrap();
            let total: f64 = set.martingale.iter().sum();
            prop_assert!(total.abs() < 1e-8, "residual sum {}", total);
        }
    }
}
