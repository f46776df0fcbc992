//! Nonparametric estimation for right-censored data.
//!
//! Nelson-Aalen cumulative hazard with the martingale variance
//! sigma2(t) = sum dN(s)/Y(s)^2, Kaplan-Meier survival with the Greenwood
//! variance, transformed pointwise confidence intervals, simultaneous
//! confidence bands, kernel-smoothed hazards, survival quantiles by test
//! inversion, and a simulation estimate of the Nelson-Aalen small-sample
//! bias bound.

mod band;
mod dabrowska;

pub use band::{band_critical_value, simultaneous_band, Band, BandSpec, BandType};
pub use dabrowska::{dabrowska, BivariateSurfaceEstimate};

use crate::data::RightCensoredSample;
use crate::data::counting_and_risk;
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::stats::normal_quantile;
use crate::step::{product_integral_scalar_path, StepFunction};
use serde::{Deserialize, Serialize};

/// What a `CurveEstimate` estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Survival,
    CumulativeHazard,
}

/// A fitted curve with its variance process.
///
/// `estimate` is the fitted step function (survival starts at 1, cumulative
/// hazard at 0). `variance` is the variance of the estimate itself: for a
/// hazard curve this is sigma2(t); for a survival curve it is
/// S(t)^2 sigma2(t) with sigma2 the Greenwood sum, set to 0 where S(t) = 0.
/// `sigma2` keeps the relative variance used by transforms and bands; it
/// jumps to +inf at the time a risk set is exhausted (Y = dN), recorded in
/// `exhausted_at`.
#[derive(Debug, Clone, Serialize)]
pub struct CurveEstimate {
    pub kind: CurveKind,
    pub n: usize,
    pub estimate: StepFunction,
    pub variance: StepFunction,
    pub sigma2: StepFunction,
    /// Largest observed time (events or censorings); the curve is constant
    /// to the right of it.
    pub last_observed: f64,
    /// Event time at which Y = dN made the Greenwood sum infinite.
    pub exhausted_at: Option<f64>,
}

impl CurveEstimate {
    /// Jump times of the estimate (distinct event times).
    pub fn times(&self) -> &[f64] {
        self.estimate.jump_times()
    }
}

/// Nelson-Aalen estimator of the cumulative hazard.
///
/// A(t) = sum over event times s <= t of dN(s)/Y(s), with the martingale
/// variance estimator sigma2(t) = sum dN(s)/Y(s)^2. Both are 0 before the
/// first event and constant after the last observed time.
pub fn nelson_aalen(sample: &RightCensoredSample) -> Result<CurveEstimate> {
    let (n_proc, y_proc) = counting_and_risk(sample, None)?;
    let times = n_proc.jump_times().to_vec();
    let mut hazard_jumps = Vec::with_capacity(times.len());
    let mut var_jumps = Vec::with_capacity(times.len());
    for (&t, &d) in times.iter().zip(n_proc.jump_sizes()) {
        let y = y_proc.left_limit(t);
        // Y >= dN > 0 at every event time by construction of the risk set.
        hazard_jumps.push(d / y);
        var_jumps.push(d / (y * y));
    }
    let estimate = StepFunction::new(0.0, times.clone(), hazard_jumps)?;
    let variance = StepFunction::new(0.0, times, var_jumps)?;
    Ok(CurveEstimate {
        kind: CurveKind::CumulativeHazard,
        n: sample.n(),
        sigma2: variance.clone(),
        estimate,
        variance,
        last_observed: max_time(sample),
        exhausted_at: None,
    })
}

/// Kaplan-Meier estimator of the survival function.
///
/// S(t) is the product integral of the Nelson-Aalen increments, so the
/// identity S = prod (1 - dA) holds factor for factor. The Greenwood sum
/// sigma2(t) = sum dN/(Y (Y - dN)) jumps to +inf when a risk set is
/// exhausted; S is exactly 0 from that time on and the reported variance
/// S^2 sigma2 is set to 0 there.
pub fn kaplan_meier(sample: &RightCensoredSample) -> Result<CurveEstimate> {
    let na = nelson_aalen(sample)?;
    let times = na.estimate.jump_times().to_vec();
    let survival_path = product_integral_scalar_path(&na.estimate);

    let (n_proc, y_proc) = counting_and_risk(sample, None)?;
    let mut exhausted_at = None;
    let mut greenwood = Vec::with_capacity(times.len());
    let mut acc = 0.0f64;
    for (&t, &d) in times.iter().zip(n_proc.jump_sizes()) {
        let y = y_proc.left_limit(t);
        if y == d && exhausted_at.is_none() {
            exhausted_at = Some(t);
        }
        acc += d / (y * (y - d));
        greenwood.push(acc);
    }

    let mut est_jumps = Vec::with_capacity(times.len());
    let mut var_jumps = Vec::with_capacity(times.len());
    let mut sig_jumps = Vec::with_capacity(times.len());
    let mut prev_s = 1.0;
    let mut prev_var = 0.0;
    let mut prev_sig = 0.0;
    for i in 0..times.len() {
        let s = survival_path[i];
        let sig = greenwood[i];
        let var = if s == 0.0 { 0.0 } else { s * s * sig };
        est_jumps.push(s - prev_s);
        var_jumps.push(var - prev_var);
        sig_jumps.push(sig - prev_sig);
        prev_s = s;
        prev_var = var;
        prev_sig = sig;
    }

    Ok(CurveEstimate {
        kind: CurveKind::Survival,
        n: sample.n(),
        estimate: StepFunction::new(1.0, times.clone(), est_jumps)?,
        variance: StepFunction::new(0.0, times.clone(), var_jumps)?,
        sigma2: StepFunction::new(0.0, times, sig_jumps)?,
        last_observed: max_time(sample),
        exhausted_at,
    })
}

fn max_time(sample: &RightCensoredSample) -> f64 {
    sample
        .records()
        .iter()
        .map(|r| r.time)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Confidence-interval transform for survival or cumulative-hazard curves.
///
/// On the survival scale, `LogLog` is the Kalbfleisch-Prentice
/// log(-log S) transform; applied to a cumulative-hazard curve it is the
/// log transform of A (the same scale, since log(-log S) = log A).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Linear,
    LogLog,
    ArcsinSqrt,
}

impl std::str::FromStr for Transform {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "linear" => Ok(Transform::Linear),
            "loglog" => Ok(Transform::LogLog),
            "arcsin" => Ok(Transform::ArcsinSqrt),
            other => Err(format!(
                "unknown transform '{other}' (expected linear, loglog, or arcsin)"
            )),
        }
    }
}

/// Pointwise confidence limits evaluated at the curve's jump times.
#[derive(Debug, Clone, Serialize)]
pub struct ConfidenceCurve {
    pub conf_level: f64,
    pub transform: Transform,
    pub times: Vec<f64>,
    /// None where the transform is undefined (estimate at 0 or 1).
    pub lo: Vec<Option<f64>>,
    pub hi: Vec<Option<f64>>,
}

/// Pointwise confidence interval at a single time.
///
/// Transformed variants require the estimate to be strictly inside its range
/// (0 < S < 1 on the survival scale, A > 0 on the hazard scale); outside
/// that the transform is undefined and a domain error is returned. Survival
/// intervals are clipped to [0, 1], hazard lower limits to 0.
pub fn pointwise_ci_at(
    curve: &CurveEstimate,
    t: f64,
    conf_level: f64,
    transform: Transform,
) -> Result<(f64, f64)> {
    check_conf_level(conf_level)?;
    let z = normal_quantile(0.5 + conf_level / 2.0)?;
    let est = curve.estimate.value(t);
    let var = curve.variance.value(t);
    let sigma = curve.sigma2.value(t).sqrt();
    match curve.kind {
        CurveKind::Survival => {
            let s = est;
            match transform {
                Transform::Linear => {
                    let se = var.sqrt();
                    Ok(((s - z * se).max(0.0), (s + z * se).min(1.0)))
                }
                Transform::LogLog => {
                    if !(s > 0.0 && s < 1.0) {
                        return Err(Error::domain(format!(
                            "log-log interval undefined at S = {s}"
                        )));
                    }
                    // theta = exp(+-z sigma / |log S|); bounds are S^theta.
                    let w = z * sigma / s.ln().abs();
                    Ok((s.powf(w.exp()), s.powf((-w).exp())))
                }
                Transform::ArcsinSqrt => {
                    if !(s > 0.0 && s < 1.0) {
                        return Err(Error::domain(format!(
                            "arcsine interval undefined at S = {s}"
                        )));
                    }
                    let theta = s.sqrt().asin();
                    let half = 0.5 * z * sigma * (s / (1.0 - s)).sqrt();
                    let lo = (theta - half).max(0.0);
                    let hi = (theta + half).min(std::f64::consts::FRAC_PI_2);
                    Ok((lo.sin().powi(2), hi.sin().powi(2)))
                }
            }
        }
        CurveKind::CumulativeHazard => {
            let a = est;
            match transform {
                Transform::Linear => {
                    let se = var.sqrt();
                    Ok(((a - z * se).max(0.0), a + z * se))
                }
                Transform::LogLog => {
                    if !(a > 0.0) {
                        return Err(Error::domain(format!("log interval undefined at A = {a}")));
                    }
                    let w = (z * sigma / a).exp();
                    Ok((a / w, a * w))
                }
                Transform::ArcsinSqrt => Err(Error::domain(
                    "arcsine transform applies to survival curves only",
                )),
            }
        }
    }
}

/// Pointwise confidence intervals at every jump time of the curve.
///
/// Times where a transformed interval is undefined carry None.
pub fn pointwise_ci(
    curve: &CurveEstimate,
    conf_level: f64,
    transform: Transform,
) -> Result<ConfidenceCurve> {
    check_conf_level(conf_level)?;
    let times = curve.times().to_vec();
    let mut lo = Vec::with_capacity(times.len());
    let mut hi = Vec::with_capacity(times.len());
    for &t in &times {
        match pointwise_ci_at(curve, t, conf_level, transform) {
            Ok((a, b)) => {
                lo.push(Some(a));
                hi.push(Some(b));
            }
            Err(Error::Domain(_)) => {
                lo.push(None);
                hi.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(ConfidenceCurve { conf_level, transform, times, lo, hi })
}

pub(crate) fn check_conf_level(conf_level: f64) -> Result<()> {
    if !(conf_level > 0.0 && conf_level < 1.0) {
        return Err(Error::domain(format!(
            "confidence level must lie in (0,1), got {conf_level}"
        )));
    }
    Ok(())
}

/// A curve sampled on an explicit grid (kernel-smoothed hazards, excess
/// mortality paths).
#[derive(Debug, Clone, Serialize)]
pub struct SampledCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

/// Kernel-smoothed hazard from a Nelson-Aalen curve.
///
/// alpha(t) = (1/b) sum K((t - s)/b) dA(s) over the jump times s of the
/// cumulative hazard; no boundary correction is applied near t = 0.
pub fn smoothed_hazard(
    curve: &CurveEstimate,
    bandwidth: f64,
    kernel: Kernel,
    grid: &[f64],
) -> Result<SampledCurve> {
    if curve.kind != CurveKind::CumulativeHazard {
        return Err(Error::domain("smoothed hazard needs a cumulative-hazard curve"));
    }
    smoothed_increments(&curve.estimate, bandwidth, kernel, grid)
}

/// Kernel convolution of a step function's increments on a grid:
/// (1/b) sum K((t - s)/b) dF(s). Shared by hazard smoothing, the Breslow
/// baseline, and additive-model coefficient curves.
pub fn smoothed_increments(
    step: &StepFunction,
    bandwidth: f64,
    kernel: Kernel,
    grid: &[f64],
) -> Result<SampledCurve> {
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(Error::domain(format!("bandwidth must be positive, got {bandwidth}")));
    }
    if grid.is_empty() {
        return Err(Error::domain("smoothing grid is empty"));
    }
    let times = step.jump_times();
    let jumps = step.jump_sizes();
    let values = grid
        .iter()
        .map(|&t| {
            let mut acc = 0.0;
            // Jumps outside [t - b, t + b] contribute nothing.
            let lo = times.partition_point(|&s| s < t - bandwidth);
            let hi = times.partition_point(|&s| s <= t + bandwidth);
            for i in lo..hi {
                acc += kernel.weight((t - times[i]) / bandwidth) * jumps[i];
            }
            acc / bandwidth
        })
        .collect();
    Ok(SampledCurve { times: grid.to_vec(), values })
}

/// A survival quantile with its test-inversion confidence interval.
#[derive(Debug, Clone, Serialize)]
pub struct QuantileEstimate {
    pub p: f64,
    pub estimate: f64,
    /// (min, max) of the inversion set; None when the set is empty.
    pub ci: Option<(f64, f64)>,
    /// The raw inversion set (event times passing the test).
    pub set: Vec<f64>,
}

/// Survival quantile Q(p) = inf{x : 1 - S(x) >= p} with a Brookmeyer-Crowley
/// confidence interval by inverting the transformed pointwise test
/// |g(S(u)) - g(1-p)| / se(g(S(u))) <= z at every event time u.
pub fn survival_quantile(
    curve: &CurveEstimate,
    p: f64,
    conf_level: f64,
    transform: Transform,
) -> Result<QuantileEstimate> {
    if curve.kind != CurveKind::Survival {
        return Err(Error::domain("survival quantile needs a survival curve"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("quantile level must lie in (0,1), got {p}")));
    }
    check_conf_level(conf_level)?;
    let z = normal_quantile(0.5 + conf_level / 2.0)?;
    let target = 1.0 - p;

    let times = curve.times();
    let values = curve.estimate.values_at_jumps();
    let estimate = times
        .iter()
        .zip(&values)
        .find(|(_, &s)| s <= target)
        .map(|(&t, _)| t)
        .ok_or_else(|| {
            Error::domain(format!(
                "quantile p = {p} is never reached (curve stays above {target})"
            ))
        })?;

    let sigma2_values = curve.sigma2.values_at_jumps();
    let mut set = Vec::new();
    for (i, &u) in times.iter().enumerate() {
        let s = values[i];
        let sigma = sigma2_values[i].sqrt();
        let pass = match transform {
            Transform::Linear => {
                let se = s * sigma;
                if se > 0.0 && se.is_finite() {
                    (s - target).abs() / se <= z
                } else {
                    s == target
                }
            }
            Transform::LogLog => {
                if s > 0.0 && s < 1.0 && sigma.is_finite() {
                    let se = sigma / s.ln().abs();
                    ((-(s.ln())).ln() - (-(target.ln())).ln()).abs() / se <= z
                } else {
                    false
                }
            }
            Transform::ArcsinSqrt => {
                if s > 0.0 && s < 1.0 && sigma.is_finite() {
                    let se = 0.5 * sigma * (s / (1.0 - s)).sqrt();
                    (s.sqrt().asin() - target.sqrt().asin()).abs() / se <= z
                } else {
                    false
                }
            }
        };
        if pass {
            set.push(u);
        }
    }
    let ci = if set.is_empty() {
        None
    } else {
        Some((set[0], *set.last().unwrap()))
    };
    Ok(QuantileEstimate { p, estimate, ci, set })
}

/// Simulation estimate of the Nelson-Aalen bias bound
/// integral_0^t P(Y(s) = 0) alpha0(s) ds.
///
/// P(Y(s) = 0) is the fraction of replicates whose largest observed time is
/// below s; the integral uses the trapezoid rule on a uniform grid.
pub fn na_bias_bound(
    replicates: &[RightCensoredSample],
    alpha0: impl Fn(f64) -> f64,
    t: f64,
    grid_points: usize,
) -> Result<f64> {
    if replicates.is_empty() {
        return Err(Error::validation("no replicates supplied"));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("horizon must be positive and finite, got {t}")));
    }
    if grid_points < 2 {
        return Err(Error::domain("bias-bound grid needs at least 2 points"));
    }
    let max_times: Vec<f64> = replicates
        .iter()
        .map(|s| s.records().iter().map(|r| r.time).fold(0.0f64, f64::max))
        .collect();
    let r = replicates.len() as f64;
    let h = t / (grid_points - 1) as f64;
    let mut values = Vec::with_capacity(grid_points);
    for i in 0..grid_points {
        let s = i as f64 * h;
        let a = alpha0(s);
        if !(a >= 0.0) || !a.is_finite() {
            return Err(Error::domain(format!("hazard alpha0({s}) = {a} is not nonnegative")));
        }
        let p_empty = max_times.iter().filter(|&&m| m < s).count() as f64 / r;
        values.push(p_empty * a);
    }
    let mut integral = 0.0;
    for i in 1..grid_points {
        integral += 0.5 * (values[i - 1] + values[i]) * h;
    }
    Ok(integral)
}
