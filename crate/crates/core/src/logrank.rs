//! One-sample, k-sample, and stratified weighted log-rank tests.
//!
//! All statistics integrate a predictable weight against event-count
//! martingales. The one-sample test compares observed events with the count
//! expected under a known reference cumulative hazard; its quadrature is
//! segment-exact because the integrand has a closed antiderivative between
//! observed times for every supported weight. The k-sample test scores
//! observed minus expected per group at each event time and normalizes by
//! the multivariate hypergeometric covariance with the tie factor
//! (r - d)/(r - 1), taken as 1 when r = 1.

use crate::data::RightCensoredSample;
use crate::error::{Error, Result};
use crate::stats::chi_squared_sf;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Predictable weight K(t) for the test statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum WeightSpec {
    /// K = 1 (k-sample) or K = Y (one-sample): the plain log-rank test.
    Logrank,
    /// K = total risk, the Gehan-type generalization of the Wilcoxon test.
    WilcoxonTotalRisk,
    /// K = S0(t-)^rho with S0 = exp(-A0): emphasizes early differences for
    /// rho > 0. The k-sample version plugs in the pooled hazard estimate.
    FlemingHarrington { rho: f64 },
}

impl WeightSpec {
    fn validate(&self) -> Result<()> {
        if let WeightSpec::FlemingHarrington { rho } = self {
            if !(*rho >= 0.0) || !rho.is_finite() {
                return Err(Error::validation(format!(
                    "Fleming-Harrington exponent must be finite and nonnegative, got {rho}"
                )));
            }
        }
        Ok(())
    }
}

/// Shared result shape for all tests in this module.
#[derive(Debug, Clone, Serialize)]
pub struct TestResult {
    /// Chi-squared scale statistic.
    pub statistic: f64,
    /// Signed root for 1-df tests (sign of the first group's score).
    pub z: Option<f64>,
    pub df: usize,
    pub p_value: f64,
    /// Group labels in ascending order (empty for the one-sample test).
    pub groups: Vec<i64>,
    pub observed: Vec<f64>,
    pub expected: Vec<f64>,
    /// Covariance matrix of the per-group scores (1x1 for one-sample).
    pub variance: Vec<Vec<f64>>,
    /// Groups excluded for carrying no risk at any event time.
    pub dropped_groups: Vec<i64>,
    /// Standardized mortality ratio N/E (one-sample test only).
    pub smr: Option<f64>,
}

/// Evaluates a reference cumulative hazard on a grid, validating shape.
fn reference_on_grid(a0: &dyn Fn(f64) -> f64, grid: &[f64]) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(grid.len());
    let mut prev = f64::NEG_INFINITY;
    for &t in grid {
        let a = a0(t);
        if !a.is_finite() || a < 0.0 {
            return Err(Error::domain(format!(
                "reference cumulative hazard at {t} is {a}, not finite and nonnegative"
            )));
        }
        if a < prev {
            return Err(Error::domain(format!(
                "reference cumulative hazard decreases at {t}"
            )));
        }
        prev = a;
        values.push(a);
    }
    Ok(values)
}

/// One-sample weighted log-rank test against a known cumulative hazard.
///
/// The score is Z = sum_events w(T_i) - int_0^t Y w dA0 with w the weight
/// per unit of risk (1, Y, or exp(-rho A0)), and the statistic Z^2 / <Z>
/// with <Z> = int Y w^2 dA0. For the plain weight this reduces to
/// (N - E)^2 / E. Both integrals are evaluated in closed form on each
/// segment where Y is constant, so they are exact for any continuous A0.
pub fn one_sample_logrank(
    sample: &RightCensoredSample,
    a0: &dyn Fn(f64) -> f64,
    t: f64,
    weight: WeightSpec,
) -> Result<TestResult> {
    weight.validate()?;
    if !(t > 0.0) {
        return Err(Error::domain(format!("test horizon must be positive, got {t}")));
    }
    // segment grid: 0 and every distinct observed time within [0, t]
    let mut grid = vec![0.0];
    for u in sample.distinct_times() {
        if u > 0.0 && u <= t {
            grid.push(u);
        }
    }
    let a_values = reference_on_grid(a0, &grid)?;

    let mut observed = 0.0; // N(t)
    let mut e_plain = 0.0; // int Y dA0
    let mut score = 0.0; // Z(t), event part accumulated below
    let mut e_weighted = 0.0; // int Y w dA0
    let mut var = 0.0; // int Y w^2 dA0
    for (seg, w) in grid.windows(2).zip(a_values.windows(2)) {
        let b = seg[1];
        let (a0a, a0b) = (w[0], w[1]);
        let y = sample.risk_at(b) as f64;
        let d_a0 = a0b - a0a;
        e_plain += y * d_a0;
        match weight {
            WeightSpec::Logrank => {
                e_weighted += y * d_a0;
                var += y * d_a0;
            }
            WeightSpec::WilcoxonTotalRisk => {
                e_weighted += y * y * d_a0;
                var += y * y * y * d_a0;
            }
            WeightSpec::FlemingHarrington { rho } => {
                if rho == 0.0 {
                    e_weighted += y * d_a0;
                    var += y * d_a0;
                } else {
                    // int_a^b exp(-rho A0) dA0 = (e^{-rho A0(a)} - e^{-rho A0(b)}) / rho
                    e_weighted += y * ((-rho * a0a).exp() - (-rho * a0b).exp()) / rho;
                    var += y * ((-2.0 * rho * a0a).exp() - (-2.0 * rho * a0b).exp()) / (2.0 * rho);
                }
            }
        }
        let d = sample.events_at(b) as f64;
        if d > 0.0 {
            observed += d;
            let w_event = match weight {
                WeightSpec::Logrank => 1.0,
                WeightSpec::WilcoxonTotalRisk => y,
                WeightSpec::FlemingHarrington { rho } => (-rho * a0b).exp(),
            };
            score += w_event * d;
        }
    }
    if e_plain <= 0.0 {
        return Err(Error::domain(
            "expected event count is zero; the test is degenerate",
        ));
    }
    if var <= 0.0 {
        return Err(Error::domain("score variance is zero; the test is degenerate"));
    }
    let z = (score - e_weighted) / var.sqrt();
    let statistic = z * z;
    Ok(TestResult {
        statistic,
        z: Some(z),
        df: 1,
        p_value: chi_squared_sf(statistic, 1.0)?,
        groups: vec![],
        observed: vec![observed],
        expected: vec![e_weighted],
        variance: vec![vec![var]],
        dropped_groups: vec![],
        smr: Some(observed / e_plain),
    })
}

/// Per-event-time risk table rows for the grouped tests.
struct RiskTable {
    labels: Vec<i64>,
    /// (pooled risk, pooled events, per-group risk, per-group events)
    rows: Vec<(f64, f64, Vec<f64>, Vec<f64>)>,
    dropped: Vec<i64>,
}

fn risk_table(sample: &RightCensoredSample, t: f64) -> Result<RiskTable> {
    let labels = sample.group_labels();
    if labels.len() < 2 {
        return Err(Error::validation(format!(
            "grouped test needs at least 2 groups, found {}",
            labels.len()
        )));
    }
    if sample.records().iter().any(|r| r.group.is_none()) {
        return Err(Error::validation("record without group label in grouped test"));
    }
    let times: Vec<f64> = sample
        .distinct_event_times()
        .into_iter()
        .filter(|&u| u <= t)
        .collect();
    let mut rows = Vec::with_capacity(times.len());
    let mut ever_at_risk = vec![false; labels.len()];
    for &u in &times {
        let mut r_h = vec![0.0; labels.len()];
        let mut d_h = vec![0.0; labels.len()];
        for rec in sample.records() {
            let h = labels.binary_search(&rec.group.unwrap()).unwrap();
            if rec.time >= u {
                r_h[h] += 1.0;
                ever_at_risk[h] = true;
            }
            if rec.time == u && rec.status == 1 {
                d_h[h] += 1.0;
            }
        }
        let r: f64 = r_h.iter().sum();
        let d: f64 = d_h.iter().sum();
        rows.push((r, d, r_h, d_h));
    }
    // groups with zero risk at every event time contribute nothing; drop them
    let dropped: Vec<i64> = labels
        .iter()
        .zip(&ever_at_risk)
        .filter(|(_, &seen)| !seen)
        .map(|(&l, _)| l)
        .collect();
    if dropped.is_empty() {
        return Ok(RiskTable { labels, rows, dropped });
    }
    let keep: Vec<usize> = ever_at_risk
        .iter()
        .enumerate()
        .filter(|(_, &seen)| seen)
        .map(|(h, _)| h)
        .collect();
    if keep.len() < 2 {
        return Err(Error::validation(
            "fewer than 2 groups carry risk at the event times",
        ));
    }
    let labels_kept: Vec<i64> = keep.iter().map(|&h| labels[h]).collect();
    let rows_kept = rows
        .into_iter()
        .map(|(r, d, r_h, d_h)| {
            (
                r,
                d,
                keep.iter().map(|&h| r_h[h]).collect(),
                keep.iter().map(|&h| d_h[h]).collect(),
            )
        })
        .collect();
    Ok(RiskTable {
        labels: labels_kept,
        rows: rows_kept,
        dropped,
    })
}

/// Scores and covariance for a risk table under a weight, plus per-group
/// observed and expected counts.
struct GroupScores {
    z: DVector<f64>,
    cov: DMatrix<f64>,
    observed: Vec<f64>,
    expected: Vec<f64>,
}

fn group_scores(table: &RiskTable, weight: WeightSpec) -> GroupScores {
    let k = table.labels.len();
    let mut z = DVector::zeros(k);
    let mut cov = DMatrix::zeros(k, k);
    let mut observed = vec![0.0; k];
    let mut expected = vec![0.0; k];
    let mut pooled_a = 0.0; // pooled cumulative hazard, left limit
    for (r, d, r_h, d_h) in &table.rows {
        let (r, d) = (*r, *d);
        if r == 0.0 || d == 0.0 {
            continue;
        }
        let w = match weight {
            WeightSpec::Logrank => 1.0,
            WeightSpec::WilcoxonTotalRisk => r,
            WeightSpec::FlemingHarrington { rho } => (-rho * pooled_a).exp(),
        };
        let tie = if r > 1.0 { (r - d) / (r - 1.0) } else { 1.0 };
        for h in 0..k {
            let e_h = r_h[h] * d / r;
            observed[h] += d_h[h];
            expected[h] += e_h;
            z[h] += w * (d_h[h] - e_h);
            for h2 in 0..k {
                let delta = if h == h2 { r_h[h] / r } else { 0.0 };
                cov[(h, h2)] += w * w * d * tie * (delta - r_h[h] * r_h[h2] / (r * r));
            }
        }
        pooled_a += d / r;
    }
    GroupScores { z, cov, observed, expected }
}

/// k-sample weighted log-rank test over events in [0, t].
pub fn k_sample_logrank(
    sample: &RightCensoredSample,
    weight: WeightSpec,
    t: f64,
) -> Result<TestResult> {
    weight.validate()?;
    let table = risk_table(sample, t)?;
    let scores = group_scores(&table, weight);
    let k = table.labels.len();

    let (statistic, z_signed, df) = if k == 2 {
        let v = scores.cov[(0, 0)];
        if v <= 0.0 {
            return Err(Error::domain(
                "score variance is zero; the test is degenerate",
            ));
        }
        let z = scores.z[0] / v.sqrt();
        (z * z, Some(z), 1)
    } else {
        // quadratic form over the first k-1 coordinates with a generalized
        // inverse; the full covariance is singular by construction
        let zb = scores.z.rows(0, k - 1).into_owned();
        let vb = scores.cov.view((0, 0), (k - 1, k - 1)).into_owned();
        let inv = generalized_inverse(&vb)?;
        let stat = (zb.transpose() * inv * zb)[(0, 0)].max(0.0);
        (stat, None, k - 1)
    };
    Ok(TestResult {
        statistic,
        z: z_signed,
        df,
        p_value: chi_squared_sf(statistic, df as f64)?,
        groups: table.labels,
        observed: scores.observed,
        expected: scores.expected,
        variance: matrix_rows(&scores.cov),
        dropped_groups: table.dropped,
        smr: None,
    })
}

/// SVD pseudo-inverse with rank detection at 1e-10 relative.
fn generalized_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = m.clone().svd(true, true);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    if max_sv == 0.0 {
        return Err(Error::domain(
            "score covariance is identically zero; the test is degenerate",
        ));
    }
    svd.pseudo_inverse(1e-10 * max_sv)
        .map_err(|e| Error::numerical(format!("pseudo-inverse failed: {e}")))
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Stratified two-group log-rank test: stratum scores and variances are
/// summed, so each stratum keeps its own baseline hazard.
pub fn stratified_logrank(
    strata: &[RightCensoredSample],
    weight: WeightSpec,
    t: f64,
) -> Result<TestResult> {
    weight.validate()?;
    if strata.is_empty() {
        return Err(Error::validation("stratified test needs at least one stratum"));
    }
    let mut z_total = 0.0;
    let mut var_total = 0.0;
    let mut observed = vec![0.0; 2];
    let mut expected = vec![0.0; 2];
    let mut groups: Option<Vec<i64>> = None;
    for (s, stratum) in strata.iter().enumerate() {
        let table = risk_table(stratum, t)?;
        if table.labels.len() != 2 {
            return Err(Error::validation(format!(
                "stratum {s} has {} groups; the stratified test is two-group",
                table.labels.len()
            )));
        }
        match &groups {
            None => groups = Some(table.labels.clone()),
            Some(g) if *g != table.labels => {
                return Err(Error::validation(format!(
                    "stratum {s} has group labels {:?}, expected {:?}",
                    table.labels, g
                )));
            }
            _ => {}
        }
        let scores = group_scores(&table, weight);
        z_total += scores.z[0];
        var_total += scores.cov[(0, 0)];
        for h in 0..2 {
            observed[h] += scores.observed[h];
            expected[h] += scores.expected[h];
        }
    }
    if var_total <= 0.0 {
        return Err(Error::domain(
            "every stratum is degenerate; no score variance accumulated",
        ));
    }
    let z = z_total / var_total.sqrt();
    let statistic = z * z;
    Ok(TestResult {
        statistic,
        z: Some(z),
        df: 1,
        p_value: chi_squared_sf(statistic, 1.0)?,
        groups: groups.unwrap(),
        observed,
        expected,
        variance: vec![vec![var_total]],
        dropped_groups: vec![],
        smr: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::RightCensoredRecord;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grouped(entries: &[(f64, u8, i64)]) -> RightCensoredSample {
        RightCensoredSample::new(
            entries
                .iter()
                .map(|&(time, status, group)| RightCensoredRecord {
                    time,
                    status,
                    group: Some(group),
                    covariates: vec![],
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn one_sample_matched_reference_scores_zero() {
        // two events where A0 increments integrate to exactly 2 over the
        // risk trajectory: N = E, statistic 0, SMR 1
        let sample = RightCensoredSample::from_times(&[1.0, 2.0], &[1, 1]).unwrap();
        // with Y = 2 on (0,1], Y = 1 on (1,2]: E = 2 A0(1) + (A0(2)-A0(1));
        // choose A0(t) = t/2 on [0,1], then slope 1: E = 1 + 1 = 2 = N
        let a0 = |t: f64| if t <= 1.0 { t / 2.0 } else { 0.5 + (t - 1.0) };
        let res = one_sample_logrank(&sample, &a0, 10.0, WeightSpec::Logrank).unwrap();
        assert!((res.observed[0] - 2.0).abs() < 1e-15);
        assert!((res.expected[0] - 2.0).abs() < 1e-15);
        assert!(res.statistic < 1e-24);
        assert!((res.smr.unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn one_sample_expectation_is_linear_in_the_reference() {
        let times = [0.5, 1.0, 1.5, 2.0, 3.0];
        let status = [1, 0, 1, 1, 0];
        let sample = RightCensoredSample::from_times(&times, &status).unwrap();
        let single = one_sample_logrank(&sample, &|t| 0.3 * t, 10.0, WeightSpec::Logrank).unwrap();
        let doubled = one_sample_logrank(&sample, &|t| 0.6 * t, 10.0, WeightSpec::Logrank).unwrap();
        assert_eq!(doubled.expected[0], 2.0 * single.expected[0]);
        let smr_single = single.smr.unwrap();
        let smr_doubled = doubled.smr.unwrap();
        assert!((smr_doubled - smr_single / 2.0).abs() < 1e-15);
    }

    #[test]
    fn one_sample_fleming_harrington_zero_rho_is_plain() {
        let times = [0.5, 1.0, 1.5, 2.0, 3.0];
        let status = [1, 0, 1, 1, 1];
        let sample = RightCensoredSample::from_times(&times, &status).unwrap();
        let plain = one_sample_logrank(&sample, &|t| 0.4 * t, 10.0, WeightSpec::Logrank).unwrap();
        let fh = one_sample_logrank(
            &sample,
            &|t| 0.4 * t,
            10.0,
            WeightSpec::FlemingHarrington { rho: 0.0 },
        )
        .unwrap();
        assert_eq!(plain.statistic, fh.statistic);
        assert_eq!(plain.expected[0], fh.expected[0]);
    }

    #[test]
    fn one_sample_degenerate_reference_errors() {
        let sample = RightCensoredSample::from_times(&[1.0, 2.0], &[1, 1]).unwrap();
        assert!(one_sample_logrank(&sample, &|_| 0.0, 10.0, WeightSpec::Logrank).is_err());
        // decreasing reference
        assert!(one_sample_logrank(&sample, &|t| -t, 10.0, WeightSpec::Logrank).is_err());
    }

    #[test]
    fn two_sample_symmetric_fixture_is_exactly_null() {
        // one event per group at the same time plus a censoring each: the
        // groups are interchangeable, so the score is exactly zero
        let sample = grouped(&[(1.0, 1, 1), (2.0, 0, 1), (1.0, 1, 2), (2.0, 0, 2)]);
        let res = k_sample_logrank(&sample, WeightSpec::Logrank, f64::INFINITY).unwrap();
        assert_eq!(res.statistic, 0.0);
        assert_eq!(res.observed, vec![1.0, 1.0]);
        assert_eq!(res.expected, vec![1.0, 1.0]);
    }

    #[test]
    fn two_sample_hand_fixture_matches_frozen_risk_table_values() {
        // A events at 1, 2; B events at 3, 4: Z_A = 7/6, var = 17/36
        let sample = grouped(&[(1.0, 1, 1), (2.0, 1, 1), (3.0, 1, 2), (4.0, 1, 2)]);
        let res = k_sample_logrank(&sample, WeightSpec::Logrank, f64::INFINITY).unwrap();
        assert_eq!(res.observed, vec![2.0, 2.0]);
        assert!((res.expected[0] - 5.0 / 6.0).abs() < 1e-15);
        assert!((res.variance[0][0] - 17.0 / 36.0).abs() < 1e-15);
        assert!((res.statistic - 49.0 / 17.0).abs() < 1e-12);
        let z1 = res.observed[0] - res.expected[0];
        assert!((z1 - 7.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn two_sample_scores_are_antisymmetric() {
        let sample = grouped(&[
            (1.0, 1, 1),
            (2.0, 0, 1),
            (2.5, 1, 1),
            (1.5, 1, 2),
            (3.0, 1, 2),
            (4.0, 0, 2),
        ]);
        let res = k_sample_logrank(&sample, WeightSpec::Logrank, f64::INFINITY).unwrap();
        let z1 = res.observed[0] - res.expected[0];
        let z2 = res.observed[1] - res.expected[1];
        assert!((z1 + z2).abs() < 1e-12);
        let total_o: f64 = res.observed.iter().sum();
        let total_e: f64 = res.expected.iter().sum();
        assert!((total_o - total_e).abs() < 1e-12);
    }

    #[test]
    fn weight_scale_invariance_and_fh_zero_reduction() {
        let sample = grouped(&[
            (1.0, 1, 1),
            (2.0, 0, 1),
            (2.5, 1, 1),
            (1.5, 1, 2),
            (3.0, 1, 2),
            (4.0, 0, 2),
        ]);
        let plain = k_sample_logrank(&sample, WeightSpec::Logrank, f64::INFINITY).unwrap();
        let fh0 = k_sample_logrank(
            &sample,
            WeightSpec::FlemingHarrington { rho: 0.0 },
            f64::INFINITY,
        )
        .unwrap();
        assert_eq!(plain.statistic, fh0.statistic);

        // the statistic is invariant to a constant rescaling of the weight:
        // the Wilcoxon weight on a table with constant pooled risk equals a
        // rescaled log-rank weight
        let tied = grouped(&[(1.0, 1, 1), (1.0, 1, 1), (1.0, 1, 2), (1.0, 0, 2)]);
        let a = k_sample_logrank(&tied, WeightSpec::Logrank, f64::INFINITY).unwrap();
        let b = k_sample_logrank(&tied, WeightSpec::WilcoxonTotalRisk, f64::INFINITY).unwrap();
        assert!((a.statistic - b.statistic).abs() < 1e-12);
    }

    #[test]
    fn three_sample_test_has_two_degrees_of_freedom() {
        let sample = grouped(&[
            (1.0, 1, 1),
            (2.0, 1, 1),
            (1.5, 1, 2),
            (3.0, 1, 2),
            (2.5, 1, 3),
            (4.0, 0, 3),
        ]);
        let res = k_sample_logrank(&sample, WeightSpec::Logrank, f64::INFINITY).unwrap();
        assert_eq!(res.df, 2);
        assert!(res.statistic >= 0.0);
        assert!(res.p_value > 0.0 && res.p_value < 1.0);
        // identical-distribution permutation of a balanced design: the
        // 3-group statistic reduces to the 2-group one when two groups merge
        let total_o: f64 = res.observed.iter().sum();
        let total_e: f64 = res.expected.iter().sum();
        assert!((total_o - total_e).abs() < 1e-12);
    }

    #[test]
    fn group_without_risk_at_event_times_is_dropped() {
        // group 3 censors before the first event: zero risk at every event
        let sample = grouped(&[
            (0.5, 0, 3),
            (1.0, 1, 1),
            (2.0, 1, 1),
            (1.5, 1, 2),
            (3.0, 0, 2),
        ]);
        let res = k_sample_logrank(&sample, WeightSpec::Logrank, f64::INFINITY).unwrap();
        assert_eq!(res.dropped_groups, vec![3]);
        assert_eq!(res.groups, vec![1, 2]);
        assert_eq!(res.df, 1);

        let two = grouped(&[(0.5, 0, 3), (1.0, 1, 1), (2.0, 1, 1)]);
        assert!(k_sample_logrank(&two, WeightSpec::Logrank, f64::INFINITY).is_err());
    }

    #[test]
    fn stratified_single_stratum_equals_unstratified() {
        let sample = grouped(&[
            (1.0, 1, 1),
            (2.0, 0, 1),
            (2.5, 1, 1),
            (1.5, 1, 2),
            (3.0, 1, 2),
        ]);
        let k2 = k_sample_logrank(&sample, WeightSpec::Logrank, f64::INFINITY).unwrap();
        let strat =
            stratified_logrank(&[sample], WeightSpec::Logrank, f64::INFINITY).unwrap();
        assert_eq!(k2.statistic, strat.statistic);
        assert_eq!(k2.p_value, strat.p_value);
    }

    #[test]
    fn mirror_image_strata_cancel() {
        let a = grouped(&[(1.0, 1, 1), (2.0, 1, 1), (3.0, 1, 2), (4.0, 1, 2)]);
        let b = grouped(&[(1.0, 1, 2), (2.0, 1, 2), (3.0, 1, 1), (4.0, 1, 1)]);
        let res = stratified_logrank(&[a, b], WeightSpec::Logrank, f64::INFINITY).unwrap();
        assert!(res.statistic < 1e-24);
    }

    #[test]
    fn stratified_rejects_label_mismatch_and_degenerate_strata() {
        let a = grouped(&[(1.0, 1, 1), (2.0, 1, 2)]);
        let b = grouped(&[(1.0, 1, 1), (2.0, 1, 3)]);
        assert!(stratified_logrank(&[a.clone(), b], WeightSpec::Logrank, f64::INFINITY).is_err());
        // no events at all: degenerate
        let c = grouped(&[(1.0, 0, 1), (2.0, 0, 2)]);
        assert!(stratified_logrank(&[c], WeightSpec::Logrank, f64::INFINITY).is_err());
    }

    fn exp_draw(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
        let u: f64 = rng.gen();
        -(1.0 - u).ln() / rate
    }

    #[test]
    fn one_sample_null_rejection_rate_is_nominal() {
        let reps = 2000;
        let n = 100;
        let crit = 3.8414588206941245; // chi-squared(1) upper 5%
        let mut rejections = 0;
        let mut rng = ChaCha8Rng::seed_from_u64(10_001);
        for _ in 0..reps {
            let times: Vec<f64> = (0..n).map(|_| exp_draw(&mut rng, 1.0)).collect();
            let status = vec![1u8; n];
            let sample = RightCensoredSample::from_times(&times, &status).unwrap();
            let res =
                one_sample_logrank(&sample, &|t| t, f64::INFINITY, WeightSpec::Logrank).unwrap();
            if res.statistic > crit {
                rejections += 1;
            }
        }
        let rate = rejections as f64 / reps as f64;
        assert!((0.03..=0.07).contains(&rate), "rejection rate {rate}");
    }

    #[test]
    fn two_sample_null_rejection_rate_is_nominal() {
        let reps = 2000;
        let n_per_group = 100;
        let crit = 3.8414588206941245;
        let mut rejections = 0;
        let mut rng = ChaCha8Rng::seed_from_u64(20_002);
        for _ in 0..reps {
            let mut entries = Vec::with_capacity(2 * n_per_group);
            for g in 1..=2 {
                for _ in 0..n_per_group {
                    let t = exp_draw(&mut rng, 1.0);
                    // ~30% censoring: exponential censor with rate 3/7
                    let c = exp_draw(&mut rng, 3.0 / 7.0);
                    if t <= c {
                        entries.push((t, 1, g));
                    } else {
                        entries.push((c, 0, g));
                    }
                }
            }
            let res =
                k_sample_logrank(&grouped(&entries), WeightSpec::Logrank, f64::INFINITY).unwrap();
            if res.statistic > crit {
                rejections += 1;
            }
        }
        let rate = rejections as f64 / reps as f64;
        assert!((0.03..=0.07).contains(&rate), "rejection rate {rate}");
    }

    #[test]
    fn stratified_null_rejection_rate_is_nominal() {
        let reps = 2000;
        let n_per_cell = 40;
        let crit = 3.8414588206941245;
        let rates = [0.5, 1.0, 2.0];
        let mut rejections = 0;
        let mut rng = ChaCha8Rng::seed_from_u64(30_003);
        for _ in 0..reps {
            let strata: Vec<RightCensoredSample> = rates
                .iter()
                .map(|&rate| {
                    let mut entries = Vec::with_capacity(2 * n_per_cell);
                    for g in 1..=2 {
                        for _ in 0..n_per_cell {
                            entries.push((exp_draw(&mut rng, rate), 1, g));
                        }
                    }
                    grouped(&entries)
                })
                .collect();
            let res =
                stratified_logrank(&strata, WeightSpec::Logrank, f64::INFINITY).unwrap();
            if res.statistic > crit {
                rejections += 1;
            }
        }
        let rate = rejections as f64 / reps as f64;
        assert!((0.03..=0.07).contains(&rate), "rejection rate {rate}");
    }
}
