//! Cox proportional hazards: Newton maximization of the log partial
//! likelihood with Breslow handling of ties, the score test, and the
//! Breslow baseline cumulative hazard.

use super::{covariate_dim, require_varying_columns};
use crate::data::RightCensoredSample;
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::logrank::TestResult;
use crate::nonparam::{smoothed_increments, SampledCurve};
use crate::stats::chi_squared_sf;
use crate::step::StepFunction;
use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;

#[derive(Debug, Clone, Copy)]
pub struct CoxOptions {
    /// Convergence threshold on the sup-norm of the score.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CoxOptions {
    fn default() -> Self {
        CoxOptions { tol: 1e-8, max_iter: 50 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoxFit {
    pub beta: Vec<f64>,
    /// Observed information (negative Hessian of the log partial
    /// likelihood) at the solution; symmetric PSD.
    pub information: Vec<Vec<f64>>,
    /// Log partial likelihood at each accepted iterate, starting at beta=0;
    /// nondecreasing because steps are halved until the likelihood improves.
    pub loglik_path: Vec<f64>,
    /// Breslow baseline cumulative hazard at the solution.
    pub breslow: StepFunction,
    pub converged: bool,
    /// Sup-norm of the score at the returned beta.
    pub score_norm: f64,
}

/// Per-event-time aggregates of the partial likelihood: the event count,
/// the covariate total over events, and the index of the first at-risk
/// subject in the time-descending subject order.
struct PartialLikelihoodData {
    /// (event time, event count, covariate sum over events, at-risk cutoff)
    events: Vec<(f64, f64, DVector<f64>, usize)>,
    /// subjects ordered by time descending: (time, covariates)
    subjects: Vec<(f64, DVector<f64>)>,
    d: usize,
    /// column means subtracted from every covariate vector for stability
    center: DVector<f64>,
}

fn prepare(sample: &RightCensoredSample) -> Result<PartialLikelihoodData> {
    let d = covariate_dim(sample)?;
    require_varying_columns(sample, d)?;
    if sample.n_events() == 0 {
        return Err(Error::validation("no events in the sample"));
    }
    let records = sample.records();
    let n = records.len() as f64;
    let mut center = DVector::zeros(d);
    for r in records {
        center += DVector::from_column_slice(&r.covariates);
    }
    center /= n;

    let mut subjects: Vec<(f64, DVector<f64>)> = records
        .iter()
        .map(|r| (r.time, DVector::from_column_slice(&r.covariates) - &center))
        .collect();
    subjects.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

    let mut events = Vec::new();
    for t in sample.distinct_event_times() {
        let count = sample.events_at(t) as f64;
        let mut z_sum = DVector::zeros(d);
        for r in records.iter().filter(|r| r.time == t && r.status == 1) {
            z_sum += DVector::from_column_slice(&r.covariates) - &center;
        }
        // subjects[..cutoff] have time >= t: the risk set at t
        let cutoff = subjects.partition_point(|(time, _)| *time >= t);
        events.push((t, count, z_sum, cutoff));
    }
    Ok(PartialLikelihoodData { events, subjects, d, center })
}

/// Log partial likelihood, score, and information at beta, plus the
/// at-risk exponential sums S0 at each event time (for the Breslow
/// baseline). Event times are processed in descending risk-set order so
/// each subject's risk contribution is accumulated once.
fn evaluate(
    data: &PartialLikelihoodData,
    beta: &DVector<f64>,
) -> (f64, DVector<f64>, DMatrix<f64>, Vec<f64>) {
    let d = data.d;
    let mut loglik = 0.0;
    let mut score = DVector::zeros(d);
    let mut info = DMatrix::zeros(d, d);
    let mut s0_at_event = vec![0.0; data.events.len()];

    let mut s0 = 0.0;
    let mut s1 = DVector::zeros(d);
    let mut s2 = DMatrix::zeros(d, d);
    let mut next_subject = 0;
    // descending event times have nondecreasing at-risk cutoffs
    for (idx, (_, count, z_sum, cutoff)) in data.events.iter().enumerate().rev() {
        while next_subject < *cutoff {
            let (_, z) = &data.subjects[next_subject];
            let w = (beta.dot(z)).exp();
            s0 += w;
            s1.axpy(w, z, 1.0);
            s2.ger(w, z, z, 1.0);
            next_subject += 1;
        }
        s0_at_event[idx] = s0;
        let e = &s1 / s0;
        loglik += beta.dot(z_sum) - count * s0.ln();
        score += z_sum - &e * *count;
        info += (&s2 / s0 - &e * e.transpose()) * *count;
    }
    (loglik, score, info, s0_at_event)
}

/// Sup norm that is zero on an empty vector (the null model has no score).
fn sup_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Fits the Cox model by Newton iterations from beta = 0 with step-halving
/// on likelihood decrease; ties are handled with the Breslow form. The
/// fit is invariant to covariate centering, which is applied internally and
/// undone in the Breslow baseline scale. A sample without covariates fits
/// the null model: beta is empty and the Breslow baseline is the
/// Nelson-Aalen cumulative hazard.
pub fn cox_fit(sample: &RightCensoredSample, options: CoxOptions) -> Result<CoxFit> {
    if !(options.tol > 0.0) {
        return Err(Error::validation(format!("tolerance must be positive, got {}", options.tol)));
    }
    let data = prepare(sample)?;
    let d = data.d;
    let mut beta = DVector::zeros(d);
    let (mut loglik, mut score, mut info, mut s0s) = evaluate(&data, &beta);
    let mut loglik_path = vec![loglik];
    let mut converged = sup_norm(&score) < options.tol;

    let mut iter = 0;
    while !converged && iter < options.max_iter {
        iter += 1;
        let chol = Cholesky::new(info.clone()).ok_or_else(|| {
            Error::numerical("information matrix is singular; coefficients are not identifiable")
        })?;
        let direction = chol.solve(&score);
        // halve until the likelihood stops decreasing; the slack covers
        // rounding noise once steps move the loglik by under an ulp
        let mut step = 1.0;
        let mut accepted = None;
        let slack = 1e-12 * loglik.abs().max(1.0);
        for _ in 0..=20 {
            let candidate = &beta + &direction * step;
            let eval = evaluate(&data, &candidate);
            if eval.0 >= loglik - slack {
                accepted = Some((candidate, eval));
                break;
            }
            step *= 0.5;
        }
        let Some((candidate, eval)) = accepted else {
            return Err(Error::non_convergence(
                "likelihood decreased along the Newton direction after 20 halvings",
            ));
        };
        beta = candidate;
        (loglik, score, info, s0s) = eval;
        loglik_path.push(loglik);
        converged = sup_norm(&score) < options.tol;
        if !converged && sup_norm(&beta) > 50.0 {
            return Err(Error::non_convergence(
                "coefficients diverged (monotone likelihood); the risk sets separate the groups",
            ));
        }
    }

    // Breslow increments d/S0, rescaled to undo the internal centering:
    // S0_uncentered = S0_centered * exp(beta . center)
    let scale = (-beta.dot(&data.center)).exp();
    let times: Vec<f64> = data.events.iter().map(|e| e.0).collect();
    let jumps: Vec<f64> = data
        .events
        .iter()
        .zip(&s0s)
        .map(|((_, count, _, _), s0)| count / s0 * scale)
        .collect();
    let breslow = StepFunction::new(0.0, times, jumps)?;

    Ok(CoxFit {
        beta: beta.iter().cloned().collect(),
        information: (0..d)
            .map(|i| (0..d).map(|j| info[(i, j)]).collect())
            .collect(),
        loglik_path,
        breslow,
        converged,
        score_norm: sup_norm(&score),
    })
}

/// Score test of beta = beta0: U(b0)' I(b0)^-1 U(b0) against chi-squared
/// with d degrees of freedom. At beta0 = 0 with one binary covariate this
/// is the two-sample log-rank statistic without the tie correction.
pub fn cox_score_test(sample: &RightCensoredSample, beta0: &[f64]) -> Result<TestResult> {
    let data = prepare(sample)?;
    if data.d == 0 {
        return Err(Error::validation("the score test needs at least one covariate"));
    }
    if beta0.len() != data.d {
        return Err(Error::validation(format!(
            "beta0 has dimension {}, expected {}",
            beta0.len(),
            data.d
        )));
    }
    if beta0.iter().any(|b| !b.is_finite()) {
        return Err(Error::validation("beta0 has a non-finite entry"));
    }
    let beta = DVector::from_column_slice(beta0);
    let (_, score, info, _) = evaluate(&data, &beta);
    let chol = Cholesky::new(info.clone()).ok_or_else(|| {
        Error::numerical("information matrix is singular at beta0")
    })?;
    let statistic = score.dot(&chol.solve(&score)).max(0.0);
    let d = data.d;
    Ok(TestResult {
        statistic,
        z: (d == 1).then(|| score[0] / info[(0, 0)].sqrt()),
        df: d,
        p_value: chi_squared_sf(statistic, d as f64)?,
        groups: vec![],
        observed: vec![],
        expected: vec![],
        variance: (0..d)
            .map(|i| (0..d).map(|j| info[(i, j)]).collect())
            .collect(),
        dropped_groups: vec![],
        smr: None,
    })
}

/// Kernel-smoothed baseline hazard from the Breslow cumulative hazard.
pub fn smoothed_baseline(
    fit: &CoxFit,
    bandwidth: f64,
    kernel: Kernel,
    grid: &[f64],
) -> Result<SampledCurve> {
    smoothed_increments(&fit.breslow, bandwidth, kernel, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::RightCensoredRecord;
    use crate::logrank::{k_sample_logrank, WeightSpec};

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

    #[test]
    fn exchangeable_groups_fit_at_zero() {
        // both covariate levels share the same event and censoring times,
        // so the score vanishes at 0 and Newton stops there
        let sample = with_covariates(&[
            (1.0, 1, &[0.0]),
            (2.0, 1, &[0.0]),
            (3.0, 0, &[0.0]),
            (1.0, 1, &[1.0]),
            (2.0, 1, &[1.0]),
            (3.0, 0, &[1.0]),
        ]);
        let fit = cox_fit(&sample, CoxOptions::default()).unwrap();
        assert!(fit.converged);
        assert_eq!(fit.beta, vec![0.0]);
        assert_eq!(fit.score_norm, 0.0);
    }

    #[test]
    fn null_model_breslow_is_nelson_aalen() {
        // no covariates: every risk weight is exactly 1.0, so the Breslow
        // increments d/S0 are bitwise the Nelson-Aalen increments d/Y
        let sample = RightCensoredSample::from_times(
            &[1.0, 2.0, 2.0, 3.0, 4.0, 5.0],
            &[1, 1, 1, 0, 1, 0],
        )
        .unwrap();
        let fit = cox_fit(&sample, CoxOptions::default()).unwrap();
        assert!(fit.converged);
        assert!(fit.beta.is_empty());
        assert_eq!(fit.score_norm, 0.0);
        let na = crate::nonparam::nelson_aalen(&sample).unwrap();
        assert_eq!(fit.breslow.jump_times(), na.estimate.jump_times());
        assert_eq!(fit.breslow.jump_sizes(), na.estimate.jump_sizes());
    }

    #[test]
    fn fit_matches_grid_search_oracle() {
        let sample = with_covariates(&[
            (1.0, 1, &[0.0]),
            (2.0, 1, &[1.0]),
            (3.0, 0, &[0.0]),
            (4.0, 1, &[1.0]),
        ]);
        let fit = cox_fit(&sample, CoxOptions::default()).unwrap();
        assert!(fit.converged);

        let data = prepare(&sample).unwrap();
        let mut best = (f64::NEG_INFINITY, f64::NAN);
        let mut b = -5.0;
        while b <= 5.0 {
            let (ll, _, _, _) = evaluate(&data, &DVector::from_element(1, b));
            if ll > best.0 {
                best = (ll, b);
            }
            b += 1e-4;
        }
        assert!(
            (fit.beta[0] - best.1).abs() <= 2e-4,
            "newton {} vs grid {}",
            fit.beta[0],
            best.1
        );
    }

    #[test]
    fn loglik_path_never_decreases() {
        let sample = with_covariates(&[
            (1.0, 1, &[0.3, -1.0]),
            (2.0, 1, &[1.1, 0.5]),
            (2.5, 0, &[-0.4, 0.2]),
            (3.0, 1, &[0.9, -0.3]),
            (4.0, 1, &[-1.2, 1.4]),
            (5.0, 0, &[0.1, 0.8]),
        ]);
        let fit = cox_fit(&sample, CoxOptions::default()).unwrap();
        assert!(fit.converged);
        for w in fit.loglik_path.windows(2) {
            // nondecreasing up to the rounding slack of the acceptance rule
            let slack = 1e-12 * w[0].abs().max(1.0);
            assert!(w[1] >= w[0] - slack, "likelihood decreased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn fit_is_invariant_to_covariate_centering() {
        let raw = [
            (1.0, 1, 10.3),
            (2.0, 1, 11.1),
            (2.5, 0, 9.6),
            (3.0, 1, 10.9),
            (4.0, 1, 8.8),
            (5.0, 0, 10.1),
        ];
        let mean = raw.iter().map(|r| r.2).sum::<f64>() / raw.len() as f64;
        let entries: Vec<(f64, u8, Vec<f64>)> =
            raw.iter().map(|&(t, s, z)| (t, s, vec![z])).collect();
        let centered: Vec<(f64, u8, Vec<f64>)> =
            raw.iter().map(|&(t, s, z)| (t, s, vec![z - mean])).collect();
        let build = |rows: &[(f64, u8, Vec<f64>)]| {
            with_covariates(
                &rows
                    .iter()
                    .map(|(t, s, z)| (*t, *s, z.as_slice()))
                    .collect::<Vec<_>>(),
            )
        };
        let a = cox_fit(&build(&entries), CoxOptions::default()).unwrap();
        let b = cox_fit(&build(&centered), CoxOptions::default()).unwrap();
        assert!((a.beta[0] - b.beta[0]).abs() < 1e-10);
        assert!((a.information[0][0] - b.information[0][0]).abs() < 1e-10);
        // the baseline differs by the factor exp(beta * mean), undone by
        // the internal scale correction only up to that reparametrization
        let shift = (a.beta[0] * mean).exp();
        for (ja, jb) in a.breslow.jump_sizes().iter().zip(b.breslow.jump_sizes()) {
            assert!((ja * shift - jb).abs() < 1e-12 * shift.max(1.0));
        }
    }

    #[test]
    fn breslow_mass_accounts_for_every_event() {
        let sample = with_covariates(&[
            (1.0, 1, &[0.3]),
            (1.0, 1, &[1.1]),
            (2.5, 0, &[-0.4]),
            (3.0, 1, &[0.9]),
            (4.0, 1, &[-1.2]),
            (5.0, 0, &[0.1]),
        ]);
        let fit = cox_fit(&sample, CoxOptions::default()).unwrap();
        // sum over subjects of exp(beta'Z_i) A0(T_i) telescopes to the
        // total cumulative intensity, which equals the event count at the
        // fitted baseline
        let total: f64 = sample
            .records()
            .iter()
            .map(|r| (fit.beta[0] * r.covariates[0]).exp() * fit.breslow.value(r.time))
            .sum();
        assert!((total - sample.n_events() as f64).abs() < 1e-10);
    }

    #[test]
    fn monotone_likelihood_is_reported() {
        // the high-covariate subjects always die first, so the likelihood
        // is monotone in beta; the small covariate spacing keeps the score
        // above tolerance while the coefficient runs past the guard
        let sample = with_covariates(&[
            (1.0, 1, &[0.1]),
            (2.0, 1, &[0.1]),
            (3.0, 1, &[0.0]),
            (4.0, 1, &[0.0]),
        ]);
        let err = cox_fit(&sample, CoxOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NonConvergence(_)), "{err}");
    }

    #[test]
    fn duplicate_covariate_columns_are_singular() {
        let sample = with_covariates(&[
            (1.0, 1, &[0.3, 0.3]),
            (2.0, 1, &[1.1, 1.1]),
            (3.0, 1, &[0.9, 0.9]),
            (4.0, 0, &[0.2, 0.2]),
        ]);
        let err = cox_fit(&sample, CoxOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)), "{err}");
    }

    #[test]
    fn score_test_matches_logrank_without_tie_factor() {
        // tie-free two-group data: the tie factor is 1, so the score test
        // at 0 and the log-rank statistic coincide
        let entries = [
            (1.0, 1, 0),
            (2.0, 0, 0),
            (2.5, 1, 0),
            (1.5, 1, 1),
            (3.0, 1, 1),
            (4.0, 0, 1),
        ];
        let cox_sample = with_covariates(
            &entries
                .iter()
                .map(|&(t, s, g)| (t, s, if g == 0 { &[0.0][..] } else { &[1.0][..] }))
                .collect::<Vec<_>>(),
        );
        let lr_sample = RightCensoredSample::new(
            entries
                .iter()
                .map(|&(time, status, g)| RightCensoredRecord {
                    time,
                    status,
                    group: Some(g),
                    covariates: vec![],
                })
                .collect(),
        )
        .unwrap();
        let score = cox_score_test(&cox_sample, &[0.0]).unwrap();
        let lr = k_sample_logrank(&lr_sample, WeightSpec::Logrank, f64::INFINITY).unwrap();
        assert!(
            (score.statistic - lr.statistic).abs() < 1e-12,
            "score {} vs logrank {}",
            score.statistic,
            lr.statistic
        );
    }

    #[test]
    fn score_test_at_the_mle_is_zero_scale() {
        let sample = with_covariates(&[
            (1.0, 1, &[0.3]),
            (2.0, 1, &[1.1]),
            (2.5, 0, &[-0.4]),
            (3.0, 1, &[0.9]),
            (4.0, 1, &[-1.2]),
        ]);
        let fit = cox_fit(&sample, CoxOptions::default()).unwrap();
        let test = cox_score_test(&sample, &fit.beta).unwrap();
        assert!(test.statistic < 1e-12, "statistic {}", test.statistic);
    }

    #[test]
    fn score_test_is_invariant_to_covariate_scale() {
        let base = [
            (1.0, 1, 0.3),
            (2.0, 1, 1.1),
            (2.5, 0, -0.4),
            (3.0, 1, 0.9),
            (4.0, 1, -1.2),
        ];
        let scaled = |c: f64| {
            let rows: Vec<(f64, u8, Vec<f64>)> =
                base.iter().map(|&(t, s, z)| (t, s, vec![z * c])).collect();
            let views: Vec<(f64, u8, &[f64])> =
                rows.iter().map(|(t, s, z)| (*t, *s, z.as_slice())).collect();
            with_covariates(&views)
        };
        let a = cox_score_test(&scaled(1.0), &[0.0]).unwrap();
        let b = cox_score_test(&scaled(37.0), &[0.0]).unwrap();
        assert!((a.statistic - b.statistic).abs() < 1e-12);
    }

    #[test]
    fn smoothed_baseline_mass_matches_breslow_total() {
        let sample = with_covariates(&[
            (1.0, 1, &[0.3]),
            (2.0, 1, &[1.1]),
            (3.0, 1, &[0.9]),
            (4.0, 0, &[-0.2]),
        ]);
        let fit = cox_fit(&sample, CoxOptions::default()).unwrap();
        // integrate the smoothed hazard over a wide grid: quadrature mass
        // approaches the total Breslow increment
        let m = 20_000;
        let (lo, hi) = (-2.0, 8.0);
        let grid: Vec<f64> = (0..m)
            .map(|i| lo + (hi - lo) * (i as f64 + 0.5) / m as f64)
            .collect();
        let sm = smoothed_baseline(&fit, 1.5, Kernel::Epanechnikov, &grid).unwrap();
        let mass: f64 = sm.values.iter().sum::<f64>() * (hi - lo) / m as f64;
        let total: f64 = fit.breslow.jump_sizes().iter().sum();
        assert!((mass - total).abs() < 1e-3, "mass {mass} vs total {total}");
    }
}
