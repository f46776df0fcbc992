//! Finite-state Markov estimation: transition hazards, occupation
//! probabilities, competing-risks incidence, and excess mortality.
//!
//! The cumulative transition hazard matrix A(t) has off-diagonal increments
//! dN_hj(t)/Y_h(t) and diagonal increments -sum_{j != h} dN_hj(t)/Y_h(t), so
//! each increment row sums to zero. Transition probabilities come from the
//! matrix product-integral P(s,t) = prod_{(s,t]} (I + dA); the
//! Chapman-Kolmogorov identity P(s,u) P(u,t) = P(s,t) then holds up to
//! rounding only, since both sides multiply the same ordered factors but
//! group them differently.
//!
//! The covariance of vec(P(s,t)) uses the recursion over event times
//!
//! V <- G V G' + [I (x) P(s,u-)] C(u) [I (x) P(s,u-)]',  G = (I + dA(u))' (x) I
//!
//! with C(u) the plug-in covariance of the increment matrix: rows of the
//! transition count matrix are multinomial given the risk set, so
//! Cov(dA_hj, dA_hj') = (delta_jj' n_hj - n_hj n_hj' / Y_h) / Y_h^2 with the
//! stay count n_hh = Y_h - sum_{j != h} n_hj filling the diagonal cell. In
//! the two-state absorbing case this reproduces the Greenwood variance of
//! the product-limit reduction term by term.

use crate::data::{MultiStateHistory, RightCensoredSample};
use crate::error::{Error, Result};
use crate::nonparam::{kaplan_meier, nelson_aalen};
use crate::step::{product_integral_matrix, MatrixStepFunction, StepFunction};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Fitted cumulative transition hazards for a finite-state process.
#[derive(Debug, Clone)]
pub struct TransitionEstimate {
    pub n_states: usize,
    pub n_subjects: usize,
    /// Cumulative hazard matrix A(t); rows of every increment sum to zero.
    pub a_hat: MatrixStepFunction,
    /// Transition counts dN(t) at each jump time (diagonal zero).
    counts: Vec<DMatrix<f64>>,
    /// Per-state risk set sizes Y_h(t) just before each jump time.
    risk: Vec<DVector<f64>>,
}

impl TransitionEstimate {
    /// Transition probability matrix P(s, t) by matrix product-integral.
    pub fn p_hat(&self, s: f64, t: f64) -> Result<DMatrix<f64>> {
        product_integral_matrix(&self.a_hat, s, t)
    }

    pub fn jump_times(&self) -> &[f64] {
        self.a_hat.jump_times()
    }
}

/// Fits the transition hazard and occupation probability estimator.
pub fn aalen_johansen(history: &MultiStateHistory) -> Result<TransitionEstimate> {
    let k = history.n_states();
    let times = history.transition_times();
    let mut jumps = Vec::with_capacity(times.len());
    let mut counts = Vec::with_capacity(times.len());
    let mut risk = Vec::with_capacity(times.len());
    for &t in &times {
        let y = DVector::from_iterator(k, (0..k).map(|h| history.risk_before(t, h) as f64));
        let mut dn = DMatrix::zeros(k, k);
        let mut da = DMatrix::zeros(k, k);
        for h in 0..k {
            let mut out = 0.0;
            for j in 0..k {
                if j == h {
                    continue;
                }
                let n_hj = history.transitions_at(t, h, j) as f64;
                if n_hj > 0.0 {
                    // a transition out of h at t implies Y_h(t-) >= 1
                    dn[(h, j)] = n_hj;
                    da[(h, j)] = n_hj / y[h];
                    out += n_hj / y[h];
                }
            }
            da[(h, h)] = -out;
        }
        jumps.push(da);
        counts.push(dn);
        risk.push(y);
    }
    Ok(TransitionEstimate {
        n_states: k,
        n_subjects: history.n_subjects(),
        a_hat: MatrixStepFunction::new(DMatrix::zeros(k, k), times, jumps)?,
        counts,
        risk,
    })
}

/// Outcome of the complete-observation identity check.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CompleteObservationCheck {
    pub pass: bool,
    pub max_deviation: f64,
}

/// For a fully observed history, occupancy counts are propagated exactly by
/// the estimator: Y(t+) = Y(s+) P(s,t) for all pairs of jump times.
pub fn aj_complete_observation_check(
    history: &MultiStateHistory,
) -> Result<CompleteObservationCheck> {
    if !history.is_fully_observed() {
        return Err(Error::validation(
            "complete-observation check requires an uncensored history",
        ));
    }
    let est = aalen_johansen(history)?;
    Ok(complete_observation_deviation(history, &est))
}

fn complete_observation_deviation(
    history: &MultiStateHistory,
    est: &TransitionEstimate,
) -> CompleteObservationCheck {
    let k = est.n_states;
    let mut grid = vec![0.0];
    grid.extend(est.jump_times().iter().copied().filter(|&t| t > 0.0));
    let occupancy: Vec<DVector<f64>> = grid
        .iter()
        .map(|&t| DVector::from_iterator(k, (0..k).map(|h| history.occupancy_at(t, h) as f64)))
        .collect();
    let mut max_dev = 0.0f64;
    for (si, &s) in grid.iter().enumerate() {
        for (ti, &t) in grid.iter().enumerate().skip(si) {
            let p = match est.p_hat(s, t) {
                Ok(p) => p,
                Err(_) => continue,
            };
            let propagated = p.transpose() * &occupancy[si];
            for h in 0..k {
                max_dev = max_dev.max((propagated[h] - occupancy[ti][h]).abs());
            }
        }
    }
    CompleteObservationCheck {
        pass: max_dev <= 1e-10,
        max_deviation: max_dev,
    }
}

/// Plug-in covariance of the increment matrix at one event time, as a
/// k^2 x k^2 matrix over column-major cell indices (h, j) -> j k + h.
fn increment_covariance(dn: &DMatrix<f64>, y: &DVector<f64>) -> DMatrix<f64> {
    let k = y.len();
    let idx = |h: usize, j: usize| j * k + h;
    let mut c = DMatrix::zeros(k * k, k * k);
    for h in 0..k {
        let yh = y[h];
        if yh == 0.0 {
            continue;
        }
        // counts per destination, stay count on the diagonal cell
        let mut q = vec![0.0; k];
        let mut moved = 0.0;
        for j in 0..k {
            if j != h {
                q[j] = dn[(h, j)];
                moved += dn[(h, j)];
            }
        }
        q[h] = yh - moved;
        for j in 0..k {
            for j2 in 0..k {
                let delta = if j == j2 { q[j] } else { 0.0 };
                c[(idx(h, j), idx(h, j2))] = (delta - q[j] * q[j2] / yh) / (yh * yh);
            }
        }
    }
    c
}

/// Covariance matrix of vec(P(s,t)) (column-major), k^2 x k^2.
pub fn aj_covariance(est: &TransitionEstimate, s: f64, t: f64) -> Result<DMatrix<f64>> {
    if !(s <= t) {
        return Err(Error::domain(format!(
            "covariance needs s <= t, got s={s}, t={t}"
        )));
    }
    let k = est.n_states;
    let kk = k * k;
    let times = est.jump_times();
    let lo = times.partition_point(|&u| u <= s);
    let hi = times.partition_point(|&u| u <= t);
    let eye = DMatrix::<f64>::identity(k, k);
    let mut v = DMatrix::<f64>::zeros(kk, kk);
    let mut prefix = eye.clone(); // P(s, u-)
    for i in lo..hi {
        let factor = &eye + est.a_hat.jump_at_index(i);
        // carry earlier terms forward: P(u', t) grows by this factor on the right
        let g = factor.transpose().kronecker(&eye);
        v = &g * v * g.transpose();
        let m = eye.kronecker(&prefix);
        let c = increment_covariance(&est.counts[i], &est.risk[i]);
        v += &m * c * m.transpose();
        prefix *= factor;
    }
    Ok(v)
}

/// Cumulative incidence decomposition for competing risks.
#[derive(Debug, Clone, Serialize)]
pub struct CIFEstimate {
    pub n: usize,
    /// Distinct cause labels in ascending order.
    pub causes: Vec<i64>,
    /// Per-cause cumulative incidence, aligned with `causes`.
    pub cif: Vec<StepFunction>,
    /// All-cause survival; its drop at each event time is the sum of the
    /// per-cause incidence jumps, so survival plus total incidence
    /// telescopes back to 1 at every event time.
    pub overall_survival: StepFunction,
}

/// Splits all-cause mortality into per-cause cumulative incidence curves
/// F_j(t) = sum_{u <= t} S(u-) dN_j(u)/Y(u), with S the all-cause
/// product-limit curve.
pub fn competing_risks_cif(sample: &RightCensoredSample) -> Result<CIFEstimate> {
    for (i, r) in sample.records().iter().enumerate() {
        if r.status == 1 && r.group.is_none() {
            return Err(Error::validation(format!(
                "record {i}: event carries no cause label"
            )));
        }
    }
    let causes: Vec<i64> = {
        let mut c: Vec<i64> = sample
            .records()
            .iter()
            .filter(|r| r.status == 1)
            .map(|r| r.group.unwrap())
            .collect();
        c.sort_unstable();
        c.dedup();
        c
    };
    let times = sample.distinct_event_times();
    let mut cif_jumps = vec![Vec::with_capacity(times.len()); causes.len()];
    let mut surv_jumps = Vec::with_capacity(times.len());
    let mut s_minus = 1.0f64;
    for &t in &times {
        let y = sample.risk_at(t) as f64;
        let mut drop = 0.0;
        for (ci, &cause) in causes.iter().enumerate() {
            let d_c = sample
                .records()
                .iter()
                .filter(|r| r.status == 1 && r.time == t && r.group == Some(cause))
                .count() as f64;
            let jump = s_minus * d_c / y;
            cif_jumps[ci].push(jump);
            drop += jump;
        }
        surv_jumps.push(-drop);
        s_minus -= drop;
    }
    let cif = cif_jumps
        .into_iter()
        .map(|jumps| StepFunction::new(0.0, times.clone(), jumps))
        .collect::<Result<Vec<_>>>()?;
    Ok(CIFEstimate {
        n: sample.n(),
        causes,
        cif,
        overall_survival: StepFunction::new(1.0, times, surv_jumps)?,
    })
}

/// Excess mortality relative to known per-subject background hazards.
#[derive(Debug, Clone, Serialize)]
pub struct ExcessMortality {
    /// Quadrature nodes merged with the observed times.
    pub times: Vec<f64>,
    /// Cumulative excess hazard: observed cumulative hazard minus the
    /// integrated population share sum_i Y_i(s) mu_i(s) / Y(s).
    pub gamma: Vec<f64>,
    /// Product-limit curve corrected by the population hazard,
    /// KM(t) exp(+integral); may exceed 1 when excess mortality is negative.
    pub corrected_survival: Vec<f64>,
    /// Variance of the martingale part (the observed-hazard term).
    pub sigma2: Vec<f64>,
}

/// Computes the cumulative excess hazard Gamma(t) and the corrected
/// survival curve. `mu(i, s)` is subject i's known background hazard at
/// time s; the continuous part is integrated by the trapezoid rule on a
/// grid of the given step merged with all observed times.
pub fn excess_mortality(
    sample: &RightCensoredSample,
    mu: &dyn Fn(usize, f64) -> f64,
    step: f64,
) -> Result<ExcessMortality> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::domain(format!(
            "quadrature step must be positive and finite, got {step}"
        )));
    }
    let na = nelson_aalen(sample)?;
    let km = kaplan_meier(sample)?;
    let t_max = sample
        .records()
        .iter()
        .map(|r| r.time)
        .fold(0.0f64, f64::max);

    let mut nodes: Vec<f64> = Vec::new();
    let mut g = 0.0;
    while g < t_max {
        nodes.push(g);
        g += step;
    }
    nodes.push(t_max);
    nodes.extend(sample.distinct_times());
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    nodes.dedup();

    let integrand = |s: f64| -> Result<f64> {
        let mut num = 0.0;
        let mut y = 0.0;
        for (i, r) in sample.records().iter().enumerate() {
            if r.time >= s {
                let m = mu(i, s);
                if !(m >= 0.0) || !m.is_finite() {
                    return Err(Error::domain(format!(
                        "background hazard mu({i}, {s}) = {m} is not finite and nonnegative"
                    )));
                }
                num += m;
                y += 1.0;
            }
        }
        // past the last observation both numerator and risk set vanish
        Ok(if y > 0.0 { num / y } else { 0.0 })
    };

    let mut gamma = Vec::with_capacity(nodes.len());
    let mut corrected = Vec::with_capacity(nodes.len());
    let mut sigma2 = Vec::with_capacity(nodes.len());
    let mut integral = 0.0;
    let mut prev_t = nodes[0];
    let mut prev_f = integrand(prev_t)?;
    for (m, &t) in nodes.iter().enumerate() {
        if m > 0 {
            let f = integrand(t)?;
            integral += 0.5 * (prev_f + f) * (t - prev_t);
            prev_t = t;
            prev_f = f;
        }
        gamma.push(na.estimate.value(t) - integral);
        corrected.push(km.estimate.value(t) * integral.exp());
        sigma2.push(na.sigma2.value(t));
    }
    Ok(ExcessMortality {
        times: nodes,
        gamma,
        corrected_survival: corrected,
        sigma2,
    })
}
