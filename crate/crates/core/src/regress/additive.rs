//! Aalen's additive hazards model: least-squares increments of the
//! cumulative regression functions at each event time.

use super::covariate_dim;
use crate::data::RightCensoredSample;
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::nonparam::{smoothed_increments, SampledCurve};
use crate::step::StepFunction;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct AdditiveFit {
    /// Cumulative coefficient paths B_0 (baseline) through B_p, jumping
    /// only at the event times where the at-risk design has full rank.
    pub b_hat: Vec<StepFunction>,
    /// Covariance increment of the coefficient jump at each full-rank
    /// event time, aligned with `rank_ok_times`; each is PSD.
    pub sigma_hat: Vec<Vec<Vec<f64>>>,
    /// Event times where the design had full rank; increments at other
    /// event times are skipped.
    pub rank_ok_times: Vec<f64>,
}

/// Least-squares solve of the at-risk design against the event indicator
/// at one time: rows (1, Z_i) for subjects at risk. Returns None when the
/// design is rank deficient at the 1e-10 relative threshold.
fn increment_at(
    design: &DMatrix<f64>,
    event_rows: &[usize],
) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let p1 = design.ncols();
    if design.nrows() < p1 {
        // fewer at-risk subjects than columns: rank deficient
        return None;
    }
    let qr = design.clone().col_piv_qr();
    let r = qr.r();
    let diag_max = (0..p1).map(|j| r[(j, j)].abs()).fold(0.0f64, f64::max);
    if diag_max == 0.0 || (0..p1).any(|j| r[(j, j)].abs() <= 1e-10 * diag_max) {
        return None;
    }
    let q = qr.q();
    // column i of the generalized inverse is P R^-1 q_i with q_i the i-th
    // row of Q; only event rows are needed for both the jump and its
    // covariance X^- diag(dN) (X^-)'
    let mut jump = DVector::zeros(p1);
    let mut cov = DMatrix::zeros(p1, p1);
    for &row in event_rows {
        let qi = q.row(row).transpose();
        let mut col = r.solve_upper_triangular(&qi)?;
        qr.p().inv_permute_rows(&mut col);
        jump += &col;
        cov.ger(1.0, &col, &col, 1.0);
    }
    Some((jump, cov))
}

/// Fits the additive model B(t) with design rows Y_i(s)(1, Z_i): at each
/// event time the increment is the least-squares solve of the at-risk
/// design against the event indicator, and its covariance is
/// X^- diag(dN) (X^-)'. Rank-deficient times are skipped and recorded.
pub fn aalen_additive(sample: &RightCensoredSample) -> Result<AdditiveFit> {
    let d = covariate_dim(sample)?;
    let p1 = d + 1;
    if sample.n() <= p1 {
        return Err(Error::validation(format!(
            "additive model needs more than {p1} subjects, got {}",
            sample.n()
        )));
    }
    if sample.n_events() == 0 {
        return Err(Error::validation("no events in the sample"));
    }
    let records = sample.records();
    let mut rank_ok_times = Vec::new();
    let mut jumps: Vec<Vec<f64>> = vec![Vec::new(); p1];
    let mut sigma_hat = Vec::new();
    for t in sample.distinct_event_times() {
        let at_risk: Vec<usize> = (0..records.len())
            .filter(|&i| records[i].time >= t)
            .collect();
        let mut design = DMatrix::zeros(at_risk.len(), p1);
        let mut event_rows = Vec::new();
        for (row, &i) in at_risk.iter().enumerate() {
            design[(row, 0)] = 1.0;
            for j in 0..d {
                design[(row, j + 1)] = records[i].covariates[j];
            }
            if records[i].time == t && records[i].status == 1 {
                event_rows.push(row);
            }
        }
        let Some((jump, cov)) = increment_at(&design, &event_rows) else {
            continue;
        };
        rank_ok_times.push(t);
        for j in 0..p1 {
            jumps[j].push(jump[j]);
        }
        sigma_hat.push(
            (0..p1)
                .map(|i| (0..p1).map(|j| cov[(i, j)]).collect())
                .collect(),
        );
    }
    let b_hat = jumps
        .into_iter()
        .map(|j| StepFunction::new(0.0, rank_ok_times.clone(), j))
        .collect::<Result<Vec<_>>>()?;
    Ok(AdditiveFit { b_hat, sigma_hat, rank_ok_times })
}

/// Kernel-smooths each cumulative coefficient into a hazard-scale curve.
pub fn aalen_smoothed_coefficients(
    fit: &AdditiveFit,
    bandwidth: f64,
    kernel: Kernel,
    grid: &[f64],
) -> Result<Vec<SampledCurve>> {
    fit.b_hat
        .iter()
        .map(|b| smoothed_increments(b, bandwidth, kernel, grid))
        .collect()
}
