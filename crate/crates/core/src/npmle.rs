//! Nonparametric maximum likelihood for interval-censored data.
//!
//! Observations are intervals (L_i, R_i] known to contain the event time
//! (L = R encodes an exactly observed event, R = +inf a right-censored
//! one). The estimator places probability masses on a small set of support
//! columns of the endpoint grid and maximizes prod_i P(T in (L_i, R_i]) by
//! the self-consistency (EM) iteration
//!
//! p_j <- (1/n) sum_i alpha_ij p_j / (sum_l alpha_il p_l),
//!
//! whose fixed points with the Lagrange certificate d_j(p) <= n for every
//! column are exactly the maximizers. Mass inside a support column has no
//! identified distribution; only the column totals are estimable.

use crate::data::IntervalCensoredSample;
use crate::error::{Error, Result};
use serde::Serialize;

/// Default EM convergence tolerance on max |delta p|.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Default EM iteration cap.
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// Endpoint grid, incidence matrix, and support flags for one sample.
#[derive(Debug, Clone, Serialize)]
pub struct TurnbullProblem {
    /// Ordered distinct endpoints s_0 = 0 < s_1 < ... < s_m (s_m may be
    /// +inf); column j is the cell (s_{j-1}, s_j].
    pub s_grid: Vec<f64>,
    /// alpha[i][j] = 1 iff observation i's interval contains column j:
    /// s_j in (L_i, R_i], or s_j = L_i for an exact observation.
    pub alpha: Vec<Vec<bool>>,
    /// Columns that can carry mass: s_{j-1} is a left endpoint and s_j a
    /// right endpoint, or s_j is an exactly observed value.
    pub support: Vec<bool>,
}

impl TurnbullProblem {
    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    pub fn n_columns(&self) -> usize {
        self.s_grid.len() - 1
    }

    /// Indices of the support columns, ascending.
    pub fn support_columns(&self) -> Vec<usize> {
        (0..self.n_columns()).filter(|&j| self.support[j]).collect()
    }

    /// The half-open cell (s_{j-1}, s_j] of column j.
    pub fn column_interval(&self, j: usize) -> (f64, f64) {
        (self.s_grid[j], self.s_grid[j + 1])
    }
}

/// Builds the endpoint grid and incidence structure.
pub fn turnbull_intervals(sample: &IntervalCensoredSample) -> Result<TurnbullProblem> {
    for (i, r) in sample.records().iter().enumerate() {
        if r.is_exact() && r.left == 0.0 {
            return Err(Error::validation(format!(
                "record {i}: exact observation at time 0 has no mass cell above s_0 = 0"
            )));
        }
    }
    let mut s_grid = vec![0.0];
    for r in sample.records() {
        s_grid.push(r.left);
        s_grid.push(r.right);
    }
    s_grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    s_grid.dedup();
    let m = s_grid.len() - 1;

    let alpha: Vec<Vec<bool>> = sample
        .records()
        .iter()
        .map(|r| {
            (1..=m)
                .map(|j| {
                    let s = s_grid[j];
                    if r.is_exact() {
                        s == r.left
                    } else {
                        r.left < s && s <= r.right
                    }
                })
                .collect()
        })
        .collect();

    let mut is_left = vec![false; m + 1];
    let mut is_right = vec![false; m + 1];
    let mut is_exact = vec![false; m + 1];
    for r in sample.records() {
        // s_grid holds every endpoint, so the lookups cannot fail
        let li = s_grid.partition_point(|&s| s < r.left);
        let ri = s_grid.partition_point(|&s| s < r.right);
        is_left[li] = true;
        is_right[ri] = true;
        if r.is_exact() {
            is_exact[li] = true;
        }
    }
    let support: Vec<bool> = (1..=m)
        .map(|j| (is_left[j - 1] && is_right[j]) || is_exact[j])
        .collect();

    Ok(TurnbullProblem { s_grid, alpha, support })
}

/// Lagrange-multiplier optimality certificate.
#[derive(Debug, Clone, Serialize)]
pub struct TurnbullCertificate {
    /// d_j = sum_i alpha_ij / (sum_l alpha_il p_l) over all columns.
    pub d: Vec<f64>,
    pub max_d: f64,
    /// Whether max_j d_j <= n + 1e-8, the optimality condition.
    pub is_npmle: bool,
}

/// Evaluates the certificate for a full-length column mass vector.
///
/// A vector maximizes the likelihood exactly when every d_j is at most n
/// (with equality on columns carrying mass). A row left with zero
/// probability makes its columns' d infinite and fails the certificate.
pub fn turnbull_certificate(
    problem: &TurnbullProblem,
    p: &[f64],
) -> Result<TurnbullCertificate> {
    let m = problem.n_columns();
    let n = problem.n();
    if p.len() != m {
        return Err(Error::domain(format!(
            "mass vector has {} entries for {m} columns",
            p.len()
        )));
    }
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::domain("mass vector entries must be finite and nonnegative"));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::domain(format!("mass vector sums to {total}, not 1")));
    }
    let denoms: Vec<f64> = problem
        .alpha
        .iter()
        .map(|row| row.iter().zip(p).filter(|(&a, _)| a).map(|(_, &x)| x).sum())
        .collect();
    let mut d = vec![0.0f64; m];
    for (row, &denom) in problem.alpha.iter().zip(&denoms) {
        for (j, &a) in row.iter().enumerate() {
            if a {
                d[j] += if denom > 0.0 { 1.0 / denom } else { f64::INFINITY };
            }
        }
    }
    let max_d = d.iter().cloned().fold(0.0f64, f64::max);
    Ok(TurnbullCertificate {
        d,
        max_d,
        is_npmle: max_d <= n as f64 + 1e-8,
    })
}

/// EM output: support masses, convergence state, and certificate.
#[derive(Debug, Clone, Serialize)]
pub struct TurnbullSolution {
    /// Support column indices, ascending.
    pub support_columns: Vec<usize>,
    /// Masses on the support columns, aligned with `support_columns`.
    pub p: Vec<f64>,
    /// Log-likelihood sum_i log P(T in (L_i, R_i]) at the returned masses.
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub certificate: TurnbullCertificate,
}

impl TurnbullSolution {
    /// Masses embedded into the full column vector (zeros off support).
    pub fn full_masses(&self, n_columns: usize) -> Vec<f64> {
        let mut full = vec![0.0; n_columns];
        for (&j, &mass) in self.support_columns.iter().zip(&self.p) {
            full[j] = mass;
        }
        full
    }
}

/// Runs the self-consistency iteration from the uniform start.
pub fn turnbull_em(
    problem: &TurnbullProblem,
    tol: f64,
    max_iter: usize,
) -> Result<TurnbullSolution> {
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
    }
    let n = problem.n();
    let sup_cols = problem.support_columns();
    let k = sup_cols.len();
    if k == 0 {
        return Err(Error::validation("no support columns; no mass can be placed"));
    }
    // per-row positions into the support vector
    let rows: Vec<Vec<usize>> = problem
        .alpha
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let positions: Vec<usize> = sup_cols
                .iter()
                .enumerate()
                .filter(|(_, &j)| row[j])
                .map(|(pos, _)| pos)
                .collect();
            if positions.is_empty() {
                return Err(Error::validation(format!(
                    "observation {i} covers no support column"
                )));
            }
            Ok(positions)
        })
        .collect::<Result<_>>()?;

    let loglik_at = |p: &[f64]| -> f64 {
        rows.iter()
            .map(|positions| positions.iter().map(|&pos| p[pos]).sum::<f64>().ln())
            .sum()
    };

    let mut p = vec![1.0 / k as f64; k];
    let mut loglik = loglik_at(&p);
    let mut iterations = 0;
    let mut converged = k == 1; // a single column is already the optimum
    while !converged && iterations < max_iter {
        iterations += 1;
        let mut next = vec![0.0f64; k];
        for positions in &rows {
            let denom: f64 = positions.iter().map(|&pos| p[pos]).sum();
            for &pos in positions {
                next[pos] += p[pos] / denom;
            }
        }
        for x in &mut next {
            *x /= n as f64;
        }
        let delta = p
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        p = next;
        let next_loglik = loglik_at(&p);
        if next_loglik < loglik - 1e-12 {
            return Err(Error::numerical(format!(
                "EM log-likelihood decreased from {loglik} to {next_loglik}"
            )));
        }
        loglik = next_loglik;
        if delta < tol {
            converged = true;
        }
    }
    let certificate = turnbull_certificate(problem, &{
        let mut full = vec![0.0; problem.n_columns()];
        for (&j, &mass) in sup_cols.iter().zip(&p) {
            full[j] = mass;
        }
        full
    })?;
    Ok(TurnbullSolution {
        support_columns: sup_cols,
        p,
        loglik,
        iterations,
        converged,
        certificate,
    })
}
