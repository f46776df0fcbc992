//! Bivariate survival surface from pairwise right-censored data.
//!
//! The estimator multiplies the two marginal product-limit curves by a
//! correction product over the event-time lattice:
//!
//! S(s, t) = S1(s) S2(t) prod_{u <= s, v <= t} (1 - L(u, v))
//!
//! where, with Y(u,v) = #{T1 >= u, T2 >= v} and cell counts
//! d10 = #{T1 = u observed, T2 >= v}, d01 = #{T1 >= u, T2 = v observed},
//! d11 = #{both observed at (u, v)},
//!
//! L = (d10 d01 - d11 Y) / ((Y - d10)(Y - d01)),
//!
//! using the convention 0/0 = 0. A cell with zero denominator and nonzero
//! numerator cannot arise from real counts: d10 = Y forces every pair at
//! risk to be an observed first-coordinate event at u, so d01 = d11 and the
//! numerator vanishes (symmetrically for d01 = Y). The branch is kept as a
//! defensive error.
//!
//! Counting is O(n + e1 e2) via suffix sums over the distinct-event grid.

use crate::data::{BivariatePair, RightCensoredSample};
use crate::error::{Error, Result};
use crate::nonparam::kaplan_meier;
use serde::Serialize;

/// The fitted surface on the grid {0, event times 1} x {0, event times 2}.
#[derive(Debug, Clone, Serialize)]
pub struct BivariateSurfaceEstimate {
    pub n: usize,
    /// First-coordinate grid: 0 followed by distinct observed event times.
    pub grid_s: Vec<f64>,
    /// Second-coordinate grid, same layout.
    pub grid_t: Vec<f64>,
    /// surface[i][j] = S(grid_s[i], grid_t[j]); row 0 and column 0 carry the
    /// marginal curves.
    pub surface: Vec<Vec<f64>>,
    /// Marginal product-limit curve at grid_s.
    pub marginal_s: Vec<f64>,
    pub marginal_t: Vec<f64>,
}

impl BivariateSurfaceEstimate {
    /// Surface value at an arbitrary point (right-continuous in each axis).
    pub fn value(&self, s: f64, t: f64) -> f64 {
        let i = self.grid_s.partition_point(|&u| u <= s);
        let j = self.grid_t.partition_point(|&v| v <= t);
        // partition_point >= 1 always since grid starts at 0 and s >= 0;
        // negative arguments fall back to the (0,0) cell, which is 1.
        self.surface[i.saturating_sub(1)][j.saturating_sub(1)]
    }
}

/// Correction factor 1 - L for one lattice cell, from integer counts.
///
/// Exact in f64 because every product of counts stays far below 2^53.
fn cell_factor(y: u64, d10: u64, d01: u64, d11: u64) -> Result<f64> {
    if y == 0 {
        return Ok(1.0);
    }
    let num = (d10 * d01) as f64 - (d11 * y) as f64;
    let den = ((y - d10) * (y - d01)) as f64;
    if den == 0.0 {
        if num == 0.0 {
            return Ok(1.0);
        }
        // Unreachable from genuine counting data; see module docs.
        return Err(Error::numerical(format!(
            "singular bivariate cell: Y = {y}, d10 = {d10}, d01 = {d01}, d11 = {d11}"
        )));
    }
    Ok(1.0 - num / den)
}

/// Fits the bivariate survival surface.
pub fn dabrowska(pairs: &[BivariatePair]) -> Result<BivariateSurfaceEstimate> {
    if pairs.is_empty() {
        return Err(Error::validation("bivariate sample is empty"));
    }
    for (i, p) in pairs.iter().enumerate() {
        for (name, t) in [("t1", p.t1), ("t2", p.t2)] {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::validation(format!(
                    "pair {i}: {name} = {t} is not finite and nonnegative"
                )));
            }
        }
        if p.status1 > 1 || p.status2 > 1 {
            return Err(Error::validation(format!("pair {i}: status is not 0 or 1")));
        }
    }
    let n = pairs.len();

    let t1: Vec<f64> = pairs.iter().map(|p| p.t1).collect();
    let s1: Vec<u8> = pairs.iter().map(|p| p.status1).collect();
    let t2: Vec<f64> = pairs.iter().map(|p| p.t2).collect();
    let s2: Vec<u8> = pairs.iter().map(|p| p.status2).collect();
    let km1 = kaplan_meier(&RightCensoredSample::from_times(&t1, &s1)?)?;
    let km2 = kaplan_meier(&RightCensoredSample::from_times(&t2, &s2)?)?;

    let mut events1: Vec<f64> = pairs.iter().filter(|p| p.status1 == 1).map(|p| p.t1).collect();
    events1.sort_by(|a, b| a.partial_cmp(b).unwrap());
    events1.dedup();
    let mut events2: Vec<f64> = pairs.iter().filter(|p| p.status2 == 1).map(|p| p.t2).collect();
    events2.sort_by(|a, b| a.partial_cmp(b).unwrap());
    events2.dedup();
    let e1 = events1.len();
    let e2 = events2.len();

    // Index i in 0..=e1: number of grid times <= T1, so T1 >= events1[i-1]
    // exactly when floor1(T1) >= i. Same for the second coordinate.
    let floor1 = |t: f64| events1.partition_point(|&u| u <= t);
    let floor2 = |t: f64| events2.partition_point(|&v| v <= t);
    let stride = e2 + 1;
    let idx = |i: usize, j: usize| i * stride + j;

    let mut at_risk = vec![0u64; (e1 + 1) * stride];
    let mut d10 = vec![0u64; (e1 + 1) * stride];
    let mut d01 = vec![0u64; (e1 + 1) * stride];
    let mut d11 = vec![0u64; (e1 + 1) * stride];
    for p in pairs {
        let (a, b) = (floor1(p.t1), floor2(p.t2));
        at_risk[idx(a, b)] += 1;
        if p.status1 == 1 {
            d10[idx(a, b)] += 1;
        }
        if p.status2 == 1 {
            d01[idx(a, b)] += 1;
        }
        if p.status1 == 1 && p.status2 == 1 {
            d11[idx(a, b)] += 1;
        }
    }
    // at_risk -> 2D suffix sum: Y(u_i, v_j) = #{T1 >= u_i, T2 >= v_j}.
    for i in 0..=e1 {
        for j in (0..e2).rev() {
            at_risk[idx(i, j)] += at_risk[idx(i, j + 1)];
        }
    }
    for i in (0..e1).rev() {
        for j in 0..=e2 {
            at_risk[idx(i, j)] += at_risk[idx(i + 1, j)];
        }
    }
    // d10 -> suffix over the second axis only: events at exactly u_i with
    // the partner still at risk at v_j.
    for i in 0..=e1 {
        for j in (0..e2).rev() {
            d10[idx(i, j)] += d10[idx(i, j + 1)];
        }
    }
    // d01 -> suffix over the first axis only.
    for j in 0..=e2 {
        for i in (0..e1).rev() {
            d01[idx(i, j)] += d01[idx(i + 1, j)];
        }
    }

    let grid_s: Vec<f64> = std::iter::once(0.0).chain(events1.iter().copied()).collect();
    let grid_t: Vec<f64> = std::iter::once(0.0).chain(events2.iter().copied()).collect();
    let marginal_s: Vec<f64> = grid_s.iter().map(|&u| km1.estimate.value(u)).collect();
    let marginal_t: Vec<f64> = grid_t.iter().map(|&v| km2.estimate.value(v)).collect();

    // prod[i][j] = product of cell factors over the rectangle (0, u_i] x
    // (0, v_j], built row by row so each cell is touched once.
    let mut surface = vec![vec![1.0f64; e2 + 1]; e1 + 1];
    for i in 1..=e1 {
        let mut row_prod = 1.0;
        for j in 1..=e2 {
            row_prod *= cell_factor(
                at_risk[idx(i, j)],
                d10[idx(i, j)],
                d01[idx(i, j)],
                d11[idx(i, j)],
            )?;
            surface[i][j] = surface[i - 1][j] * row_prod;
        }
    }
    for i in 0..=e1 {
        for j in 0..=e2 {
            surface[i][j] *= marginal_s[i] * marginal_t[j];
        }
    }

    Ok(BivariateSurfaceEstimate {
        n,
        grid_s,
        grid_t,
        surface,
        marginal_s,
        marginal_t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(t1: f64, s1: u8, t2: f64, s2: u8) -> BivariatePair {
        BivariatePair { t1, status1: s1, t2, status2: s2 }
    }

    fn empirical(pairs: &[BivariatePair], s: f64, t: f64) -> f64 {
        let hits = pairs.iter().filter(|p| p.t1 > s && p.t2 > t).count();
        hits as f64 / pairs.len() as f64
    }

    #[test]
    fn uncensored_surface_is_the_bivariate_empirical() {
        let samples: Vec<Vec<BivariatePair>> = vec![
            vec![pair(1.0, 1, 2.0, 1)],
            vec![pair(1.0, 1, 1.0, 1), pair(2.0, 1, 2.0, 1)],
            // ties in both coordinates, discordant ordering
            vec![
                pair(3.0, 1, 1.0, 1),
                pair(1.0, 1, 3.0, 1),
                pair(2.0, 1, 2.0, 1),
                pair(2.0, 1, 2.0, 1),
                pair(1.0, 1, 1.0, 1),
                pair(3.0, 1, 2.0, 1),
            ],
        ];
        for pairs in &samples {
            let fit = dabrowska(pairs).unwrap();
            for (i, &s) in fit.grid_s.iter().enumerate() {
                for (j, &t) in fit.grid_t.iter().enumerate() {
                    let want = empirical(pairs, s, t);
                    assert!(
                        (fit.surface[i][j] - want).abs() < 1e-12,
                        "n = {}, S({s}, {t}) = {} want {want}",
                        pairs.len(),
                        fit.surface[i][j],
                    );
                }
            }
            // off-grid lookups are right-continuous steps
            assert!((fit.value(0.5, 0.5) - empirical(pairs, 0.5, 0.5)).abs() < 1e-12);
            assert!((fit.value(10.0, 10.0) - empirical(pairs, 10.0, 10.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn censored_surface_hand_computed() {
        // Cell (1,1): Y = 3, d10 = d01 = d11 = 1 -> L = -1/2, factor 3/2.
        // Cells (1,2) and (2,1) have zero denominator with zero numerator.
        let pairs = vec![
            pair(1.0, 1, 1.0, 1),
            pair(1.0, 0, 2.0, 1),
            pair(2.0, 1, 1.0, 0),
        ];
        let fit = dabrowska(&pairs).unwrap();
        assert_eq!(fit.grid_s, vec![0.0, 1.0, 2.0]);
        assert_eq!(fit.grid_t, vec![0.0, 1.0, 2.0]);
        let two_thirds = 2.0 / 3.0;
        assert!((fit.surface[1][1] - two_thirds).abs() < 1e-15);
        assert!((fit.surface[1][0] - two_thirds).abs() < 1e-15);
        assert!((fit.surface[0][1] - two_thirds).abs() < 1e-15);
        assert_eq!(fit.surface[0][0], 1.0);
        assert_eq!(fit.surface[2][1], 0.0);
        assert_eq!(fit.surface[1][2], 0.0);
        assert_eq!(fit.surface[2][2], 0.0);
    }

    #[test]
    fn margins_agree_with_univariate_product_limit() {
        let pairs = vec![
            pair(1.0, 1, 4.0, 0),
            pair(2.0, 0, 1.0, 1),
            pair(3.0, 1, 2.0, 1),
            pair(4.0, 1, 2.0, 0),
            pair(2.5, 0, 3.0, 1),
        ];
        let fit = dabrowska(&pairs).unwrap();
        for i in 0..fit.grid_s.len() {
            assert_eq!(fit.surface[i][0], fit.marginal_s[i]);
        }
        for j in 0..fit.grid_t.len() {
            assert_eq!(fit.surface[0][j], fit.marginal_t[j]);
        }
        let t1: Vec<f64> = pairs.iter().map(|p| p.t1).collect();
        let s1: Vec<u8> = pairs.iter().map(|p| p.status1).collect();
        let km1 = kaplan_meier(&RightCensoredSample::from_times(&t1, &s1).unwrap()).unwrap();
        for (i, &u) in fit.grid_s.iter().enumerate() {
            assert_eq!(fit.marginal_s[i], km1.estimate.value(u));
        }
    }

    #[test]
    fn singular_cell_branch_is_defensive() {
        // Impossible counts (d10 = Y forces d01 = d11) still get a clean error.
        assert!(cell_factor(4, 4, 2, 1).is_err());
        // Possible exhausted cells resolve to factor 1 by the 0/0 convention.
        assert_eq!(cell_factor(4, 4, 2, 2).unwrap(), 1.0);
        assert_eq!(cell_factor(1, 1, 1, 1).unwrap(), 1.0);
        assert_eq!(cell_factor(0, 0, 0, 0).unwrap(), 1.0);
    }

    #[test]
    fn all_censored_coordinate_degenerates_to_margin() {
        let pairs = vec![pair(1.0, 0, 2.0, 1), pair(3.0, 0, 1.0, 1)];
        let fit = dabrowska(&pairs).unwrap();
        assert_eq!(fit.grid_s, vec![0.0]);
        assert_eq!(fit.surface.len(), 1);
        assert_eq!(fit.surface[0], fit.marginal_t);
    }

    #[test]
    fn rejects_bad_pairs() {
        assert!(dabrowska(&[]).is_err());
        assert!(dabrowska(&[pair(-1.0, 1, 1.0, 1)]).is_err());
        assert!(dabrowska(&[pair(1.0, 2, 1.0, 1)]).is_err());
        assert!(dabrowska(&[pair(1.0, 1, f64::NAN, 1)]).is_err());
    }
}
