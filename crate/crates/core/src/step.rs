//! Right-continuous step functions and product integrals.
//!
//! Every estimator in this crate is a pure jump process: a finite set of
//! strictly increasing jump times with exact jump sizes. `StepFunction`
//! keeps that bookkeeping explicit so identities like value(t-) + jump(t) =
//! value(t) hold to the last bit, and the product-integral routines consume
//! the jumps directly instead of a sampled grid.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::Serialize;

/// A right-continuous step function with finitely many jumps.
///
/// value(t) = initial_value + sum of jumps at times <= t. Jump times are
/// strictly increasing and nonnegative; jump sizes may be infinite (the
/// Greenwood variance jumps to +inf when a risk set is exhausted) but never
/// NaN.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepFunction {
    initial_value: f64,
    jump_times: Vec<f64>,
    jump_sizes: Vec<f64>,
}

impl StepFunction {
    /// Builds a step function, validating the jump bookkeeping.
    pub fn new(initial_value: f64, jump_times: Vec<f64>, jump_sizes: Vec<f64>) -> Result<Self> {
        if jump_times.len() != jump_sizes.len() {
            return Err(Error::validation(format!(
                "jump_times and jump_sizes lengths differ: {} vs {}",
                jump_times.len(),
                jump_sizes.len()
            )));
        }
        if !initial_value.is_finite() {
            return Err(Error::validation("initial value must be finite"));
        }
        for w in jump_times.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::validation(format!(
                    "jump times must be strictly increasing: {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if let Some(&t0) = jump_times.first() {
            if !(t0 >= 0.0) {
                return Err(Error::validation(format!("jump time {t0} is negative")));
            }
        }
        if jump_times.iter().any(|t| !t.is_finite()) {
            return Err(Error::validation("jump times must be finite"));
        }
        if jump_sizes.iter().any(|s| s.is_nan()) {
            return Err(Error::validation("jump sizes must not be NaN"));
        }
        Ok(StepFunction {
            initial_value,
            jump_times,
            jump_sizes,
        })
    }

    /// The constant function with no jumps.
    pub fn constant(value: f64) -> Self {
        StepFunction {
            initial_value: value,
            jump_times: Vec::new(),
            jump_sizes: Vec::new(),
        }
    }

    pub fn initial_value(&self) -> f64 {
        self.initial_value
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn jump_sizes(&self) -> &[f64] {
        &self.jump_sizes
    }

    pub fn n_jumps(&self) -> usize {
        self.jump_times.len()
    }

    /// Number of jump times at or before t.
    fn jumps_through(&self, t: f64) -> usize {
        self.jump_times.partition_point(|&u| u <= t)
    }

    /// Right-continuous evaluation: initial value plus all jumps at times <= t.
    pub fn value(&self, t: f64) -> f64 {
        let k = self.jumps_through(t);
        self.initial_value + self.jump_sizes[..k].iter().sum::<f64>()
    }

    /// Left limit: initial value plus all jumps at times strictly < t.
    pub fn left_limit(&self, t: f64) -> f64 {
        let k = self.jump_times.partition_point(|&u| u < t);
        self.initial_value + self.jump_sizes[..k].iter().sum::<f64>()
    }

    /// Jump size at exactly t (0.0 when t is not a jump time).
    pub fn jump_at(&self, t: f64) -> f64 {
        match self.jump_times.binary_search_by(|u| u.partial_cmp(&t).unwrap()) {
            Ok(i) => self.jump_sizes[i],
            Err(_) => 0.0,
        }
    }

    /// Value just after the last jump (the terminal constant level).
    pub fn final_value(&self) -> f64 {
        self.initial_value + self.jump_sizes.iter().sum::<f64>()
    }

    /// Cumulative values at each jump time, in order.
    pub fn values_at_jumps(&self) -> Vec<f64> {
        let mut acc = self.initial_value;
        self.jump_sizes
            .iter()
            .map(|&s| {
                acc += s;
                acc
            })
            .collect()
    }
}

/// A matrix-valued right-continuous step function (shared jump grid).
#[derive(Debug, Clone)]
pub struct MatrixStepFunction {
    dim: usize,
    initial_value: DMatrix<f64>,
    jump_times: Vec<f64>,
    jumps: Vec<DMatrix<f64>>,
}

impl MatrixStepFunction {
    pub fn new(
        initial_value: DMatrix<f64>,
        jump_times: Vec<f64>,
        jumps: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let dim = initial_value.nrows();
        if initial_value.ncols() != dim {
            return Err(Error::validation("matrix step function must be square"));
        }
        if jump_times.len() != jumps.len() {
            return Err(Error::validation(
                "jump_times and jumps lengths differ for matrix step function",
            ));
        }
        for w in jump_times.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::validation(
                    "matrix jump times must be strictly increasing",
                ));
            }
        }
        if jumps.iter().any(|m| m.nrows() != dim || m.ncols() != dim) {
            return Err(Error::validation("matrix jump with mismatched dimension"));
        }
        Ok(MatrixStepFunction {
            dim,
            initial_value,
            jump_times,
            jumps,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn jumps(&self) -> &[DMatrix<f64>] {
        &self.jumps
    }

    pub fn jump_at_index(&self, i: usize) -> &DMatrix<f64> {
        &self.jumps[i]
    }

    /// Right-continuous evaluation.
    pub fn value(&self, t: f64) -> DMatrix<f64> {
        let k = self.jump_times.partition_point(|&u| u <= t);
        let mut acc = self.initial_value.clone();
        for j in &self.jumps[..k] {
            acc += j;
        }
        acc
    }

    /// Entrywise (h, j) scalar step function.
    pub fn entry(&self, h: usize, j: usize) -> StepFunction {
        let sizes = self.jumps.iter().map(|m| m[(h, j)]).collect();
        StepFunction {
            initial_value: self.initial_value[(h, j)],
            jump_times: self.jump_times.clone(),
            jump_sizes: sizes,
        }
    }
}

/// Product integral of a scalar cumulative hazard over (0, t].
///
/// For a pure jump function A this is the finite product of (1 - dA(s)) over
/// jump times s <= t, accumulated left to right; a continuous part would
/// contribute exp(-A_c(t)), which is identically 1 here because
/// `StepFunction` is purely discrete.
pub fn product_integral_scalar(a: &StepFunction, t: f64) -> f64 {
    let k = a.jumps_through(t);
    let mut prod = 1.0;
    for &da in &a.jump_sizes[..k] {
        prod *= 1.0 - da;
    }
    prod
}

/// All partial products of (1 - dA) at each jump time, left to right.
pub fn product_integral_scalar_path(a: &StepFunction) -> Vec<f64> {
    let mut prod = 1.0;
    a.jump_sizes
        .iter()
        .map(|&da| {
            prod *= 1.0 - da;
            prod
        })
        .collect()
}

/// Matrix product integral over (s, t]: ordered product of (I + dA(u)).
///
/// Factors are applied left to right in time order, so the result composes
/// exactly: product over (s, u] times product over (u, t] reproduces the
/// product over (s, t] factor for factor.
pub fn product_integral_matrix(a: &MatrixStepFunction, s: f64, t: f64) -> Result<DMatrix<f64>> {
    if !(s <= t) {
        return Err(Error::domain(format!(
            "product integral needs s <= t, got s={s}, t={t}"
        )));
    }
    let lo = a.jump_times.partition_point(|&u| u <= s);
    let hi = a.jump_times.partition_point(|&u| u <= t);
    let mut prod = DMatrix::<f64>::identity(a.dim, a.dim);
    for j in &a.jumps[lo..hi] {
        let factor = DMatrix::<f64>::identity(a.dim, a.dim) + j;
        prod = prod * factor;
    }
    Ok(prod)
}
