//! Parametric hazard models fit by Newton iterations on the censored-data
//! log likelihood sum D_i log lambda(t_i) - Lambda(t_i), with positive
//! parameters optimized on the log scale.

use crate::data::RightCensoredSample;
use crate::error::{Error, Result};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Constant hazard: theta = (rate,), Lambda(t) = rate * t.
    Exponential,
    /// Power hazard: theta = (rate, shape), Lambda(t) = rate * t^shape.
    Weibull,
}

impl std::str::FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "exponential" => Ok(Family::Exponential),
            "weibull" => Ok(Family::Weibull),
            other => Err(format!("unknown family '{other}' (expected exponential or weibull)")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ParametricOptions {
    /// Convergence threshold on the sup-norm of the log-scale gradient,
    /// scaled by the event count (the gradient's natural magnitude).
    pub tol: f64,
    pub max_iter: usize,
    /// Pins the Weibull shape instead of estimating it.
    pub fix_shape: Option<f64>,
}

impl Default for ParametricOptions {
    fn default() -> Self {
        ParametricOptions { tol: 1e-10, max_iter: 200, fix_shape: None }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ParametricFit {
    pub family: Family,
    /// (rate,) for exponential; (rate, shape) for Weibull.
    pub theta: Vec<f64>,
    /// Observed information of the free parameters on the original scale
    /// (1x1 when the shape is fixed or the family is exponential).
    pub information: Vec<Vec<f64>>,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Log likelihood, gradient, and Hessian in (a, b) = (log rate, log shape)
/// for the Weibull hazard rate*shape*t^(shape-1); the exponential is the
/// b = 0 slice. `free_shape` masks the shape coordinate out of the system.
struct WeibullObjective {
    /// (time, log time) per subject; the log is only meaningful where
    /// positivity was validated, and zero times are skipped in sums
    data: Vec<(f64, f64)>,
    n_events: f64,
    sum_log_t_events: f64,
}

impl WeibullObjective {
    fn new(sample: &RightCensoredSample, needs_log: bool) -> Result<Self> {
        let mut data = Vec::with_capacity(sample.n());
        let mut n_events = 0.0;
        let mut sum_log = 0.0;
        for r in sample.records() {
            if needs_log && r.time <= 0.0 {
                return Err(Error::validation(
                    "the weibull family requires strictly positive times",
                ));
            }
            let lt = if r.time > 0.0 { r.time.ln() } else { 0.0 };
            data.push((r.time, lt));
            if r.status == 1 {
                n_events += 1.0;
                sum_log += lt;
            }
        }
        Ok(WeibullObjective { data, n_events, sum_log_t_events: sum_log })
    }

    /// (loglik, grad, hessian) at (a, b); 2x2 system flattened as arrays.
    fn evaluate(&self, a: f64, b: f64) -> (f64, [f64; 2], [[f64; 2]; 2]) {
        let rate = a.exp();
        let shape = b.exp();
        let mut cum = 0.0; // sum t^k
        let mut cum_l = 0.0; // sum t^k log t
        let mut cum_ll = 0.0; // sum t^k (log t)^2
        for &(t, lt) in &self.data {
            if t == 0.0 {
                continue;
            }
            let tk = (shape * lt).exp();
            cum += tk;
            cum_l += tk * lt;
            cum_ll += tk * lt * lt;
        }
        let d = self.n_events;
        let loglik = d * (a + b) + (shape - 1.0) * self.sum_log_t_events - rate * cum;
        let grad_a = d - rate * cum;
        let grad_b = d + shape * self.sum_log_t_events - rate * shape * cum_l;
        let h_aa = -rate * cum;
        let h_ab = -rate * shape * cum_l;
        // d/db of grad_b with shape = e^b
        let h_bb = shape * self.sum_log_t_events
            - rate * (shape * cum_l + shape * shape * cum_ll);
        (loglik, [grad_a, grad_b], [[h_aa, h_ab], [h_ab, h_bb]])
    }
}

/// Maximum likelihood for exponential or Weibull hazards. Newton runs on
/// the log of the positive parameters with step-halving; a fit that
/// exhausts its budget is returned with `converged = false` rather than an
/// error.
pub fn parametric_fit(
    sample: &RightCensoredSample,
    family: Family,
    options: ParametricOptions,
) -> Result<ParametricFit> {
    if sample.n_events() == 0 {
        return Err(Error::validation("no events in the sample"));
    }
    if sample.records().iter().map(|r| r.time).sum::<f64>() <= 0.0 {
        return Err(Error::domain("total observation time is zero"));
    }
    let shape_free = family == Family::Weibull && options.fix_shape.is_none();
    let fixed_b = match (family, options.fix_shape) {
        (Family::Exponential, _) => 0.0,
        (Family::Weibull, Some(k)) => {
            if !(k > 0.0) || !k.is_finite() {
                return Err(Error::validation(format!(
                    "fixed shape must be positive and finite, got {k}"
                )));
            }
            k.ln()
        }
        (Family::Weibull, None) => 0.0,
    };
    let objective = WeibullObjective::new(sample, family == Family::Weibull)?;

    let mut a = 0.0;
    let mut b = fixed_b;
    let (mut loglik, mut grad, mut hess) = objective.evaluate(a, b);
    let grad_norm = |g: &[f64; 2]| {
        if shape_free {
            g[0].abs().max(g[1].abs())
        } else {
            g[0].abs()
        }
    };
    let threshold = options.tol * objective.n_events.max(1.0);
    let mut converged = grad_norm(&grad) < threshold;
    let mut iterations = 0;
    while !converged && iterations < options.max_iter {
        iterations += 1;
        // Newton direction; scalar solve when the shape is pinned
        let (da, db) = if shape_free {
            let det = hess[0][0] * hess[1][1] - hess[0][1] * hess[1][0];
            if det == 0.0 {
                return Err(Error::numerical("singular Hessian in parametric fit"));
            }
            (
                -(hess[1][1] * grad[0] - hess[0][1] * grad[1]) / det,
                -(hess[0][0] * grad[1] - hess[1][0] * grad[0]) / det,
            )
        } else {
            if hess[0][0] == 0.0 {
                return Err(Error::numerical("singular Hessian in parametric fit"));
            }
            (-grad[0] / hess[0][0], 0.0)
        };
        let mut step = 1.0;
        let mut accepted = false;
        // the acceptance slack covers likelihood rounding noise near the
        // optimum, where full Newton steps move the loglik by under an ulp
        let slack = 1e-12 * loglik.abs().max(1.0);
        for _ in 0..=30 {
            let eval = objective.evaluate(a + step * da, b + step * db);
            if eval.0 >= loglik - slack && eval.0.is_finite() {
                a += step * da;
                b += step * db;
                (loglik, grad, hess) = eval;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        converged = grad_norm(&grad) < threshold;
    }

    let rate = a.exp();
    let shape = b.exp();
    let theta = match family {
        Family::Exponential => vec![rate],
        Family::Weibull => vec![rate, shape],
    };
    // original-scale observed information; at the optimum the gradient
    // vanishes, so I(theta)_ij = -H_log(i,j) / (theta_i theta_j)
    let information = if shape_free {
        vec![
            vec![-hess[0][0] / (rate * rate), -hess[0][1] / (rate * shape)],
            vec![-hess[1][0] / (shape * rate), -hess[1][1] / (shape * shape)],
        ]
    } else {
        vec![vec![-hess[0][0] / (rate * rate)]]
    };
    Ok(ParametricFit {
        family,
        theta,
        information,
        loglik,
        converged,
        iterations,
    })
}
