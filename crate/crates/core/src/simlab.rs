//! Ground-truth data generation and brute-force oracles.
//!
//! Every law is sampled by inverse CDF from a seeded ChaCha8 stream, so a
//! config reproduces its sample bitwise on any platform, and replicates
//! draw from disjoint streams of the same seed. The oracles at the bottom
//! recompute answers the slow, obviously-correct way; estimator tests
//! compare against them.

use crate::data::{
    MultiStateHistory, RightCensoredRecord, RightCensoredSample, SubjectPath,
};
use crate::error::{Error, Result};
use crate::npmle::TurnbullProblem;
use crate::stats::standard_normal;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::str::FromStr;

/// Baseline event-time law, specified through its cumulative hazard.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventLaw {
    Exponential { rate: f64 },
    Weibull { shape: f64, scale: f64 },
}

impl EventLaw {
    /// Time at which the baseline cumulative hazard reaches `a`.
    fn inverse_cumulative_hazard(&self, a: f64) -> f64 {
        match *self {
            EventLaw::Exponential { rate } => a / rate,
            EventLaw::Weibull { shape, scale } => scale * a.powf(1.0 / shape),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            EventLaw::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            EventLaw::Weibull { shape, scale } => {
                shape > 0.0 && shape.is_finite() && scale > 0.0 && scale.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::validation(format!("event law parameters out of range: {self:?}")))
        }
    }
}

impl FromStr for EventLaw {
    type Err = Error;

    /// `exp:RATE` or `weibull:SHAPE,SCALE`.
    fn from_str(s: &str) -> std::result::Result<Self, Error> {
        let bad = || Error::validation(format!("unknown event law {s:?}; use exp:RATE or weibull:SHAPE,SCALE"));
        let (name, args) = s.split_once(':').ok_or_else(bad)?;
        let law = match name {
            "exp" | "exponential" => EventLaw::Exponential {
                rate: args.trim().parse().map_err(|_| bad())?,
            },
            "weibull" => {
                let (shape, scale) = args.split_once(',').ok_or_else(bad)?;
                EventLaw::Weibull {
                    shape: shape.trim().parse().map_err(|_| bad())?,
                    scale: scale.trim().parse().map_err(|_| bad())?,
                }
            }
            _ => return Err(bad()),
        };
        law.validate()?;
        Ok(law)
    }
}

/// Independent censoring law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CensoringLaw {
    None,
    Exponential { rate: f64 },
    /// Uniform on (0, upper).
    Uniform { upper: f64 },
    /// Administrative cutoff: everyone still at risk is censored at tau.
    Administrative { tau: f64 },
}

impl CensoringLaw {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            CensoringLaw::None => true,
            CensoringLaw::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            CensoringLaw::Uniform { upper } => upper > 0.0 && upper.is_finite(),
            CensoringLaw::Administrative { tau } => tau > 0.0 && tau.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::validation(format!("censoring law parameters out of range: {self:?}")))
        }
    }
}

impl FromStr for CensoringLaw {
    type Err = Error;

    /// `none`, `exp:RATE`, `uniform:UPPER`, or `admin:TAU`.
    fn from_str(s: &str) -> std::result::Result<Self, Error> {
        let bad = || {
            Error::validation(format!(
                "unknown censoring law {s:?}; use none, exp:RATE, uniform:UPPER, or admin:TAU"
            ))
        };
        if s == "none" {
            return Ok(CensoringLaw::None);
        }
        let (name, args) = s.split_once(':').ok_or_else(bad)?;
        let arg: f64 = args.trim().parse().map_err(|_| bad())?;
        let law = match name {
            "exp" | "exponential" => CensoringLaw::Exponential { rate: arg },
            "uniform" => CensoringLaw::Uniform { upper: arg },
            "admin" => CensoringLaw::Administrative { tau: arg },
            _ => return Err(bad()),
        };
        law.validate()?;
        Ok(law)
    }
}

/// Covariate law, drawn once per subject before the event time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovariateLaw {
    None,
    Bernoulli { p: f64 },
    /// Independent standard normals in `dim` coordinates.
    StandardNormal { dim: usize },
}

impl CovariateLaw {
    pub fn dim(&self) -> usize {
        match *self {
            CovariateLaw::None => 0,
            CovariateLaw::Bernoulli { .. } => 1,
            CovariateLaw::StandardNormal { dim } => dim,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            CovariateLaw::None => true,
            CovariateLaw::Bernoulli { p } => (0.0..=1.0).contains(&p),
            CovariateLaw::StandardNormal { dim } => dim >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::validation(format!("covariate law parameters out of range: {self:?}")))
        }
    }
}

impl FromStr for CovariateLaw {
    type Err = Error;

    /// `none`, `bernoulli:P`, or `normal:DIM`.
    fn from_str(s: &str) -> std::result::Result<Self, Error> {
        let bad = || {
            Error::validation(format!(
                "unknown covariate law {s:?}; use none, bernoulli:P, or normal:DIM"
            ))
        };
        if s == "none" {
            return Ok(CovariateLaw::None);
        }
        let (name, args) = s.split_once(':').ok_or_else(bad)?;
        let law = match name {
            "bernoulli" => CovariateLaw::Bernoulli {
                p: args.trim().parse().map_err(|_| bad())?,
            },
            "normal" => CovariateLaw::StandardNormal {
                dim: args.trim().parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        law.validate()?;
        Ok(law)
    }
}

/// How covariates act on the event time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    None,
    /// Proportional hazards: A(t|Z) = A0(t) exp(beta'Z).
    Cox { beta: Vec<f64> },
    /// Accelerated failure time: log T = beta'Z + sigma log T0 with T0
    /// drawn from the baseline law.
    Aft { beta: Vec<f64>, sigma: f64 },
}

impl ModelSpec {
    fn beta(&self) -> &[f64] {
        match self {
            ModelSpec::None => &[],
            ModelSpec::Cox { beta } | ModelSpec::Aft { beta, .. } => beta,
        }
    }
}

/// Homogeneous Markov process: rate matrix plus an observation horizon.
/// All paths start in state 0 and are censored at the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovSpec {
    pub rates: Vec<Vec<f64>>,
    pub horizon: f64,
}

impl MarkovSpec {
    fn validate(&self) -> Result<()> {
        let k = self.rates.len();
        if k < 2 {
            return Err(Error::validation("rate matrix needs at least 2 states"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::validation(format!("horizon must be positive, got {}", self.horizon)));
        }
        let mut scale = 0.0_f64;
        for row in &self.rates {
            if row.len() != k {
                return Err(Error::validation("rate matrix must be square"));
            }
            for &q in row {
                if !q.is_finite() {
                    return Err(Error::validation("rate matrix entries must be finite"));
                }
                scale = scale.max(q.abs());
            }
        }
        for (h, row) in self.rates.iter().enumerate() {
            for (j, &q) in row.iter().enumerate() {
                if j != h && q < 0.0 {
                    return Err(Error::validation(format!(
                        "off-diagonal rate ({h},{j}) is negative: {q}"
                    )));
                }
            }
            let sum: f64 = row.iter().sum();
            if sum.abs() > 1e-10 * scale.max(1.0) {
                return Err(Error::validation(format!("rate-matrix row {h} sums to {sum}, not 0")));
            }
        }
        Ok(())
    }
}

/// Full description of one synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub seed: u64,
    /// Stream index within the seed; replicates differ only here.
    pub stream: u64,
    pub event: EventLaw,
    pub censoring: CensoringLaw,
    pub covariates: CovariateLaw,
    pub model: ModelSpec,
    pub markov: Option<MarkovSpec>,
}

impl SimConfig {
    /// Exponential(1) events, no censoring, no covariates.
    pub fn new(n: usize, seed: u64) -> Self {
        SimConfig {
            n,
            seed,
            stream: 0,
            event: EventLaw::Exponential { rate: 1.0 },
            censoring: CensoringLaw::None,
            covariates: CovariateLaw::None,
            model: ModelSpec::None,
            markov: None,
        }
    }

    /// The same configuration on a different RNG stream.
    pub fn replicate(&self, stream: u64) -> Self {
        SimConfig { stream, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::validation("sample size must be at least 1"));
        }
        self.event.validate()?;
        self.censoring.validate()?;
        self.covariates.validate()?;
        match &self.model {
            ModelSpec::None => {}
            ModelSpec::Cox { beta } | ModelSpec::Aft { beta, .. } => {
                if beta.iter().any(|b| !b.is_finite()) {
                    return Err(Error::validation("model coefficients must be finite"));
                }
                if beta.len() != self.covariates.dim() {
                    return Err(Error::validation(format!(
                        "model has {} coefficients but the covariate law draws {}",
                        beta.len(),
                        self.covariates.dim()
                    )));
                }
                if let ModelSpec::Aft { sigma, .. } = self.model {
                    if !(sigma > 0.0 && sigma.is_finite()) {
                        return Err(Error::validation(format!(
                            "aft sigma must be positive, got {sigma}"
                        )));
                    }
                }
            }
        }
        if let Some(markov) = &self.markov {
            markov.validate()?;
        }
        Ok(())
    }

    fn rng(&self) -> ChaCha8Rng {
        replicate_rng(self.seed, self.stream)
    }
}

/// ChaCha8 generator for one replicate: `stream` selects a disjoint
/// substream of the seed, so replicates can run in parallel without
/// coordinating.
pub fn replicate_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws (time, status, covariates) per the config: covariates first, then
/// the event uniform, then the censoring uniform, so laws that share a
/// prefix of the draw order stay comparable across configs.
pub fn simulate_right_censored(config: &SimConfig) -> Result<RightCensoredSample> {
    config.validate()?;
    let mut rng = config.rng();
    let beta = config.model.beta();
    let mut records = Vec::with_capacity(config.n);
    for _ in 0..config.n {
        let z: Vec<f64> = match config.covariates {
            CovariateLaw::None => Vec::new(),
            CovariateLaw::Bernoulli { p } => vec![f64::from(rng.gen::<f64>() < p)],
            CovariateLaw::StandardNormal { dim } => {
                (0..dim).map(|_| standard_normal(&mut rng)).collect()
            }
        };
        let eta: f64 = beta.iter().zip(&z).map(|(b, zi)| b * zi).sum();
        let e = -(1.0 - rng.gen::<f64>()).ln();
        let x = match &config.model {
            ModelSpec::None => config.event.inverse_cumulative_hazard(e),
            ModelSpec::Cox { .. } => config.event.inverse_cumulative_hazard(e * (-eta).exp()),
            ModelSpec::Aft { sigma, .. } => {
                eta.exp() * config.event.inverse_cumulative_hazard(e).powf(*sigma)
            }
        };
        let u = match config.censoring {
            CensoringLaw::None => f64::INFINITY,
            CensoringLaw::Exponential { rate } => -(1.0 - rng.gen::<f64>()).ln() / rate,
            CensoringLaw::Uniform { upper } => upper * rng.gen::<f64>(),
            CensoringLaw::Administrative { tau } => tau,
        };
        records.push(RightCensoredRecord {
            time: x.min(u),
            status: u8::from(x <= u),
            group: None,
            covariates: z,
        });
    }
    RightCensoredSample::new(records)
}

/// Simulates paths of the homogeneous Markov process in `config.markov`:
/// exponential holding times with rate -q_hh and jump probabilities
/// q_hj / (-q_hh), censored at the horizon. Paths start in state 0; an
/// absorbing state ends the path early.
pub fn simulate_markov(config: &SimConfig) -> Result<MultiStateHistory> {
    config.validate()?;
    let Some(spec) = &config.markov else {
        return Err(Error::validation("config has no markov specification"));
    };
    let k = spec.rates.len();
    let mut rng = config.rng();
    let mut subjects = Vec::with_capacity(config.n);
    for id in 0..config.n {
        let mut t = 0.0_f64;
        let mut state = 0_usize;
        let mut transitions = Vec::new();
        loop {
            let q = -spec.rates[state][state];
            if !(q > 0.0) {
                break; // absorbing state
            }
            // u = 0 maps to an infinite hold, i.e. censored at the horizon
            let u: f64 = rng.gen();
            let next = t - u.ln() / q;
            if !(next > t && next < spec.horizon) {
                break;
            }
            t = next;
            let v: f64 = rng.gen();
            let mut acc = 0.0;
            let mut dest = None;
            for j in 0..k {
                if j == state || spec.rates[state][j] == 0.0 {
                    continue;
                }
                acc += spec.rates[state][j] / q;
                if v < acc {
                    dest = Some(j);
                    break;
                }
            }
            // rounding can leave v at or past the cumulative total; the
            // last reachable destination takes the remainder
            let dest = match dest {
                Some(j) => j,
                None => (0..k)
                    .rev()
                    .find(|&j| j != state && spec.rates[state][j] > 0.0)
                    .expect("q > 0 implies a positive off-diagonal rate"),
            };
            transitions.push((t, state, dest));
            state = dest;
        }
        subjects.push(SubjectPath {
            id: id as i64,
            initial_state: 0,
            transitions,
            censor_time: Some(spec.horizon),
        });
    }
    MultiStateHistory::new(k, subjects)
}

/// exp(A) by scaling and squaring: A/2^s is summed as a Taylor series once
/// its norm is at most 1/2, then squared back up. Oracle-grade accuracy
/// for the small intensity matrices used in tests.
pub fn matrix_exponential(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::validation(format!(
            "matrix exponential needs a nonempty square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation("matrix exponential needs finite entries"));
    }
    let k = a.nrows();
    let norm = (0..k)
        .map(|i| (0..k).map(|j| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let b = a / 2.0_f64.powi(squarings);

    let mut term = DMatrix::identity(k, k);
    let mut sum = DMatrix::identity(k, k);
    for order in 1..=40 {
        term = &term * &b / order as f64;
        sum += &term;
        if term.amax() <= 1e-16 * sum.amax() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    Ok(sum)
}

/// Grid argmax of the log partial likelihood for a single covariate, with
/// Breslow tie handling; risk sums are recomputed from scratch at every
/// grid point. Cross-checks `cox_fit` on small fixtures.
pub fn oracle_partial_likelihood(sample: &RightCensoredSample, grid: &[f64]) -> Result<f64> {
    if sample.n_covariates() != 1 {
        return Err(Error::validation(format!(
            "the grid oracle handles exactly 1 covariate, got {}",
            sample.n_covariates()
        )));
    }
    if sample.n_events() == 0 {
        return Err(Error::validation("no events in the sample"));
    }
    if grid.is_empty() || grid.iter().any(|b| !b.is_finite()) {
        return Err(Error::validation("grid must be nonempty and finite"));
    }
    let records = sample.records();
    let mut best = (f64::NEG_INFINITY, grid[0]);
    for &beta in grid {
        let mut loglik = 0.0;
        for t in sample.distinct_event_times() {
            let mut z_sum = 0.0;
            let mut d = 0.0;
            let mut denom = 0.0;
            for r in records {
                if r.time == t && r.status == 1 {
                    z_sum += r.covariates[0];
                    d += 1.0;
                }
                if r.time >= t {
                    denom += (beta * r.covariates[0]).exp();
                }
            }
            loglik += beta * z_sum - d * denom.ln();
        }
        if loglik > best.0 {
            best = (loglik, beta);
        }
    }
    Ok(best.1)
}

/// Exhaustive simplex-grid maximizer of the interval-censoring likelihood
/// over the support columns, at resolution `step` (mass in multiples of
/// `step`). Refuses more than 3 support columns. Returns the best masses
/// (over support columns, in order) and their log-likelihood.
pub fn oracle_simplex_search(problem: &TurnbullProblem, step: f64) -> Result<(Vec<f64>, f64)> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::validation(format!("step must be in (0, 1], got {step}")));
    }
    let sup_cols = problem.support_columns();
    let k = sup_cols.len();
    if k == 0 {
        return Err(Error::validation("no support columns; no mass can be placed"));
    }
    if k > 3 {
        return Err(Error::validation(format!(
            "simplex grid over {k} support columns is combinatorially infeasible; limit is 3"
        )));
    }
    let m = (1.0 / step).round().max(1.0) as usize;
    let loglik = |p: &[f64]| -> f64 {
        problem
            .alpha
            .iter()
            .map(|row| {
                let mass: f64 = sup_cols
                    .iter()
                    .zip(p)
                    .filter(|(&j, _)| row[j])
                    .map(|(_, &pj)| pj)
                    .sum();
                mass.ln()
            })
            .sum()
    };

    let mut best: (f64, Vec<f64>) = (f64::NEG_INFINITY, vec![]);
    let mut consider = |counts: &[usize]| {
        let p: Vec<f64> = counts.iter().map(|&c| c as f64 / m as f64).collect();
        let ll = loglik(&p);
        if ll > best.0 {
            best = (ll, p);
        }
    };
    match k {
        1 => consider(&[m]),
        2 => {
            for c in 0..=m {
                consider(&[c, m - c]);
            }
        }
        _ => {
            for c1 in 0..=m {
                for c2 in 0..=(m - c1) {
                    consider(&[c1, c2, m - c1 - c2]);
                }
            }
        }
    }
    if best.0 == f64::NEG_INFINITY {
        return Err(Error::numerical("every grid point left some observation with zero mass"));
    }
    Ok((best.1, best.0))
}
