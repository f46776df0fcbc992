//! Sample containers and the counting-process view of right-censored data.
//!
//! Conventions fixed here and relied on everywhere else:
//! * observation times are finite and nonnegative, compared exactly as f64
//!   (no epsilon merging of nearly-equal times);
//! * tied events at one time aggregate into a single jump of integer size;
//! * censorings tied with events happen after the events, which falls out of
//!   the risk set Y(t) = #{i : time_i >= t} evaluated as a left limit.

use crate::error::{Error, Result};
use crate::step::StepFunction;
use serde::Serialize;

/// One right-censored observation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RightCensoredRecord {
    /// Observed time: min(event time, censoring time).
    pub time: f64,
    /// 1 when the event was observed, 0 when censored.
    pub status: u8,
    /// Optional group label (treatment arm, stratum, or failure cause).
    pub group: Option<i64>,
    /// Covariate vector; equal length across the sample.
    pub covariates: Vec<f64>,
}

/// A validated right-censored sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RightCensoredSample {
    records: Vec<RightCensoredRecord>,
    n_covariates: usize,
}

impl RightCensoredSample {
    pub fn new(records: Vec<RightCensoredRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::validation("sample is empty"));
        }
        let n_covariates = records[0].covariates.len();
        for (i, r) in records.iter().enumerate() {
            if !r.time.is_finite() || r.time < 0.0 {
                return Err(Error::validation(format!(
                    "record {i}: time {} is not finite and nonnegative",
                    r.time
                )));
            }
            if r.status > 1 {
                return Err(Error::validation(format!(
                    "record {i}: status {} is not 0 or 1",
                    r.status
                )));
            }
            if r.covariates.len() != n_covariates {
                return Err(Error::validation(format!(
                    "record {i}: covariate length {} differs from {}",
                    r.covariates.len(),
                    n_covariates
                )));
            }
            if r.covariates.iter().any(|z| !z.is_finite()) {
                return Err(Error::validation(format!("record {i}: non-finite covariate")));
            }
        }
        Ok(RightCensoredSample {
            records,
            n_covariates,
        })
    }

    /// Convenience constructor from (time, status) pairs.
    pub fn from_times(times: &[f64], status: &[u8]) -> Result<Self> {
        if times.len() != status.len() {
            return Err(Error::validation("times and status lengths differ"));
        }
        let records = times
            .iter()
            .zip(status)
            .map(|(&time, &status)| RightCensoredRecord {
                time,
                status,
                group: None,
                covariates: Vec::new(),
            })
            .collect();
        RightCensoredSample::new(records)
    }

    pub fn records(&self) -> &[RightCensoredRecord] {
        &self.records
    }

    pub fn n(&self) -> usize {
        self.records.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.n_covariates
    }

    pub fn n_events(&self) -> usize {
        self.records.iter().filter(|r| r.status == 1).count()
    }

    /// Distinct group labels in ascending order (empty when no labels).
    pub fn group_labels(&self) -> Vec<i64> {
        let mut labels: Vec<i64> = self.records.iter().filter_map(|r| r.group).collect();
        labels.sort_unstable();
        labels.dedup();
        labels
    }

    /// Restricts to one group label.
    pub fn subset_by_group(&self, group: i64) -> Result<RightCensoredSample> {
        let records: Vec<RightCensoredRecord> = self
            .records
            .iter()
            .filter(|r| r.group == Some(group))
            .cloned()
            .collect();
        if records.is_empty() {
            return Err(Error::domain(format!("no records with group label {group}")));
        }
        RightCensoredSample::new(records)
    }

    /// Sorted distinct observed times (events and censorings).
    pub fn distinct_times(&self) -> Vec<f64> {
        let mut times: Vec<f64> = self.records.iter().map(|r| r.time).collect();
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        times.dedup();
        times
    }

    /// Sorted distinct event times.
    pub fn distinct_event_times(&self) -> Vec<f64> {
        let mut times: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.status == 1)
            .map(|r| r.time)
            .collect();
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        times.dedup();
        times
    }

    /// Number of events at exactly time t.
    pub fn events_at(&self, t: f64) -> usize {
        self.records
            .iter()
            .filter(|r| r.status == 1 && r.time == t)
            .count()
    }

    /// Risk set size Y(t) = #{i : time_i >= t}.
    pub fn risk_at(&self, t: f64) -> usize {
        self.records.iter().filter(|r| r.time >= t).count()
    }
}

/// Counting process N and risk process Y for a right-censored sample.
///
/// N is right-continuous with integer jumps at distinct event times. Y is
/// returned as a `StepFunction` whose left limit carries the risk-set
/// convention: Y(t) = n - #{i : time_i < t} = `y.left_limit(t)`; the
/// right-continuous `y.value(t)` is the risk set just after t.
pub fn counting_and_risk(
    sample: &RightCensoredSample,
    group: Option<i64>,
) -> Result<(StepFunction, StepFunction)> {
    let filtered;
    let s = match group {
        Some(g) => {
            filtered = sample.subset_by_group(g)?;
            &filtered
        }
        None => sample,
    };
    let event_times = s.distinct_event_times();
    let event_jumps: Vec<f64> = event_times.iter().map(|&t| s.events_at(t) as f64).collect();
    let n_proc = StepFunction::new(0.0, event_times, event_jumps)?;

    let all_times = s.distinct_times();
    let drops: Vec<f64> = all_times
        .iter()
        .map(|&t| -(s.records.iter().filter(|r| r.time == t).count() as f64))
        .collect();
    let y_proc = StepFunction::new(s.n() as f64, all_times, drops)?;
    Ok((n_proc, y_proc))
}

/// One interval-censored observation: the event lies in (left, right].
///
/// left == right encodes an exactly observed event; right may be +inf for a
/// right-censored observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalCensoredRecord {
    pub left: f64,
    pub right: f64,
}

impl IntervalCensoredRecord {
    pub fn is_exact(&self) -> bool {
        self.left == self.right
    }
}

/// A validated interval-censored sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalCensoredSample {
    records: Vec<IntervalCensoredRecord>,
}

impl IntervalCensoredSample {
    pub fn new(records: Vec<IntervalCensoredRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::validation("interval-censored sample is empty"));
        }
        for (i, r) in records.iter().enumerate() {
            if !r.left.is_finite() || r.left < 0.0 {
                return Err(Error::validation(format!(
                    "record {i}: left endpoint {} is not finite and nonnegative",
                    r.left
                )));
            }
            if r.right.is_nan() || r.right < r.left {
                return Err(Error::validation(format!(
                    "record {i}: right endpoint {} is below left endpoint {}",
                    r.right, r.left
                )));
            }
        }
        Ok(IntervalCensoredSample { records })
    }

    pub fn records(&self) -> &[IntervalCensoredRecord] {
        &self.records
    }

    pub fn n(&self) -> usize {
        self.records.len()
    }
}

/// One bivariate pair observation: two possibly censored times per unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BivariatePair {
    pub t1: f64,
    /// 1 when the first coordinate's event was observed, 0 when censored.
    pub status1: u8,
    pub t2: f64,
    pub status2: u8,
}

/// One subject's observed path through a finite state space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubjectPath {
    pub id: i64,
    pub initial_state: usize,
    /// (time, from, to), strictly increasing in time, state-continuous.
    pub transitions: Vec<(f64, usize, usize)>,
    /// Right-censoring time; None means observed over the whole window.
    pub censor_time: Option<f64>,
}

impl SubjectPath {
    /// State occupied at time t (right-continuous path).
    pub fn state_at(&self, t: f64) -> usize {
        let mut state = self.initial_state;
        for &(u, _, to) in &self.transitions {
            if u <= t {
                state = to;
            } else {
                break;
            }
        }
        state
    }

    /// State occupied just before time t.
    pub fn state_before(&self, t: f64) -> usize {
        let mut state = self.initial_state;
        for &(u, _, to) in &self.transitions {
            if u < t {
                state = to;
            } else {
                break;
            }
        }
        state
    }

    /// Whether the subject is still under observation at time t, with
    /// censorings at t ordered after transitions at t.
    pub fn observed_at(&self, t: f64) -> bool {
        match self.censor_time {
            Some(c) => t <= c,
            None => true,
        }
    }
}

/// A validated multi-state event history over states 0..k.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiStateHistory {
    n_states: usize,
    subjects: Vec<SubjectPath>,
}

impl MultiStateHistory {
    pub fn new(n_states: usize, subjects: Vec<SubjectPath>) -> Result<Self> {
        if n_states < 2 {
            return Err(Error::validation("multi-state history needs at least 2 states"));
        }
        if subjects.is_empty() {
            return Err(Error::validation("multi-state history has no subjects"));
        }
        for s in &subjects {
            if s.initial_state >= n_states {
                return Err(Error::validation(format!(
                    "subject {}: initial state {} outside 0..{}",
                    s.id, s.initial_state, n_states
                )));
            }
            let mut state = s.initial_state;
            let mut last_time = -1.0f64;
            for &(t, from, to) in &s.transitions {
                if !t.is_finite() || t < 0.0 {
                    return Err(Error::validation(format!(
                        "subject {}: transition time {} is not finite and nonnegative",
                        s.id, t
                    )));
                }
                if t <= last_time {
                    return Err(Error::validation(format!(
                        "subject {}: transition times not strictly increasing at {}",
                        s.id, t
                    )));
                }
                if from >= n_states || to >= n_states {
                    return Err(Error::validation(format!(
                        "subject {}: transition {}->{} outside state space",
                        s.id, from, to
                    )));
                }
                if from != state {
                    return Err(Error::validation(format!(
                        "subject {}: transition at {} leaves state {} but subject is in {}",
                        s.id, t, from, state
                    )));
                }
                if from == to {
                    return Err(Error::validation(format!(
                        "subject {}: self-transition at {}",
                        s.id, t
                    )));
                }
                state = to;
                last_time = t;
            }
            if let Some(c) = s.censor_time {
                if !c.is_finite() || c < 0.0 {
                    return Err(Error::validation(format!(
                        "subject {}: censor time {} is not finite and nonnegative",
                        s.id, c
                    )));
                }
                if c < last_time {
                    return Err(Error::validation(format!(
                        "subject {}: censor time {} precedes last transition {}",
                        s.id, c, last_time
                    )));
                }
            }
        }
        Ok(MultiStateHistory { n_states, subjects })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn subjects(&self) -> &[SubjectPath] {
        &self.subjects
    }

    pub fn n_subjects(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_fully_observed(&self) -> bool {
        self.subjects.iter().all(|s| s.censor_time.is_none())
    }

    /// Sorted distinct transition times across all subjects.
    pub fn transition_times(&self) -> Vec<f64> {
        let mut times: Vec<f64> = self
            .subjects
            .iter()
            .flat_map(|s| s.transitions.iter().map(|&(t, _, _)| t))
            .collect();
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        times.dedup();
        times
    }

    /// Number of h -> j transitions at exactly time t.
    pub fn transitions_at(&self, t: f64, from: usize, to: usize) -> usize {
        self.subjects
            .iter()
            .flat_map(|s| s.transitions.iter())
            .filter(|&&(u, f, g)| u == t && f == from && g == to)
            .count()
    }

    /// Risk set Y_h(t) = #{i observed at t with X_i(t-) = h}.
    pub fn risk_before(&self, t: f64, state: usize) -> usize {
        self.subjects
            .iter()
            .filter(|s| s.observed_at(t) && s.state_before(t) == state)
            .count()
    }

    /// Occupancy Y_h(t+) = #{i observed at t with X_i(t) = h}.
    pub fn occupancy_at(&self, t: f64, state: usize) -> usize {
        self.subjects
            .iter()
            .filter(|s| s.observed_at(t) && s.state_at(t) == state)
            .count()
    }
}
