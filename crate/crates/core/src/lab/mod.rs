//! Regret laboratory: per-run traces, regret functionals, bound right-hand
//! sides and the inequality checks that consume them.
//!
//! Deterministic inequalities are judged with relative tolerance
//! [`BOUND_REL_TOL`]; statistical checks carry their own slack.

mod adversarial;
mod bounds;
mod stochastic;

pub use adversarial::*;
pub use bounds::*;
pub use stochastic::*;

use serde::{Deserialize, Serialize};

use crate::data::{generate, Stream, StreamSpec};
use crate::error::Result;
use crate::learners::{LearnerSpec, LearnerState};
use crate::linalg::{dot, norm};
use crate::loss::{loss_at_margin, loss_gradient, Observation};
use crate::parallel::{batch_width, try_map_indexed};

pub const BOUND_REL_TOL: f64 = 1e-9;

/// Realized envelopes of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeStats {
    /// `max_t ||x_t||`
    pub d_x: f64,
    /// `max_t ||theta_t||`, widened by comparator norms where a bound needs it
    pub d_theta: f64,
    /// `max_t |theta_t^T x_t|`
    pub d_margin: f64,
}

impl EnvelopeStats {
    pub fn zero() -> Self {
        Self { d_x: 0.0, d_theta: 0.0, d_margin: 0.0 }
    }

    pub fn with_comparator(self, theta: &[f64]) -> Self {
        Self { d_theta: self.d_theta.max(norm(theta)), ..self }
    }

    pub fn merge(self, other: Self) -> Self {
        Self {
            d_x: self.d_x.max(other.d_x),
            d_theta: self.d_theta.max(other.d_theta),
            d_margin: self.d_margin.max(other.d_margin),
        }
    }

    /// `1 + e^D`
    pub fn curvature_ratio(&self) -> f64 {
        1.0 + self.d_margin.exp()
    }
}

/// What the learner saw and did at step `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Estimate used to predict `y_t` (before the update).
    pub theta: Vec<f64>,
    pub loss: f64,
    pub gradient: Vec<f64>,
    /// `theta_t^T x_t`
    pub margin: f64,
    /// Curvature weight the update attached to `x_t` (zero for first-order learners).
    pub weight: f64,
    /// `P_{t+1} x_t`
    pub p_next_x: Vec<f64>,
    /// `x_t^T P_{t+1} x_t`
    pub quad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerTrace {
    pub learner: LearnerSpec,
    pub stream_spec: StreamSpec,
    pub observations: Vec<Observation>,
    pub records: Vec<StepRecord>,
    pub final_state: LearnerState,
    pub envelope: EnvelopeStats,
}

impl LearnerTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.final_state.dim()
    }

    pub fn p1(&self) -> f64 {
        self.learner.p1()
    }

    pub fn theta_true(&self) -> Option<&[f64]> {
        self.stream_spec.theta_true.as_deref()
    }

    /// `theta_t` for `1 <= t <= n + 1`.
    pub fn theta_at(&self, t: usize) -> &[f64] {
        if t == self.records.len() + 1 {
            &self.final_state.theta
        } else {
            &self.records[t - 1].theta
        }
    }

    pub fn cumulative_loss(&self) -> f64 {
        self.records.iter().map(|r| r.loss).sum()
    }

    /// Recomputes the envelope from the records.
    pub fn measure_envelope(observations: &[Observation], records: &[StepRecord]) -> EnvelopeStats {
        let mut env = EnvelopeStats::zero();
        for (o, r) in observations.iter().zip(records) {
            env.d_x = env.d_x.max(norm(&o.x));
            env.d_theta = env.d_theta.max(norm(&r.theta));
            env.d_margin = env.d_margin.max(r.margin.abs());
        }
        env
    }
}

/// Optional mutation applied while running a learner.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TraceOptions {
    /// After processing this (1-based) step, add 0.1 to every coordinate of the
    /// estimate. Negative control only.
    pub sabotage_step: Option<usize>,
}

pub const SABOTAGE_SHIFT: f64 = 0.1;

pub fn run_trace(learner: &LearnerSpec, stream: &Stream) -> Result<LearnerTrace> {
    run_trace_with(learner, stream, TraceOptions::default())
}

pub fn run_trace_with(learner: &LearnerSpec, stream: &Stream, opts: TraceOptions) -> Result<LearnerTrace> {
    let d = stream.dim();
    let mut l = learner.build(d)?;
    let mut records = Vec::with_capacity(stream.len());
    for (i, obs) in stream.observations.iter().enumerate() {
        let theta = l.theta().to_vec();
        let margin = dot(&theta, &obs.x);
        let loss = loss_at_margin(obs.y, margin);
        let gradient = loss_gradient(obs, &theta)?;
        let weight = l.update(obs)?;
        if opts.sabotage_step == Some(i + 1) {
            l.perturb_theta(&vec![SABOTAGE_SHIFT; d]);
        }
        let p_next_x = l.state().p_matrix.mul_vec(&obs.x);
        let quad = dot(&obs.x, &p_next_x);
        records.push(StepRecord { theta, loss, gradient, margin, weight, p_next_x, quad });
    }
    let envelope = LearnerTrace::measure_envelope(&stream.observations, &records);
    Ok(LearnerTrace {
        learner: learner.clone(),
        stream_spec: stream.spec.clone(),
        observations: stream.observations.clone(),
        records,
        final_state: l.state().clone(),
        envelope,
    })
}

/// Generates replicate `r` of `spec` (seed `spec.seed ^ r`) and runs the learner on it.
pub fn run_replicate(learner: &LearnerSpec, spec: &StreamSpec, r: usize, opts: TraceOptions) -> Result<LearnerTrace> {
    let stream = generate(&spec.replicate(r as u64))?;
    run_trace_with(learner, &stream, opts)
}

/// Runs `count` independent replicates, in parallel when enabled; output is in replicate order.
pub fn run_replicates(learner: &LearnerSpec, spec: &StreamSpec, count: usize) -> Result<Vec<LearnerTrace>> {
    try_map_indexed(count, |r| run_replicate(learner, spec, r, TraceOptions::default()))
}

/// Runs replicates `0..count` in parallel batches and hands each trace to `f`
/// in replicate order, so at most one batch of traces is alive at a time.
pub fn for_each_replicate<F, E>(
    learner: &LearnerSpec,
    spec: &StreamSpec,
    count: usize,
    opts: TraceOptions,
    mut f: F,
) -> std::result::Result<(), E>
where
    F: FnMut(usize, LearnerTrace) -> std::result::Result<(), E>,
    E: From<crate::error::Error>,
{
    let width = 2 * batch_width();
    let mut start = 0;
    while start < count {
        let len = width.min(count - start);
        let batch = try_map_indexed(len, |i| run_replicate(learner, spec, start + i, opts))?;
        for (i, trace) in batch.into_iter().enumerate() {
            f(start + i, trace)?;
        }
        start += len;
    }
    Ok(())
}

/// Uniform verdict record for one checked inequality `lhs <= rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
    pub slack: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_details: Option<Vec<StepDetail>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDetail {
    pub step: usize,
    pub lhs: f64,
    pub rhs: f64,
}

impl StepDetail {
    fn margin(&self) -> f64 {
        self.rhs + BOUND_REL_TOL * (1.0 + self.rhs.abs()) - self.lhs
    }
}

pub fn within_bound(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + BOUND_REL_TOL * (1.0 + rhs.abs())
}

impl BoundReport {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            satisfied: within_bound(lhs, rhs),
            slack: rhs - lhs,
            step_details: None,
            note: None,
        }
    }

    /// Summarizes per-step inequalities by the tightest step; satisfied iff every step is.
    pub fn from_steps(name: impl Into<String>, steps: Vec<StepDetail>) -> Self {
        let worst = steps.iter().copied().min_by(|a, b| a.margin().total_cmp(&b.margin()));
        let (lhs, rhs) = worst.map_or((0.0, 0.0), |s| (s.lhs, s.rhs));
        let mut r = Self::new(name, lhs, rhs);
        r.satisfied = steps.iter().all(|s| within_bound(s.lhs, s.rhs));
        r.step_details = Some(steps);
        r
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn failing_steps(&self) -> Vec<usize> {
        self.step_details.iter().flatten().filter(|s| !within_bound(s.lhs, s.rhs)).map(|s| s.step).collect()
    }

    pub fn without_details(mut self) -> Self {
        self.step_details = None;
        self
    }
}
