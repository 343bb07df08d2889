//! Checks that hold for every observation sequence (SOS traces).

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::linalg::{axpy, check_dims, norm, sub};
use crate::loss::{loss_at_margin, sigmoid, Observation};

use super::{BoundReport, EnvelopeStats, LearnerTrace, StepDetail};

/// Largest `n` for which [`lemma1_check`] runs by default (it costs `O(n^2 d)`).
pub const LEMMA1_DEFAULT_MAX_N: usize = 2000;

/// `sum_t (loss_t(theta_t) - loss_t(theta))`
pub fn regret_vs_comparator(trace: &LearnerTrace, theta: &[f64]) -> Result<f64> {
    check_dims(trace.dim(), theta.len())?;
    Ok(trace.observations.iter().zip(&trace.records).map(|(o, r)| r.loss - loss_at_margin(o.y, dot(theta, &o.x))).sum())
}

/// Adversarial regret bound for SOS against comparator `theta`.
pub fn theorem1_rhs(n: usize, d: usize, p1: f64, env: &EnvelopeStats, theta: &[f64], theta_init: &[f64]) -> f64 {
    let ratio = env.curvature_ratio();
    let reach = env.d_x * (env.d_theta + norm(theta));
    let lead = (d as f64).sqrt() * reach * ratio / 4.0 + 1.0;
    let log_term = (1.0 + (n as f64 - 1.0) * p1 * env.d_x * env.d_x).ln();
    lead * (ratio / 2.0) * d as f64 * log_term + (dot(theta_init, theta_init) + dot(theta, theta)) / (2.0 * p1) + reach
}

pub fn theorem1_check(trace: &LearnerTrace, theta: &[f64]) -> Result<BoundReport> {
    let lhs = regret_vs_comparator(trace, theta)?;
    let rhs = theorem1_rhs(trace.len(), trace.dim(), trace.p1(), &trace.envelope, theta, trace.theta_at(1));
    Ok(BoundReport::new("theorem1", lhs, rhs))
}

/// `sum_{t <= m-1} x_t^T P_{t+1} x_t / (1 + e^{y_t theta_t^T x_t})^2` against
/// `(1 + e^D)/2 * d * log(1 + (m-1) p1 D_X^2)` for every horizon `2 <= m <= n`,
/// with `D`, `D_X` the envelopes of the first `m` steps.
pub fn prop2_check(trace: &LearnerTrace, p1: f64) -> BoundReport {
    let d = trace.dim() as f64;
    let mut env = EnvelopeStats::zero();
    let mut lhs = 0.0;
    let mut steps = Vec::with_capacity(trace.len().saturating_sub(1));
    for (i, (o, r)) in trace.observations.iter().zip(&trace.records).enumerate() {
        env.d_x = env.d_x.max(norm(&o.x));
        env.d_margin = env.d_margin.max(r.margin.abs());
        if i > 0 {
            let rhs = env.curvature_ratio() / 2.0 * d * (1.0 + i as f64 * p1 * env.d_x * env.d_x).ln();
            steps.push(StepDetail { step: i + 1, lhs, rhs });
        }
        let s = sigmoid(-o.y.value() * r.margin);
        lhs += r.quad * s * s;
    }
    BoundReport::from_steps("prop2", steps)
}

/// `S_{t+1}(theta_{t+1}) - S_t(theta_t)` with
/// `S_t(theta) = sum_{s<t} grad loss_s(theta) + theta / p1`, summed term by term
/// over `s <= t` so the difference does not cancel two large sums.
pub fn s_increment(observations: &[Observation], p1: f64, t: usize, theta_t: &[f64], theta_next: &[f64]) -> Vec<f64> {
    let mut inc = sub(theta_next, theta_t);
    inc.iter_mut().for_each(|v| *v /= p1);
    for (s, o) in observations[..t].iter().enumerate() {
        let y = o.y.value();
        let f_next = -y * sigmoid(-y * dot(theta_next, &o.x));
        // grad loss_t(theta_t) enters only S_{t+1}
        let f_prev = if s + 1 == t { 0.0 } else { -y * sigmoid(-y * dot(theta_t, &o.x)) };
        axpy(&mut inc, f_next - f_prev, &o.x);
    }
    inc
}

/// Per-step gradient-increment inequality along an SOS trace, `t = 1..n-1`.
pub fn lemma1_check(trace: &LearnerTrace) -> Result<BoundReport> {
    lemma1_check_thetas(trace, |t| trace.theta_at(t).to_vec())
}

/// Same as [`lemma1_check`] but reading iterates through `theta`, so a test can
/// feed a mutated sequence.
pub fn lemma1_check_thetas<F>(trace: &LearnerTrace, theta: F) -> Result<BoundReport>
where
    F: Fn(usize) -> Vec<f64>,
{
    if !matches!(trace.learner, crate::learners::LearnerSpec::Sos { .. }) {
        return Err(Error::InvalidParameter("lemma1 applies to SOS traces only".into()));
    }
    let n = trace.len();
    let p1 = trace.p1();
    let env = &trace.envelope;
    let scale = (trace.dim() as f64).sqrt() * env.d_x * env.curvature_ratio() / 4.0;
    let mut steps = Vec::with_capacity(n.saturating_sub(1));
    let mut theta_t = theta(1);
    for t in 1..n {
        let theta_next = theta(t + 1);
        let inc = s_increment(&trace.observations, p1, t, &theta_t, &theta_next);
        let r = &trace.records[t - 1];
        let s = sigmoid(-trace.observations[t - 1].y.value() * r.margin);
        steps.push(StepDetail { step: t, lhs: norm(&inc), rhs: scale * r.quad * s * s });
        theta_t = theta_next;
    }
    Ok(BoundReport::from_steps("lemma1", steps))
}
