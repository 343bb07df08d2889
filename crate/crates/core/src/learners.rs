//! Online learners for logistic regression.
//!
//! The two second-order recursions share one state layout: an estimate and a
//! preconditioning matrix that is the inverse of a regularized Hessian.
//!
//! * EKF accumulates the curvature of each observation at the estimate held
//!   when that observation arrived, one Sherman-Morrison downdate per step.
//! * SOS rebuilds the whole matrix at the current estimate every step,
//!   replaying all past features (`O(t d^2)` at step `t`).
//!
//! `ftl_fit` solves the regularized batch problem both recursions approximate.
//! OGD and ONS are first-order / tuned baselines.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, axpy, check_dims, dot, norm, scaled, SpdMatrix};
use crate::loss::{curvature_at_margin, loss_at_margin, sigmoid, Observation};

pub const DEFAULT_P1: f64 = 1.0;

const FTL_GRAD_TOL: f64 = 1e-10;
const FTL_MAX_ITERS: usize = 100;
const FTL_MAX_HALVINGS: usize = 60;
const FTL_OBJECTIVE_NOISE: f64 = 1e-12;
const ONS_MAX_SHRINKS: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerState {
    pub theta: Vec<f64>,
    pub p_matrix: SpdMatrix,
    /// Index `t >= 1` of the next observation to be processed.
    pub step: usize,
    pub p1: f64,
}

impl LearnerState {
    /// `theta_1 = 0`, `P_1 = p1 I`.
    pub fn new(dim: usize, p1: f64) -> Result<Self> {
        Self::with_theta(vec![0.0; dim], p1)
    }

    pub fn with_theta(theta: Vec<f64>, p1: f64) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if !(p1 > 0.0 && p1.is_finite()) {
            return Err(Error::InvalidParameter(format!("p1 must be positive, got {p1}")));
        }
        if !all_finite(&theta) {
            return Err(Error::NonFiniteInput { context: "initial theta" });
        }
        let p_matrix = SpdMatrix::scaled_identity(theta.len(), p1);
        Ok(Self { theta, p_matrix, step: 1, p1 })
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    fn checked(self) -> Result<Self> {
        if !all_finite(&self.theta) || !all_finite(self.p_matrix.as_row_major()) {
            return Err(Error::NumericAbort { step: self.step - 1, reason: "non-finite state after update".into() });
        }
        Ok(self)
    }
}

/// Append-only observation log, indices `1..=t`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    observations: Vec<Observation>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, obs: Observation) {
        self.observations.push(obs);
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn as_slice(&self) -> &[Observation] {
        &self.observations
    }
}

impl From<Vec<Observation>> for History {
    fn from(observations: Vec<Observation>) -> Self {
        Self { observations }
    }
}

/// Probability forecast `sigma(theta^T x)` that the next label is `+1`.
pub fn learner_predict(state: &LearnerState, x: &[f64]) -> Result<f64> {
    check_dims(state.dim(), x.len())?;
    Ok(sigmoid(dot(&state.theta, x)))
}

/// `y x / (1 + e^{y theta^T x})`, the negative loss gradient.
fn score(obs: &Observation, theta: &[f64]) -> Vec<f64> {
    let y = obs.y.value();
    scaled(&obs.x, y * sigmoid(-y * dot(theta, &obs.x)))
}

fn newton_update(state: &LearnerState, p_next: SpdMatrix, obs: &Observation) -> Result<LearnerState> {
    let direction = p_next.mul_vec(&score(obs, &state.theta));
    let mut theta = state.theta.clone();
    axpy(&mut theta, 1.0, &direction);
    LearnerState { theta, p_matrix: p_next, step: state.step + 1, p1: state.p1 }.checked()
}

pub fn ekf_step(state: &LearnerState, obs: &Observation) -> Result<LearnerState> {
    check_dims(state.dim(), obs.dim())?;
    let weight = curvature_at_margin(dot(&state.theta, &obs.x));
    let p_next = state.p_matrix.rank_one_downdate(&obs.x, weight).map_err(|e| abort(state.step, e))?;
    newton_update(state, p_next, obs)
}

/// Rebuilds `(I / p1 + sum_u w_u(theta_t) x_u x_u^T)^{-1}` at the current
/// estimate, then takes the Newton-like step on the newest observation.
///
/// `history` must hold observations `1..=t` with `obs` last.
pub fn sos_step(state: &LearnerState, history: &History, obs: &Observation) -> Result<LearnerState> {
    check_dims(state.dim(), obs.dim())?;
    if history.len() != state.step || history.as_slice().last() != Some(obs) {
        return Err(Error::InvalidParameter(format!(
            "history must contain observations 1..={} ending with the current one (has {})",
            state.step,
            history.len()
        )));
    }
    let p_next = sos_matrix(&state.theta, state.p1, history.as_slice()).map_err(|e| abort(state.step, e))?;
    newton_update(state, p_next, obs)
}

/// Inner recursion: starting from `p1 I`, one downdate per past observation,
/// every weight evaluated at `theta`.
pub fn sos_matrix(theta: &[f64], p1: f64, observations: &[Observation]) -> Result<SpdMatrix> {
    let mut p = SpdMatrix::scaled_identity(theta.len(), p1);
    for o in observations {
        let w = curvature_at_margin(dot(theta, &o.x));
        p = p.rank_one_downdate(&o.x, w)?;
    }
    Ok(p)
}

fn abort(step: usize, e: Error) -> Error {
    Error::NumericAbort { step, reason: e.to_string() }
}

/// `sum_s loss_s(theta) + ||theta||^2 / (2 p1)`
pub fn ftl_objective(observations: &[Observation], p1: f64, theta: &[f64]) -> f64 {
    observations.iter().map(|o| loss_at_margin(o.y, dot(theta, &o.x))).sum::<f64>() + dot(theta, theta) / (2.0 * p1)
}

pub fn ftl_gradient(observations: &[Observation], p1: f64, theta: &[f64]) -> Vec<f64> {
    let mut g = scaled(theta, 1.0 / p1);
    for o in observations {
        axpy(&mut g, -1.0, &score(o, theta));
    }
    g
}

fn ftl_hessian(observations: &[Observation], p1: f64, theta: &[f64]) -> SpdMatrix {
    let mut h = SpdMatrix::scaled_identity(theta.len(), 1.0 / p1);
    for o in observations {
        h.add_rank_one(&o.x, curvature_at_margin(dot(theta, &o.x)));
    }
    h
}

/// Minimizer of the ridge-regularized cumulative logistic loss by damped Newton.
pub fn ftl_fit(observations: &[Observation], p1: f64, theta_init: &[f64]) -> Result<Vec<f64>> {
    if !(p1 > 0.0) {
        return Err(Error::InvalidParameter(format!("p1 must be positive, got {p1}")));
    }
    for o in observations {
        check_dims(theta_init.len(), o.dim())?;
    }
    let mut theta = theta_init.to_vec();
    let mut f = ftl_objective(observations, p1, &theta);
    let mut grad_norm = f64::INFINITY;
    let mut iterations = 0;
    for _ in 0..FTL_MAX_ITERS {
        iterations += 1;
        let g = ftl_gradient(observations, p1, &theta);
        grad_norm = norm(&g);
        if grad_norm <= FTL_GRAD_TOL {
            return Ok(theta);
        }
        let h = ftl_hessian(observations, p1, &theta);
        let step = h.solve(&scaled(&g, -1.0))?;
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..=FTL_MAX_HALVINGS {
            let mut cand = theta.clone();
            axpy(&mut cand, scale, &step);
            let fc = ftl_objective(observations, p1, &cand);
            // Near the optimum the decrease drops below the rounding noise of
            // the summed objective; fall back to the gradient norm there.
            let within_noise = fc - f <= FTL_OBJECTIVE_NOISE * (1.0 + f.abs())
                && norm(&ftl_gradient(observations, p1, &cand)) < grad_norm;
            if fc <= f || within_noise {
                theta = cand;
                f = fc;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let g = ftl_gradient(observations, p1, &theta);
    grad_norm = grad_norm.min(norm(&g));
    if norm(&g) <= FTL_GRAD_TOL {
        return Ok(theta);
    }
    Err(Error::NoConvergence { iterations, grad_norm })
}

/// Step sizes for online gradient descent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateSchedule {
    Constant {
        eta: f64,
    },
    /// `scale / sqrt(t)`
    InvSqrt {
        scale: f64,
    },
    /// `scale / t`
    Inv {
        scale: f64,
    },
}

impl RateSchedule {
    pub fn rate(&self, t: usize) -> f64 {
        let t = t as f64;
        match *self {
            RateSchedule::Constant { eta } => eta,
            RateSchedule::InvSqrt { scale } => scale / t.sqrt(),
            RateSchedule::Inv { scale } => scale / t,
        }
    }
}

impl Default for RateSchedule {
    fn default() -> Self {
        RateSchedule::InvSqrt { scale: 1.0 }
    }
}

/// `theta <- theta - eta_t grad`. The state's matrix records `eta_t I`.
pub fn ogd_step(state: &LearnerState, obs: &Observation, rate: &RateSchedule) -> Result<LearnerState> {
    check_dims(state.dim(), obs.dim())?;
    let eta = rate.rate(state.step);
    let mut theta = state.theta.clone();
    axpy(&mut theta, eta, &score(obs, &state.theta));
    LearnerState { theta, p_matrix: SpdMatrix::scaled_identity(state.dim(), eta), step: state.step + 1, p1: state.p1 }
        .checked()
}

/// Online Newton step. The state's matrix holds `A_t^{-1}` with `A_0 = I / p1`.
///
/// The iterate is kept inside the Euclidean ball of the given diameter by
/// halving the step until it lands inside; an iterate that starts outside is
/// rescaled onto the sphere. This is a cheap stand-in for the `A_t`-norm
/// projection.
pub fn ons_step(state: &LearnerState, obs: &Observation, gamma: f64, diameter: f64) -> Result<LearnerState> {
    check_dims(state.dim(), obs.dim())?;
    if !(gamma > 0.0 && diameter > 0.0) {
        return Err(Error::InvalidParameter("ONS needs gamma > 0 and diameter > 0".into()));
    }
    let y = obs.y.value();
    let grad = scaled(&obs.x, -y * sigmoid(-y * dot(&state.theta, &obs.x)));
    let a_inv = state.p_matrix.rank_one_downdate(&grad, 1.0).map_err(|e| abort(state.step, e))?;
    let step = scaled(&a_inv.mul_vec(&grad), -1.0 / gamma);
    let radius = 0.5 * diameter;

    let mut theta = state.theta.clone();
    axpy(&mut theta, 1.0, &step);
    let mut scale = 1.0;
    let mut shrinks = 0;
    while norm(&theta) > radius && shrinks < ONS_MAX_SHRINKS {
        scale *= 0.5;
        theta = state.theta.clone();
        axpy(&mut theta, scale, &step);
        shrinks += 1;
    }
    let n = norm(&theta);
    if n > radius {
        theta = scaled(&theta, radius / n);
    }
    LearnerState { theta, p_matrix: a_inv, step: state.step + 1, p1: state.p1 }.checked()
}

/// Configuration of one learner, as it appears in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LearnerSpec {
    Ekf {
        #[serde(default = "default_p1")]
        p1: f64,
    },
    Sos {
        #[serde(default = "default_p1")]
        p1: f64,
    },
    Ftl {
        #[serde(default = "default_p1")]
        p1: f64,
    },
    Ogd {
        #[serde(default = "default_p1")]
        p1: f64,
        #[serde(default)]
        rate: RateSchedule,
    },
    Ons {
        #[serde(default = "default_p1")]
        p1: f64,
        gamma: f64,
        diameter: f64,
    },
}

fn default_p1() -> f64 {
    DEFAULT_P1
}

impl LearnerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LearnerSpec::Ekf { .. } => "ekf",
            LearnerSpec::Sos { .. } => "sos",
            LearnerSpec::Ftl { .. } => "ftl",
            LearnerSpec::Ogd { .. } => "ogd",
            LearnerSpec::Ons { .. } => "ons",
        }
    }

    pub fn p1(&self) -> f64 {
        match *self {
            LearnerSpec::Ekf { p1 }
            | LearnerSpec::Sos { p1 }
            | LearnerSpec::Ftl { p1 }
            | LearnerSpec::Ogd { p1, .. }
            | LearnerSpec::Ons { p1, .. } => p1,
        }
    }

    /// SOS and FTL cost `O(t)` work per step.
    pub fn is_quadratic_time(&self) -> bool {
        matches!(self, LearnerSpec::Sos { .. } | LearnerSpec::Ftl { .. })
    }

    pub fn with_p1(&self, p1: f64) -> LearnerSpec {
        let mut out = self.clone();
        match &mut out {
            LearnerSpec::Ekf { p1: p }
            | LearnerSpec::Sos { p1: p }
            | LearnerSpec::Ftl { p1: p }
            | LearnerSpec::Ogd { p1: p, .. }
            | LearnerSpec::Ons { p1: p, .. } => *p = p1,
        }
        out
    }

    pub fn build(&self, dim: usize) -> Result<Learner> {
        Ok(Learner { spec: self.clone(), state: LearnerState::new(dim, self.p1())?, history: History::new() })
    }
}

/// A learner instance: configuration, current state and (for SOS/FTL) the
/// observation history.
#[derive(Debug, Clone)]
pub struct Learner {
    spec: LearnerSpec,
    state: LearnerState,
    history: History,
}

impl Learner {
    pub fn spec(&self) -> &LearnerSpec {
        &self.spec
    }

    pub fn state(&self) -> &LearnerState {
        &self.state
    }

    pub fn theta(&self) -> &[f64] {
        &self.state.theta
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        learner_predict(&self.state, x)
    }

    /// Processes one observation; returns the curvature weight attached to it
    /// in the new matrix (zero for first-order learners).
    pub fn update(&mut self, obs: &Observation) -> Result<f64> {
        let weight = curvature_at_margin(dot(&self.state.theta, &obs.x));
        let next = match &self.spec {
            LearnerSpec::Ekf { .. } => ekf_step(&self.state, obs)?,
            LearnerSpec::Sos { .. } => {
                self.history.push(obs.clone());
                sos_step(&self.state, &self.history, obs)?
            }
            LearnerSpec::Ftl { p1 } => {
                self.history.push(obs.clone());
                let theta =
                    ftl_fit(self.history.as_slice(), *p1, &self.state.theta).map_err(|e| abort(self.state.step, e))?;
                let p_matrix = ftl_hessian(self.history.as_slice(), *p1, &theta)
                    .inverse()
                    .map_err(|e| abort(self.state.step, e))?;
                LearnerState { theta, p_matrix, step: self.state.step + 1, p1: *p1 }.checked()?
            }
            LearnerSpec::Ogd { rate, .. } => ogd_step(&self.state, obs, rate)?,
            LearnerSpec::Ons { gamma, diameter, .. } => ons_step(&self.state, obs, *gamma, *diameter)?,
        };
        self.state = next;
        Ok(match self.spec {
            LearnerSpec::Ekf { .. } | LearnerSpec::Sos { .. } | LearnerSpec::Ftl { .. } => weight,
            _ => 0.0,
        })
    }

    /// Adds `delta` to the current estimate. Used only for negative controls.
    pub fn perturb_theta(&mut self, delta: &[f64]) {
        axpy(&mut self.state.theta, 1.0, delta);
    }
}
