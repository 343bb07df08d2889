//! Logistic loss, its derivatives, and closed-form expectations under the
//! well-specified logistic model.
//!
//! Every exponential goes through a sign-branched form so that margins of
//! several hundred stay finite.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_dims, dot, scaled, sub};

/// Binary label in `{-1, +1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Label {
    Neg,
    Pos,
}

impl Label {
    pub fn value(self) -> f64 {
        match self {
            Label::Neg => -1.0,
            Label::Pos => 1.0,
        }
    }

    pub fn both() -> [Label; 2] {
        [Label::Pos, Label::Neg]
    }
}

impl TryFrom<i8> for Label {
    type Error = Error;

    fn try_from(v: i8) -> Result<Self> {
        match v {
            -1 => Ok(Label::Neg),
            1 => Ok(Label::Pos),
            other => Err(Error::InvalidParameter(format!("label must be -1 or +1, got {other}"))),
        }
    }
}

impl From<Label> for i8 {
    fn from(l: Label) -> i8 {
        match l {
            Label::Neg => -1,
            Label::Pos => 1,
        }
    }
}

/// One `(x, y)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub x: Vec<f64>,
    pub y: Label,
}

impl Observation {
    pub fn new(x: Vec<f64>, y: Label) -> Result<Self> {
        if !crate::linalg::all_finite(&x) {
            return Err(Error::NonFiniteInput { context: "Observation::new" });
        }
        Ok(Self { x, y })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    fn margin(&self, theta: &[f64]) -> Result<f64> {
        check_dims(self.x.len(), theta.len())?;
        Ok(dot(theta, &self.x))
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    if z <= 0.0 {
        z.exp().ln_1p()
    } else {
        z + (-z).exp().ln_1p()
    }
}

/// Loss of label `y` at margin `m = theta^T x`.
pub fn loss_at_margin(y: Label, margin: f64) -> f64 {
    softplus(-y.value() * margin)
}

/// `sigma(m) * sigma(-m) = 1 / ((1 + e^m)(1 + e^-m))`, the logistic curvature at margin `m`.
pub fn curvature_at_margin(margin: f64) -> f64 {
    sigmoid(margin) * sigmoid(-margin)
}

/// `log(1 + exp(-y theta^T x))`.
pub fn logistic_loss(obs: &Observation, theta: &[f64]) -> Result<f64> {
    Ok(loss_at_margin(obs.y, obs.margin(theta)?))
}

/// `-y x / (1 + e^{y theta^T x})`.
pub fn loss_gradient(obs: &Observation, theta: &[f64]) -> Result<Vec<f64>> {
    let y = obs.y.value();
    let m = obs.margin(theta)?;
    Ok(scaled(&obs.x, -y * sigmoid(-y * m)))
}

pub fn hessian_weight(x: &[f64], theta: &[f64]) -> Result<f64> {
    check_dims(x.len(), theta.len())?;
    Ok(curvature_at_margin(dot(theta, x)))
}

/// Conditional expected loss at `theta` when labels follow the logistic model with `theta_true`.
pub fn expected_loss(x: &[f64], theta: &[f64], theta_true: &[f64]) -> Result<f64> {
    check_dims(x.len(), theta.len())?;
    check_dims(x.len(), theta_true.len())?;
    let m = dot(theta, x);
    let m_true = dot(theta_true, x);
    Ok(sigmoid(m_true) * loss_at_margin(Label::Pos, m) + sigmoid(-m_true) * loss_at_margin(Label::Neg, m))
}

/// Scalar factor `c` with `E_y[y x / (1 + e^{y m})] = c x`, written as
/// `sigma(m*) sigma(-m) (1 - e^{m - m*})` to avoid cancellation near `m = m*`.
pub(crate) fn expected_score_factor(margin: f64, margin_true: f64) -> f64 {
    -sigmoid(margin_true) * sigmoid(-margin) * (margin - margin_true).exp_m1()
}

/// `E_y[y x / (1 + e^{y theta^T x})]` for `y ~ p(. | x, theta_true)`.
///
/// This is the expected *negative* loss gradient: it points from `theta`
/// toward `theta_true` along `x` and vanishes at `theta = theta_true`.
pub fn expected_gradient(x: &[f64], theta: &[f64], theta_true: &[f64]) -> Result<Vec<f64>> {
    check_dims(x.len(), theta.len())?;
    check_dims(x.len(), theta_true.len())?;
    let c = expected_score_factor(dot(theta, x), dot(theta_true, x));
    Ok(scaled(x, c))
}

/// Expected linearized term with its quadratic envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sandwich {
    /// `expected_gradient . (theta_true - theta)`
    pub expected: f64,
    /// `((theta_true - theta)^T x)^2 * hessian_weight(x, theta)`
    pub quadratic: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Sandwich {
    pub fn holds(&self, tol: f64) -> bool {
        self.lo <= self.expected + tol && self.expected <= self.hi + tol
    }
}

pub fn sandwich_terms(x: &[f64], theta: &[f64], theta_true: &[f64]) -> Result<Sandwich> {
    check_dims(x.len(), theta.len())?;
    check_dims(x.len(), theta_true.len())?;
    let m = dot(theta, x);
    let m_true = dot(theta_true, x);
    let u = dot(&sub(theta_true, theta), x);
    let expected = expected_score_factor(m, m_true) * u;
    let quadratic = u * u * curvature_at_margin(m);
    let spread = u.abs().exp();
    Ok(Sandwich { expected, quadratic, lo: quadratic / spread, hi: quadratic * spread })
}
