//! Closed-form EKF bounds in expectation.
//!
//! The constants involve powers `D_X^{2k} b_k` with `k` often in the hundreds,
//! so they are carried in log space and only exponentiated at the end (the
//! final value may legitimately be `+inf`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dot;

use super::EnvelopeStats;

/// Constants shared by the expected-regret and localization bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationConstants {
    pub k: u32,
    /// `a = e^{-D} m1 / (1 + e^D)`
    pub a: f64,
    /// `ln b_k`
    pub ln_b_k: f64,
    /// `ln(D_X^{2k} b_k)`, finite even when `D_X = 0`
    pub ln_dx2k_b_k: f64,
}

/// `a = e^{-D} m1 / (1 + e^D)`
pub fn contraction_rate(m1: f64, env: &EnvelopeStats) -> f64 {
    (-env.d_margin).exp() * m1 / env.curvature_ratio()
}

/// Smallest `k >= 1` with `k a > 1`, provided it also satisfies `k a < 2`.
pub fn select_k(a: f64) -> Result<u32> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InfeasibleConstant { a });
    }
    let k = ((1.0 / a).floor() + 1.0).max(1.0);
    if k > u32::MAX as f64 || !(k * a > 1.0 && k * a < 2.0) {
        return Err(Error::InfeasibleConstant { a });
    }
    Ok(k as u32)
}

fn ln_or_neg_inf(v: f64) -> f64 {
    if v > 0.0 {
        v.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Computes `(k, a, b_k)`. `k = None` selects the smallest feasible `k`; an
/// explicit `k` must satisfy `1 < k a < 2`.
pub fn localization_constants(
    m1: f64,
    m2: f64,
    p1: f64,
    env: &EnvelopeStats,
    k: Option<u32>,
) -> Result<LocalizationConstants> {
    if !(p1 > 0.0) || !(m1 > 0.0) || !(m2 >= 0.0) {
        return Err(Error::InvalidParameter(format!("need p1 > 0, m1 > 0, M2 >= 0 (p1 {p1}, m1 {m1}, M2 {m2})")));
    }
    let a = contraction_rate(m1, env);
    let k = match k {
        Some(k) => {
            let ka = k as f64 * a;
            if k == 0 || !(ka > 1.0 && ka < 2.0) {
                return Err(Error::InvalidParameter(format!("k = {k} does not satisfy 1 < k a < 2 (a = {a:e})")));
            }
            k
        }
        None => select_k(a)?,
    };
    let (dx, dt) = (env.d_x, env.d_theta);
    let base = 4.0 * dt * dt + 2.0 * p1 * dt * dx + p1 * p1 * dx * dx;
    let kf = k as f64;
    let ln_base_k = if base > 0.0 { kf * base.ln() } else { f64::NEG_INFINITY };
    let ln_pref = ln_or_neg_inf(5.0 * m2) - 2.0 * p1.ln();
    let ln_b_k = ln_pref - 2.0 * ln_or_neg_inf(dx) + ln_base_k;
    let dx_power = 2.0 * kf - 2.0;
    let ln_dx_part = if dx_power == 0.0 { 0.0 } else { dx_power * ln_or_neg_inf(dx) };
    let ln_dx2k_b_k = ln_pref + ln_dx_part + ln_base_k;
    Ok(LocalizationConstants { k, a, ln_b_k, ln_dx2k_b_k })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Bound {
    pub value: f64,
    /// Per non-localized step cost `2 D_X D_theta + 30 (2 D_X D_theta + 2 D_X^2 D_theta^2 + D_X^2 / 2)`.
    pub per_step_constant: f64,
    pub constants: LocalizationConstants,
}

/// Expected-regret bound for EKF started at `theta_1 = 0`, `P_1 = p1 I`.
///
/// `env.d_theta` is widened by `||theta_true||`.
#[allow(clippy::too_many_arguments)]
pub fn theorem2_bound(
    n: usize,
    d: usize,
    p1: f64,
    env: &EnvelopeStats,
    theta_true: &[f64],
    m1: f64,
    m2: f64,
    k: Option<u32>,
) -> Result<Theorem2Bound> {
    let env = env.with_comparator(theta_true);
    let c = localization_constants(m1, m2, p1, &env, k)?;
    let ratio = env.curvature_ratio();
    let (dx, dt) = (env.d_x, env.d_theta);
    let nf = n as f64;
    let localized = 30.0
        * (20.0 * ratio
            + ratio / 4.0 * d as f64 * (1.0 + nf * p1 * dx * dx).ln()
            + dot(theta_true, theta_true) / (2.0 * p1));
    let factor = 62.0 * dx * dt + 60.0 * dx * dx * dt * dt + 15.0 * dx * dx;
    let kf = c.k as f64;
    let growth = if factor == 0.0 || nf <= 1.0 {
        1.0
    } else {
        1.0 + ((kf + 1.0) * 4f64.ln() + c.ln_dx2k_b_k - (kf * c.a - 1.0).ln()).exp() * nf.ln()
    };
    let value = localized + if factor == 0.0 { 0.0 } else { factor * growth };
    let per_step_constant = 2.0 * dx * dt + 30.0 * (2.0 * dx * dt + 2.0 * dx * dx * dt * dt + dx * dx / 2.0);
    Ok(Theorem2Bound { value, per_step_constant, constants: c })
}

/// Bound on the expected number of non-localized steps:
/// `1 + 4 D_X^{2k} b_k / (eps^{2k} (k a - 1)) log n`.
pub fn theorem4_bound(eps: f64, c: &LocalizationConstants, n: usize) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {eps}")));
    }
    let kf = c.k as f64;
    let ka = kf * c.a;
    if !(ka > 1.0 && ka < 2.0) {
        return Err(Error::InfeasibleConstant { a: c.a });
    }
    let log_n = (n.max(1) as f64).ln();
    if log_n == 0.0 {
        return Ok(1.0);
    }
    let ln_coef = 4f64.ln() + c.ln_dx2k_b_k - 2.0 * kf * eps.ln() - (ka - 1.0).ln();
    Ok(1.0 + ln_coef.exp() * log_n)
}
