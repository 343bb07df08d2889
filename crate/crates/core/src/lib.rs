//! Second-order online logistic regression.
//!
//! * [`learners`]: the extended Kalman filter, the semi-online step (SOS),
//!   a regularized follow-the-leader solver and first-order baselines.
//! * [`lab`]: regret functionals and the inequalities that bound them,
//!   evaluated on recorded traces.
//! * [`data`]: seeded stream generators and CSV ingestion.
//!
//! Replicate runs fan out over rayon when the `parallel` feature is on (the
//! default) and fall back to a plain loop otherwise; results are identical.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod lab;
pub mod learners;
pub mod linalg;
pub mod loss;
pub mod parallel;

pub use error::{Error, Result};
