//! `regretlab`: runs online logistic learners over generated streams, checks
//! the regret inequalities on the resulting traces and writes tidy CSV plus a
//! JSON manifest per command.
//!
//! Exit codes are a stable contract: 0 all checks pass, 1 a check failed,
//! 2 configuration error, 3 numeric abort.

pub mod app;
pub mod checks;
pub mod commands;
pub mod config;
pub mod output;

pub use commands::{cmd_report, cmd_run, cmd_sweep, cmd_verify, RunOptions, SweepGrid};
pub use config::{CheckId, ExperimentConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numeric abort at step {step}: {reason}")]
    Numeric { step: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("output error: {0}")]
    Output(String),
}

impl From<logit_kalman::Error> for CliError {
    fn from(e: logit_kalman::Error) -> Self {
        use logit_kalman::Error as E;
        match e {
            E::NumericAbort { step, reason } => CliError::Numeric { step, reason },
            E::NoConvergence { iterations, grad_norm } => CliError::Numeric {
                step: 0,
                reason: format!("ftl solver did not converge in {iterations} iterations (|grad| = {grad_norm:e})"),
            },
            E::Io(e) => CliError::Io(e),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

/// What a command concluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    CheckFailed,
}

pub const EXIT_PASS: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

pub fn exit_code(result: &Result<Status, CliError>) -> u8 {
    match result {
        Ok(Status::Pass) => EXIT_PASS,
        Ok(Status::CheckFailed) => EXIT_CHECK_FAILED,
        Err(CliError::Numeric { .. }) => EXIT_NUMERIC,
        Err(_) => EXIT_CONFIG,
    }
}
