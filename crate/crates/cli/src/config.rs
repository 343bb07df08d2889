//! Experiment configuration: a JSON document mirroring [`ExperimentConfig`].

use std::fmt;
use std::path::{Path, PathBuf};

use logit_kalman::data::{Scheme, StreamSpec};
use logit_kalman::lab::{
    DEFAULT_ALPHA, DEFAULT_DELTA, DEFAULT_EPSILON, LEMMA1_DEFAULT_MAX_N, MIN_ASSUMPTION_REPLICATES,
    MIN_DECAY_REPLICATES,
};
use logit_kalman::learners::LearnerSpec;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Largest `n` for SOS / FTL without `--allow-slow`.
pub const QUADRATIC_TIME_MAX_N: usize = 5000;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "REGRETLAB_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "regretlab-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckId {
    Theorem1,
    Prop2,
    Lemma1,
    Prop3,
    Theorem3,
    Theorem4,
    Assumptions,
    Decay,
    ExpectedRegret,
}

impl CheckId {
    pub const ALL: [CheckId; 9] = [
        CheckId::Theorem1,
        CheckId::Prop2,
        CheckId::Lemma1,
        CheckId::Prop3,
        CheckId::Theorem3,
        CheckId::Theorem4,
        CheckId::Assumptions,
        CheckId::Decay,
        CheckId::ExpectedRegret,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckId::Theorem1 => "theorem1",
            CheckId::Prop2 => "prop2",
            CheckId::Lemma1 => "lemma1",
            CheckId::Prop3 => "prop3",
            CheckId::Theorem3 => "theorem3",
            CheckId::Theorem4 => "theorem4",
            CheckId::Assumptions => "assumptions",
            CheckId::Decay => "decay",
            CheckId::ExpectedRegret => "expected_regret",
        }
    }

    /// Checks that read SOS traces.
    pub fn needs_sos(self) -> bool {
        matches!(self, CheckId::Theorem1 | CheckId::Prop2 | CheckId::Lemma1)
    }

    /// Checks that read EKF traces.
    pub fn needs_ekf(self) -> bool {
        matches!(
            self,
            CheckId::Theorem3 | CheckId::Theorem4 | CheckId::Assumptions | CheckId::Decay | CheckId::ExpectedRegret
        )
    }

    pub fn needs_theta_true(self) -> bool {
        !self.needs_sos()
    }
}

impl fmt::Display for CheckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalizationConfig {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}
fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn default_delta() -> f64 {
    DEFAULT_DELTA
}

impl Default for LocalizationConfig {
    fn default() -> Self {
        Self { epsilon: DEFAULT_EPSILON, alpha: DEFAULT_ALPHA, delta: DEFAULT_DELTA }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: None, formats: default_formats() }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub stream: StreamSpec,
    pub learners: Vec<LearnerSpec>,
    #[serde(default = "one")]
    pub replicates: usize,
    #[serde(default)]
    pub checks: Vec<CheckId>,
    #[serde(default)]
    pub localization: LocalizationConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Overrides `stream.seed` when set; replicate `r` uses `seed ^ r`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_seed: Option<u64>,
}

fn one() -> usize {
    1
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Stream spec with the effective seed applied.
    pub fn effective_stream(&self) -> StreamSpec {
        let mut s = self.stream.clone();
        if let Some(seed) = self.base_seed {
            s.seed = seed;
        }
        s
    }

    pub fn replicate_seed(&self, r: usize) -> u64 {
        self.effective_stream().replicate(r as u64).seed
    }

    /// Output directory: config value, then the environment, then the default.
    pub fn out_dir(&self) -> PathBuf {
        self.output
            .dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    fn has_learner(&self, name: &str) -> bool {
        self.learners.iter().any(|l| l.name() == name)
    }

    pub fn validate(&self, allow_slow: bool) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        self.stream.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.learners.is_empty() {
            return bad("at least one learner is required".into());
        }
        if self.replicates == 0 {
            return bad("replicates must be >= 1".into());
        }
        let n = self.stream.n;
        for l in &self.learners {
            if !(l.p1() > 0.0 && l.p1().is_finite()) {
                return bad(format!("{}: p1 must be positive and finite, got {}", l.name(), l.p1()));
            }
            if let LearnerSpec::Ons { gamma, diameter, .. } = l {
                if !(*gamma > 0.0 && *diameter > 0.0) {
                    return bad("ons: gamma and diameter must be positive".into());
                }
            }
            if l.is_quadratic_time() && n > QUADRATIC_TIME_MAX_N && !allow_slow {
                return bad(format!(
                    "{} costs O(n^2) and n = {n} exceeds {QUADRATIC_TIME_MAX_N}; pass --allow-slow to run it anyway",
                    l.name()
                ));
            }
        }
        let loc = &self.localization;
        if !(loc.epsilon > 0.0 && loc.alpha > 0.0 && loc.delta > 0.0 && loc.delta < 1.0) {
            return bad("localization needs epsilon > 0, alpha > 0 and 0 < delta < 1".into());
        }
        if self.output.formats.is_empty() {
            return bad("output.formats must not be empty".into());
        }
        let well_specified = matches!(self.stream.scheme, Scheme::Wellspecified) && self.stream.theta_true.is_some();
        for &c in &self.checks {
            if c.needs_theta_true() && !well_specified {
                return bad(format!("check {c} requires a well-specified stream with theta_true"));
            }
            if c.needs_sos() && !self.has_learner("sos") {
                return bad(format!("check {c} applies to SOS runs; add a learner of kind sos"));
            }
            if c.needs_ekf() && !self.has_learner("ekf") {
                return bad(format!("check {c} applies to EKF runs; add a learner of kind ekf"));
            }
        }
        if self.checks.contains(&CheckId::Lemma1) && n > LEMMA1_DEFAULT_MAX_N && !allow_slow {
            return bad(format!("lemma1 costs O(n^2 d); n = {n} exceeds {LEMMA1_DEFAULT_MAX_N} without --allow-slow"));
        }
        let needs = |c: CheckId, k: usize| -> Result<(), CliError> {
            if self.checks.contains(&c) && self.replicates < k {
                return Err(CliError::Config(format!(
                    "check {c} needs at least {k} replicates, have {}",
                    self.replicates
                )));
            }
            Ok(())
        };
        needs(CheckId::Assumptions, MIN_ASSUMPTION_REPLICATES)?;
        needs(CheckId::Theorem4, MIN_ASSUMPTION_REPLICATES)?;
        needs(CheckId::Decay, MIN_DECAY_REPLICATES)?;
        if self.checks.contains(&CheckId::ExpectedRegret) && n < 4 {
            return bad("expected_regret compares R(sqrt n) with R(n) and needs n >= 4".into());
        }
        Ok(())
    }
}
