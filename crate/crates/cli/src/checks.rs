//! Drives the regret-lab checks over a stream of replicate traces for one learner.

use logit_kalman::lab::*;
use logit_kalman::learners::{ftl_fit, LearnerSpec};
use logit_kalman::Error;
use serde::{Deserialize, Serialize};

use crate::config::{CheckId, ExperimentConfig};
use crate::CliError;

/// How a record enters the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    /// Must hold on every run.
    Deterministic,
    /// Monte Carlo statement judged with its own slack.
    Statistical,
    /// Reported only (e.g. per-replicate high-probability events).
    Info,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Deterministic => "deterministic",
            Kind::Statistical => "statistical",
            Kind::Info => "info",
        }
    }

    pub fn gates(self) -> bool {
        !matches!(self, Kind::Info)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub check: CheckId,
    pub learner_index: usize,
    pub learner: String,
    /// `None` for aggregates over replicates.
    pub replicate: Option<usize>,
    pub kind: Kind,
    pub report: BoundReport,
}

impl CheckRecord {
    pub fn fails(&self) -> bool {
        self.kind.gates() && !self.report.satisfied
    }
}

/// Incremental checker for the replicates of one learner.
pub struct LearnerChecks {
    checks: Vec<CheckId>,
    learner_index: usize,
    learner: LearnerSpec,
    theta_true: Option<Vec<f64>>,
    epsilon: f64,
    alpha: f64,
    delta: f64,
    assumptions: Option<AssumptionAccumulator>,
    decay: Option<DecayAccumulator>,
    regret_sum: Option<Vec<f64>>,
    non_localized: Vec<usize>,
    theorem3: Vec<BoundReport>,
    count: usize,
    n: usize,
    pub records: Vec<CheckRecord>,
}

impl LearnerChecks {
    pub fn new(cfg: &ExperimentConfig, learner_index: usize) -> Self {
        let learner = cfg.learners[learner_index].clone();
        let is = |name: &str| learner.name() == name;
        let applies = |c: &CheckId| match c {
            CheckId::Prop3 => is("ekf") || is("sos"),
            c if c.needs_sos() => is("sos"),
            c => c.needs_ekf() && is("ekf"),
        };
        let checks: Vec<CheckId> = CheckId::ALL.into_iter().filter(|c| cfg.checks.contains(c) && applies(c)).collect();
        let (n, d) = (cfg.stream.n, cfg.stream.d);
        let wants = |c| checks.contains(&c);
        Self {
            assumptions: (wants(CheckId::Assumptions) || wants(CheckId::Theorem4))
                .then(|| AssumptionAccumulator::new(n, d)),
            decay: wants(CheckId::Decay).then(|| DecayAccumulator::new(n)),
            regret_sum: wants(CheckId::ExpectedRegret).then(|| vec![0.0; n]),
            checks,
            learner_index,
            learner,
            theta_true: cfg.stream.theta_true.clone(),
            epsilon: cfg.localization.epsilon,
            alpha: cfg.localization.alpha,
            delta: cfg.localization.delta,
            non_localized: Vec::new(),
            theorem3: Vec::new(),
            count: 0,
            n,
            records: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.checks.is_empty()
    }

    fn has(&self, c: CheckId) -> bool {
        self.checks.contains(&c)
    }

    fn push(&mut self, check: CheckId, replicate: Option<usize>, kind: Kind, report: BoundReport) {
        let report = match &report.step_details {
            Some(_) => {
                let failing = report.failing_steps();
                let r = report.without_details();
                if failing.is_empty() {
                    r
                } else {
                    let head: Vec<usize> = failing.iter().copied().take(5).collect();
                    r.with_note(format!("{} failing steps, first {:?}", failing.len(), head))
                }
            }
            None => report,
        };
        self.records.push(CheckRecord {
            check,
            learner_index: self.learner_index,
            learner: self.learner.name().to_string(),
            replicate,
            kind,
            report,
        });
    }

    fn theta_true(&self) -> &[f64] {
        self.theta_true.as_deref().expect("validated: well-specified stream")
    }

    pub fn observe(&mut self, r: usize, trace: &LearnerTrace) -> Result<(), CliError> {
        let rep = Some(r);
        if self.has(CheckId::Theorem1) {
            let d = trace.dim();
            let zero = vec![0.0; d];
            let leader = ftl_fit(&trace.observations, trace.p1(), &zero)?;
            let mut comparators = vec![("zero", zero), ("ftl", leader)];
            if let Some(tt) = &self.theta_true {
                comparators.push(("theta_true", tt.clone()));
            }
            for (label, cmp) in comparators {
                let mut report = theorem1_check(trace, &cmp)?;
                report.name = format!("theorem1[{label}]");
                self.push(CheckId::Theorem1, rep, Kind::Deterministic, report);
            }
        }
        if self.has(CheckId::Prop2) {
            self.push(CheckId::Prop2, rep, Kind::Deterministic, prop2_check(trace, trace.p1()));
        }
        if self.has(CheckId::Lemma1) {
            let report = lemma1_check(trace)?;
            self.push(CheckId::Lemma1, rep, Kind::Deterministic, report);
        }
        if self.has(CheckId::Prop3) {
            let tt = self.theta_true().to_vec();
            self.push(CheckId::Prop3, rep, Kind::Deterministic, prop3_check(trace, &tt)?);
            self.push(CheckId::Prop3, rep, Kind::Deterministic, quadratic_variation_check(trace, &tt)?);
        }
        if self.has(CheckId::Theorem3) {
            let tt = self.theta_true().to_vec();
            let t = theorem3_terms(trace, &tt, self.epsilon, self.alpha, self.delta, trace.p1())?;
            let report = BoundReport::new("theorem3", t.lhs, t.rhs)
                .with_note(format!("telescoped term {:+.4e}, {} localized steps", t.telescoped, t.localized));
            self.theorem3.push(report.clone());
            self.push(CheckId::Theorem3, rep, Kind::Info, report);
        }
        if self.has(CheckId::Theorem4) {
            let tt = self.theta_true().to_vec();
            self.non_localized.push(localized_set(trace, &tt, self.epsilon)?.non_localized(trace.len()));
        }
        if let Some(acc) = &mut self.assumptions {
            acc.add(trace)?;
        }
        if let Some(acc) = &mut self.decay {
            acc.add(trace, self.theta_true.as_deref().expect("validated"))?;
        }
        if let Some(sum) = &mut self.regret_sum {
            let curve = expected_regret_curve(trace, self.theta_true.as_deref().expect("validated"))?;
            sum.iter_mut().zip(curve).for_each(|(s, c)| *s += c);
        }
        self.count += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<Vec<CheckRecord>, CliError> {
        if self.has(CheckId::Theorem3) {
            let report = theorem3_violation_rate(&self.theorem3, self.delta);
            self.push(CheckId::Theorem3, None, Kind::Statistical, report);
        }
        if let Some(acc) = self.assumptions.take() {
            let est = acc.finish()?;
            if self.has(CheckId::Assumptions) {
                let mut m1 = BoundReport::new("assumption_m1", 0.0, est.m1_hat);
                m1.satisfied = est.m1_hat > 0.0;
                let m1 = m1.with_note(format!(
                    "iid lower bound {:e}; max raw asymmetry {:.3e}",
                    est.iid_m1_lower, est.max_relative_asymmetry
                ));
                self.push(CheckId::Assumptions, None, Kind::Statistical, m1);
                let mut m2 = BoundReport::new("assumption_m2", est.m2_hat, f64::INFINITY);
                m2.satisfied = est.m2_hat.is_finite();
                let m2 = m2.with_note(format!("iid leading scale {:e}", est.iid_p2_scale));
                self.push(CheckId::Assumptions, None, Kind::Statistical, m2);
            }
            if self.has(CheckId::Theorem4) {
                let report = self.theorem4_report(&est)?;
                self.push(CheckId::Theorem4, None, Kind::Statistical, report);
            }
        }
        if let Some(acc) = self.decay.take() {
            let (report, _) = acc.finish()?;
            self.push(CheckId::Decay, None, Kind::Statistical, report);
        }
        if let Some(sum) = self.regret_sum.take() {
            let mean: Vec<f64> = sum.iter().map(|s| s / self.count as f64).collect();
            let n_small = ((self.n as f64).sqrt().round() as usize).max(2);
            let report = expected_regret_growth(&mean, n_small, self.n)?;
            let note = format!(
                "{}; R({n_small}) = {:.4}, R({}) = {:.4}",
                report.note.clone().unwrap_or_default(),
                mean[n_small - 1],
                self.n,
                mean[self.n - 1]
            );
            self.push(CheckId::ExpectedRegret, None, Kind::Statistical, report.with_note(note));
        }
        Ok(self.records)
    }

    fn theorem4_report(&self, est: &AssumptionEstimates) -> Result<BoundReport, CliError> {
        let count = self.non_localized.len().max(1) as f64;
        let mean = self.non_localized.iter().sum::<usize>() as f64 / count;
        let env = est.envelope.with_comparator(self.theta_true());
        match localization_constants(est.m1_hat, est.m2_hat, self.learner.p1(), &env, None) {
            Ok(c) => {
                let bound = theorem4_bound(self.epsilon, &c, self.n)?;
                Ok(BoundReport::new("theorem4", mean, bound).with_note(format!(
                    "k = {}, a = {:.4e}, ln(D_X^2k b_k) = {:.2}, m1_hat = {:.4e}, M2_hat = {:.4e}",
                    c.k, c.a, c.ln_dx2k_b_k, est.m1_hat, est.m2_hat
                )))
            }
            Err(Error::InfeasibleConstant { a }) => Ok(BoundReport::new("theorem4", mean, f64::INFINITY)
                .with_note(format!("no integer k with 1 < k a < 2 (a = {a:e}); bound not evaluated"))),
            Err(e) => Err(e.into()),
        }
    }
}
