//! The four subcommands. Each returns a [`Status`]; errors map to exit codes
//! in `main`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use logit_kalman::data::Scheme;
use logit_kalman::lab::{expected_regret_curve, for_each_replicate, EnvelopeStats, LearnerTrace, TraceOptions};
use logit_kalman::linalg::norm;
use serde::{Deserialize, Serialize};

use crate::checks::{CheckRecord, LearnerChecks};
use crate::config::{ExperimentConfig, Format};
use crate::output::*;
use crate::{CliError, Status};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub allow_slow: bool,
    /// Also write every step to `trace.csv`.
    pub full_trace: bool,
    /// Shift the estimate after step `max(n / 2, 1)` (negative control).
    pub sabotage: bool,
    /// Overrides the configured output directory.
    pub out_dir: Option<PathBuf>,
    pub quiet: bool,
}

impl RunOptions {
    fn dir(&self, cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
        prepare_dir(&self.out_dir.clone().unwrap_or_else(|| cfg.out_dir()))
    }

    fn trace_options(&self, n: usize) -> TraceOptions {
        TraceOptions { sabotage_step: self.sabotage.then(|| (n / 2).max(1)) }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicateEntry {
    pub learner_index: usize,
    pub learner: String,
    pub replicate: usize,
    pub seed: u64,
    pub cumulative_loss: f64,
    pub final_theta: Vec<f64>,
    #[serde(flatten)]
    pub envelope: EnvelopeStats,
}

impl ReplicateEntry {
    fn new(learner_index: usize, replicate: usize, trace: &LearnerTrace) -> Self {
        Self {
            learner_index,
            learner: trace.learner.name().into(),
            replicate,
            seed: trace.stream_spec.seed,
            cumulative_loss: trace.cumulative_loss(),
            final_theta: trace.final_state.theta.clone(),
            envelope: trace.envelope,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LearnerSummary {
    pub learner_index: usize,
    pub learner: String,
    pub replicates: usize,
    pub mean_cumulative_loss: f64,
    pub mean_expected_regret: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verdict {
    pub records: usize,
    pub gating: usize,
    pub failed: usize,
}

#[derive(Debug, Serialize)]
struct Manifest<'a, R: Serialize> {
    command: &'a str,
    version: &'a str,
    csv_schema_version: u32,
    config: &'a ExperimentConfig,
    sabotage_step: Option<usize>,
    seeds: Vec<u64>,
    replicates: Vec<ReplicateEntry>,
    results: R,
}

fn theta_true_for(trace: &LearnerTrace) -> Option<Vec<f64>> {
    match trace.stream_spec.scheme {
        Scheme::Wellspecified => trace.theta_true().map(<[f64]>::to_vec),
        _ => None,
    }
}

fn run_header(d: usize) -> Vec<String> {
    let mut h: Vec<String> = [
        "learner_index",
        "learner",
        "replicate",
        "seed",
        "n",
        "d",
        "p1",
        "cumulative_loss",
        "expected_regret",
        "d_x",
        "d_theta",
        "d_margin",
    ]
    .map(String::from)
    .to_vec();
    h.extend(theta_columns("theta_", d));
    h
}

fn trace_header(d: usize) -> Vec<String> {
    let mut h: Vec<String> = ["learner_index", "learner", "replicate", "t", "y", "margin", "loss", "weight", "quad"]
        .map(String::from)
        .to_vec();
    h.extend(theta_columns("x_", d));
    h.extend(theta_columns("theta_", d));
    h
}

fn seeds(cfg: &ExperimentConfig) -> Vec<u64> {
    (0..cfg.replicates).map(|r| cfg.replicate_seed(r)).collect()
}

/// Runs every learner on every replicate and writes `summary.csv`,
/// `curves.csv`, optionally `trace.csv`, and `manifest.json`.
pub fn cmd_run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Status, CliError> {
    cfg.validate(opts.allow_slow)?;
    let dir = opts.dir(cfg)?;
    let spec = cfg.effective_stream();
    let d = spec.d;
    let points = curve_points(spec.n);
    let mut summary = Table::new(run_header(d));
    let mut curves = Table::new(["learner_index", "learner", "replicate", "t", "cumulative_loss", "expected_regret"]);
    let mut trace_rows = Table::new(trace_header(d));
    let mut replicates = Vec::new();
    let mut results = Vec::new();
    for (li, learner) in cfg.learners.iter().enumerate() {
        let name = learner.name();
        let (mut loss_sum, mut regret_sum, mut has_regret) = (0.0, 0.0, false);
        for_each_replicate(learner, &spec, cfg.replicates, opts.trace_options(spec.n), |r, trace| {
            let seed = trace.stream_spec.seed;
            let regret = theta_true_for(&trace).map(|tt| expected_regret_curve(&trace, &tt)).transpose()?;
            let mut loss_curve = Vec::with_capacity(trace.len());
            let mut acc = 0.0;
            for rec in &trace.records {
                acc += rec.loss;
                loss_curve.push(acc);
            }
            let total_loss = loss_curve.last().copied().unwrap_or(0.0);
            let total_regret = regret.as_ref().and_then(|c| c.last().copied());
            loss_sum += total_loss;
            if let Some(v) = total_regret {
                regret_sum += v;
                has_regret = true;
            }
            let env = trace.envelope;
            let mut row = vec![
                li.to_string(),
                name.to_string(),
                r.to_string(),
                seed.to_string(),
                trace.len().to_string(),
                d.to_string(),
                fmt_f64(learner.p1()),
                fmt_f64(total_loss),
                fmt_opt(total_regret),
                fmt_f64(env.d_x),
                fmt_f64(env.d_theta),
                fmt_f64(env.d_margin),
            ];
            row.extend(trace.final_state.theta.iter().map(|&v| fmt_f64(v)));
            summary.push(row);
            for &t in &points {
                curves.push(vec![
                    li.to_string(),
                    name.to_string(),
                    r.to_string(),
                    t.to_string(),
                    fmt_f64(loss_curve[t - 1]),
                    fmt_opt(regret.as_ref().map(|c| c[t - 1])),
                ]);
            }
            if opts.full_trace {
                for (i, (o, rec)) in trace.observations.iter().zip(&trace.records).enumerate() {
                    let mut row = vec![
                        li.to_string(),
                        name.to_string(),
                        r.to_string(),
                        (i + 1).to_string(),
                        fmt_f64(o.y.value()),
                        fmt_f64(rec.margin),
                        fmt_f64(rec.loss),
                        fmt_f64(rec.weight),
                        fmt_f64(rec.quad),
                    ];
                    row.extend(o.x.iter().map(|&v| fmt_f64(v)));
                    row.extend(rec.theta.iter().map(|&v| fmt_f64(v)));
                    trace_rows.push(row);
                }
            }
            replicates.push(ReplicateEntry::new(li, r, &trace));
            Ok::<(), CliError>(())
        })?;
        let reps = cfg.replicates as f64;
        results.push(LearnerSummary {
            learner_index: li,
            learner: name.into(),
            replicates: cfg.replicates,
            mean_cumulative_loss: loss_sum / reps,
            mean_expected_regret: has_regret.then(|| regret_sum / reps),
        });
    }
    if cfg.output.wants(Format::Csv) {
        summary.write(&dir.join(SUMMARY_CSV))?;
        curves.write(&dir.join(CURVES_CSV))?;
        if opts.full_trace {
            trace_rows.write(&dir.join(TRACE_CSV))?;
        }
    }
    if cfg.output.wants(Format::Json) {
        let m = Manifest {
            command: "run",
            version: VERSION,
            csv_schema_version: CSV_SCHEMA_VERSION,
            config: cfg,
            sabotage_step: opts.trace_options(spec.n).sabotage_step,
            seeds: seeds(cfg),
            replicates,
            results: &results,
        };
        write_json(&dir.join(RUN_MANIFEST), &m)?;
    }
    if !opts.quiet {
        for s in &results {
            let regret = s.mean_expected_regret.map(|v| format!(", mean expected regret {v:.6}")).unwrap_or_default();
            println!(
                "{}#{}: {} replicates, mean cumulative loss {:.6}{regret}",
                s.learner, s.learner_index, s.replicates, s.mean_cumulative_loss
            );
        }
        println!("wrote {}", dir.display());
    }
    Ok(Status::Pass)
}

#[derive(Debug, Serialize)]
struct VerifyResults<'a> {
    verdict: Verdict,
    records: &'a [CheckRecord],
}

/// Evaluates the configured checks and writes `bounds.csv` and `verify.json`.
/// Returns [`Status::CheckFailed`] when any deterministic or statistical
/// check fails.
pub fn cmd_verify(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Status, CliError> {
    cfg.validate(opts.allow_slow)?;
    if cfg.checks.is_empty() {
        return Err(CliError::Config("verify needs at least one entry in checks".into()));
    }
    let dir = opts.dir(cfg)?;
    let spec = cfg.effective_stream();
    let mut records = Vec::new();
    let mut replicates = Vec::new();
    for (li, learner) in cfg.learners.iter().enumerate() {
        let mut checks = LearnerChecks::new(cfg, li);
        if checks.is_empty() {
            continue;
        }
        for_each_replicate(learner, &spec, cfg.replicates, opts.trace_options(spec.n), |r, trace| {
            replicates.push(ReplicateEntry::new(li, r, &trace));
            checks.observe(r, &trace)
        })?;
        records.extend(checks.finish()?);
    }
    let verdict = Verdict {
        records: records.len(),
        gating: records.iter().filter(|r| r.kind.gates()).count(),
        failed: records.iter().filter(|r| r.fails()).count(),
    };
    if cfg.output.wants(Format::Csv) {
        bounds_table(&records).write(&dir.join(BOUNDS_CSV))?;
    }
    if cfg.output.wants(Format::Json) {
        let m = Manifest {
            command: "verify",
            version: VERSION,
            csv_schema_version: CSV_SCHEMA_VERSION,
            config: cfg,
            sabotage_step: opts.trace_options(spec.n).sabotage_step,
            seeds: seeds(cfg),
            replicates,
            results: VerifyResults { verdict: verdict.clone(), records: &records },
        };
        write_json(&dir.join(VERIFY_MANIFEST), &m)?;
    }
    if !opts.quiet {
        print_verdict(&records);
    }
    Ok(if verdict.failed == 0 { Status::Pass } else { Status::CheckFailed })
}

fn print_verdict(records: &[CheckRecord]) {
    // (learner_index, learner, name) -> (total, failed, kind, last record)
    let mut groups: BTreeMap<(usize, &str, &str), (usize, usize, &CheckRecord)> = BTreeMap::new();
    for r in records {
        let e = groups.entry((r.learner_index, &r.learner, &r.report.name)).or_insert((0, 0, r));
        e.0 += 1;
        e.1 += usize::from(!r.report.satisfied);
        e.2 = r;
    }
    for ((li, learner, name), (total, failed, last)) in groups {
        let tag = match (last.kind.gates(), failed) {
            (false, _) => "INFO",
            (true, 0) => "PASS",
            _ => "FAIL",
        };
        if total == 1 {
            let note = last.report.note.as_deref().map(|n| format!("  ({n})")).unwrap_or_default();
            println!("{tag} {learner}#{li} {name}: {:.6e} <= {:.6e}{note}", last.report.lhs, last.report.rhs);
        } else {
            println!("{tag} {learner}#{li} {name}: {}/{total} replicates hold", total - failed);
        }
    }
}

/// Grid for `sweep`; an empty axis keeps the configured value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub n: Vec<usize>,
    pub d: Vec<usize>,
    pub p1: Vec<f64>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub learner_index: usize,
    pub learner: String,
    pub n: usize,
    pub d: usize,
    pub p1: f64,
    pub seed: u64,
    pub replicates: usize,
    pub mean_cumulative_loss: f64,
    pub mean_expected_regret: Option<f64>,
    pub regret_over_log_n: Option<f64>,
    pub envelope: EnvelopeStats,
}

fn or_default<T: Clone>(axis: &[T], fallback: T) -> Vec<T> {
    if axis.is_empty() {
        vec![fallback]
    } else {
        axis.to_vec()
    }
}

/// Config for one grid point. A new `d` rescales `theta_true` to
/// `||theta_true|| e_1`.
pub fn grid_point(cfg: &ExperimentConfig, n: usize, d: usize, p1: Option<f64>, seed: u64) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.stream.n = n;
    if d != c.stream.d {
        c.stream.d = d;
        if let Some(tt) = &c.stream.theta_true {
            let mut e = vec![0.0; d];
            e[0] = norm(tt);
            c.stream.theta_true = Some(e);
        }
    }
    if let Some(p1) = p1 {
        c.learners = c.learners.iter().map(|l| l.with_p1(p1)).collect();
    }
    c.stream.seed = seed;
    c.base_seed = None;
    c
}

/// Runs the learners over the cartesian grid and writes `sweep.csv` and
/// `sweep.json`.
pub fn cmd_sweep(cfg: &ExperimentConfig, grid: &SweepGrid, opts: &RunOptions) -> Result<Status, CliError> {
    cfg.validate(opts.allow_slow)?;
    let dir = opts.dir(cfg)?;
    let base = cfg.effective_stream();
    let ns = or_default(&grid.n, base.n);
    let ds = or_default(&grid.d, base.d);
    let p1s: Vec<Option<f64>> =
        if grid.p1.is_empty() { vec![None] } else { grid.p1.iter().copied().map(Some).collect() };
    let seed_axis = or_default(&grid.seeds, base.seed);
    let mut rows = Vec::new();
    for &n in &ns {
        for &d in &ds {
            for &p1 in &p1s {
                for &seed in &seed_axis {
                    let point = grid_point(cfg, n, d, p1, seed);
                    point.validate(opts.allow_slow)?;
                    let spec = point.effective_stream();
                    for (li, learner) in point.learners.iter().enumerate() {
                        let (mut loss, mut regret, mut has_regret) = (0.0, 0.0, false);
                        let mut env = EnvelopeStats::zero();
                        for_each_replicate(learner, &spec, point.replicates, opts.trace_options(n), |_, trace| {
                            loss += trace.cumulative_loss();
                            if let Some(tt) = theta_true_for(&trace) {
                                regret += logit_kalman::lab::expected_regret(&trace, &tt)?;
                                has_regret = true;
                            }
                            env = env.merge(trace.envelope);
                            Ok::<(), CliError>(())
                        })?;
                        let reps = point.replicates as f64;
                        let mean_regret = has_regret.then(|| regret / reps);
                        let log_n = (n as f64).ln();
                        rows.push(SweepRow {
                            learner_index: li,
                            learner: learner.name().into(),
                            n,
                            d,
                            p1: learner.p1(),
                            seed,
                            replicates: point.replicates,
                            mean_cumulative_loss: loss / reps,
                            mean_expected_regret: mean_regret,
                            regret_over_log_n: mean_regret.filter(|_| n > 1).map(|r| r / log_n),
                            envelope: env,
                        });
                    }
                }
            }
        }
    }
    if cfg.output.wants(Format::Csv) {
        let mut t = Table::new([
            "learner_index",
            "learner",
            "n",
            "d",
            "p1",
            "seed",
            "replicates",
            "mean_cumulative_loss",
            "mean_expected_regret",
            "regret_over_log_n",
            "d_x",
            "d_theta",
            "d_margin",
        ]);
        for r in &rows {
            t.push(vec![
                r.learner_index.to_string(),
                r.learner.clone(),
                r.n.to_string(),
                r.d.to_string(),
                fmt_f64(r.p1),
                r.seed.to_string(),
                r.replicates.to_string(),
                fmt_f64(r.mean_cumulative_loss),
                fmt_opt(r.mean_expected_regret),
                fmt_opt(r.regret_over_log_n),
                fmt_f64(r.envelope.d_x),
                fmt_f64(r.envelope.d_theta),
                fmt_f64(r.envelope.d_margin),
            ]);
        }
        t.write(&dir.join(SWEEP_CSV))?;
    }
    if cfg.output.wants(Format::Json) {
        #[derive(Serialize)]
        struct SweepManifest<'a> {
            command: &'a str,
            version: &'a str,
            csv_schema_version: u32,
            config: &'a ExperimentConfig,
            grid: &'a SweepGrid,
            results: &'a [SweepRow],
        }
        let m = SweepManifest {
            command: "sweep",
            version: VERSION,
            csv_schema_version: CSV_SCHEMA_VERSION,
            config: cfg,
            grid,
            results: &rows,
        };
        write_json(&dir.join(SWEEP_MANIFEST), &m)?;
    }
    if !opts.quiet {
        println!("{} sweep rows written to {}", rows.len(), dir.display());
    }
    Ok(Status::Pass)
}

/// Summarizes the manifests found in `dir`. Reports [`Status::CheckFailed`]
/// when a stored verification recorded a failure.
pub fn cmd_report(dir: &Path) -> Result<Status, CliError> {
    let mut found = false;
    let mut status = Status::Pass;
    for file in [RUN_MANIFEST, VERIFY_MANIFEST, SWEEP_MANIFEST] {
        let path = dir.join(file);
        if !path.exists() {
            continue;
        }
        found = true;
        let text = std::fs::read_to_string(&path)?;
        let v: serde_json::Value = serde_json::from_str(&text)?;
        let version = v["version"].as_str().unwrap_or("?");
        println!("{file} (regretlab {version})");
        match file {
            RUN_MANIFEST => {
                let rs: Vec<LearnerSummary> = serde_json::from_value(v["results"].clone())?;
                for s in rs {
                    let regret =
                        s.mean_expected_regret.map(|r| format!(", mean expected regret {r:.6}")).unwrap_or_default();
                    println!(
                        "  {}#{}: {} replicates, mean cumulative loss {:.6}{regret}",
                        s.learner, s.learner_index, s.replicates, s.mean_cumulative_loss
                    );
                }
            }
            VERIFY_MANIFEST => {
                let verdict: Verdict = serde_json::from_value(v["results"]["verdict"].clone())?;
                // Bounds may be infinite, which JSON stores as null.
                let empty = Vec::new();
                let records = v["results"]["records"].as_array().unwrap_or(&empty);
                println!("  {} records, {} gating, {} failed", verdict.records, verdict.gating, verdict.failed);
                for r in records {
                    let gates = r["kind"].as_str() != Some("info");
                    if gates && r["report"]["satisfied"] == serde_json::Value::Bool(false) {
                        let rep = r["replicate"].as_u64().map(|x| format!(" replicate {x}")).unwrap_or_default();
                        println!(
                            "  FAIL {}#{}{rep} {}",
                            r["learner"].as_str().unwrap_or("?"),
                            r["learner_index"],
                            r["report"]["name"].as_str().unwrap_or("?")
                        );
                    }
                }
                if verdict.failed > 0 {
                    status = Status::CheckFailed;
                }
            }
            _ => {
                let rows: Vec<SweepRow> = serde_json::from_value(v["results"].clone())?;
                println!("  {} grid rows", rows.len());
                for r in rows {
                    let ratio = r.regret_over_log_n.map(|x| format!(", regret / log n {x:.4}")).unwrap_or_default();
                    println!(
                        "  {}#{} n={} d={} p1={} seed={}: loss {:.4}{ratio}",
                        r.learner, r.learner_index, r.n, r.d, r.p1, r.seed, r.mean_cumulative_loss
                    );
                }
            }
        }
    }
    if !found {
        return Err(CliError::Config(format!("no manifest found in {}", dir.display())));
    }
    Ok(status)
}
