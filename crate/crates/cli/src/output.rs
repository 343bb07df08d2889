//! CSV tables and JSON manifests. Every file is written once, after all
//! replicates are aggregated, so output bytes do not depend on scheduling.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::checks::CheckRecord;
use crate::CliError;

/// Bumped whenever a CSV header changes.
pub const CSV_SCHEMA_VERSION: u32 = 1;
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const SUMMARY_CSV: &str = "summary.csv";
pub const CURVES_CSV: &str = "curves.csv";
pub const TRACE_CSV: &str = "trace.csv";
pub const BOUNDS_CSV: &str = "bounds.csv";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const RUN_MANIFEST: &str = "manifest.json";
pub const VERIFY_MANIFEST: &str = "verify.json";
pub const SWEEP_MANIFEST: &str = "sweep.json";

/// Shortest round-trip representation; exponent form for very small or large values.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// A header plus rows of already formatted cells.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn theta_columns(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("{prefix}{i}")).collect()
}

/// Sample points for regret curves: powers of two up to `n`, plus `n`.
pub fn curve_points(n: usize) -> Vec<usize> {
    let mut pts: Vec<usize> =
        std::iter::successors(Some(1usize), |t| t.checked_mul(2)).take_while(|&t| t <= n).collect();
    if pts.last() != Some(&n) && n > 0 {
        pts.push(n);
    }
    pts
}

pub fn bounds_table(records: &[CheckRecord]) -> Table {
    let mut t = Table::new([
        "name",
        "lhs",
        "rhs",
        "slack",
        "satisfied",
        "check",
        "kind",
        "learner_index",
        "learner",
        "replicate",
        "note",
    ]);
    for r in records {
        t.push(vec![
            r.report.name.clone(),
            fmt_f64(r.report.lhs),
            fmt_f64(r.report.rhs),
            fmt_f64(r.report.slack),
            r.report.satisfied.to_string(),
            r.check.to_string(),
            r.kind.as_str().to_string(),
            r.learner_index.to_string(),
            r.learner.clone(),
            r.replicate.map(|v| v.to_string()).unwrap_or_default(),
            r.report.note.clone().unwrap_or_default(),
        ]);
    }
    t
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn prepare_dir(dir: &Path) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    Ok(dir.to_path_buf())
}
