use std::fs;
use std::path::Path;
use std::process::Command;

use regretlab::{cmd_run, cmd_sweep, CheckId, ExperimentConfig, RunOptions, Status, SweepGrid};

const BIN: &str = env!("CARGO_BIN_EXE_regretlab");

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, text).unwrap();
    p
}

fn run_bin(args: &[&str]) -> (i32, String) {
    let out = Command::new(BIN).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn csv_rows(path: &Path) -> usize {
    csv::Reader::from_path(path).unwrap().records().count()
}

const SMOKE: &str = r#"{
    "stream": {"n": 10, "d": 2, "scheme": "wellspecified", "theta_true": [1.0, 0.0], "seed": 3},
    "learners": [{"kind": "ekf"}]
}"#;

#[test]
fn smoke_run_writes_every_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMOKE);
    let out = tmp.path().join("out");
    let (code, _) = run_bin(&["run", "-c", cfg.to_str().unwrap(), "-o", out.to_str().unwrap(), "--full-trace", "-q"]);
    assert_eq!(code, 0);
    assert_eq!(csv_rows(&out.join("trace.csv")), 10);
    assert_eq!(csv_rows(&out.join("summary.csv")), 1);
    // t = 1, 2, 4, 8, 10
    assert_eq!(csv_rows(&out.join("curves.csv")), 5);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seeds"], serde_json::json!([3]));
    assert_eq!(manifest["config"]["learners"][0]["p1"], 1.0);
    let (code, text) = run_bin(&["report", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(text.contains("ekf#0"));
}

#[test]
fn trace_is_off_by_default() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMOKE);
    let out = tmp.path().join("out");
    assert_eq!(run_bin(&["run", "-c", cfg.to_str().unwrap(), "-o", out.to_str().unwrap(), "-q"]).0, 0);
    assert!(!out.join("trace.csv").exists());
}

#[test]
fn output_is_independent_of_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SMOKE.replace("\"learners\"", "\"replicates\": 7, \"learners\"").replace("\"n\": 10", "\"n\": 300");
    let cfg = write_config(tmp.path(), &text);
    let mut outputs = Vec::new();
    for jobs in ["1", "3"] {
        let out = tmp.path().join(format!("out{jobs}"));
        let args =
            ["run", "-c", cfg.to_str().unwrap(), "-o", out.to_str().unwrap(), "--jobs", jobs, "--full-trace", "-q"];
        assert_eq!(run_bin(&args).0, 0);
        outputs
            .push(["summary.csv", "curves.csv", "trace.csv", "manifest.json"].map(|f| fs::read(out.join(f)).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMOKE);
    let read = |seed: &str| {
        let out = tmp.path().join(format!("s{seed}"));
        run_bin(&["run", "-c", cfg.to_str().unwrap(), "-o", out.to_str().unwrap(), "--seed", seed, "-q"]);
        fs::read_to_string(out.join("summary.csv")).unwrap()
    };
    let (a, b) = (read("11"), read("12"));
    assert_ne!(a, b);
    assert!(a.lines().nth(1).unwrap().starts_with("0,ekf,0,11,"));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let path = |name: &str, text: &str| {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p.to_str().unwrap().to_string()
    };
    let out = dir.join("out");
    let out = out.to_str().unwrap();

    // prop3 needs theta_true
    let no_truth = path(
        "a.json",
        r#"{"stream": {"n": 50, "d": 2, "scheme": "alternating"}, "learners": [{"kind": "ekf"}], "checks": ["prop3"]}"#,
    );
    assert_eq!(run_bin(&["verify", "-c", &no_truth, "-o", out, "-q"]).0, 2);

    let sos = path(
        "b.json",
        r#"{"stream": {"n": 200, "d": 2, "scheme": "alternating"}, "learners": [{"kind": "sos"}],
            "checks": ["theorem1", "prop2", "lemma1"]}"#,
    );
    let (code, text) = run_bin(&["verify", "-c", &sos, "-o", out]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("PASS sos#0 lemma1"));
    assert_eq!(run_bin(&["report", out]).0, 0);

    let (code, text) = run_bin(&["verify", "-c", &sos, "-o", out, "--sabotage"]);
    assert_eq!(code, 1);
    assert!(text.contains("FAIL sos#0 lemma1"));
    assert_eq!(run_bin(&["report", out]).0, 1);

    assert_eq!(run_bin(&["run", "-c", &path("c.json", "{not json"), "-o", out]).0, 2);
    assert_eq!(run_bin(&["run", "-c", &sos, "-o", out, "--jobs", "0"]).0, 2);
    assert_eq!(run_bin(&["report", dir.join("empty").to_str().unwrap()]).0, 2);

    // SOS beyond the size limit needs --allow-slow
    let big = path("d.json", &fs::read_to_string(&sos).unwrap().replace("\"n\": 200", "\"n\": 6000"));
    assert_eq!(run_bin(&["run", "-c", &big, "-o", out]).0, 2);
}

#[test]
fn numeric_abort_maps_to_exit_3() {
    let r: Result<Status, regretlab::CliError> =
        Err(logit_kalman::Error::NumericAbort { step: 4, reason: "non-finite".into() }.into());
    assert_eq!(regretlab::exit_code(&r), 3);
}

#[test]
fn sweep_writes_one_row_per_point_and_learner() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::from_json(
        r#"{"stream": {"n": 100, "d": 2, "scheme": "wellspecified", "theta_true": [0.6, 0.8]},
            "learners": [{"kind": "ekf"}, {"kind": "ogd"}], "replicates": 3}"#,
    )
    .unwrap();
    cfg.checks = vec![CheckId::Prop3];
    let opts = RunOptions { out_dir: Some(tmp.path().to_path_buf()), quiet: true, ..Default::default() };
    let grid = SweepGrid { n: vec![50, 100], d: vec![2, 4], p1: vec![0.5, 1.0], seeds: vec![1] };
    assert_eq!(cmd_sweep(&cfg, &grid, &opts).unwrap(), Status::Pass);
    let mut reader = csv::Reader::from_path(tmp.path().join("sweep.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2 * 2 * 2 * 2);
    // rescaled theta_true keeps norm 1, so the regret column is always filled
    assert!(rows.iter().all(|r| !r[9].is_empty()));
    assert!(tmp.path().join("sweep.json").exists());
}

#[test]
fn run_is_byte_identical_across_calls() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_json(
        r#"{"stream": {"n": 120, "d": 3, "scheme": "wellspecified", "theta_true": [1.0, 0.0, 0.0], "seed": 9},
            "learners": [{"kind": "ekf"}, {"kind": "sos"}, {"kind": "ftl"}], "replicates": 3}"#,
    )
    .unwrap();
    let read = |sub: &str| {
        let dir = tmp.path().join(sub);
        let opts = RunOptions { out_dir: Some(dir.clone()), full_trace: true, quiet: true, ..Default::default() };
        cmd_run(&cfg, &opts).unwrap();
        ["summary.csv", "curves.csv", "trace.csv"].map(|f| fs::read(dir.join(f)).unwrap())
    };
    assert_eq!(read("a"), read("b"));
}

#[test]
fn no_state_leaks_between_runs_in_one_process() {
    let tmp = tempfile::tempdir().unwrap();
    let a = ExperimentConfig::from_json(
        r#"{"stream": {"n": 200, "d": 2, "scheme": "alternating"}, "learners": [{"kind": "sos"}, {"kind": "ons", "gamma": 0.5, "diameter": 4.0}]}"#,
    )
    .unwrap();
    let b_text = r#"{"stream": {"n": 300, "d": 3, "scheme": "wellspecified", "theta_true": [0.0, 1.0, 0.0], "seed": 4},
        "learners": [{"kind": "ekf"}, {"kind": "ftl"}], "replicates": 4}"#;
    let b = ExperimentConfig::from_json(b_text).unwrap();
    let opts = |sub: &str| RunOptions { out_dir: Some(tmp.path().join(sub)), quiet: true, ..Default::default() };
    cmd_run(&a, &opts("a")).unwrap();
    cmd_run(&b, &opts("b")).unwrap();

    let cfg = write_config(tmp.path(), b_text);
    let fresh = tmp.path().join("fresh");
    assert_eq!(run_bin(&["run", "-c", cfg.to_str().unwrap(), "-o", fresh.to_str().unwrap(), "-q"]).0, 0);
    for f in ["summary.csv", "curves.csv", "manifest.json"] {
        assert_eq!(fs::read(tmp.path().join("b").join(f)).unwrap(), fs::read(fresh.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn standard_ekf_run_is_fast() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_json(
        r#"{"stream": {"n": 10000, "d": 5, "scheme": "wellspecified", "theta_true": [1.0, 0.0, 0.0, 0.0, 0.0]},
            "learners": [{"kind": "ekf"}], "replicates": 50}"#,
    )
    .unwrap();
    let start = std::time::Instant::now();
    let opts = RunOptions { out_dir: Some(tmp.path().to_path_buf()), quiet: true, ..Default::default() };
    cmd_run(&cfg, &opts).unwrap();
    assert!(start.elapsed().as_secs() < 300);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("manifest.json")).unwrap()).unwrap();
    let reps = manifest["replicates"].as_array().unwrap();
    assert_eq!(reps.len(), 50);
    assert_eq!(reps[0]["final_theta"].as_array().unwrap().len(), 5);
    // t = 1, 2, ..., 8192, 10000
    assert_eq!(csv_rows(&tmp.path().join("curves.csv")), 50 * 15);
}
