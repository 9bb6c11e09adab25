use std::path::Path;
use std::process::Command;

use rmtlab::experiment::{self, ExperimentConfig, ExperimentKind, OutputFormat};
use rmtlab::RadialLaw;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rmtlab"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn run_is_byte_identical_across_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "u.json", r#"{"kind":"universality","m":2,"n":2,"samples":3000,"seed":99,
        "radial":[{"law":"gaussian"},{"law":"uniform-ball","radius":1.0}]}"#);
    let outs: Vec<Vec<u8>> = (0..2)
        .map(|k| {
            let out = dir.path().join(format!("r{k}.json"));
            let st = bin().arg("run").arg(&cfg).arg("--out").arg(&out).status().unwrap();
            assert!(st.success());
            std::fs::read(&out).unwrap()
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
    let v: serde_json::Value = serde_json::from_slice(&outs[0]).unwrap();
    assert_eq!(v["passed"], serde_json::Value::Bool(true));
    assert!(v.get("wall_time").is_none());
}

#[test]
fn shard_count_leaves_pooled_statistics_unchanged() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Girko, 5);
    cfg.m = 2;
    cfg.n = 1;
    cfg.u = vec![0.75];
    cfg.samples = 2100;
    cfg.radial = vec![RadialLaw::Gaussian, RadialLaw::FixedShell { r0: 2.0 }];
    let base = experiment::run(&cfg).unwrap();
    for shards in [2, 3, 7, 60] {
        cfg.shards = shards;
        let r = experiment::run(&cfg).unwrap();
        assert_eq!(r.entries, base.entries, "shards = {shards}");
        assert_eq!(r.arms, base.arms);
        assert_eq!(r.samples, base.samples);
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "e.json", r#"{"kind":"exactness","m":1,"n":1,"samples":500,"seed":1}"#);
    let run = |seed: &str| {
        let out = dir.path().join(format!("s{seed}.json"));
        bin().arg("run").arg(&cfg).args(["--seed", seed, "--shards", "2", "--out"]).arg(&out).status().unwrap();
        std::fs::read_to_string(&out).unwrap()
    };
    let (a, b) = (run("1"), run("2"));
    assert_ne!(a, b);
    assert!(b.contains("\"seed\": 2"));
    assert!(b.contains("\"shards\": 2"));
}

#[test]
fn csv_has_one_row_per_collected_draw() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "e.json", r#"{"kind":"exactness","m":3,"n":1,"samples":800,"seed":3}"#);
    let out = dir.path().join("e.csv");
    let st = bin().arg("run").arg(&cfg).args(["--format", "csv", "--out"]).arg(&out).status().unwrap();
    assert!(st.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "arm,index,z11,z21,z31,logdet");
    let rows: Vec<&str> = lines.collect();
    let mut cfg = ExperimentConfig::from_file(&dir.path().join("e.json")).unwrap();
    cfg.shards = 1;
    let report = experiment::run(&cfg).unwrap();
    assert_eq!(rows.len(), report.arms[0].collected);
    assert_eq!(report.arms[0].collected + report.arms[0].failed, 800);
    assert!(rows.iter().all(|r| r.split(',').count() == 6));
}

#[test]
fn emit_writes_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(ExperimentKind::Complex, 4);
    cfg.m = 1;
    cfg.n = 1;
    cfg.samples = 400;
    let report = experiment::run(&cfg).unwrap();
    experiment::emit(&report, OutputFormat::Json, &dir.path().join("a.json")).unwrap();
    experiment::emit(&report, OutputFormat::Csv, &dir.path().join("a.csv")).unwrap();
    let text = std::fs::read_to_string(dir.path().join("a.json")).unwrap();
    serde_json::from_str::<serde_json::Value>(&text).unwrap();
    let pos: Vec<usize> = ["config", "passed", "failures", "entries", "identities", "arms"]
        .iter()
        .map(|k| text.find(&format!("\n  \"{k}\":")).unwrap())
        .collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]), "{pos:?}");
    assert_eq!(std::fs::read_to_string(dir.path().join("a.csv")).unwrap().lines().count(), 401);
    assert!(experiment::emit(&report, OutputFormat::Json, &dir.path().join("missing/a.json")).is_err());
}

#[test]
fn identities_subcommand_exits_zero() {
    let out = bin().args(["identities", "--max", "12"]).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["identities"].as_array().unwrap().len(), 144);
    for row in v["identities"].as_array().unwrap() {
        assert!(row["gamma_identity"].as_f64().unwrap() < 1e-10);
    }
}

#[test]
fn failing_suite_exits_nonzero_and_lists_failures() {
    // A threshold just below 1 fails nearly every KS test.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "f.json", r#"{"kind":"exactness","m":2,"n":1,"samples":500,"seed":3,"threshold":0.999999}"#);
    let out = bin().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.lines().any(|l| l.starts_with("FAILED ") && l.contains("vs")), "{err}");
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", r#"{"kind":"exactness","seed":1,"samples":60,"shards":2}"#);
    let out = bin().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("`samples`"));
    let out = bin().arg("run").arg(dir.path().join("nope.json")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn density_subcommand() {
    let out = bin().args(["density", "--kind", "universal-real", "--at", "[[0.0]]"]).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["density"].as_f64().unwrap() - std::f64::consts::FRAC_1_PI).abs() < 1e-15);
    let out = bin()
        .args(["density", "--kind", "matrix-t", "--params", r#"{"q": 1}"#, "--at", "[[0.5, 1.0], [0.0, -1.0]]"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let out = bin().args(["density", "--kind", "girko", "--at", "not json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn thread_cap_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"kind":"complex","m":1,"n":2,"samples":700,"seed":8,"shards":4,
        "radial":[{"law":"gaussian"},{"law":"fixed-shell","r0":1.0}]}"#);
    let a = bin().arg("run").arg(&cfg).env("RMTLAB_THREADS", "1").output().unwrap();
    let b = bin().arg("run").arg(&cfg).env("RMTLAB_THREADS", "3").output().unwrap();
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
}
