use serde_json::Value;
use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

fn perfdom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_perfdom")).args(args).output().expect("binary runs")
}

fn artifacts(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut m = BTreeMap::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let e = e.unwrap();
        m.insert(e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap());
    }
    m
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn cluster_run_writes_boxes_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = perfdom(&["run", "cluster", "--lambda", "50", "--eps", "0.05", "--alpha", "4", "--seed", "7", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let files = artifacts(&out);
    assert!(files.contains_key("boxes.json") && files.contains_key("report.csv"));
    let report = String::from_utf8(files["report.csv"].clone()).unwrap();
    assert!(report.starts_with("eps,status,property,margin,threshold,pass\n"));
    assert!(report.lines().skip(1).all(|l| l.ends_with(",true")));
    let m = manifest(&out);
    assert_eq!(m["all_pass"], Value::Bool(true));
    assert_eq!(m["config"]["seed"], 7);
    assert_eq!(m["config"]["params"]["lambda"], 50.0);
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    assert!(m["wall_time_s"].is_number());
}

#[test]
fn cutoff_rate_reports_sigma_column() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("rate");
    let o = perfdom(&["run", "cutoff-rate", "--alpha", "4", "--r", "2", "--ladder", "0.2,0.14,0.1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("rate.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("eps,gap,sigma_theory"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[2] == "0.5"));
}

#[test]
fn malformed_config_exits_2_without_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    std::fs::write(&cfg, "{\"experiment\": \"cluster\", \"params\": {").unwrap();
    let out = tmp.path().join("never");
    let o = perfdom(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("malformed config"));
    assert!(!out.exists());

    std::fs::write(&cfg, r#"{"experiment": "cluster", "params": {"lamda": 3}}"#).unwrap();
    let o = perfdom(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn violated_precondition_exits_2_and_names_it() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("never");
    let o = perfdom(&["run", "cluster", "--lambda=-1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("intensity"), "{}", stderr(&o));
    let o = perfdom(&["run", "cutoff-rate", "--r", "3.5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("inadmissible"), "{}", stderr(&o));
    let o = perfdom(&["run", "occupancy", "--trials", "5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn flags_override_config_keys() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.json");
    std::fs::write(&cfg, r#"{"experiment": "sample", "params": {"lambda": 2.0, "eps": 0.2}, "seed": 3}"#).unwrap();
    let out = tmp.path().join("s");
    let o = perfdom(&["run", "sample", "--config", cfg.to_str().unwrap(), "--lambda", "0.5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m = manifest(&out);
    assert_eq!(m["config"]["params"]["lambda"], 0.5);
    assert_eq!(m["config"]["params"]["eps"], 0.2);
    assert_eq!(m["config"]["seed"], 3);
    // Defaults are spelled out in the echo.
    assert_eq!(m["config"]["params"]["domain"]["kind"], "ball");
}

#[test]
fn mismatched_experiment_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.json");
    std::fs::write(&cfg, r#"{"experiment": "sample"}"#).unwrap();
    let o = perfdom(&["run", "john", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = perfdom(&["run"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str, workers: &str, extra: &[&str]| {
        let out = tmp.path().join(name);
        let mut args = vec!["run", "--seed", "11", "--workers", workers, "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        let o = perfdom(&args);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        out
    };
    for (tag, extra) in [
        ("sample", &["sample", "--eps", "0.1"][..]),
        ("occ", &["occupancy", "--trials", "300", "--any-cube"][..]),
        ("sep", &["separation", "--trials", "200"][..]),
    ] {
        let a = run(&format!("{tag}1"), "1", extra);
        let b = run(&format!("{tag}2"), "2", extra);
        let (fa, fb) = (artifacts(&a), artifacts(&b));
        assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
        for (k, v) in &fa {
            if k != "manifest.json" {
                assert_eq!(v, &fb[k], "{tag}: {k}");
            }
        }
        let strip = |mut m: Value| {
            let o = m.as_object_mut().unwrap();
            o.remove("wall_time_s");
            o["config"].as_object_mut().unwrap().remove("output_dir");
            m
        };
        assert_eq!(strip(manifest(&a)), strip(manifest(&b)), "{tag}");
    }
}

#[test]
fn cluster_ladder_records_oversized_eps_and_continues() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("lad");
    // At eps = 0.5 about fifty centers share a grid cube, so some box overflows.
    let cfg = tmp.path().join("lad.json");
    std::fs::write(
        &cfg,
        r#"{"experiment": "cluster", "seed": 2, "params": {"dim": 2, "lambda": 200,
            "domain": {"kind": "box", "aabb": {"dim": 2, "lo": [-1, -1, 0], "hi": [1, 1, 0]}},
            "eps_ladder": [0.5, 0.05]}}"#,
    )
    .unwrap();
    let o = perfdom(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m = manifest(&out);
    let recs = m["records"].as_array().unwrap();
    assert_eq!(recs.len(), 2);
    assert_eq!(recs[0]["status"], "epsilon_too_large");
    assert_eq!(recs[1]["status"], "ok");
}
