use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn hsssi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hsssi")).args(args).output().expect("binary runs")
}

fn hsssi_threads(threads: &str, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hsssi"))
        .env("HSSSI_THREADS", threads)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_first_order(output: &Path) -> Value {
    json!({
        "name": "small",
        "regime": {
            "kind": "particles",
            "family": { "kind": "first-order" },
            "source": { "kind": "pool", "size": 100, "batch": 40 },
            "min_steps": 200,
            "limit": { "size": 200, "dt": 0.01, "half_width": 10.0, "far_field": true }
        },
        "params": { "alpha": 1.5, "beta": 1.5, "epsilon_cut": 1.0 },
        "phi": { "kind": "indicators", "terms": [ { "weight": 1.0, "lo": -0.5, "hi": 1.0 } ] },
        "ladder": [10.0, 30.0],
        "replicas": 100,
        "times": [0.5, 1.0],
        "theta": [0.2, 0.5, 1.0],
        "seed": 42,
        "output": output
    })
}

fn write_config(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p.display().to_string()
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn localtime_moment_matches_closed_form() {
    let o = hsssi(&["localtime-moments", "--beta", "1.5", "--t", "1", "--n", "1"]);
    assert!(o.status.success());
    let v: f64 = stdout(&o).trim().parse().unwrap();
    // 3 Γ(5/3) / π
    assert!((v - 0.862058).abs() < 1e-5, "{v}");
}

#[test]
fn cf_limit_at_zero_is_one() {
    let o = hsssi(&["cf-limit", "--theta", "0", "--paths", "20"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# schema: "));
    assert_eq!(lines.next().unwrap(), "theta,re,im,stderr");
    assert_eq!(lines.next().unwrap(), "0,1,0,0");
}

#[test]
fn validate_rejects_heavy_gamma_outside_window() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_first_order(&dir.path().join("out"));
    c["regime"] = json!({ "kind": "cf-limit", "family": { "kind": "heavy-symmetric", "gamma": 1.4 } });
    c["phi"] = json!({ "kind": "heavy-pair", "gamma1": 1.4, "gamma2": 1.4, "g1": 1.0 });
    let path = write_config(dir.path(), "heavy.json", &c);
    let o = hsssi(&["validate", "--config", &path]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn unknown_key_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_first_order(&dir.path().join("out"));
    c["params"]["alpha_"] = json!(1.5);
    let path = write_config(dir.path(), "bad.json", &c);
    let o = hsssi(&["run", "--config", &path]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("alpha_"), "{}", stderr(&o));
}

#[test]
fn missing_seed_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_first_order(&dir.path().join("out"));
    c.as_object_mut().unwrap().remove("seed");
    let path = write_config(dir.path(), "noseed.json", &c);
    let o = hsssi(&["validate", "--config", &path]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed"));
}

#[test]
fn subcommand_must_match_regime() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "c.json", &small_first_order(&dir.path().join("out")));
    let o = hsssi(&["rosen", "--config", &path]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runs_are_byte_identical_across_repeats_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut dirs = Vec::new();
    for (k, threads) in ["1", "1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("run{k}"));
        // the output directory is part of the config, so it is set by flag
        let path = write_config(dir.path(), "c.json", &small_first_order(&dir.path().join("unused")));
        let o = hsssi_threads(threads, &["particles", "--config", &path, "--output", out.to_str().unwrap()]);
        assert!(matches!(o.status.code(), Some(0 | 1)), "{}", stderr(&o));
        dirs.push(out);
    }
    let a = read_dir_sorted(&dirs[0]);
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    assert!(names.contains(&"summary.json") && names.contains(&"ladder_p0.csv"), "{names:?}");
    for d in &dirs[1..] {
        let b = read_dir_sorted(d);
        assert_eq!(a.len(), b.len());
        for ((na, ba), (nb, bb)) in a.iter().zip(&b) {
            assert_eq!(na, nb);
            if na == "config.json" {
                continue;
            }
            assert!(ba == bb, "{na} differs");
        }
    }
}

#[test]
fn every_csv_declares_a_schema_and_report_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("first");
    let path = write_config(dir.path(), "c.json", &small_first_order(&out));
    let o = hsssi(&["run", "--config", &path]);
    let summary: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(o.status.code(), Some(if summary["pass"].as_bool().unwrap() { 0 } else { 1 }));
    for (name, bytes) in read_dir_sorted(&out) {
        if name.ends_with(".csv") || name.ends_with(".jsonl") {
            assert!(bytes.starts_with(b"# schema: hsssi."), "{name}");
        }
    }
    let r = hsssi(&["report", "--dir", dir.path().to_str().unwrap()]);
    let report: Value = serde_json::from_str(&stdout(&r)).unwrap();
    assert_eq!(report["runs"].as_array().unwrap().len(), 1);
    assert_eq!(report["pass"], summary["pass"]);
    assert!(dir.path().join("report.json").is_file());
}

#[test]
fn failing_checks_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let c = json!({
        "regime": { "kind": "prop1", "dt": 0.5 },
        "params": { "alpha": 1.5, "beta": 1.5, "epsilon_cut": 1.0 },
        "phi": { "kind": "indicators", "terms": [ { "weight": 1.0, "lo": -0.5, "hi": 0.5 } ] },
        "ladder": [10.0],
        "replicas": 50,
        "times": [1.0],
        "seed": 7,
        "output": dir.path().join("p"),
        "checks": { "moment_tolerance": 1e-9 }
    });
    let path = write_config(dir.path(), "p.json", &c);
    let o = hsssi(&["prop1", "--config", &path]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("p/moments.csv")).unwrap();
    assert!(text.starts_with("# schema: hsssi.moment-ladder.v1\nT,order,value,se,target,tolerance,pass\n"));
}

#[test]
fn compare_reads_samples_and_tabulated_target() {
    let dir = tempfile::tempdir().unwrap();
    let c = json!({
        "regime": { "kind": "prop1", "dt": 0.5 },
        "params": { "alpha": 1.5, "beta": 1.5, "epsilon_cut": 1.0 },
        "phi": { "kind": "indicators", "terms": [ { "weight": 1.0, "lo": -0.5, "hi": 0.5 } ] },
        "ladder": [10.0],
        "replicas": 200,
        "times": [1.0],
        "seed": 7,
        "output": dir.path().join("p")
    });
    let path = write_config(dir.path(), "p.json", &c);
    assert!(matches!(hsssi(&["prop1", "--config", &path]).status.code(), Some(0 | 1)));
    // a degenerate target far from the samples: CF identically 1
    let target = dir.path().join("one.csv");
    std::fs::write(&target, "# schema: hsssi.limit-cf.v1\ntheta,re,im,stderr\n1,1,0,0\n2,1,0,0\n").unwrap();
    let samples = dir.path().join("p/samples_T1e1.jsonl");
    let o = hsssi(&[
        "compare",
        "--samples",
        samples.to_str().unwrap(),
        "--target",
        target.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["sup_distance"].as_f64().unwrap() > 0.1);
}

#[test]
fn simulate_path_binary_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("path.bin");
    let o = hsssi(&["simulate-path", "--beta", "1.5", "--horizon", "0.1", "--seed", "3", "--out", p.to_str().unwrap()]);
    assert!(o.status.success());
    let path = hsssi::sampling::read_path_binary(&mut std::fs::File::open(&p).unwrap()).unwrap();
    assert_eq!(path.values.len(), 101);
    let csv = stdout(&hsssi(&["simulate-path", "--beta", "1.5", "--horizon", "0.1", "--seed", "3"]));
    let last: f64 = csv.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(last, *path.values.last().unwrap());
}

#[test]
fn thm1_small_preset_emits_a_ladder() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("thm1");
    let o = hsssi(&["run", "--preset", "thm1-small", "--output", out.to_str().unwrap()]);
    assert!(matches!(o.status.code(), Some(0 | 1)), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("ladder_p0.csv")).unwrap();
    assert!(csv.starts_with("# schema: hsssi.cf-ladder.v1\nT,theta,"));
    assert_eq!(csv.lines().filter(|l| l.starts_with("1000,")).count(), 16);
}
