use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pilotwave(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pilotwave"))
        .current_dir(dir)
        .env_remove("PILOTWAVE_JOBS")
        .args(args)
        .output()
        .unwrap()
}

fn json(bytes: &[u8]) -> serde_json::Value {
    serde_json::from_slice(bytes).unwrap()
}

#[test]
fn trajectory_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = pilotwave(
        dir.path(),
        &["trajectory", "--system", "plane", "--a", "0.8", "--b", "0.6", "--p", "1", "--delta0", "-1", "--t1", "10", "--out", "traj.csv"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("traj.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,x1,x2,event"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[1].parse::<f64>().unwrap(), -0.5);
    assert!(csv.contains(",delta_zero\n"));

    let manifest = json(&fs::read(dir.path().join("traj.csv.manifest.json")).unwrap());
    assert_eq!(manifest["command"], "trajectory");
    assert_eq!(manifest["outputs"][0], "traj.csv");
    assert_eq!(manifest["params"]["params"]["a"], 0.8);
    assert!(manifest["timestamp"].as_str().unwrap().contains('T'));
}

#[test]
fn roots_example_reports_one_root() {
    let dir = tempfile::tempdir().unwrap();
    let out = pilotwave(dir.path(), &["roots", "--a", "0.99", "--b", "0.14106736", "--t", "0", "--t0", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out.stdout);
    assert_eq!(report["form"], "Literal");
    assert_eq!(report["roots"].as_array().unwrap().len(), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("rescaled"));
}

#[test]
fn roots_both_forms_give_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let out = pilotwave(dir.path(), &["roots", "--a", "0.8", "--b", "-0.6", "--form", "both"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out.stdout);
    assert_eq!(v["literal"]["roots"].as_array().unwrap().len(), 3);
    assert_eq!(v["derived"]["roots"].as_array().unwrap().len(), 1);
    assert_eq!(v["forms_agree"], false);
}

#[test]
fn invalid_input_exits_1_without_output() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["trajectory", "--a", "0.9", "--b", "0.6", "--delta0", "0", "--t1", "1", "--out", "x.csv"][..],
        &["trajectory", "--delta0", "500", "--t1", "1", "--out", "x.csv"],
        &["trajectory", "--t1", "1", "--out", "x.csv"],
        &["qeh", "--n", "0", "--out", "x.csv"],
        &["qeh", "--bins", "4", "--out", "x.csv"],
        &["roots", "--samples-per-period", "8", "--out", "x.csv"],
        &["ensemble", "--bogus", "--out", "x.csv"],
        &["mirror-check", "--start-box", "1,2,3", "--out", "x.csv"],
    ] {
        let out = pilotwave(dir.path(), args);
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    }
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cfg.json"), r#"{"a": 0.6, "b": 0.8, "boxN": 2, "seed": 9}"#).unwrap();
    let out = pilotwave(dir.path(), &["roots", "--config", "cfg.json", "--a", "0.8", "--b", "0.6", "--out", "r.json"]);
    assert_eq!(out.status.code(), Some(0));
    let manifest = json(&fs::read(dir.path().join("r.json.manifest.json")).unwrap());
    assert_eq!(manifest["params"]["params"]["a"], 0.8);
    assert_eq!(manifest["params"]["params"]["boxN"], 2);

    fs::write(dir.path().join("bad.json"), r#"{"alpha": 1}"#).unwrap();
    let out = pilotwave(dir.path(), &["roots", "--config", "bad.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn ensemble_csv_has_one_row_per_member() {
    let dir = tempfile::tempdir().unwrap();
    let out = pilotwave(dir.path(), &["ensemble", "--n", "200", "--t1", "1", "--seed", "4", "--out", "e.csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("e.csv")).unwrap();
    assert!(csv.starts_with("index,t,x1,x2\n"));
    assert_eq!(csv.lines().count(), 201);
    let manifest = json(&fs::read(dir.path().join("e.csv.manifest.json")).unwrap());
    assert_eq!(manifest["seed"], 4);
}

#[test]
fn crossing_times_and_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = pilotwave(dir.path(), &["crossing-times", "--deltas", "-1,-2.5,3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 4);

    let out = pilotwave(dir.path(), &["grad-check", "--system", "twoslit", "--points", "20"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out.stdout)["pass"], true);

    // An impossible tolerance is a numerical failure, reported after the output is written.
    let out = pilotwave(dir.path(), &["grad-check", "--points", "5", "--tolerance", "1e-300", "--out", "g.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&fs::read(dir.path().join("g.json")).unwrap())["pass"], false);

    let out = pilotwave(dir.path(), &["mirror-check", "--k", "0.5", "--count", "4", "--t1", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out.stdout);
    assert_eq!(report["reached_t1"], 4);
}

#[test]
fn replay_reproduces_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = pilotwave(dir.path(), &["qeh", "--n", "1000", "--t1", "2", "--seed", "7", "--out", "q.json"]);
    assert_eq!(out.status.code(), Some(0));
    let out = pilotwave(dir.path(), &["replay", "q.json.manifest.json", "--verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    fs::write(dir.path().join("q.json"), "tampered").unwrap();
    let out = pilotwave(dir.path(), &["replay", "q.json.manifest.json", "--verify"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn jobs_env_fallback_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_pilotwave"))
        .current_dir(dir.path())
        .env("PILOTWAVE_JOBS", "0")
        .args(["roots"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = Command::new(env!("CARGO_BIN_EXE_pilotwave"))
        .current_dir(dir.path())
        .env("PILOTWAVE_JOBS", "2")
        .args(["roots"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}
