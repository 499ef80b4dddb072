use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn critwave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_critwave")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn steady_on_zero_potential_finds_only_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"grid":{"n":400,"r_max":20},"potential":{"kind":"zero"}}"#);
    let out = tmp.path().join("out");
    let o = critwave(&["steady", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&out.join("steady.json"));
    let states = report["states"].as_array().unwrap();
    assert_eq!(states.len(), 1);
    assert_eq!(states[0]["a"], 0.0);
    assert_eq!(report["config"]["potential"]["kind"], "zero");
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["experiment"], "steady");
    assert!(manifest["version"].is_string());
}

#[test]
fn malformed_json_exits_2_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.json", r#"{"grid": {"n": 400,"#);
    let out = tmp.path().join("out");
    let o = critwave(&["steady", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn unknown_keys_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    for body in [
        r#"{"grid":{"n":400,"r_max":20},"potential":{"kind":"zero"},"colour":"blue"}"#,
        r#"{"grid":{"n":400,"r_max":20},"potential":{"kind":"zero"},"params":{"catalog":{"a_mn":0}}}"#,
        r#"{"grid":{"n":400,"r_max":20},"potential":{"kind":"gaussian","amplitude":1,"width":1,"depth":2}}"#,
    ] {
        let cfg = write_config(tmp.path(), "c.json", body);
        let o = critwave(&["steady", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{body}");
        assert!(!out.exists());
    }
}

#[test]
fn mismatched_experiment_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"potential":{"kind":"zero"},"experiment":"evolve"}"#);
    let o = critwave(&["steady", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn excited_construct_reports_sign_change_and_stability() {
    let tmp = tempfile::tempdir().unwrap();
    for (lambda, stable) in [("8", false), ("16", true)] {
        let out = tmp.path().join(format!("out{lambda}"));
        let o = critwave(&["excited-construct", "--lambda", lambda, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let r = read_json(&out.join("excited.json"));
        assert!(r["construction"]["sign_changes"].as_u64().unwrap() >= 1);
        assert!(r["stability"]["classification"].is_string() || r["stability"]["classification"].is_object());
        assert_eq!(r["stable"], stable, "lambda {lambda}");
        assert!(out.join("excited_profile.csv").exists());
    }
}

#[test]
fn excited_construct_small_lambda_is_a_numerical_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = critwave(&["excited-construct", "--lambda", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let err = read_json(&out.join("error.json"));
    assert!(err["error"].as_str().unwrap().contains("lambda"));
}

#[test]
fn evolve_is_deterministic_and_has_documented_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"grid":{"n":600,"r_max":30},"potential":{"kind":"gaussian","amplitude":8,"width":1},
            "params":{"initial":{"kind":"steady","index":0,"velocity_noise":0.05},
                      "evolve":{"t_end":4,"exterior_offsets":[2],"snapshot_stride":100},
                      "catalog":{"a_min":-3,"a_max":3,"n_scan":120},"mode_reference":2}}"#,
    );
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for (dir, jobs) in [(&a, "1"), (&b, "3")] {
        let o = critwave(&["evolve", "--config", &cfg, "--out", dir.to_str().unwrap(), "--seed", "11", "--jobs", jobs]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["evolve.csv", "evolve.json", "manifest.json", "snapshot_00000.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let csv = fs::read_to_string(a.join("evolve.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,E,E_ext@2.0,d_1,d_2,d_3,lambda_1");
    let snap = fs::read_to_string(a.join("snapshot_00000.csv")).unwrap();
    assert_eq!(snap.lines().next().unwrap(), "r,u,ut");
    assert_eq!(read_json(&a.join("manifest.json"))["seed"], 11);
}

#[test]
fn channel_rejects_a_small_domain() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"grid":{"n":400,"r_max":20},"potential":{"kind":"zero"},"params":{"r_base":5,"t_end":30}}"#,
    );
    let out = tmp.path().join("out");
    let o = critwave(&["channel", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}
