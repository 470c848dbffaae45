use std::process::Command;

fn simulate() -> Command {
    Command::new(env!("CARGO_BIN_EXE_simulate"))
}

const SMALL: &str = r#"
kind = "nmse"
trials = 2
master_seed = 9
estimators = ["nfcfgs", "fcfgs"]

[system]
antennas = 8
rf_chains = 4
users = 1
paths_per_user = [1]
frames = 5
frame_len = 8
delay_spread = 2

[sweep]
snr_db = [0.0, 10.0]
"#;

#[test]
fn runs_a_toml_sweep_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("out");
    let status = simulate().arg("--config").arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2);
    assert!(csv.lines().nth(2).unwrap().contains("fcfgs"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("results.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["master_seed"], 9);
    assert!(json["fingerprint"]["config_hash"].as_str().unwrap().len() == 16);

    // Same seed, different worker count: identical CSV.
    let out2 = dir.path().join("out2");
    let status = simulate().args(["--threads", "2", "--config"]).arg(&cfg).arg("--out").arg(&out2).status().unwrap();
    assert!(status.success());
    assert_eq!(csv, std::fs::read_to_string(out2.join("results.csv")).unwrap());
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    std::fs::write(&cfg, r#"{"trials": 5, "master_seed": 1}"#).unwrap();
    let out = simulate()
        .arg("--config")
        .arg(&cfg)
        .args(["--trials", "3", "--seed", "4", "--estimator", "both", "--experiment", "census", "--print-config"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["trials"], 3);
    assert_eq!(v["master_seed"], 4);
    assert_eq!(v["kind"], "census");
    assert_eq!(v["estimators"], serde_json::json!(["nfcfgs", "fcfgs"]));
}

#[test]
fn cv_probe_writes_the_lattice() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("probe.toml");
    std::fs::write(&cfg, "kind = \"cvprobe\"\n[probe]\ndraws = 500\nlattice_points = 3\nsegments = 4\n").unwrap();
    let out = dir.path().join("o");
    assert!(simulate().arg("--config").arg(&cfg).arg("--out").arg(&out).status().unwrap().success());
    let lattice = std::fs::read_to_string(out.join("fcv_lattice.csv")).unwrap();
    assert_eq!(lattice.lines().count(), 10);
}

#[test]
fn bad_input_fails_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "trials = 0\n").unwrap();
    let out = simulate().arg("--config").arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("trials"));

    let out = simulate().arg("--config").arg(dir.path().join("missing.toml")).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.toml"));
}
