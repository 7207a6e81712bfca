//! Exit codes and output files of the `grand-charges` binary.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_grand-charges"))
}

fn error_line(stderr: &[u8]) -> serde_json::Value {
    let text = String::from_utf8_lossy(stderr);
    let line = text.lines().last().expect("an error line");
    serde_json::from_str(line).expect("error line is JSON")
}

#[test]
fn simulate_preset_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["simulate", "--preset", "fig2-im", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["fig2-im.csv", "fig2-im-charges.svg", "fig2-im-hamiltonian.svg", "fig2-im-summary.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let csv = std::fs::read_to_string(dir.path().join("fig2-im.csv")).unwrap();
    assert!(csv.starts_with("step,t,Q1,Q2,Q3,Q4,Q5,Q6,H,dH_dt,x1_1,"));
}

#[test]
fn simulate_config_with_method_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"name": "tiny", "graph": {"n": 2, "edges": "complete"}, "d": 2, "epsilon": 0.5,
            "t1": 0.2, "steps": 4, "method": "im",
            "attention": {"activation": "tanh", "w": [[1, 0], [0, 1]]},
            "initial": {"x": [[1, 0], [0, 1]], "p": [[0, 0.1], [0.2, 0]]}}"#,
    )
    .unwrap();
    let out = bin()
        .args(["simulate", "--method", "be", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("method be"));
}

#[test]
fn failures_exit_nonzero_with_json_line() {
    let out = bin().args(["simulate", "--preset", "nope"]).output().unwrap();
    assert!(!out.status.success());
    assert_eq!(error_line(&out.stderr)["error"], "unknown-preset");

    let out = bin().args(["simulate", "--preset", "fig2-im", "--method", "rk4"]).output().unwrap();
    assert!(!out.status.success());
    assert!(error_line(&out.stderr)["message"].as_str().unwrap().contains("rk4"));

    let out = bin().args(["drift-study", "--preset", "fig1-fe", "--h", "1/zero"]).output().unwrap();
    assert_eq!(error_line(&out.stderr)["error"], "invalid-argument");

    let out = bin().args(["simulate"]).output().unwrap();
    assert!(!out.status.success());
    assert_eq!(error_line(&out.stderr)["error"], "usage");
}

#[test]
fn drift_study_and_identities_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["drift-study", "--preset", "fig1-fe", "--h", "1/50,1/100,1/200", "--eps", "0.2,0.1,0.05", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("slope in h: 2.0"));
    assert!(dir.path().join("fig1-fe-drift.csv").exists());

    let out = bin().args(["identities", "--trials", "10", "--seed", "7"]).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("trials: 10 (seed 7)"));
}

#[test]
fn shipped_configs_build() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = grand_charges::experiments::ExperimentConfig::load(&path).unwrap();
        cfg.build().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert!(seen >= 3);
    let schema: serde_json::Value =
        serde_json::from_str(include_str!("../schema/experiment.schema.json")).unwrap();
    assert_eq!(schema["additionalProperties"], false);
}
