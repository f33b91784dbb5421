use std::fs;
use std::path::Path;
use std::process::Command;

use hamnet::neuralnet::NetParams;

fn hamnet(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_hamnet")).args(args).output().unwrap()
}

fn ok(args: &[&str]) {
    let out = hamnet(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("config.json");
    fs::write(
        &path,
        r#"{
  "scenario": "moving",
  "N": 20,
  "rho": 0.3,
  "coefficients": [-0.5, 0.1, 0.2, -0.5],
  "T_max": 200,
  "seed": 4,
  "strategy": {"kind": "cooperative"}
}"#,
    )
    .unwrap();
    path.display().to_string()
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

#[test]
fn pretrain_run_and_file_formats() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let config = small_config(d);
    let weights = d.join("net.txt");
    ok(&["pretrain", "--config", &config, "--out", &s(&weights)]);

    let text = fs::read_to_string(&weights).unwrap();
    assert!(text.starts_with("hamnet-weights v1\n"));
    let params = NetParams::load(&weights).unwrap();
    assert_eq!(params.to_text(), text);

    for out in ["a", "b"] {
        ok(&["run", "--config", &config, "--weights", &s(&weights), "--seed", "9", "--out-dir", &s(&d.join(out))]);
    }
    let metrics = fs::read_to_string(d.join("a/metrics.csv")).unwrap();
    assert_eq!(metrics, fs::read_to_string(d.join("b/metrics.csv")).unwrap());
    let mut lines = metrics.lines();
    assert_eq!(
        lines.next().unwrap(),
        "step,connectivity_pct,total_H,energy,mean_reduced_radius,mean_degree"
    );
    assert_eq!(lines.count(), 200);

    for step in ["000100", "000200"] {
        let agents = fs::read_to_string(d.join(format!("a/snapshots/agents_{step}.csv"))).unwrap();
        assert!(agents.starts_with("id,x,y,radius,degree,active\n"));
        assert_eq!(agents.lines().count(), 21);
        let edges = fs::read_to_string(d.join(format!("a/snapshots/edges_{step}.csv"))).unwrap();
        assert!(edges.starts_with("id_a,id_b,distance\n"));
    }

    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("a/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["seed"], 9);
    assert!(summary["strategies"]["cooperative"]["mean"]["connectivity_pct"].is_number());
}

#[test]
fn ensemble_and_sweep_write_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let config = small_config(d);
    let weights = d.join("net.txt");
    ok(&["pretrain", "--config", &config, "--out", &s(&weights)]);

    ok(&[
        "ensemble", "--config", &config, "--runs", "3", "--weights", &s(&weights),
        "--strategies", "base,cooperative", "--out-dir", &s(&d.join("ens")),
    ]);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("ens/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["ensemble_size"], 3);
    assert!(d.join("ens/base/run_002/metrics.csv").exists());
    assert!(d.join("ens/cooperative/run_002/metrics.csv").exists());

    ok(&["sweep", "--config", &config, "--rho", "0.3,0.1", "--runs", "2", "--out-dir", &s(&d.join("sw"))]);
    let sweep: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("sw/sweep.json")).unwrap()).unwrap();
    assert_eq!(sweep["points"].as_array().unwrap().len(), 2);
    assert!(d.join("sw/rho_0.1/summary.json").exists());
}

#[test]
fn bad_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let config = small_config(d);
    let out = hamnet(&["run", "--config", &config, "--out-dir", &s(&d.join("x"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let broken = d.join("broken.json");
    fs::write(&broken, r#"{"scenario": "static", "N": 0, "rho": 0.5, "coefficients": [0, 0, 0, 0], "T_max": 5}"#).unwrap();
    assert!(!hamnet(&["pretrain", "--config", &s(&broken), "--out", &s(&d.join("w"))]).status.success());

    let corrupt = d.join("corrupt.txt");
    fs::write(&corrupt, "hamnet-weights v1\nnonsense\n").unwrap();
    let out = hamnet(&["run", "--config", &config, "--weights", &s(&corrupt), "--out-dir", &s(&d.join("y"))]);
    assert!(!out.status.success());
}
