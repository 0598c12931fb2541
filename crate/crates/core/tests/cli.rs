mod support;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use support::stub::{self, StubSidecar};

fn ipd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ipd"))
        .args(args)
        .env_remove("IPD_SIDECAR_URL")
        .output()
        .unwrap()
}

fn plans() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../plans")
}

fn plan(name: &str) -> String {
    plans().join(name).to_string_lossy().into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn scripted_run_then_every_export() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let out = out.to_str().unwrap();
    let o = ipd(&["run", "--plan", &plan("scripted-setup1.toml"), "--out", out, "--workers", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let m = ipd(&["metrics", "--in", out, "--metric", "exploitability"]);
    assert_eq!(code(&m), 0);
    let csv = String::from_utf8(m.stdout).unwrap();
    assert!(csv.starts_with("metric,condition,opponent,n_games"));
    assert!(csv.contains("exploitability,Baseline,AD,20,0,20,0,0,0,"));
    assert!(csv.contains("exploitability,A+,AD,20,0,20,1,1,1,"));

    let j = ipd(&["metrics", "--in", out, "--metric", "retaliatory_rate", "--format", "json"]);
    assert_eq!(code(&j), 0);
    let v: serde_json::Value = serde_json::from_slice(&j.stdout).unwrap();
    assert_eq!(v["metric"], "retaliatory");

    let r = ipd(&["report", "--in", out]);
    assert_eq!(code(&r), 0);
    assert!(String::from_utf8(r.stdout).unwrap().contains("invalid: 0"));

    // heatmap needs setup 3 games
    let h = ipd(&["heatmap", "--in", out, "--out", dir.path().join("h.csv").to_str().unwrap()]);
    assert_eq!(code(&h), 2);
}

#[test]
fn seed_override_changes_fingerprint() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (d, seed) in [(&a, "1"), (&b, "2")] {
        let o = ipd(&["run", "--plan", &plan("scripted-setup2.toml"), "--out", d.to_str().unwrap(), "--seed", seed]);
        assert_eq!(code(&o), 0);
    }
    assert_ne!(support::read(&a.join("manifest.json")), support::read(&b.join("manifest.json")));
    // resuming into a directory made for another seed is a data error
    let o = ipd(&["run", "--plan", &plan("scripted-setup2.toml"), "--out", a.to_str().unwrap(), "--seed", "2"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn heatmap_from_setup3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = ipd(&["run", "--plan", &plan("scripted-setup3.toml"), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let file = dir.path().join("heat.csv");
    let h = ipd(&["heatmap", "--in", out.to_str().unwrap(), "--out", file.to_str().unwrap()]);
    assert_eq!(code(&h), 0);
    let text = std::fs::read_to_string(file).unwrap();
    assert!(text.starts_with("matrix,condition_a,Baseline,A+,A-,C+,C-,E+,E-,N+,N-,O+,O-\n"));
    assert_eq!(text.lines().count(), 1 + 4 * 11);
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&ipd(&[])), 1);
    assert_eq!(code(&ipd(&["frobnicate"])), 1);
    assert_eq!(code(&ipd(&["metrics", "--in", "x", "--metric", "kindness"])), 1);
    assert_eq!(code(&ipd(&["run", "--plan", "x.toml"])), 1);
    assert_eq!(code(&ipd(&["run", "--plan", &plan("scripted-setup1.toml"), "--out", "/tmp/x", "--workers", "0"])), 1);
    assert_eq!(code(&ipd(&["--help"])), 0);
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&ipd(&["report", "--in", dir.path().to_str().unwrap()])), 2);
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "setup = \"setup9\"\n").unwrap();
    let o = ipd(&["run", "--plan", bad.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn unreachable_sidecar_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = ipd(&[
        "run",
        "--plan",
        &plan("setup1.toml"),
        "--out",
        dir.path().join("o").to_str().unwrap(),
        "--endpoint",
        "http://127.0.0.1:9",
    ]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn endpoint_from_environment() {
    let s = StubSidecar::model(stub::persona_reply);
    let dir = tempfile::tempdir().unwrap();
    let plan_path = dir.path().join("p.toml");
    std::fs::write(
        &plan_path,
        "setup = \"setup1\"\niterations_per_cell = 1\nrounds_per_game = 3\nconditions_a = [\"A-\"]\nopponents = [\"AC\"]\n[player_a]\nkind = \"llm\"\n",
    )
    .unwrap();
    let out = dir.path().join("o");
    let o = Command::new(env!("CARGO_BIN_EXE_ipd"))
        .args(["run", "--plan", plan_path.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env("IPD_SIDECAR_URL", &s.url)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(s.chat_requests().len(), 3);
    let m = ipd(&["metrics", "--in", out.to_str().unwrap(), "--metric", "troublemaking"]);
    assert!(String::from_utf8(m.stdout).unwrap().contains("troublemaking,A-,AC,1,0,1,1,1,1,2/2"));
}
