use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rydress(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rydress")).args(args).env("RYDRESS_WORKERS", "2").output().expect("binary runs")
}

fn run_config(dir: &Path, config: &str, extra: &[&str]) -> Output {
    let cfg = dir.join("config.json");
    fs::write(&cfg, config).unwrap();
    let out = dir.join("out");
    let mut args = vec!["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend(extra);
    rydress(&args)
}

fn preset(name: &str) -> String {
    let o = rydress(&["preset", name]);
    assert!(o.status.success());
    String::from_utf8(o.stdout).unwrap()
}

#[test]
fn strong_blockade_gate_preset_is_high_fidelity() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config(dir.path(), &preset("gate-strong-blockade"), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/gate_report.json")).unwrap()).unwrap();
    assert!(report["fidelity"].as_f64().unwrap() >= 0.999, "{report}");
    assert!(report["max_p_rr"].as_f64().unwrap() <= 1e-2);
}

#[test]
fn spectrum_preset_has_regime_shaped_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config(dir.path(), &preset("spectrum-regimes"), &[]);
    assert!(o.status.success());
    let energies = fs::read_to_string(dir.path().join("out/energies.csv")).unwrap();
    let mut lines = energies.lines();
    assert!(lines.next().unwrap().starts_with("omega_over_v,delta_over_omega,e_sym_0"));
    assert_eq!(lines.count(), 3 * 201);
    let pops = fs::read_to_string(dir.path().join("out/populations.csv")).unwrap();
    assert_eq!(pops.lines().count(), 1 + 2 * 3 * 201);
}

#[test]
fn empty_grid_succeeds_with_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"schema_version": 1, "task": {"command": "spectrum", "ratios": [], "detunings": [0.0]}}"#;
    let o = run_config(dir.path(), cfg, &[]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(dir.path().join("out/energies.csv")).unwrap().lines().count(), 1);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["status"], "complete");
    assert_eq!(m["files"].as_array().unwrap().len(), 2);
}

#[test]
fn invalid_config_exits_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"schema_version": 1, "task": {"command": "spectrum", "ratios": [0.1], "detunings": [0], "typo": true}}"#;
    let o = run_config(dir.path(), cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    let diag: serde_json::Value = serde_json::from_str(String::from_utf8_lossy(&o.stderr).lines().last().unwrap()).unwrap();
    assert_eq!(diag["error"], "invalid_config");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn outputs_are_deterministic_and_verifiable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = preset("forces-potential");
    assert!(run_config(a.path(), &cfg, &[]).status.success());
    assert!(run_config(b.path(), &cfg, &["--workers", "1"]).status.success());
    for f in ["potential.csv", "forces.csv", "manifest.json"] {
        assert_eq!(fs::read(a.path().join("out").join(f)).unwrap(), fs::read(b.path().join("out").join(f)).unwrap(), "{f}");
    }
    let out = a.path().join("out");
    assert!(rydress(&["verify", "--out", out.to_str().unwrap()]).status.success());
    fs::write(out.join("forces.csv"), "tampered\n").unwrap();
    assert_eq!(rydress(&["verify", "--out", out.to_str().unwrap()]).status.code(), Some(4));
}

#[test]
fn per_point_failures_give_partial_status() {
    let dir = tempfile::tempdir().unwrap();
    // V = 2 Delta at R = 10^(-1/6) R_block: an anti-blockade resonance.
    let cfg = r#"{"schema_version": 1, "task": {"command": "forces", "delta_eff": 5.0, "radii": [1.0],
                  "force_points": [0.6812920690579612, 2.0]}}"#;
    let o = run_config(dir.path(), cfg, &[]);
    assert_eq!(o.status.code(), Some(3));
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["status"], "partial");
    assert_eq!(m["failures"].as_array().unwrap().len(), 1);
}

#[test]
fn sweeps_resume_from_the_store() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"schema_version": 1, "task": {"command": "sweep", "kind": "blockade", "ratios": [0.1, 1.0], "budget": 50, "tol": 1e-7}}"#;
    let o = run_config(dir.path(), cfg, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let store = dir.path().join("out/results.jsonl");
    let first = fs::read_to_string(&store).unwrap();
    assert_eq!(first.lines().count(), 2);
    let csv = fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();

    // Drop one point as if the run had been interrupted, then resume.
    let kept: String = first.lines().take(1).map(|l| format!("{l}\n")).collect();
    fs::write(&store, kept).unwrap();
    let o = run_config(dir.path(), cfg, &["--resume"]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(&store).unwrap(), first);
    assert_eq!(fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap(), csv);
}

#[test]
fn presets_list_and_validate() {
    let o = rydress(&["preset"]);
    let names = String::from_utf8(o.stdout).unwrap();
    assert!(names.lines().count() >= 6);
    let dir = tempfile::tempdir().unwrap();
    for name in names.lines() {
        let cfg = dir.path().join(format!("{name}.json"));
        fs::write(&cfg, preset(name)).unwrap();
        let o = rydress(&["validate", "--config", cfg.to_str().unwrap()]);
        assert!(o.status.success(), "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
}
