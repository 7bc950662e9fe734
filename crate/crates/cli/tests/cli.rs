use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn forge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_forge")).args(args).env_remove("FORGE_CACHE").output().expect("forge runs")
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../examples").join(name)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.toml");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn flat_cubic_run_passes_and_writes_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = example("p3_flat.toml");
    let o = forge(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in
        ["manifest.json", "checks.json", "residual_decay.csv", "energy_n100.csv", "pullback.csv", "blowup_rate.csv"]
    {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let energy = fs::read_to_string(out.join("energy_n100.csv")).unwrap();
    assert!(energy.starts_with("step,s,N,E,K0,K1,K,M,coercivity_margin"));

    let o = forge(&["verify", out.to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "experiments = [\"pullback\", \"taylor-sample\"]\n[taylor]\ntrials = 2000\n");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for (dir, workers) in [(&a, "1"), (&b, "3")] {
        let o = forge(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
            "--workers",
            workers,
            "--quiet",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for f in ["pullback.csv", "blowup_rate.csv", "taylor.csv", "manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn unknown_key_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[solver]\ncfl = 0.5\nbogus_knob = 3\n");
    let o = forge(&["run", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bogus_knob"), "{}", stderr(&o));
}

#[test]
fn five_dimensions_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[model]\ndim = 5\np = 1.2\n");
    let o = forge(&["params", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("dim outside 1..4"), "{}", stderr(&o));
}

#[test]
fn oversized_grid_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[model]\ndim = 3\np = 5.0\n");
    let o = forge(&["params", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("too large"), "{}", stderr(&o));
}

#[test]
fn bad_flag_is_a_usage_error() {
    assert_eq!(forge(&["run", "--no-such-flag"]).status.code(), Some(2));
}

#[test]
fn params_prints_derived_values() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[model]\ndim = 3\np = 5.0\n[grid]\nnodes = 33\n");
    let o = forge(&["params", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["depth"], 3);
    assert_eq!(v["q0"], 9);
    assert_eq!(v["k"], 17);
}

#[test]
fn ansatz_then_solve_from_saved_stack() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[grid]\nnodes = 201\n[solver]\nn = [100]\n[mms]\nnodes = 33\n");
    let a = tmp.path().join("ansatz");
    let o = forge(&["ansatz", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap(), "--quiet"]);
    assert!(a.join("stack/manifest.json").is_file(), "{}", stderr(&o));

    let s = tmp.path().join("solve");
    let stack = a.join("stack");
    let o = forge(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--stack",
        stack.to_str().unwrap(),
        "--out",
        s.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(s.join("energy_n100.csv").is_file());
    assert!(s.join("checkpoints_n100/manifest.json").is_file());
}

#[test]
fn verify_detects_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "experiments = [\"cone-test\"]\n");
    let out = tmp.path().join("out");
    let o = forge(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    fs::write(out.join("cone.csv"), "h,ds,inside,outside\n").unwrap();
    let o = forge(&["verify", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cone.csv"));
}

#[test]
fn strict_claims_turn_claim_failures_into_gate_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "experiments = [\"solve\"]\nstrict_claims = true\n[grid]\nnodes = 201\n[solver]\nn = [100]\n[mms]\nnodes = 33\n");
    let o =
        forge(&["run", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("gate failed"));
}
