#![allow(clippy::field_reassign_with_default)]

use forge_core::experiment::{run_experiment, ExperimentConfig, ExperimentKind, PullbackSource, RunOptions};
use forge_core::io::Manifest;

fn small(kinds: &[ExperimentKind]) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.experiments = kinds.to_vec();
    cfg.grid.nodes = 201;
    cfg.solver.n = vec![100];
    cfg.mms.nodes = 33;
    cfg.taylor.trials = 2000;
    cfg
}

#[test]
fn pullback_from_solver_trajectory() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(&[ExperimentKind::Solve, ExperimentKind::Pullback]);
    cfg.pullback.source = PullbackSource::Solver;
    cfg.solver.n = vec![10_000];
    cfg.solver.step_fraction = 0.5;
    cfg.solver.energy_every = 10;
    let rep = run_experiment(&cfg, &RunOptions::new(tmp.path())).unwrap();
    assert!(rep.checks.iter().any(|c| c.stage == "pullback"));
    let m = Manifest::read(tmp.path()).unwrap();
    assert!(m.verify(tmp.path()).unwrap().is_empty());
    assert!(m.files.iter().any(|f| f.name == "pullback.csv"));
}

#[test]
fn short_solver_window_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(&[ExperimentKind::Solve, ExperimentKind::Pullback]);
    cfg.pullback.source = PullbackSource::Solver;
    let err = run_experiment(&cfg, &RunOptions::new(tmp.path())).unwrap_err();
    assert!(err.to_string().contains("shorter than the decade"), "{err}");
}

#[test]
fn errors_carry_the_stage_name() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(&[ExperimentKind::Pullback]);
    cfg.pullback.source = PullbackSource::Solver;
    let err = run_experiment(&cfg, &RunOptions::new(tmp.path())).unwrap_err();
    assert!(err.to_string().starts_with("[pullback]"), "{err}");
    assert!(err.is_usage());
}

#[test]
fn gates_ignore_claims_unless_strict() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(&[ExperimentKind::Solve, ExperimentKind::TaylorSample]);
    let rep = run_experiment(&cfg, &RunOptions::new(tmp.path().join("a"))).unwrap();
    let claims_failed = rep.failures().iter().any(|c| c.claim);
    assert!(rep.failures().iter().all(|c| c.claim), "gate failures: {:?}", rep.failures());
    assert!(rep.passed());

    cfg.strict_claims = true;
    let rep = run_experiment(&cfg, &RunOptions::new(tmp.path().join("b"))).unwrap();
    assert_eq!(rep.passed(), !claims_failed);
}

#[test]
fn stack_cache_is_reused() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(&[ExperimentKind::AnsatzVerify]);
    let opts = RunOptions { cache: Some(tmp.path().join("cache")), ..RunOptions::new(tmp.path().join("a")) };
    let first = run_experiment(&cfg, &opts).unwrap();
    let second = run_experiment(&cfg, &RunOptions { out: tmp.path().join("b"), ..opts }).unwrap();
    assert_eq!(first.checks, second.checks);
    assert_eq!(std::fs::read_dir(tmp.path().join("cache")).unwrap().count(), 1);
}
