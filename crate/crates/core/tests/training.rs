use std::f64::consts::PI;

use catgate::ansatz::{Checkpoint, CheckpointMeta};
use catgate::control::geometric_theta;
use catgate::fidelity::{named_gate, target_from_angles};
use catgate::trainer::{train, LearningRates, Propagation, SliceObjective, TrainConfig, TrainPhase};

fn short_config(sweeps: usize) -> TrainConfig {
    TrainConfig {
        n_slices: 300,
        phase1: TrainPhase { rates: LearningRates::split(1e-4, 1e-5), sweeps },
        phase2: TrainPhase { rates: LearningRates::split(1e-5, 1e-6), sweeps: 0 },
        target_fidelity: 2.0,
        ..TrainConfig::default()
    }
}

#[test]
fn same_seed_gives_identical_history() {
    let gate = named_gate("X").unwrap();
    let a = train(&gate, &short_config(5)).unwrap();
    let b = train(&gate, &short_config(5)).unwrap();
    assert_eq!(a.history.fidelity, b.history.fidelity);
    assert_eq!(a.history.theta, b.history.theta);
    assert_eq!(a.params, b.params);
    assert_eq!(a.history.len(), 5);
}

#[test]
fn one_sweep_from_pretrained_seed_is_stable() {
    let gate = named_gate("T").unwrap();
    let out = train(&gate, &short_config(1)).unwrap();
    assert!((out.history.fidelity[0] - out.initial_fidelity).abs() < 0.05);
}

#[test]
fn reported_theta_matches_forward_path() {
    let gate = named_gate("H").unwrap();
    let cfg = short_config(3);
    let out = train(&gate, &cfg).unwrap();
    let grid = cfg.grid().unwrap();
    let theta = geometric_theta(&out.params.forward(&grid.nodes()).unwrap());
    assert_eq!(*out.history.theta.last().unwrap(), theta);
    let v = out.params.point(0.0);
    assert!((v[0] - PI / 4.0).abs() < 1e-14 && (v[1] - PI / 2.0).abs() < 1e-14);
}

#[test]
fn identity_target_is_optimal_immediately() {
    let gate = target_from_angles(0.0, 0.0, 0.0);
    let cfg = TrainConfig { n_slices: 200, lambda: Some(1e-9), ..TrainConfig::default() };
    let out = train(&gate, &cfg).unwrap();
    assert!(out.fidelity >= 0.9999);
    assert_eq!(out.sweeps(), 0);
}

#[test]
fn zero_sweeps_returns_pretrained_baseline() {
    let gate = named_gate("Tdag").unwrap();
    let out = train(&gate, &short_config(0)).unwrap();
    assert_eq!(out.fidelity, out.initial_fidelity);
    assert!(out.history.is_empty());
}

#[test]
fn alternative_modes_run() {
    let gate = named_gate("T").unwrap();
    for (objective, propagation) in [
        (SliceObjective::Intermediate, Propagation::Greedy),
        (SliceObjective::FinalState, Propagation::Exact),
    ] {
        let cfg = TrainConfig { n_slices: 60, objective, propagation, ..short_config(2) };
        let out = train(&gate, &cfg).unwrap();
        assert_eq!(out.history.len(), 2);
        assert!(out.fidelity.is_finite());
    }
}

#[test]
fn checkpoint_round_trip() {
    let gate = named_gate("T").unwrap();
    let out = train(&gate, &short_config(1)).unwrap();
    let dir = std::env::temp_dir().join(format!("catgate-ck-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("t.json");
    let ck = Checkpoint {
        params: out.params.clone(),
        metadata: CheckpointMeta { gate: "T".into(), fidelity: out.fidelity, sweeps: out.sweeps() },
    };
    ck.save(&path).unwrap();
    assert_eq!(Checkpoint::load(&path).unwrap().params, out.params);
    std::fs::remove_dir_all(&dir).unwrap();
}
