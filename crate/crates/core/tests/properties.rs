use std::f64::consts::PI;

use catgate::ansatz::AnsatzParams;
use catgate::cat::{cat_states, PhysicalParams};
use catgate::circuits::{compose, Circuit};
use catgate::control::{drive_from_omega, DriveFields, TimeGrid, TrigProtocol};
use catgate::fidelity::{average_fidelity, controlled_target, named_gate, GATE_NAMES};
use catgate::linalg::{c, mat2_to_dmatrix, su2_step, unitarity_error, CMat, C64};
use catgate::noise::closed_system_fidelity;
use catgate::propagator::{evolve_subspace, lindblad_evolve, DensityMatrix};
use proptest::prelude::*;

fn random_unitary(o: [f64; 3], dt: f64) -> CMat {
    mat2_to_dmatrix(&su2_step(o, dt))
}

fn omega() -> impl Strategy<Value = [f64; 3]> {
    [-20.0..20.0f64, -20.0..20.0f64, -20.0..20.0f64]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn slice_steps_are_unitary(o in omega(), dt in 1e-4..2.0f64) {
        prop_assert!(unitarity_error(&random_unitary(o, dt)) < 1e-10);
    }

    #[test]
    fn fidelity_is_left_invariant(a in omega(), b in omega(), v in omega()) {
        let (ua, ub, w) = (random_unitary(a, 0.1), random_unitary(b, 0.1), random_unitary(v, 0.1));
        let f = average_fidelity(&ua, &ub, None).unwrap();
        let g = average_fidelity(&(&w * &ua), &(&w * &ub), None).unwrap();
        prop_assert!((f - g).abs() < 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&f));
    }

    #[test]
    fn fidelity_ignores_global_phase(a in omega(), b in omega(), phase in -PI..PI) {
        let (ua, ub) = (random_unitary(a, 0.1), random_unitary(b, 0.1));
        let f = average_fidelity(&ua, &ub, None).unwrap();
        let g = average_fidelity(&ua, &(&ub * C64::from_polar(1.0, phase)), None).unwrap();
        prop_assert!((f - g).abs() < 1e-12);
    }

    #[test]
    fn controlled_lift_preserves_unitarity(o in omega(), dt in 0.0..1.0f64) {
        let u = controlled_target(&random_unitary(o, dt)).unwrap();
        prop_assert!(unitarity_error(&u.matrix) < 1e-12);
    }

    #[test]
    fn circuit_concatenation_multiplies(
        ops in proptest::collection::vec((0usize..5, 0usize..3, 0usize..3), 0..8),
        split in 0usize..8,
    ) {
        let names = ["T", "X", "H", "Tdag", "CNOTmod"];
        let mut full = Circuit::new(3);
        let (mut first, mut second) = (Circuit::new(3), Circuit::new(3));
        for (k, &(g, w0, w1)) in ops.iter().enumerate() {
            let gate = named_gate(names[g]).unwrap();
            let wires: Vec<usize> = if names[g] == "CNOTmod" {
                if w0 == w1 { continue; }
                vec![w0, w1]
            } else {
                vec![w0]
            };
            full.push(gate.clone(), &wires).unwrap();
            let half = if k < split { &mut first } else { &mut second };
            half.push(gate, &wires).unwrap();
        }
        let joined = compose(&first.concat(&second).unwrap()).unwrap();
        let product = compose(&second).unwrap() * compose(&first).unwrap();
        prop_assert!((&joined - &product).iter().all(|z| z.norm() < 1e-12));
        prop_assert!((&joined - compose(&full).unwrap()).iter().all(|z| z.norm() < 1e-12));
        prop_assert!(unitarity_error(&joined) < 1e-10);
    }

    #[test]
    fn pinning_survives_arbitrary_updates(seed in 0u64..1000, scale in 0.1..10.0f64, mu0 in -PI..PI, eta0 in -PI..PI) {
        let mut p = AnsatzParams::random(6, mu0, eta0, 1.0, seed).unwrap();
        let x: Vec<f64> = p.learnable().iter().map(|v| v * scale).collect();
        p.set_learnable(&x);
        let v = p.point(0.0);
        prop_assert!((v[0] - mu0).abs() < 1e-12 && (v[1] - eta0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn lindblad_stays_physical(gamma in 0.0..0.2f64, gamma_phi in 0.0..0.2f64, lambda in 0.5..3.0f64) {
        let params = PhysicalParams::default();
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let trig = TrigProtocol { mu0: 0.0, eta0: 0.0, lambda, period: 1.0 };
        let fields = drive_from_omega(&trig.midpoint_fields(&grid), &params);
        let proj = cat_states(&params).unwrap();
        let rho0 = DensityMatrix::from_pure(&proj.state([c(0.6, 0.0), c(0.0, 0.8)]));
        let rho = lindblad_evolve(&params, &fields, &rho0, gamma, gamma_phi, &grid).unwrap();
        prop_assert!((rho.trace() - 1.0).abs() < 1e-6);
        prop_assert!(rho.min_eigenvalue() >= -1e-8);
        prop_assert!(rho.hermiticity_error() < 1e-12);
    }

    #[test]
    fn fock_cutoff_doubling_is_converged(lambda in 0.5..3.0f64, amp in [0.0..1.0f64, 0.0..1.0f64]) {
        let params = PhysicalParams::default();
        let grid = TimeGrid::new(1.0, 200).unwrap();
        let trig = TrigProtocol { mu0: 0.0, eta0: 0.0, lambda, period: 1.0 };
        let fields = trig.midpoint_fields(&grid);
        let gate = named_gate("T").unwrap();
        let norm = (amp[0] * amp[0] + amp[1] * amp[1]).sqrt().max(1e-3);
        let input = [c(amp[0] / norm, 0.0), c(0.0, amp[1] / norm)];
        let f10 = closed_system_fidelity(&params, &fields, &gate, &grid, input).unwrap();
        let f20 = closed_system_fidelity(&params.with_fock_cutoff(20).unwrap(), &fields, &gate, &grid, input).unwrap();
        prop_assert!((f10 - f20).abs() < 1e-6);
    }
}

#[test]
fn every_named_gate_is_unitary() {
    for name in GATE_NAMES {
        assert!(unitarity_error(&named_gate(name).unwrap().matrix) < 1e-12, "{name}");
    }
}

#[test]
fn subspace_propagation_is_unitary_per_slice() {
    let grid = TimeGrid::new(1.0, 1000).unwrap();
    let pts: Vec<[f64; 3]> = grid.midpoints().iter().map(|&t| [30.0 * t.sin(), -12.0 * t, 5.0]).collect();
    let fields = DriveFields::from_points(grid.midpoints(), &pts).unwrap();
    assert!(evolve_subspace(&fields, &grid).unwrap().max_unitarity_error() < 1e-10);
}
