//! Checks against values computed independently of the library.

use std::f64::consts::PI;

use catgate::cat::PhysicalParams;
use catgate::circuits::{project_two_mode, two_mode_control_hamiltonian, two_qubit_drive_point};
use catgate::control::{drive_point, project_control_hamiltonian, select_lambda};
use catgate::fidelity::average_fidelity;
use catgate::fresnel::{fresnel_c, fresnel_s, theta_fresnel};
use catgate::linalg::{c, mat2_to_dmatrix, pauli, CMat, C64};

fn omega_sigma(o: [f64; 3]) -> CMat {
    let s = pauli();
    mat2_to_dmatrix(&(s[0] * c(o[0], 0.0) + s[1] * c(o[1], 0.0) + s[2] * c(o[2], 0.0)))
}

fn max_diff(a: &CMat, b: &CMat) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[test]
fn fresnel_reference_values() {
    // Unnormalized kernels ∫cos t², ∫sin t² at z = 1 and the large-z limit √(π/8).
    assert!((fresnel_c(1.0) - 0.904_524_237_900_272).abs() < 1e-12);
    assert!((fresnel_s(1.0) - 0.310_268_301_723_381).abs() < 1e-12);
    let lim = (PI / 8.0).sqrt();
    assert!((fresnel_c(40.0) - lim).abs() < 0.02 && (fresnel_s(40.0) - lim).abs() < 0.02);
}

#[test]
fn t_gate_seed_amplitude() {
    let lambda = select_lambda(0.0, 7.0 * PI / 8.0).unwrap();
    assert!((lambda - 2.0839).abs() < 5e-4, "{lambda}");
    assert!((theta_fresnel(0.0, lambda).unwrap() - 7.0 * PI / 8.0).abs() < 1e-6);
}

#[test]
fn single_mode_drive_reference() {
    let (chi, eps) = drive_point([0.0, 0.0, 1.0], &PhysicalParams::default());
    assert!((chi - -2.084_381_221_974_989_5).abs() < 1e-12);
    assert_eq!(eps, C64::new(0.0, 0.0));
}

#[test]
fn single_mode_projection_reproduces_field() {
    for xi in [0.0, 0.3, -1.1] {
        let p = PhysicalParams::from_amplitude(0.5, xi, 2.0 * PI * 12.5, 1.0, 10).unwrap();
        let o = [0.7, -0.4, 0.9];
        let (chi, eps) = drive_point(o, &p);
        let h = project_control_hamiltonian(chi, eps, &p).unwrap();
        let offset = (h[(0, 0)] + h[(1, 1)]) * 0.5;
        let shifted = &h - CMat::identity(2, 2) * offset;
        assert!(max_diff(&shifted, &omega_sigma(o)) < 1e-8, "xi {xi}");
    }
}

#[test]
fn two_mode_drive_reference() {
    let p = two_qubit_drive_point([0.0, 0.0, 1.0], &PhysicalParams::default());
    assert!((p.chi12 - -2.172_322_539_260_975_3).abs() < 1e-12);
    assert!((p.chi1 - 1.175_201_193_643_801_6).abs() < 1e-12);
    assert!((p.chi2 - 0.133_010_582_656_306_75).abs() < 1e-12);
    assert_eq!(p.lambda.norm() + p.eps.norm(), 0.0);
}

#[test]
fn two_mode_projection_is_controlled_field() {
    for xi in [0.0, 0.3] {
        let params = PhysicalParams::from_amplitude(0.5, xi, 2.0 * PI * 12.5, 1.0, 10).unwrap();
        let o = [0.7, -0.4, 0.9];
        let h = two_mode_control_hamiltonian(&params, &two_qubit_drive_point(o, &params));
        let proj = project_two_mode(&h, &params).unwrap();
        let shifted = &proj - CMat::identity(4, 4) * proj[(0, 0)];
        let mut expected = CMat::zeros(4, 4);
        expected.view_mut((2, 2), (2, 2)).copy_from(&omega_sigma(o));
        assert!(max_diff(&shifted, &expected) < 1e-8, "xi {xi}: {}", max_diff(&shifted, &expected));
    }
}

#[test]
fn average_fidelity_of_phase_rotation() {
    // F(I, Rz(φ)) = (2 + 4cos²(φ/2))/6.
    for phi in [0.1, 1.0, 2.5] {
        let rz = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::from_polar(1.0, -phi / 2.0),
            C64::from_polar(1.0, phi / 2.0),
        ]));
        let f = average_fidelity(&CMat::identity(2, 2), &rz, None).unwrap();
        assert!((f - (2.0 + 4.0 * (phi / 2.0).cos().powi(2)) / 6.0).abs() < 1e-14);
    }
}
