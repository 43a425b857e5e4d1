//! Gate targets, average gate fidelity and state fidelity.

use std::f64::consts::PI;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{block_diag, c, CMat, C64};
use crate::propagator::DensityMatrix;

/// Geometric-gate angles (μ₀, η₀, θ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateAngles {
    pub mu0: f64,
    pub eta0: f64,
    pub theta: f64,
}

/// How a target acts on the computational register.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateKind {
    /// Single cat qubit, D = 2.
    Single,
    /// |C₊⟩⟨C₊| ⊗ I + |C₋⟩⟨C₋| ⊗ U_s on two cat qubits, D = 4; the angles describe U_s.
    Controlled,
    /// Fixed multi-qubit target without a direct geometric realization.
    Register,
}

/// A target unitary with its geometric parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GateSpec {
    pub name: String,
    pub kind: GateKind,
    pub matrix: CMat,
    pub angles: Option<GateAngles>,
}

impl GateSpec {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Single-qubit block realized by the geometric protocol (U_s for controlled gates).
    pub fn block(&self) -> Option<CMat> {
        self.angles.map(|a| geometric_unitary(a.mu0, a.eta0, a.theta))
    }
}

/// cos θ I + i sin θ ζ₀·σ, the cyclic geometric gate with ζ₀ = (sin η₀ sin μ₀, cos η₀ sin μ₀, cos μ₀).
pub fn geometric_unitary(mu0: f64, eta0: f64, theta: f64) -> CMat {
    let (s, co) = theta.sin_cos();
    let (sm, cm) = mu0.sin_cos();
    let off = C64::from_polar(sm * s, eta0);
    CMat::from_row_slice(
        2,
        2,
        &[c(co, cm * s), off, -off.conj(), c(co, -cm * s)],
    )
}

/// Single-qubit target from (μ₀, η₀, θ).
pub fn target_from_angles(mu0: f64, eta0: f64, theta: f64) -> GateSpec {
    GateSpec {
        name: "custom".into(),
        kind: GateKind::Single,
        matrix: geometric_unitary(mu0, eta0, theta),
        angles: Some(GateAngles { mu0, eta0, theta }),
    }
}

/// |C₊⟩⟨C₊| ⊗ I + |C₋⟩⟨C₋| ⊗ U_s in the basis (C₊C₊, C₊C₋, C₋C₊, C₋C₋).
pub fn controlled_target(u_s: &CMat) -> Result<GateSpec> {
    if u_s.shape() != (2, 2) {
        return Err(Error::DimensionMismatch { expected: 2, got: u_s.nrows() });
    }
    Ok(GateSpec {
        name: "controlled".into(),
        kind: GateKind::Controlled,
        matrix: block_diag(&CMat::identity(2, 2), u_s),
        angles: None,
    })
}

/// Modified Toffoli target: Toffoli preceded by a Z on the middle qubit (MSB = qubit 0).
pub fn toffoli_mod_matrix() -> CMat {
    let mut m = CMat::zeros(8, 8);
    for (i, v) in [1.0, 1.0, -1.0, -1.0, 1.0, 1.0].into_iter().enumerate() {
        m[(i, i)] = c(v, 0.0);
    }
    m[(6, 7)] = c(-1.0, 0.0);
    m[(7, 6)] = c(-1.0, 0.0);
    m
}

/// Names accepted by `named_gate`.
pub const GATE_NAMES: [&str; 7] = ["T", "X", "H", "Tdag", "Rx_pi4", "CNOTmod", "Toffoli_mod"];

/// Table of named targets.
pub fn named_gate(name: &str) -> Result<GateSpec> {
    let single = |canonical: &str, mu0: f64, eta0: f64, theta: f64| {
        let mut g = target_from_angles(mu0, eta0, theta);
        g.name = canonical.into();
        g
    };
    Ok(match name {
        "T" => single("T", 0.0, 0.0, 7.0 * PI / 8.0),
        "X" => single("X", 1.5 * PI, 0.5 * PI, 0.5 * PI),
        "H" => single("H", 0.25 * PI, 0.5 * PI, 0.5 * PI),
        "Tdag" => single("Tdag", 0.0, 0.0, PI / 8.0),
        "Rx_pi4" => single("Rx_pi4", 0.5 * PI, -0.5 * PI, 9.0 * PI / 8.0),
        "CNOTmod" => {
            let (mu0, eta0, theta) = (1.5 * PI, 0.5 * PI, 0.5 * PI);
            let mut g = controlled_target(&geometric_unitary(mu0, eta0, theta))?;
            g.name = "CNOTmod".into();
            g.angles = Some(GateAngles { mu0, eta0, theta });
            g
        }
        "Toffoli_mod" => GateSpec {
            name: "Toffoli_mod".into(),
            kind: GateKind::Register,
            matrix: toffoli_mod_matrix(),
            angles: None,
        },
        other => return Err(Error::UnknownGate(other.into())),
    })
}

/// F = [Tr(MM†) + |Tr M|²]/(D(D+1)) with M = U_G† (V† U₁ V).
///
/// `basis` is the isometry V onto the computational subspace; without it U₁ must already be
/// D×D.
pub fn average_fidelity(target: &CMat, actual: &CMat, basis: Option<&CMat>) -> Result<f64> {
    let d = target.nrows();
    let reduced;
    let u = match basis {
        Some(v) => {
            if v.nrows() != actual.nrows() || v.ncols() != d {
                return Err(Error::DimensionMismatch { expected: actual.nrows(), got: v.nrows() });
            }
            reduced = v.adjoint() * actual * v;
            &reduced
        }
        None => actual,
    };
    if u.shape() != (d, d) {
        return Err(Error::DimensionMismatch { expected: d, got: u.nrows() });
    }
    let m = target.adjoint() * u;
    let tr_mm = (&m * m.adjoint()).trace().re;
    let tr = m.trace();
    Ok((tr_mm + tr.norm_sqr()) / (d * (d + 1)) as f64)
}

/// F = ⟨ψ_in|U_G† ρ U_G|ψ_in⟩.
///
/// `input` holds subspace amplitudes (default |C₊⟩ = (1, 0, …)); `basis` embeds them into the
/// space of ρ when ρ lives in a larger Fock space.
pub fn state_fidelity(
    rho: &DensityMatrix,
    target: &CMat,
    input: Option<&DVector<C64>>,
    basis: Option<&CMat>,
) -> Result<f64> {
    let d = target.nrows();
    let psi = match input {
        Some(v) => v.clone(),
        None => {
            let mut v = DVector::zeros(d);
            v[0] = c(1.0, 0.0);
            v
        }
    };
    if psi.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: psi.len() });
    }
    let out = target * psi;
    let out = match basis {
        Some(v) => v * out,
        None => out,
    };
    if out.len() != rho.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), got: out.len() });
    }
    Ok(out.dotc(&(&rho.rho * &out)).re)
}

/// Distance of θ from the nearest branch θ_ideal + kπ, returned with that branch.
pub fn nearest_theta_branch(theta: f64, theta_ideal: f64) -> (f64, f64) {
    let k = ((theta - theta_ideal) / PI).round();
    let branch = theta_ideal + k * PI;
    ((theta - branch).abs(), branch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{mat2_to_dmatrix, pauli, unitarity_error};

    fn global_phase_distance(a: &CMat, b: &CMat) -> f64 {
        let overlap = (b.adjoint() * a).trace();
        let phase = overlap / overlap.norm();
        (a - b * phase).norm()
    }

    #[test]
    fn zero_theta_is_identity() {
        assert_eq!(target_from_angles(0.4, 1.3, 0.0).matrix, CMat::identity(2, 2));
    }

    #[test]
    fn t_gate_up_to_phase() {
        let g = named_gate("T").unwrap();
        let t = CMat::from_diagonal(&DVector::from_vec(vec![c(1.0, 0.0), C64::from_polar(1.0, PI / 4.0)]));
        assert!(global_phase_distance(&g.matrix, &t) < 1e-12);
        let a = g.angles.unwrap();
        assert_eq!((a.mu0, a.eta0, a.theta), (0.0, 0.0, 7.0 * PI / 8.0));
    }

    #[test]
    fn x_and_hadamard_targets() {
        let sx = mat2_to_dmatrix(&pauli()[0]);
        assert!(global_phase_distance(&named_gate("X").unwrap().matrix, &sx) < 1e-12);
        let h = (mat2_to_dmatrix(&pauli()[0]) + mat2_to_dmatrix(&pauli()[2])) * c(0.5f64.sqrt(), 0.0);
        assert!(global_phase_distance(&named_gate("H").unwrap().matrix, &h) < 1e-12);
        let a = named_gate("H").unwrap().angles.unwrap();
        assert_eq!((a.mu0, a.eta0, a.theta), (PI / 4.0, PI / 2.0, PI / 2.0));
    }

    #[test]
    fn rx_pi4_target() {
        let g = named_gate("Rx_pi4").unwrap();
        let a = g.angles.unwrap();
        assert_eq!((a.mu0, a.eta0, a.theta), (PI / 2.0, -PI / 2.0, 9.0 * PI / 8.0));
        let rx = (mat2_to_dmatrix(&pauli()[0]) * c(0.0, -(PI / 8.0).sin())) + CMat::identity(2, 2) * c((PI / 8.0).cos(), 0.0);
        assert!(global_phase_distance(&g.matrix, &rx) < 1e-12);
    }

    #[test]
    fn cnot_mod_blocks() {
        let g = named_gate("CNOTmod").unwrap();
        assert_eq!(g.dim(), 4);
        assert_eq!(g.kind, GateKind::Controlled);
        let expected_block = mat2_to_dmatrix(&pauli()[0]) * c(0.0, -1.0);
        assert!((g.matrix.view((2, 2), (2, 2)) - &expected_block).norm() < 1e-15);
        assert!((g.matrix.view((0, 0), (2, 2)) - CMat::identity(2, 2)).norm() < 1e-15);
    }

    #[test]
    fn all_named_targets_unitary() {
        for name in GATE_NAMES {
            let g = named_gate(name).unwrap();
            assert!(unitarity_error(&g.matrix) < 1e-12, "{name}");
        }
        assert!(matches!(named_gate("CZ"), Err(Error::UnknownGate(_))));
    }

    #[test]
    fn controlled_identity() {
        let g = controlled_target(&CMat::identity(2, 2)).unwrap();
        assert_eq!(g.matrix, CMat::identity(4, 4));
    }

    #[test]
    fn average_fidelity_basic_values() {
        let id = CMat::identity(2, 2);
        let sx = mat2_to_dmatrix(&pauli()[0]);
        assert!((average_fidelity(&id, &id, None).unwrap() - 1.0).abs() < 1e-15);
        assert!((average_fidelity(&id, &sx, None).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let g = named_gate("H").unwrap().matrix;
        let phased = &g * C64::from_polar(1.0, 0.77);
        assert!((average_fidelity(&g, &phased, None).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            average_fidelity(&id, &CMat::identity(3, 3), None),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn state_fidelity_basic_values() {
        let g = named_gate("H").unwrap().matrix;
        let psi = DVector::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8)]);
        let out = &g * &psi;
        let rho = DensityMatrix { rho: &out * out.adjoint() };
        assert!((state_fidelity(&rho, &g, Some(&psi), None).unwrap() - 1.0).abs() < 1e-14);
        let mixed = DensityMatrix { rho: CMat::identity(2, 2) * c(0.5, 0.0) };
        assert!((state_fidelity(&mixed, &g, None, None).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn theta_branch_selection() {
        let (err, branch) = nearest_theta_branch(-0.4, 7.0 * PI / 8.0);
        assert!((branch + PI / 8.0).abs() < 1e-15);
        assert!((err - (0.4 - PI / 8.0)).abs() < 1e-15);
    }
}
