//! Two-mode controlled-gate drives and multi-qubit circuit composition.
//!
//! Register basis: each qubit is ordered (C₊, C₋) and wire 0 is the most significant bit.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ansatz::Checkpoint;
use crate::cat::{annihilation, cat_states, normalization_constants, PhysicalParams};
use crate::control::{DriveFields, TimeGrid};
use crate::error::{Error, Result};
use crate::fidelity::{average_fidelity, named_gate, GateSpec};
use crate::linalg::{c, kron, CMat, C64};
use crate::protocol::{realize, PulseSource};

/// Physical two-mode drives realizing a controlled Ω·σ on mode 2.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitDrive {
    pub chi12: Vec<f64>,
    pub chi1: Vec<f64>,
    pub chi2: Vec<f64>,
    pub lambda: Vec<C64>,
    pub eps: Vec<C64>,
    /// Set when any drive magnitude exceeds 10% of the energy gap.
    pub gap_warning: bool,
}

/// Drive values (χ₁₂, χ₁, χ₂, λ, ε) for one Ω sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitPoint {
    pub chi12: f64,
    pub chi1: f64,
    pub chi2: f64,
    pub lambda: C64,
    pub eps: C64,
}

pub fn two_qubit_drive_point(omega: [f64; 3], params: &PhysicalParams) -> TwoQubitPoint {
    let a = params.alpha_abs();
    let a2 = a * a;
    let (np, nm) = normalization_constants(params.alpha());
    let diff = np * np - nm * nm;
    let chi12 = -2.0 * omega[2] * np * np * nm * nm / (a2 * a2 * diff * diff);
    let chi1 = -a2 * (np * np + nm * nm) / (2.0 * np * nm) * chi12;
    let ratio = -a2 * nm / np;
    let f = (np * nm).powf(1.5) / (4.0 * diff * a2 * a);
    let g = (2.0 * a2).exp();
    let (sx, cx) = params.xi().sin_cos();
    let lambda = c(
        f * (omega[0] * cx - omega[1] * g * sx),
        f * (omega[0] * sx + omega[1] * g * cx),
    );
    TwoQubitPoint { chi12, chi1, chi2: ratio * chi12, lambda, eps: lambda * ratio }
}

/// Two-mode drives for every sample of `fields`.
pub fn two_qubit_drive_from_omega(fields: &DriveFields, params: &PhysicalParams) -> TwoQubitDrive {
    let pts: Vec<TwoQubitPoint> = (0..fields.len()).map(|k| two_qubit_drive_point(fields.omega_at(k), params)).collect();
    let peak = pts
        .iter()
        .flat_map(|p| [p.chi12.abs(), p.chi1.abs(), p.chi2.abs(), p.lambda.norm(), p.eps.norm()])
        .fold(0.0, f64::max);
    TwoQubitDrive {
        chi12: pts.iter().map(|p| p.chi12).collect(),
        chi1: pts.iter().map(|p| p.chi1).collect(),
        chi2: pts.iter().map(|p| p.chi2).collect(),
        lambda: pts.iter().map(|p| p.lambda).collect(),
        eps: pts.iter().map(|p| p.eps).collect(),
        gap_warning: peak > 0.1 * params.energy_gap(),
    }
}

/// χ₁₂ n₁n₂ + n₁(λ* a₂ + λ a₂†) + ε* a₂ + ε a₂† + χ₁ n₁ + χ₂ n₂ on the two-mode Fock space.
pub fn two_mode_control_hamiltonian(params: &PhysicalParams, p: &TwoQubitPoint) -> CMat {
    let a = annihilation(params.fock_cutoff());
    let id = CMat::identity(a.nrows(), a.nrows());
    let a1 = kron(&a, &id);
    let a2 = kron(&id, &a);
    let n1 = a1.adjoint() * &a1;
    let n2 = a2.adjoint() * &a2;
    let hop2 = &a2 * p.lambda.conj() + a2.adjoint() * p.lambda;
    &n1 * &n2 * c(p.chi12, 0.0)
        + &n1 * hop2
        + &a2 * p.eps.conj()
        + a2.adjoint() * p.eps
        + &n1 * c(p.chi1, 0.0)
        + &n2 * c(p.chi2, 0.0)
}

/// Projection of a two-mode operator onto {C±}₁ ⊗ {C±}₂.
pub fn project_two_mode(op: &CMat, params: &PhysicalParams) -> Result<CMat> {
    let v = cat_states(params)?.basis_matrix();
    let w = kron(&v, &v);
    if op.nrows() != w.nrows() {
        return Err(Error::DimensionMismatch { expected: w.nrows(), got: op.nrows() });
    }
    Ok(w.adjoint() * op * &w)
}

/// A gate placed on specific wires, optionally with its realized matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitOp {
    pub gate: GateSpec,
    pub wires: Vec<usize>,
    pub actual: Option<CMat>,
}

impl CircuitOp {
    pub fn matrix(&self) -> &CMat {
        self.actual.as_ref().unwrap_or(&self.gate.matrix)
    }
}

/// Ordered gate list on `n_qubits` wires; the first op acts first.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    ops: Vec<CircuitOp>,
}

fn arity(gate: &GateSpec) -> Result<usize> {
    let d = gate.dim();
    if d < 2 || !d.is_power_of_two() {
        return Err(Error::WireMismatch(format!("gate {} has non-qubit dimension {d}", gate.name)));
    }
    Ok(d.trailing_zeros() as usize)
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self { n_qubits, ops: Vec::new() }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }
    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }
    pub fn ops(&self) -> &[CircuitOp] {
        &self.ops
    }
    pub fn len(&self) -> usize {
        self.ops.len()
    }
    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn push(&mut self, gate: GateSpec, wires: &[usize]) -> Result<()> {
        self.push_op(CircuitOp { gate, wires: wires.to_vec(), actual: None })
    }

    pub fn push_op(&mut self, op: CircuitOp) -> Result<()> {
        let k = arity(&op.gate)?;
        if op.wires.len() != k {
            return Err(Error::WireMismatch(format!(
                "gate {} acts on {k} wire(s), got {:?}",
                op.gate.name, op.wires
            )));
        }
        for (i, &w) in op.wires.iter().enumerate() {
            if w >= self.n_qubits {
                return Err(Error::WireMismatch(format!("wire {w} outside a {}-qubit register", self.n_qubits)));
            }
            if op.wires[..i].contains(&w) {
                return Err(Error::WireMismatch(format!("repeated wire {w} for gate {}", op.gate.name)));
            }
        }
        if let Some(a) = &op.actual {
            if a.shape() != op.gate.matrix.shape() {
                return Err(Error::DimensionMismatch { expected: op.gate.dim(), got: a.nrows() });
            }
        }
        self.ops.push(op);
        Ok(())
    }

    /// `self` followed by `other`.
    pub fn concat(&self, other: &Circuit) -> Result<Circuit> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::WireMismatch(format!(
                "cannot join {}-qubit and {}-qubit circuits",
                self.n_qubits, other.n_qubits
            )));
        }
        let mut out = self.clone();
        out.ops.extend(other.ops.iter().cloned());
        Ok(out)
    }

    /// Copy with every gate reverted to its ideal matrix.
    pub fn idealized(&self) -> Circuit {
        let mut out = self.clone();
        for op in &mut out.ops {
            op.actual = None;
        }
        out
    }

    /// Copy whose gates named in `sources` carry the matrix realized by that pulse source.
    pub fn realized(&self, sources: &HashMap<String, PulseSource>, grid: &TimeGrid) -> Result<Circuit> {
        let mut cache: HashMap<String, CMat> = HashMap::new();
        let mut out = self.clone();
        for op in &mut out.ops {
            if let Some(src) = sources.get(&op.gate.name) {
                if !cache.contains_key(&op.gate.name) {
                    cache.insert(op.gate.name.clone(), realize(&op.gate, src, grid)?);
                }
                op.actual = cache.get(&op.gate.name).cloned();
            }
        }
        Ok(out)
    }
}

/// Embeds a k-qubit operator acting on `wires` (listed most significant first) into n qubits.
pub fn embed(u: &CMat, wires: &[usize], n_qubits: usize) -> Result<CMat> {
    let k = wires.len();
    if u.shape() != (1 << k, 1 << k) {
        return Err(Error::DimensionMismatch { expected: 1 << k, got: u.nrows() });
    }
    if let Some(&w) = wires.iter().find(|&&w| w >= n_qubits) {
        return Err(Error::WireMismatch(format!("wire {w} outside a {n_qubits}-qubit register")));
    }
    let dim = 1usize << n_qubits;
    let shifts: Vec<usize> = wires.iter().map(|&w| n_qubits - 1 - w).collect();
    let mask: usize = shifts.iter().map(|s| 1usize << s).sum();
    let sub = |i: usize| shifts.iter().fold(0usize, |acc, &s| (acc << 1) | ((i >> s) & 1));
    let mut out = CMat::zeros(dim, dim);
    for r in 0..dim {
        for col in 0..dim {
            if r & !mask == col & !mask {
                out[(r, col)] = u[(sub(r), sub(col))];
            }
        }
    }
    Ok(out)
}

/// Product of the embedded gate matrices, later gates on the left.
pub fn compose(circuit: &Circuit) -> Result<CMat> {
    let n = circuit.n_qubits();
    let mut u = CMat::identity(circuit.dim(), circuit.dim());
    for op in circuit.ops() {
        u = embed(op.matrix(), &op.wires, n)? * u;
    }
    Ok(u)
}

/// Average fidelity of the composed circuit against `ideal`.
pub fn circuit_average_fidelity(circuit: &Circuit, ideal: &GateSpec) -> Result<f64> {
    if ideal.dim() != circuit.dim() {
        return Err(Error::DimensionMismatch { expected: circuit.dim(), got: ideal.dim() });
    }
    average_fidelity(&ideal.matrix, &compose(circuit)?, None)
}

/// One entry of a circuit description file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitEntry {
    pub gate: String,
    pub wires: Vec<usize>,
    /// "ideal", "trig", or a checkpoint path (relative paths resolve against the file).
    #[serde(default = "ideal_source")]
    pub source: String,
}

fn ideal_source() -> String {
    "ideal".into()
}

const TOFFOLI_ORDER: &str = include_str!("../fixtures/toffoli_order.json");

/// Gate order of the Toffoli decomposition from H, T, T† and modified CNOTs.
pub fn toffoli_entries() -> Vec<CircuitEntry> {
    serde_json::from_str(TOFFOLI_ORDER).expect("bundled fixture is valid")
}

/// Builds an all-ideal circuit from entries; the register spans the largest wire used.
pub fn circuit_from_entries(entries: &[CircuitEntry]) -> Result<Circuit> {
    let n = entries.iter().flat_map(|e| e.wires.iter()).max().map_or(0, |w| w + 1);
    let mut circuit = Circuit::new(n);
    for e in entries {
        circuit.push(named_gate(&e.gate)?, &e.wires)?;
    }
    Ok(circuit)
}

/// Ideal three-qubit Toffoli_mod decomposition.
pub fn toffoli_circuit() -> Circuit {
    circuit_from_entries(&toffoli_entries()).expect("bundled fixture is consistent")
}

/// Reads a circuit description file and realizes each entry with its source.
pub fn load_circuit(path: &Path, grid: &TimeGrid) -> Result<Circuit> {
    let entries: Vec<CircuitEntry> = serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut circuit = circuit_from_entries(&entries)?;
    let mut realized: HashMap<(String, String), CMat> = HashMap::new();
    for (op, e) in circuit.ops.iter_mut().zip(&entries) {
        let src = match e.source.as_str() {
            "ideal" => continue,
            "trig" => PulseSource::Trig,
            file => {
                let ck = Checkpoint::load(&base.join(file))?;
                PulseSource::Ansatz(Box::new(ck.params))
            }
        };
        let key = (e.gate.clone(), e.source.clone());
        let m = match realized.get(&key) {
            Some(m) => m.clone(),
            None => {
                let m = realize(&op.gate, &src, grid)?;
                realized.insert(key, m.clone());
                m
            }
        };
        op.actual = Some(m);
    }
    Ok(circuit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fidelity::{controlled_target, toffoli_mod_matrix, GateKind};
    use crate::linalg::{pauli, unitarity_error};

    fn max_diff(a: &CMat, b: &CMat) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn empty_circuit_is_identity() {
        assert_eq!(compose(&Circuit::new(2)).unwrap(), CMat::identity(4, 4));
    }

    #[test]
    fn double_x_is_identity_up_to_phase() {
        let mut c = Circuit::new(2);
        let x = named_gate("X").unwrap();
        c.push(x.clone(), &[1]).unwrap();
        c.push(x, &[1]).unwrap();
        let u = compose(&c).unwrap();
        let g = GateSpec { name: "I".into(), kind: GateKind::Register, matrix: CMat::identity(4, 4), angles: None };
        assert!((circuit_average_fidelity(&c, &g).unwrap() - 1.0).abs() < 1e-14);
        assert!(max_diff(&(&u * u[(0, 0)].conj()), &CMat::identity(4, 4)) < 1e-14);
    }

    #[test]
    fn embedding_respects_wire_order() {
        let x = crate::linalg::mat2_to_dmatrix(&pauli()[0]);
        let id = CMat::identity(2, 2);
        assert_eq!(embed(&x, &[0], 2).unwrap(), kron(&x, &id));
        assert_eq!(embed(&x, &[1], 2).unwrap(), kron(&id, &x));
        let cn = named_gate("CNOTmod").unwrap().matrix;
        let swapped = embed(&cn, &[1, 0], 2).unwrap();
        // control on wire 1: |01⟩ ↔ |11⟩ block.
        assert!(swapped[(0, 0)].norm() > 0.99 && swapped[(2, 2)].norm() > 0.99);
        assert!(swapped[(3, 1)].norm() > 0.99);
        assert!(embed(&x, &[2], 2).is_err());
    }

    #[test]
    fn wire_validation() {
        let mut c = Circuit::new(2);
        assert!(c.push(named_gate("T").unwrap(), &[0, 1]).is_err());
        assert!(c.push(named_gate("CNOTmod").unwrap(), &[1, 1]).is_err());
        assert!(c.push(named_gate("CNOTmod").unwrap(), &[0, 2]).is_err());
        assert!(c.push(named_gate("CNOTmod").unwrap(), &[1, 0]).is_ok());
        assert!(circuit_average_fidelity(&c, &named_gate("Toffoli_mod").unwrap()).is_err());
    }

    #[test]
    fn toffoli_decomposition_matches_target_up_to_phase() {
        let u = compose(&toffoli_circuit()).unwrap();
        let target = toffoli_mod_matrix();
        let phase = (target.adjoint() * &u).trace() / c(8.0, 0.0);
        assert!((phase.norm() - 1.0).abs() < 1e-12);
        assert!(max_diff(&u, &(&target * phase)) < 1e-10);
        assert_eq!(toffoli_circuit().len(), 15);
    }

    #[test]
    fn concat_composes_in_order() {
        let mut a = Circuit::new(3);
        a.push(named_gate("H").unwrap(), &[0]).unwrap();
        a.push(named_gate("CNOTmod").unwrap(), &[0, 2]).unwrap();
        let mut b = Circuit::new(3);
        b.push(named_gate("Rx_pi4").unwrap(), &[1]).unwrap();
        b.push(named_gate("CNOTmod").unwrap(), &[2, 1]).unwrap();
        let joined = compose(&a.concat(&b).unwrap()).unwrap();
        let split = compose(&b).unwrap() * compose(&a).unwrap();
        assert!(max_diff(&joined, &split) < 1e-12);
    }

    #[test]
    fn controlled_target_unitarity() {
        let u = crate::linalg::mat2_to_dmatrix(&crate::linalg::su2_step([0.2, 0.7, -0.3], 1.3));
        assert!(unitarity_error(&controlled_target(&u).unwrap().matrix) < 1e-14);
        let bad = &u * c(1.5, 0.0);
        assert!(unitarity_error(&controlled_target(&bad).unwrap().matrix) > 0.1);
    }

    #[test]
    fn zero_field_gives_zero_two_mode_drive() {
        let p = two_qubit_drive_point([0.0; 3], &PhysicalParams::default());
        assert_eq!((p.chi12, p.chi1, p.chi2), (0.0, 0.0, 0.0));
        assert_eq!(p.lambda.norm() + p.eps.norm(), 0.0);
    }

    #[test]
    fn realized_sources_fill_actuals() {
        let grid = TimeGrid::new(1.0, 200).unwrap();
        let mut sources = HashMap::new();
        sources.insert("T".to_string(), PulseSource::Trig);
        let c = toffoli_circuit().realized(&sources, &grid).unwrap();
        let n_actual = c.ops().iter().filter(|o| o.actual.is_some()).count();
        assert_eq!(n_actual, 4);
        assert!(c.idealized().ops().iter().all(|o| o.actual.is_none()));
    }
}
