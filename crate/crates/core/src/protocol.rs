//! Realizing target gates with a pulse source: ideal matrices, the trigonometric baseline, or a
//! trained ansatz.

use crate::ansatz::AnsatzParams;
use crate::control::{select_lambda, DriveFields, TimeGrid, TrigProtocol};
use crate::error::{Error, Result};
use crate::fidelity::{GateKind, GateSpec};
use crate::linalg::{block_diag, mat2_to_dmatrix, CMat};
use crate::propagator::evolve_subspace_final;

/// Where the control pulse of a gate comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum PulseSource {
    Ideal,
    Trig,
    Ansatz(Box<AnsatzParams>),
}

/// Trigonometric protocol reaching the gate's θ with the Λ chosen by `select_lambda`.
pub fn trig_protocol_for(gate: &GateSpec, period: f64) -> Result<TrigProtocol> {
    let a = gate
        .angles
        .ok_or_else(|| Error::InvalidParams(format!("gate {} has no geometric angles", gate.name)))?;
    Ok(TrigProtocol { mu0: a.mu0, eta0: a.eta0, lambda: select_lambda(a.mu0, a.theta)?, period })
}

/// Midpoint-sampled Ω of a pulse source (None for ideal gates).
pub fn source_fields(gate: &GateSpec, source: &PulseSource, grid: &TimeGrid) -> Result<Option<DriveFields>> {
    Ok(match source {
        PulseSource::Ideal => None,
        PulseSource::Trig => Some(trig_protocol_for(gate, grid.period())?.midpoint_fields(grid)),
        PulseSource::Ansatz(p) => Some(p.midpoint_fields(grid)),
    })
}

/// Lifts a realized single-qubit block to the gate's register dimension.
pub fn lift_block(gate: &GateSpec, block: &CMat) -> Result<CMat> {
    match gate.kind {
        GateKind::Single => Ok(block.clone()),
        GateKind::Controlled => Ok(block_diag(&CMat::identity(2, 2), block)),
        GateKind::Register => Err(Error::InvalidParams(format!(
            "gate {} has no single-qubit block to realize",
            gate.name
        ))),
    }
}

/// Realized D×D subspace unitary of `gate` under `source`.
pub fn realize(gate: &GateSpec, source: &PulseSource, grid: &TimeGrid) -> Result<CMat> {
    match source_fields(gate, source, grid)? {
        None => Ok(gate.matrix.clone()),
        Some(fields) => lift_block(gate, &mat2_to_dmatrix(&evolve_subspace_final(&fields, grid)?)),
    }
}
