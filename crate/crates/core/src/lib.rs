//! Nonadiabatic geometric gates on Kerr-cat qubits.
//!
//! The crate reverse-engineers control pulses from an invariant-based control law, represents
//! the control parameters with a periodic neural-network ansatz, trains it by per-slice gradient
//! ascent of the average gate fidelity, and evaluates the resulting gates under noise and in
//! composed circuits.

pub mod ansatz;
pub mod cat;
pub mod circuits;
pub mod control;
pub mod error;
pub mod fidelity;
pub mod fresnel;
pub mod linalg;
pub mod noise;
pub mod propagator;
pub mod protocol;
pub mod trainer;

pub use error::{Error, Result};
