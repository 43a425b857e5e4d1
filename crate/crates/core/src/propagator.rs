//! Time evolution in the cat subspace, in the truncated Fock space, and under the Lindblad
//! master equation. Time-dependent coefficients are piecewise constant per slice.

use crate::cat::{annihilation, build_hcat, number, FockVector, PhysicalParams};
use crate::control::{DriveFields, TimeGrid};
use crate::error::{Error, Result};
use crate::linalg::{c, expm_hermitian_step, hermiticity_error, mat2_to_dmatrix, su2_step, unitarity_error, CMat, Mat2, C64};

/// Cumulative propagators U(tᵢ, 0) for every node and the per-slice steps.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitarySequence {
    pub cumulative: Vec<CMat>,
    pub steps: Vec<CMat>,
}

impl UnitarySequence {
    fn from_steps(steps: Vec<CMat>) -> Self {
        let d = steps.first().map_or(1, |s| s.nrows());
        let mut cumulative = Vec::with_capacity(steps.len() + 1);
        cumulative.push(CMat::identity(d, d));
        for s in &steps {
            let next = s * cumulative.last().expect("non-empty");
            cumulative.push(next);
        }
        Self { cumulative, steps }
    }

    /// U(L, 0).
    pub fn final_unitary(&self) -> &CMat {
        self.cumulative.last().expect("sequence always holds the identity")
    }

    /// Largest ‖U†U − I‖_F over all steps and cumulative products.
    pub fn max_unitarity_error(&self) -> f64 {
        self.steps.iter().chain(&self.cumulative).map(unitarity_error).fold(0.0, f64::max)
    }
}

/// Two-level propagation under H = Ω·σ with the closed-form SU(2) step per slice.
pub fn evolve_subspace(fields: &DriveFields, grid: &TimeGrid) -> Result<UnitarySequence> {
    let dt = grid.dt();
    let steps = fields
        .slice_values(grid)?
        .into_iter()
        .map(|o| mat2_to_dmatrix(&su2_step(o, dt)))
        .collect();
    Ok(UnitarySequence::from_steps(steps))
}

/// U(L, 0) of `evolve_subspace` without storing the sequence.
pub fn evolve_subspace_final(fields: &DriveFields, grid: &TimeGrid) -> Result<Mat2> {
    let dt = grid.dt();
    Ok(fields
        .slice_values(grid)?
        .into_iter()
        .fold(Mat2::identity(), |u, o| su2_step(o, dt) * u))
}

/// Single-mode control Hamiltonian χa†a + εa† + ε*a.
pub fn control_hamiltonian(params: &PhysicalParams, chi: f64, eps: C64) -> CMat {
    let a = annihilation(params.fock_cutoff());
    let ad = a.adjoint();
    &ad * &a * c(chi, 0.0) + &ad * eps + &a * eps.conj()
}

/// Full truncated-Fock propagation under H_cat + H_c(t) by per-slice matrix exponentials.
pub fn evolve_fock(params: &PhysicalParams, fields: &DriveFields, grid: &TimeGrid) -> Result<UnitarySequence> {
    let hcat = build_hcat(params);
    let dt = grid.dt();
    let steps = fields
        .slice_drives(grid)?
        .into_iter()
        .map(|(chi, eps)| expm_hermitian_step(&(&hcat + control_hamiltonian(params, chi, eps)), dt))
        .collect();
    Ok(UnitarySequence::from_steps(steps))
}

/// Density matrix in the truncated Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub rho: CMat,
}

impl DensityMatrix {
    pub fn new(rho: CMat) -> Result<Self> {
        if rho.nrows() != rho.ncols() {
            return Err(Error::DimensionMismatch { expected: rho.nrows(), got: rho.ncols() });
        }
        let d = Self { rho };
        if d.hermiticity_error() > 1e-10 || (d.trace() - 1.0).abs() > 1e-8 || d.min_eigenvalue() < -1e-8 {
            return Err(Error::InvalidParams("matrix is not a valid density matrix".into()));
        }
        Ok(d)
    }

    pub fn from_pure(psi: &FockVector) -> Self {
        Self { rho: &psi.coeffs * psi.coeffs.adjoint() }
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.rho)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.rho + self.rho.adjoint()) * c(0.5, 0.0);
        h.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Largest allowed h·‖H_eff‖∞ for one RK4 substep.
const RK4_STEP_SCALE: f64 = 0.25;
const TRACE_DRIFT_LIMIT: f64 = 1e-4;
const MAX_REFINEMENTS: usize = 2;

struct Lindbladian {
    /// H − (i/2)(Γa†a + Γ_φ n²)
    h_eff: CMat,
    a: CMat,
    n: CMat,
    gamma: f64,
    gamma_phi: f64,
}

impl Lindbladian {
    fn apply(&self, rho: &CMat) -> CMat {
        let hr = &self.h_eff * rho;
        let mut out = (&hr - rho * self.h_eff.adjoint()) * c(0.0, -1.0);
        if self.gamma != 0.0 {
            out += &self.a * rho * self.a.adjoint() * c(self.gamma, 0.0);
        }
        if self.gamma_phi != 0.0 {
            out += &self.n * rho * &self.n * c(self.gamma_phi, 0.0);
        }
        out
    }

    fn rk4(&self, rho: &CMat, h: f64) -> CMat {
        let k1 = self.apply(rho);
        let k2 = self.apply(&(rho + &k1 * c(0.5 * h, 0.0)));
        let k3 = self.apply(&(rho + &k2 * c(0.5 * h, 0.0)));
        let k4 = self.apply(&(rho + &k3 * c(h, 0.0)));
        rho + (k1 + (k2 + k3) * c(2.0, 0.0) + k4) * c(h / 6.0, 0.0)
    }
}

fn inf_norm(m: &CMat) -> f64 {
    m.row_iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// RK4 integration of ρ̇ = −i[H_tot, ρ] + Γ L[a]ρ + Γ_φ L[a†a]ρ with L[o]ρ = oρo† − {o†o, ρ}/2.
///
/// Each slice is split into substeps bounded by the norm of the generator; the substep count
/// is quadrupled (at most twice) when the trace drifts by more than 10⁻⁴.
pub fn lindblad_evolve(
    params: &PhysicalParams,
    fields: &DriveFields,
    rho0: &DensityMatrix,
    gamma: f64,
    gamma_phi: f64,
    grid: &TimeGrid,
) -> Result<DensityMatrix> {
    if rho0.dim() != params.fock_dim() {
        return Err(Error::DimensionMismatch { expected: params.fock_dim(), got: rho0.dim() });
    }
    if gamma < 0.0 || gamma_phi < 0.0 {
        return Err(Error::InvalidParams("decay rates must be non-negative".into()));
    }
    let drives = fields.slice_drives(grid)?;
    let mut last_drift = 0.0;
    for refinement in 0..=MAX_REFINEMENTS {
        match integrate_lindblad(params, &drives, rho0, gamma, gamma_phi, grid, 4usize.pow(refinement as u32)) {
            Ok(rho) => return Ok(rho),
            Err(Error::StepUnstable { drift }) => last_drift = drift,
            Err(e) => return Err(e),
        }
    }
    Err(Error::StepUnstable { drift: last_drift })
}

fn integrate_lindblad(
    params: &PhysicalParams,
    drives: &[(f64, C64)],
    rho0: &DensityMatrix,
    gamma: f64,
    gamma_phi: f64,
    grid: &TimeGrid,
    refine: usize,
) -> Result<DensityMatrix> {
    let hcat = build_hcat(params);
    let a = annihilation(params.fock_cutoff());
    let n = number(params.fock_cutoff());
    let damping = (&a.adjoint() * &a * c(gamma, 0.0) + &n * &n * c(gamma_phi, 0.0)) * c(0.0, -0.5);
    let dt = grid.dt();
    let mut rho = rho0.rho.clone();
    for &(chi, eps) in drives {
        let h_eff = &hcat + control_hamiltonian(params, chi, eps) + &damping;
        let substeps = ((dt * inf_norm(&h_eff) / RK4_STEP_SCALE).ceil() as usize).max(1) * refine;
        let l = Lindbladian { h_eff, a: a.clone(), n: n.clone(), gamma, gamma_phi };
        let h = dt / substeps as f64;
        for _ in 0..substeps {
            rho = l.rk4(&rho, h);
        }
        let drift = (rho.trace().re - 1.0).abs();
        if drift.is_nan() || drift > TRACE_DRIFT_LIMIT {
            return Err(Error::StepUnstable { drift });
        }
    }
    // Remove the O(h⁵) anti-Hermitian residue accumulated by RK4.
    let rho = (&rho + rho.adjoint()) * c(0.5, 0.0);
    Ok(DensityMatrix { rho })
}
