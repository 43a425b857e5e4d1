//! Cat-state algebra and truncated Fock-space operators.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{c, CMat, C64};

/// Tail mass above which a Fock cutoff is rejected.
pub const TAIL_TOLERANCE: f64 = 1e-10;

/// Physical constants of a Kerr-cat qubit. Frequencies in rad/µs, times in µs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    alpha: C64,
    kerr: f64,
    epsilon2: f64,
    xi: f64,
    duration: f64,
    fock_cutoff: usize,
}

impl PhysicalParams {
    /// Validates ε₂ = K|α|² and the Fock-tail criterion. ξ is taken from arg α.
    pub fn new(alpha: C64, kerr: f64, epsilon2: f64, duration: f64, fock_cutoff: usize) -> Result<Self> {
        if !(kerr.is_finite() && epsilon2.is_finite() && alpha.norm().is_finite()) {
            return Err(Error::InvalidParams("non-finite physical constant".into()));
        }
        if kerr < 0.0 || epsilon2 < 0.0 {
            return Err(Error::InvalidParams("K and epsilon2 must be non-negative".into()));
        }
        let expected = kerr * alpha.norm_sqr();
        if (epsilon2 - expected).abs() > 1e-9 * expected.abs().max(1.0) {
            return Err(Error::InvalidParams(format!(
                "epsilon2 = {epsilon2} inconsistent with K|alpha|^2 = {expected}"
            )));
        }
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::InvalidParams(format!("gate duration must be positive, got {duration}")));
        }
        if fock_cutoff < 1 {
            return Err(Error::InvalidParams("fock_cutoff must be at least 1".into()));
        }
        let tail = coherent_tail_mass(alpha.norm_sqr(), fock_cutoff);
        if tail >= TAIL_TOLERANCE {
            return Err(Error::TailTooHeavy { tail, cutoff: fock_cutoff });
        }
        Ok(Self { alpha, kerr, epsilon2, xi: alpha.arg(), duration, fock_cutoff })
    }

    /// Builds the parameters from |α|, ξ and K with ε₂ = K|α|².
    pub fn from_amplitude(alpha_abs: f64, xi: f64, kerr: f64, duration: f64, fock_cutoff: usize) -> Result<Self> {
        let alpha = C64::from_polar(alpha_abs, xi);
        let mut p = Self::new(alpha, kerr, kerr * alpha_abs * alpha_abs, duration, fock_cutoff)?;
        p.xi = xi;
        Ok(p)
    }

    pub fn with_fock_cutoff(&self, fock_cutoff: usize) -> Result<Self> {
        let mut p = Self::new(self.alpha, self.kerr, self.epsilon2, self.duration, fock_cutoff)?;
        p.xi = self.xi;
        Ok(p)
    }

    pub fn with_duration(&self, duration: f64) -> Result<Self> {
        let mut p = Self::new(self.alpha, self.kerr, self.epsilon2, duration, self.fock_cutoff)?;
        p.xi = self.xi;
        Ok(p)
    }

    pub fn alpha(&self) -> C64 {
        self.alpha
    }
    pub fn alpha_abs(&self) -> f64 {
        self.alpha.norm()
    }
    pub fn kerr(&self) -> f64 {
        self.kerr
    }
    pub fn epsilon2(&self) -> f64 {
        self.epsilon2
    }
    pub fn xi(&self) -> f64 {
        self.xi
    }
    pub fn duration(&self) -> f64 {
        self.duration
    }
    pub fn fock_cutoff(&self) -> usize {
        self.fock_cutoff
    }
    pub fn fock_dim(&self) -> usize {
        self.fock_cutoff + 1
    }

    /// Energy gap E_gap = 4K|α|² protecting the cat manifold.
    pub fn energy_gap(&self) -> f64 {
        4.0 * self.kerr * self.alpha.norm_sqr()
    }
}

impl Default for PhysicalParams {
    /// |α| = 0.5, ξ = 0, K = 2π·12.5 rad/µs, T = 1 µs, cutoff 10.
    fn default() -> Self {
        Self::from_amplitude(0.5, 0.0, 2.0 * std::f64::consts::PI * 12.5, 1.0, 10)
            .expect("default parameters are valid")
    }
}

/// Σ_{n > cutoff} e^{−x} xⁿ/n! for x = |α|², summed directly to avoid cancellation.
pub fn coherent_tail_mass(x: f64, cutoff: usize) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let mut term = (-x).exp();
    for n in 1..=cutoff {
        term *= x / n as f64;
    }
    let mut tail = 0.0;
    let mut n = cutoff + 1;
    loop {
        term *= x / n as f64;
        tail += term;
        if (n as f64 > x && term < 1e-18 * tail.max(1e-300)) || n > cutoff + 100_000 {
            break;
        }
        n += 1;
    }
    tail
}

/// Smallest cutoff satisfying the tail criterion for amplitude |α|.
pub fn minimal_cutoff(alpha_abs: f64) -> usize {
    let x = alpha_abs * alpha_abs;
    (1..).find(|&n| coherent_tail_mass(x, n) < TAIL_TOLERANCE).unwrap_or(1)
}

/// N± = 2 ± 2e^{−2|α|²}.
pub fn normalization_constants(alpha: C64) -> (f64, f64) {
    let e = (-2.0 * alpha.norm_sqr()).exp();
    (2.0 + 2.0 * e, 2.0 - 2.0 * e)
}

/// A state or vector in the truncated Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    pub coeffs: DVector<C64>,
}

impl FockVector {
    pub fn new(coeffs: DVector<C64>) -> Self {
        Self { coeffs }
    }

    pub fn basis(dim: usize, n: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[n] = c(1.0, 0.0);
        Self { coeffs: v }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.norm()
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &FockVector) -> C64 {
        self.coeffs.dotc(&other.coeffs)
    }

    /// ⟨self|op|self⟩.
    pub fn expectation(&self, op: &CMat) -> C64 {
        self.coeffs.dotc(&(op * &self.coeffs))
    }
}

/// Coherent state |α⟩ truncated at `cutoff`.
pub fn coherent_fock(alpha: C64, cutoff: usize) -> Result<FockVector> {
    let tail = coherent_tail_mass(alpha.norm_sqr(), cutoff);
    if tail >= TAIL_TOLERANCE {
        return Err(Error::TailTooHeavy { tail, cutoff });
    }
    let mut coeffs = DVector::zeros(cutoff + 1);
    let mut term = c((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    coeffs[0] = term;
    for n in 1..=cutoff {
        term = term * alpha / (n as f64).sqrt();
        coeffs[n] = term;
    }
    Ok(FockVector { coeffs })
}

/// Orthonormal cat basis (|C₊⟩, |C₋⟩) spanning the computational subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceProjector {
    pub plus: FockVector,
    pub minus: FockVector,
}

impl SubspaceProjector {
    pub fn fock_dim(&self) -> usize {
        self.plus.dim()
    }

    /// Isometry V whose columns are |C₊⟩, |C₋⟩.
    pub fn basis_matrix(&self) -> CMat {
        let n = self.fock_dim();
        CMat::from_fn(n, 2, |i, j| if j == 0 { self.plus.coeffs[i] } else { self.minus.coeffs[i] })
    }

    /// V† A V.
    pub fn project(&self, op: &CMat) -> CMat {
        let v = self.basis_matrix();
        v.adjoint() * op * v
    }

    /// V u V† for a 2×2 operator u.
    pub fn embed(&self, u: &CMat) -> CMat {
        let v = self.basis_matrix();
        &v * u * v.adjoint()
    }

    /// Fock vector for subspace amplitudes (c₊, c₋).
    pub fn state(&self, amplitudes: [C64; 2]) -> FockVector {
        FockVector::new(&self.plus.coeffs * amplitudes[0] + &self.minus.coeffs * amplitudes[1])
    }
}

/// Even and odd cat states |C±⟩ = (|α⟩ ± |−α⟩)/√N±.
pub fn cat_states(params: &PhysicalParams) -> Result<SubspaceProjector> {
    let alpha = params.alpha();
    if alpha.norm() == 0.0 {
        return Err(Error::InvalidParams("odd cat state is undefined for alpha = 0".into()));
    }
    let a = coherent_fock(alpha, params.fock_cutoff())?;
    let b = coherent_fock(-alpha, params.fock_cutoff())?;
    let (np, nm) = normalization_constants(alpha);
    let plus = FockVector::new((&a.coeffs + &b.coeffs) / c(np.sqrt(), 0.0));
    let minus = FockVector::new((&a.coeffs - &b.coeffs) / c(nm.sqrt(), 0.0));
    Ok(SubspaceProjector { plus, minus })
}

/// Truncated annihilation operator of dimension cutoff + 1.
pub fn annihilation(cutoff: usize) -> CMat {
    let n = cutoff + 1;
    CMat::from_fn(n, n, |i, j| if j == i + 1 { c((j as f64).sqrt(), 0.0) } else { c(0.0, 0.0) })
}

/// Number operator a†a.
pub fn number(cutoff: usize) -> CMat {
    let n = cutoff + 1;
    CMat::from_fn(n, n, |i, j| if i == j { c(i as f64, 0.0) } else { c(0.0, 0.0) })
}

/// H_cat = −K a†²a² + ε₂(e^{2iξ}a†² + e^{−2iξ}a²).
pub fn build_hcat(params: &PhysicalParams) -> CMat {
    let a = annihilation(params.fock_cutoff());
    let ad = a.adjoint();
    let a2 = &a * &a;
    let ad2 = &ad * &ad;
    let phase = C64::from_polar(1.0, 2.0 * params.xi());
    &ad2 * &a2 * c(-params.kerr(), 0.0) + (&ad2 * phase + &a2 * phase.conj()) * c(params.epsilon2(), 0.0)
}
