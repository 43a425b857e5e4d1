//! Reverse-engineered control law: paths (μ, η), effective fields Ω, physical drives (χ, ε),
//! geometric and dynamic phases, and the trigonometric baseline protocol.

use std::f64::consts::PI;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::cat::{cat_states, normalization_constants, PhysicalParams};
use crate::error::{Error, Result};
use crate::fresnel::theta_fresnel;
use crate::linalg::{c, C64};

/// Uniform time grid of `n` nodes spanning [0, L].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    period: f64,
    n: usize,
}

impl TimeGrid {
    pub fn new(period: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParams(format!("time grid needs at least 2 points, got {n}")));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidParams(format!("period must be positive, got {period}")));
        }
        Ok(Self { period, n })
    }

    pub fn period(&self) -> f64 {
        self.period
    }
    pub fn len(&self) -> usize {
        self.n
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn slices(&self) -> usize {
        self.n - 1
    }
    pub fn dt(&self) -> f64 {
        self.period / (self.n - 1) as f64
    }
    pub fn node(&self, k: usize) -> f64 {
        if k + 1 == self.n {
            self.period
        } else {
            k as f64 * self.dt()
        }
    }
    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.node(k)).collect()
    }
    pub fn midpoint(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.dt()
    }
    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.slices()).map(|k| self.midpoint(k)).collect()
    }
}

/// Sampled control parameters μ(t), η(t) and their time derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPath {
    pub t: Vec<f64>,
    pub mu: Vec<f64>,
    pub eta: Vec<f64>,
    pub dmu: Vec<f64>,
    pub deta: Vec<f64>,
}

impl ControlPath {
    /// Checks equal lengths, t[0] = 0 and strictly increasing times.
    pub fn new(t: Vec<f64>, mu: Vec<f64>, eta: Vec<f64>, dmu: Vec<f64>, deta: Vec<f64>) -> Result<Self> {
        let n = t.len();
        if n < 2 {
            return Err(Error::InvalidParams("control path needs at least 2 points".into()));
        }
        for len in [mu.len(), eta.len(), dmu.len(), deta.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        if t[0] != 0.0 {
            return Err(Error::InvalidParams(format!("control path must start at t = 0, got {}", t[0])));
        }
        if t.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
            return Err(Error::InvalidParams("time grid must be strictly increasing".into()));
        }
        Ok(Self { t, mu, eta, dmu, deta })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }
    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
    pub fn period(&self) -> f64 {
        self.t[self.t.len() - 1]
    }

    /// Largest violation of the cyclic condition μ(0) = μ(L), η(0) = η(L) (η modulo 2π).
    pub fn cyclic_mismatch(&self) -> f64 {
        let n = self.len() - 1;
        let dmu = (self.mu[n] - self.mu[0]).abs();
        let deta = wrap_angle(self.eta[n] - self.eta[0]).abs();
        dmu.max(deta)
    }
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Physical single-mode drives χ(t), ε(t) realizing the effective fields.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalDrive {
    pub chi: Vec<f64>,
    pub eps: Vec<C64>,
    /// Set when max(|χ|, |ε|) exceeds 10% of the energy gap.
    pub gap_warning: bool,
}

/// Effective subspace fields Ω(t) with optional physical drives on the same samples.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveFields {
    pub t: Vec<f64>,
    pub omega: [Vec<f64>; 3],
    pub drive: Option<PhysicalDrive>,
}

impl DriveFields {
    pub fn new(t: Vec<f64>, omega: [Vec<f64>; 3]) -> Result<Self> {
        for o in &omega {
            if o.len() != t.len() {
                return Err(Error::DimensionMismatch { expected: t.len(), got: o.len() });
            }
        }
        Ok(Self { t, omega, drive: None })
    }

    /// Builds fields from per-sample vectors.
    pub fn from_points(t: Vec<f64>, points: &[[f64; 3]]) -> Result<Self> {
        let omega = std::array::from_fn(|k| points.iter().map(|p| p[k]).collect());
        Self::new(t, omega)
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }
    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn omega_at(&self, k: usize) -> [f64; 3] {
        [self.omega[0][k], self.omega[1][k], self.omega[2][k]]
    }

    /// Copy with Ω_axis scaled by (1 + delta); physical drives are dropped.
    pub fn scaled_axis(&self, axis: usize, delta: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.omega[axis] {
            *v *= 1.0 + delta;
        }
        out.drive = None;
        out
    }

    /// Per-slice field values for propagation on `grid`.
    ///
    /// Fields sampled at the n − 1 slice midpoints are used as they are; fields sampled on
    /// the n nodes are averaged over each slice.
    pub fn slice_values(&self, grid: &TimeGrid) -> Result<Vec<[f64; 3]>> {
        if self.len() == grid.slices() {
            Ok((0..self.len()).map(|k| self.omega_at(k)).collect())
        } else if self.len() == grid.len() {
            Ok((0..grid.slices())
                .map(|k| {
                    let (a, b) = (self.omega_at(k), self.omega_at(k + 1));
                    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])]
                })
                .collect())
        } else {
            Err(Error::DimensionMismatch { expected: grid.slices(), got: self.len() })
        }
    }

    /// Per-slice (χ, ε) values, with the same sampling rule as `slice_values`.
    pub fn slice_drives(&self, grid: &TimeGrid) -> Result<Vec<(f64, C64)>> {
        let d = self
            .drive
            .as_ref()
            .ok_or_else(|| Error::InvalidParams("physical drives (chi, eps) not computed".into()))?;
        if self.len() == grid.slices() {
            Ok(d.chi.iter().zip(&d.eps).map(|(&x, &e)| (x, e)).collect())
        } else if self.len() == grid.len() {
            Ok((0..grid.slices())
                .map(|k| (0.5 * (d.chi[k] + d.chi[k + 1]), (d.eps[k] + d.eps[k + 1]) * 0.5))
                .collect())
        } else {
            Err(Error::DimensionMismatch { expected: grid.slices(), got: self.len() })
        }
    }
}

/// Ω at one point of a path.
pub fn omega_point(mu: f64, eta: f64, dmu: f64, deta: f64) -> [f64; 3] {
    let (se, ce) = eta.sin_cos();
    let s2m = (2.0 * mu).sin();
    let sm = mu.sin();
    [
        0.25 * (deta * se * s2m - 2.0 * dmu * ce),
        0.25 * (deta * ce * s2m + 2.0 * dmu * se),
        -0.5 * deta * sm * sm,
    ]
}

/// Partial derivatives ∂Ω_c/∂(μ, η, μ̇, η̇).
pub fn omega_point_jacobian(mu: f64, eta: f64, dmu: f64, deta: f64) -> [[f64; 4]; 3] {
    let (se, ce) = eta.sin_cos();
    let (s2m, c2m) = (2.0 * mu).sin_cos();
    let sm = mu.sin();
    [
        [
            0.5 * deta * se * c2m,
            0.25 * (deta * ce * s2m + 2.0 * dmu * se),
            -0.5 * ce,
            0.25 * se * s2m,
        ],
        [
            0.5 * deta * ce * c2m,
            0.25 * (-deta * se * s2m + 2.0 * dmu * ce),
            0.5 * se,
            0.25 * ce * s2m,
        ],
        [-0.5 * deta * s2m, 0.0, 0.0, -0.5 * sm * sm],
    ]
}

/// Effective fields Ω_x, Ω_y, Ω_z on the path samples.
pub fn omega_from_path(path: &ControlPath) -> DriveFields {
    let points: Vec<[f64; 3]> = (0..path.len())
        .map(|k| omega_point(path.mu[k], path.eta[k], path.dmu[k], path.deta[k]))
        .collect();
    DriveFields::from_points(path.t.clone(), &points).expect("lengths agree by construction")
}

/// χ and ε realizing a single Ω sample in the cat subspace.
pub fn drive_point(omega: [f64; 3], params: &PhysicalParams) -> (f64, C64) {
    let a2 = params.alpha_abs().powi(2);
    let (np, nm) = normalization_constants(params.alpha());
    let chi = -2.0 * omega[2] * np * nm / (a2 * (np * np - nm * nm));
    let f = (np * nm).sqrt() / (4.0 * params.alpha_abs());
    let g = (2.0 * a2).exp();
    let (sx, cx) = params.xi().sin_cos();
    let eps = c(
        f * (omega[0] * cx - g * omega[1] * sx),
        f * (omega[0] * sx + g * omega[1] * cx),
    );
    (chi, eps)
}

/// Fills in χ(t), ε(t) for the given fields.
pub fn drive_from_omega(fields: &DriveFields, params: &PhysicalParams) -> DriveFields {
    let (chi, eps): (Vec<f64>, Vec<C64>) = (0..fields.len())
        .map(|k| drive_point(fields.omega_at(k), params))
        .unzip();
    let limit = 0.1 * params.energy_gap();
    let peak = chi
        .iter()
        .map(|x| x.abs())
        .chain(eps.iter().map(|e| e.norm()))
        .fold(0.0, f64::max);
    let mut out = fields.clone();
    out.drive = Some(PhysicalDrive { chi, eps, gap_warning: peak > limit });
    out
}

fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    t.windows(2)
        .zip(y.windows(2))
        .map(|(tw, yw)| 0.5 * (tw[1] - tw[0]) * (yw[0] + yw[1]))
        .sum()
}

/// Dynamic phases Φ± = ∓∫(½η̇ sin²μ + Ω_z) sec μ dt.
pub fn dynamic_phase(path: &ControlPath, fields: &DriveFields) -> Result<(f64, f64)> {
    if fields.len() != path.len() {
        return Err(Error::DimensionMismatch { expected: path.len(), got: fields.len() });
    }
    let mut integrand = Vec::with_capacity(path.len());
    for k in 0..path.len() {
        let num = 0.5 * path.deta[k] * path.mu[k].sin().powi(2) + fields.omega[2][k];
        let cm = path.mu[k].cos();
        if num.abs() <= 1e-6 && cm.abs() < 1e-6 {
            integrand.push(0.0);
        } else if cm.abs() < 1e-6 {
            return Err(Error::SingularSecant { t: path.t[k], cos_mu: cm });
        } else {
            integrand.push(num / cm);
        }
    }
    let phi = trapezoid(&path.t, &integrand);
    Ok((-phi, phi))
}

/// Dynamic phases Φ± = ∓∫Ω·ζ dt, i.e. −∫⟨φ±|Ω·σ|φ±⟩ dt, which stays regular where cos μ = 0.
pub fn dynamic_phase_projected(path: &ControlPath, fields: &DriveFields) -> Result<(f64, f64)> {
    if fields.len() != path.len() {
        return Err(Error::DimensionMismatch { expected: path.len(), got: fields.len() });
    }
    let zeta = zeta_path(path);
    let integrand: Vec<f64> = (0..path.len())
        .map(|k| {
            let o = fields.omega_at(k);
            o[0] * zeta[k][0] + o[1] * zeta[k][1] + o[2] * zeta[k][2]
        })
        .collect();
    let phi = trapezoid(&path.t, &integrand);
    Ok((-phi, phi))
}

/// θ = ∫₀ᴸ η̇ sin²(μ/2) dt by the composite trapezoid rule.
pub fn geometric_theta(path: &ControlPath) -> f64 {
    let y: Vec<f64> = path
        .deta
        .iter()
        .zip(&path.mu)
        .map(|(&de, &m)| de * (0.5 * m).sin().powi(2))
        .collect();
    trapezoid(&path.t, &y)
}

/// ζ = (sin η sin μ, cos η sin μ, cos μ) on the path samples.
pub fn zeta_path(path: &ControlPath) -> Vec<[f64; 3]> {
    path.mu
        .iter()
        .zip(&path.eta)
        .map(|(&m, &e)| [e.sin() * m.sin(), e.cos() * m.sin(), m.cos()])
        .collect()
}

/// Bloch vectors of the invariant eigenstates |φ±(t)⟩ in the (C₊, C₋) basis.
pub fn bloch_trajectories(path: &ControlPath) -> (Vec<[f64; 3]>, Vec<[f64; 3]>) {
    fn bloch(a: C64, b: C64) -> [f64; 3] {
        let ab = a.conj() * b;
        [2.0 * ab.re, 2.0 * ab.im, a.norm_sqr() - b.norm_sqr()]
    }
    let mut plus = Vec::with_capacity(path.len());
    let mut minus = Vec::with_capacity(path.len());
    for (&m, &e) in path.mu.iter().zip(&path.eta) {
        let (s, co) = (0.5 * m).sin_cos();
        let i = c(0.0, 1.0);
        plus.push(bloch(c(co, 0.0), i * C64::from_polar(s, -e)));
        minus.push(bloch(i * C64::from_polar(s, e), c(co, 0.0)));
    }
    (plus, minus)
}

/// Trigonometric protocol μ = μ₀ + Λ sin²(πt/L), η = η₀ + π[1 − cos(πt/L)].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrigProtocol {
    pub mu0: f64,
    pub eta0: f64,
    pub lambda: f64,
    pub period: f64,
}

impl TrigProtocol {
    /// (μ, η, μ̇, η̇) at time t.
    pub fn point(&self, t: f64) -> [f64; 4] {
        let w = PI / self.period;
        let (s, co) = (w * t).sin_cos();
        [
            self.mu0 + self.lambda * s * s,
            self.eta0 + PI * (1.0 - co),
            self.lambda * w * 2.0 * s * co,
            PI * w * s,
        ]
    }

    pub fn path(&self, n: usize) -> Result<ControlPath> {
        let grid = TimeGrid::new(self.period, n)?;
        self.sample(&grid.nodes())
    }

    pub fn sample(&self, t: &[f64]) -> Result<ControlPath> {
        let pts: Vec<[f64; 4]> = t.iter().map(|&x| self.point(x)).collect();
        ControlPath::new(
            t.to_vec(),
            pts.iter().map(|p| p[0]).collect(),
            pts.iter().map(|p| p[1]).collect(),
            pts.iter().map(|p| p[2]).collect(),
            pts.iter().map(|p| p[3]).collect(),
        )
    }

    /// Ω sampled at the slice midpoints of `grid`.
    pub fn midpoint_fields(&self, grid: &TimeGrid) -> DriveFields {
        let t = grid.midpoints();
        let pts: Vec<[f64; 3]> = t
            .iter()
            .map(|&x| {
                let p = self.point(x);
                omega_point(p[0], p[1], p[2], p[3])
            })
            .collect();
        DriveFields::from_points(t, &pts).expect("lengths agree by construction")
    }
}

pub fn trig_path(mu0: f64, eta0: f64, lambda: f64, period: f64, n: usize) -> Result<ControlPath> {
    TrigProtocol { mu0, eta0, lambda, period }.path(n)
}

const LAMBDA_STEP: f64 = 1e-3;
const LAMBDA_MAX: f64 = 30.0;
const LAMBDA_ACCEPT: f64 = 1e-3;

/// Chooses Λ so the trigonometric protocol reaches θ_ideal (mod 2π).
///
/// Scans Λ ∈ (0, 30] on a 10⁻³ grid and takes the smallest-Λ local minimum of the phase
/// error that is below 10⁻³, falling back to the global minimizer; the choice is then
/// refined by golden-section search.
pub fn select_lambda(mu0: f64, theta_ideal: f64) -> Result<f64> {
    let err = |l: f64| -> Result<f64> { Ok(wrap_angle(theta_fresnel(mu0, l)? - theta_ideal).abs()) };
    let steps = (LAMBDA_MAX / LAMBDA_STEP).round() as usize;
    let at = |k: usize| k as f64 * LAMBDA_STEP;
    let mut prev = f64::INFINITY;
    let mut cur = err(at(1))?;
    let mut best = (1, cur);
    for k in 1..=steps {
        let next = if k < steps { err(at(k + 1))? } else { f64::INFINITY };
        if cur < best.1 {
            best = (k, cur);
        }
        if cur <= prev && cur <= next && cur <= LAMBDA_ACCEPT {
            best = (k, cur);
            break;
        }
        prev = cur;
        cur = next;
    }
    let k = best.0;
    let lo = at(k.saturating_sub(1)).max(0.5 * LAMBDA_STEP);
    let hi = at(k + 1).min(LAMBDA_MAX);
    golden_section(|l| err(l).unwrap_or(f64::INFINITY), lo, hi, 1e-13)
}

fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while (b - a).abs() > tol {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    Ok(0.5 * (a + b))
}

/// One row of the pulse table export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseRow {
    pub t: f64,
    pub mu: f64,
    pub eta: f64,
    pub dmu: f64,
    pub deta: f64,
    #[serde(rename = "Ox")]
    pub ox: f64,
    #[serde(rename = "Oy")]
    pub oy: f64,
    #[serde(rename = "Oz")]
    pub oz: f64,
    pub chi: f64,
    #[serde(rename = "Re_eps")]
    pub re_eps: f64,
    #[serde(rename = "Im_eps")]
    pub im_eps: f64,
}

/// Writes a path and its fields (sampled on the same times) as CSV.
pub fn write_pulse_csv<W: Write>(writer: W, path: &ControlPath, fields: &DriveFields) -> Result<()> {
    if fields.len() != path.len() {
        return Err(Error::DimensionMismatch { expected: path.len(), got: fields.len() });
    }
    let mut w = csv::Writer::from_writer(writer);
    for k in 0..path.len() {
        let (chi, eps) = match &fields.drive {
            Some(d) => (d.chi[k], d.eps[k]),
            None => (0.0, c(0.0, 0.0)),
        };
        w.serialize(PulseRow {
            t: path.t[k],
            mu: path.mu[k],
            eta: path.eta[k],
            dmu: path.dmu[k],
            deta: path.deta[k],
            ox: fields.omega[0][k],
            oy: fields.omega[1][k],
            oz: fields.omega[2][k],
            chi,
            re_eps: eps.re,
            im_eps: eps.im,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a pulse table written by `write_pulse_csv`.
pub fn read_pulse_csv<R: Read>(reader: R) -> Result<(ControlPath, DriveFields)> {
    let mut r = csv::Reader::from_reader(reader);
    let rows: Vec<PulseRow> = r.deserialize().collect::<std::result::Result<_, _>>()?;
    let col = |f: fn(&PulseRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let path = ControlPath::new(col(|r| r.t), col(|r| r.mu), col(|r| r.eta), col(|r| r.dmu), col(|r| r.deta))?;
    let mut fields = DriveFields::new(col(|r| r.t), [col(|r| r.ox), col(|r| r.oy), col(|r| r.oz)])?;
    fields.drive = Some(PhysicalDrive {
        chi: col(|r| r.chi),
        eps: rows.iter().map(|r| c(r.re_eps, r.im_eps)).collect(),
        gap_warning: false,
    });
    Ok((path, fields))
}

/// Projects the single-mode control Hamiltonian χa†a + εa† + ε*a onto the cat basis.
pub fn project_control_hamiltonian(chi: f64, eps: C64, params: &PhysicalParams) -> Result<crate::linalg::CMat> {
    let a = crate::cat::annihilation(params.fock_cutoff());
    let ad = a.adjoint();
    let h = &ad * &a * c(chi, 0.0) + &ad * eps + &a * eps.conj();
    Ok(cat_states(params)?.project(&h))
}
