//! Fresnel integrals and the closed-form geometric phase of the trigonometric protocol.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = half * XGK[j];
        let s = f(center - x) + f(center + x);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * half, (kronrod - gauss).abs() * half)
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (value, err) = gk15(f, a, b);
    if err <= tol.max(64.0 * f64::EPSILON * value.abs()) || depth == 0 {
        return value;
    }
    let m = 0.5 * (a + b);
    adapt(f, a, m, 0.5 * tol, depth - 1) + adapt(f, m, b, 0.5 * tol, depth - 1)
}

/// Adaptive Gauss–Kronrod (7/15) quadrature of f over [a, b] to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    adapt(&f, a, b, tol, 30)
}

/// ∫₀ˣ g(t²) dt split at the half-period points t = √(kπ) of the oscillatory kernel.
fn oscillatory_square<F: Fn(f64) -> f64>(g: F, x: f64) -> f64 {
    if x < 0.0 {
        return -oscillatory_square(g, -x);
    }
    let f = |t: f64| g(t * t);
    let mut total = 0.0;
    let mut lo = 0.0;
    let mut k = 1.0;
    while lo < x {
        let hi = (k * PI).sqrt().min(x);
        total += integrate(f, lo, hi, 1e-15);
        lo = hi;
        k += 1.0;
    }
    total
}

/// S(x) = ∫₀ˣ sin(t²) dt.
pub fn fresnel_s(x: f64) -> f64 {
    oscillatory_square(f64::sin, x)
}

/// C(x) = ∫₀ˣ cos(t²) dt.
pub fn fresnel_c(x: f64) -> f64 {
    oscillatory_square(f64::cos, x)
}

/// Normalized S(z) = ∫₀ᶻ sin(πt²/2) dt.
pub fn fresnel_s_normalized(z: f64) -> f64 {
    (2.0 / PI).sqrt() * fresnel_s(z * (PI / 2.0).sqrt())
}

/// Normalized C(z) = ∫₀ᶻ cos(πt²/2) dt.
pub fn fresnel_c_normalized(z: f64) -> f64 {
    (2.0 / PI).sqrt() * fresnel_c(z * (PI / 2.0).sqrt())
}

/// Geometric phase θ(μ₀, Λ) of the trigonometric protocol:
/// θ = π[1 − √(π/2Λ)(cos(μ₀+Λ)C(√(2Λ/π)) + sin(μ₀+Λ)S(√(2Λ/π)))] with normalized C, S.
pub fn theta_fresnel(mu0: f64, lambda: f64) -> Result<f64> {
    if lambda.is_nan() || lambda <= 0.0 || !lambda.is_finite() {
        return Err(Error::LambdaDomain(lambda));
    }
    let z = (2.0 * lambda / PI).sqrt();
    let a = mu0 + lambda;
    let bracket = a.cos() * fresnel_c_normalized(z) + a.sin() * fresnel_s_normalized(z);
    Ok(PI * (1.0 - (PI / (2.0 * lambda)).sqrt() * bracket))
}

/// Λ → 0⁺ limit of `theta_fresnel`: π(1 − cos μ₀).
pub fn theta_fresnel_limit(mu0: f64) -> f64 {
    PI * (1.0 - mu0.cos())
}
