//! Periodicity-enhanced neural-network ansatz for the control parameters μ(t), η(t).
//!
//! Each output comes from its own single-hidden-layer branch with cosine input features:
//! μ = Σ W2ᵢ tanh(W1ᵢ cos(ω₁·2πt/L + φ1ᵢ) + B1ᵢ) + B2 and
//! η = Σ W4ᵢ tanh(W3ᵢ cos(ω₂·πt/L + φ2ᵢ) + B3ᵢ) + B4.
//! The output biases B2, B4 are pinned so that μ(0) = μ₀ and η(0) = η₀.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::{omega_point, ControlPath, DriveFields, TimeGrid, TrigProtocol};
use crate::error::{Error, Result};

fn one() -> f64 {
    1.0
}

/// Network weights, biases and phases plus the fixed constants of the ansatz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzParams {
    pub n_hidden: usize,
    #[serde(rename = "W1")]
    pub w1: Vec<f64>,
    #[serde(rename = "W2")]
    pub w2: Vec<f64>,
    #[serde(rename = "W3")]
    pub w3: Vec<f64>,
    #[serde(rename = "W4")]
    pub w4: Vec<f64>,
    #[serde(rename = "B1")]
    pub b1: Vec<f64>,
    #[serde(rename = "B2")]
    pub b2: f64,
    #[serde(rename = "B3")]
    pub b3: Vec<f64>,
    #[serde(rename = "B4")]
    pub b4: f64,
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
    #[serde(default = "one")]
    pub omega1: f64,
    #[serde(default = "one")]
    pub omega2: f64,
    pub mu0: f64,
    pub eta0: f64,
    #[serde(rename = "L")]
    pub period: f64,
}

/// Parameter groups of the learnable vector, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParamGroup {
    W1,
    B1,
    W2,
    Phi1,
    W3,
    B3,
    W4,
    Phi2,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 8] = [
        ParamGroup::W1,
        ParamGroup::B1,
        ParamGroup::W2,
        ParamGroup::Phi1,
        ParamGroup::W3,
        ParamGroup::B3,
        ParamGroup::W4,
        ParamGroup::Phi2,
    ];
}

/// Value and time derivative of one branch output together with their parameter gradients.
///
/// Gradients run over the branch's own parameters in the order (W_in, B_in, W_out, φ).
#[derive(Debug, Clone, PartialEq)]
pub struct BranchJet {
    pub value: f64,
    pub rate: f64,
    pub d_value: Vec<f64>,
    pub d_rate: Vec<f64>,
}

/// Full-length gradients of (μ, η, μ̇, η̇) with respect to the learnable vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradients {
    pub mu: Vec<f64>,
    pub eta: Vec<f64>,
    pub dmu: Vec<f64>,
    pub deta: Vec<f64>,
}

struct Branch<'a> {
    w_in: &'a [f64],
    b_in: &'a [f64],
    w_out: &'a [f64],
    phase: &'a [f64],
    /// Angular rate of the cosine feature in rad/µs.
    kappa: f64,
}

impl Branch<'_> {
    fn raw(&self, t: f64) -> (f64, f64) {
        let mut g = 0.0;
        let mut dg = 0.0;
        for i in 0..self.w_in.len() {
            let (s, c) = (self.kappa * t + self.phase[i]).sin_cos();
            let th = (self.w_in[i] * c + self.b_in[i]).tanh();
            g += self.w_out[i] * th;
            dg -= self.w_out[i] * (1.0 - th * th) * self.w_in[i] * s * self.kappa;
        }
        (g, dg)
    }

    /// Gradients of the raw sum g(t) and its rate ġ(t).
    fn raw_grad(&self, t: f64, d_value: &mut [f64], d_rate: &mut [f64]) {
        let h = self.w_in.len();
        for i in 0..h {
            let (s, c) = (self.kappa * t + self.phase[i]).sin_cos();
            let (wi, wo) = (self.w_in[i], self.w_out[i]);
            let th = (wi * c + self.b_in[i]).tanh();
            let d = 1.0 - th * th;
            let k = self.kappa;
            d_value[i] = wo * d * c;
            d_value[h + i] = wo * d;
            d_value[2 * h + i] = th;
            d_value[3 * h + i] = -wo * d * wi * s;
            d_rate[i] = -wo * k * s * (d - 2.0 * th * d * wi * c);
            d_rate[h + i] = 2.0 * wo * k * s * wi * th * d;
            d_rate[2 * h + i] = -d * wi * s * k;
            d_rate[3 * h + i] = wo * k * wi * (-2.0 * th * d * wi * s * s - d * c);
        }
    }

    fn jet(&self, t: f64, pinned_at: f64) -> BranchJet {
        let h = self.w_in.len();
        let (g, dg) = self.raw(t);
        let (g0, _) = self.raw(0.0);
        let mut d_value = vec![0.0; 4 * h];
        let mut d_rate = vec![0.0; 4 * h];
        self.raw_grad(t, &mut d_value, &mut d_rate);
        let mut d0 = vec![0.0; 4 * h];
        let mut scratch = vec![0.0; 4 * h];
        self.raw_grad(0.0, &mut d0, &mut scratch);
        for (dv, z) in d_value.iter_mut().zip(&d0) {
            *dv -= z;
        }
        BranchJet { value: g - g0 + pinned_at, rate: dg, d_value, d_rate }
    }
}

impl AnsatzParams {
    /// All weights zero: μ ≡ μ₀, η ≡ η₀.
    pub fn zeros(n_hidden: usize, mu0: f64, eta0: f64, period: f64) -> Result<Self> {
        Self::check_shape(n_hidden, period)?;
        let h = n_hidden / 2;
        Ok(Self {
            n_hidden,
            w1: vec![0.0; h],
            w2: vec![0.0; h],
            w3: vec![0.0; h],
            w4: vec![0.0; h],
            b1: vec![0.0; h],
            b2: mu0,
            b3: vec![0.0; h],
            b4: eta0,
            phi1: vec![0.0; h],
            phi2: vec![0.0; h],
            omega1: 1.0,
            omega2: 1.0,
            mu0,
            eta0,
            period,
        })
    }

    /// Uniform random parameters in [−0.5, 0.5] drawn from a seeded ChaCha8 stream, then pinned.
    pub fn random(n_hidden: usize, mu0: f64, eta0: f64, period: f64, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(n_hidden, mu0, eta0, period)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..p.n_learnable()).map(|_| rng.random_range(-0.5..=0.5)).collect();
        p.set_learnable(&x);
        Ok(p)
    }

    fn check_shape(n_hidden: usize, period: f64) -> Result<()> {
        if n_hidden < 2 || !n_hidden.is_multiple_of(2) {
            return Err(Error::InvalidParams(format!(
                "n_hidden must be an even number >= 2 (split between the two branches), got {n_hidden}"
            )));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidParams(format!("period must be positive, got {period}")));
        }
        Ok(())
    }

    /// Checks array lengths against n_hidden.
    pub fn validate(&self) -> Result<()> {
        Self::check_shape(self.n_hidden, self.period)?;
        let h = self.n_hidden / 2;
        for v in [&self.w1, &self.w2, &self.w3, &self.w4, &self.b1, &self.b3, &self.phi1, &self.phi2] {
            if v.len() != h {
                return Err(Error::DimensionMismatch { expected: h, got: v.len() });
            }
        }
        Ok(())
    }

    /// Hidden units per branch.
    pub fn branch_width(&self) -> usize {
        self.n_hidden / 2
    }

    pub fn n_learnable(&self) -> usize {
        4 * self.n_hidden
    }

    fn mu_branch(&self) -> Branch<'_> {
        Branch {
            w_in: &self.w1,
            b_in: &self.b1,
            w_out: &self.w2,
            phase: &self.phi1,
            kappa: self.omega1 * 2.0 * PI / self.period,
        }
    }

    fn eta_branch(&self) -> Branch<'_> {
        Branch {
            w_in: &self.w3,
            b_in: &self.b3,
            w_out: &self.w4,
            phase: &self.phi2,
            kappa: self.omega2 * PI / self.period,
        }
    }

    /// Recomputes B2, B4 from μ(0) = μ₀ and η(0) = η₀.
    pub fn pin(&mut self) {
        self.b2 = self.mu0 - self.mu_branch().raw(0.0).0;
        self.b4 = self.eta0 - self.eta_branch().raw(0.0).0;
    }

    pub fn pin_initial_biases(mut self) -> Self {
        self.pin();
        self
    }

    /// Learnable vector in the order W1, B1, W2, φ1, W3, B3, W4, φ2.
    pub fn learnable(&self) -> Vec<f64> {
        [&self.w1, &self.b1, &self.w2, &self.phi1, &self.w3, &self.b3, &self.w4, &self.phi2]
            .iter()
            .flat_map(|v| v.iter().copied())
            .collect()
    }

    /// Sets the learnable vector and re-pins the output biases.
    pub fn set_learnable(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.n_learnable(), "learnable vector length");
        let h = self.branch_width();
        let mut chunks = x.chunks(h);
        for v in [
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.phi1,
            &mut self.w3,
            &mut self.b3,
            &mut self.w4,
            &mut self.phi2,
        ] {
            v.copy_from_slice(chunks.next().expect("length checked"));
        }
        self.pin();
    }

    /// Group of each learnable entry.
    pub fn groups(&self) -> Vec<ParamGroup> {
        let h = self.branch_width();
        ParamGroup::ALL.iter().flat_map(|&g| std::iter::repeat_n(g, h)).collect()
    }

    /// (μ, η, μ̇, η̇) at time t.
    pub fn point(&self, t: f64) -> [f64; 4] {
        let (gm, dgm) = self.mu_branch().raw(t);
        let (ge, dge) = self.eta_branch().raw(t);
        [gm + self.b2, ge + self.b4, dgm, dge]
    }

    /// Branch jets for μ and η including the dependence of the pinned biases.
    pub fn jets(&self, t: f64) -> (BranchJet, BranchJet) {
        (self.mu_branch().jet(t, self.mu0), self.eta_branch().jet(t, self.eta0))
    }

    /// Samples μ, η and their exact time derivatives.
    pub fn forward(&self, t: &[f64]) -> Result<ControlPath> {
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

    /// Exact gradients of μ, η, μ̇, η̇ at t over the full learnable vector.
    pub fn parameter_gradients(&self, t: f64) -> ParamGradients {
        let n = self.n_learnable();
        let half = n / 2;
        let (jm, je) = self.jets(t);
        let mut g = ParamGradients { mu: vec![0.0; n], eta: vec![0.0; n], dmu: vec![0.0; n], deta: vec![0.0; n] };
        g.mu[..half].copy_from_slice(&jm.d_value);
        g.dmu[..half].copy_from_slice(&jm.d_rate);
        g.eta[half..].copy_from_slice(&je.d_value);
        g.deta[half..].copy_from_slice(&je.d_rate);
        g
    }
}

/// Outcome of fitting the ansatz to a trigonometric path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    pub iterations: usize,
    pub max_error_mu: f64,
    pub max_error_eta: f64,
}

impl PretrainReport {
    pub fn max_error(&self) -> f64 {
        self.max_error_mu.max(self.max_error_eta)
    }
}

/// Pre-training stops failing only above this pointwise error.
pub const PRETRAIN_TOLERANCE: f64 = 1e-2;

const MAX_STEP: f64 = 0.5;

/// Least-squares fit of μ, η to the trigonometric target on the grid nodes by Levenberg–Marquardt.
pub fn pretrain(
    params: &AnsatzParams,
    target: &TrigProtocol,
    grid: &TimeGrid,
    iters: usize,
) -> Result<(AnsatzParams, PretrainReport)> {
    params.validate()?;
    let mut p = params.clone();
    p.mu0 = target.mu0;
    p.eta0 = target.eta0;
    p.pin();
    let t = grid.nodes();
    let goal: Vec<[f64; 4]> = t.iter().map(|&x| target.point(x)).collect();
    let half = p.n_learnable() / 2;
    let mut used = 0;
    for branch in 0..2 {
        if goal.iter().all(|g| g[branch] == goal[0][branch]) {
            // A constant target is represented exactly by silencing the branch.
            let out = if branch == 0 { &mut p.w2 } else { &mut p.w4 };
            out.iter_mut().for_each(|w| *w = 0.0);
            p.pin();
            continue;
        }
        let residuals = |q: &AnsatzParams| -> Vec<f64> {
            t.iter().zip(&goal).map(|(&x, g)| q.point(x)[branch] - g[branch]).collect()
        };
        let jacobian = |q: &AnsatzParams| -> DMatrix<f64> {
            let mut j = DMatrix::zeros(t.len(), half);
            for (row, &x) in t.iter().enumerate() {
                let (jm, je) = q.jets(x);
                let d = if branch == 0 { jm.d_value } else { je.d_value };
                for (col, v) in d.into_iter().enumerate() {
                    j[(row, col)] = v;
                }
            }
            j
        };
        let cost = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
        let mut r = residuals(&p);
        let mut current = cost(&r);
        let mut damping = 1.0;
        for it in 0..iters {
            used = used.max(it + 1);
            if r.iter().fold(0.0f64, |m, v| m.max(v.abs())) < 1e-13 {
                break;
            }
            let j = jacobian(&p);
            let jt = j.transpose();
            let jtj = &jt * &j;
            let grad = &jt * DVector::from_vec(r.clone());
            let mut improved = false;
            for _ in 0..30 {
                let mut a = jtj.clone();
                for k in 0..half {
                    a[(k, k)] += damping * (jtj[(k, k)] + 1e-12);
                }
                let Some(step) = a.cholesky().map(|ch| ch.solve(&(-&grad))) else {
                    damping *= 10.0;
                    continue;
                };
                // Trust region: long Gauss-Newton steps saturate the tanh units.
                if step.norm() > MAX_STEP {
                    damping *= 4.0;
                    continue;
                }
                let mut x = p.learnable();
                for k in 0..half {
                    x[branch * half + k] += step[k];
                }
                let mut q = p.clone();
                q.set_learnable(&x);
                let rq = residuals(&q);
                let cq = cost(&rq);
                if cq < current {
                    p = q;
                    r = rq;
                    improved = current - cq > 1e-15 * current;
                    current = cq;
                    damping = (damping / 3.0).max(1e-15);
                    break;
                }
                damping *= 4.0;
            }
            if !improved {
                break;
            }
        }
    }
    let report = {
        let mut em: f64 = 0.0;
        let mut ee: f64 = 0.0;
        for (&x, g) in t.iter().zip(&goal) {
            let v = p.point(x);
            em = em.max((v[0] - g[0]).abs());
            ee = ee.max((v[1] - g[1]).abs());
        }
        PretrainReport { iterations: used, max_error_mu: em, max_error_eta: ee }
    };
    if report.max_error().is_nan() || report.max_error() > PRETRAIN_TOLERANCE {
        return Err(Error::ConvergenceFailure { max_error: report.max_error() });
    }
    Ok((p, report))
}

/// Provenance stored alongside checkpointed parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub gate: String,
    pub fidelity: f64,
    pub sweeps: usize,
}

/// Checkpoint file: the ansatz parameters plus metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    #[serde(flatten)]
    pub params: AnsatzParams,
    pub metadata: CheckpointMeta,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let ck: Checkpoint = serde_json::from_str(&text)?;
        ck.params.validate()?;
        Ok(ck)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(seed: u64) -> AnsatzParams {
        let mut p = AnsatzParams::random(6, 0.3, -0.2, 1.3, seed).unwrap();
        // Larger weights than the default initializer so every term matters.
        let x: Vec<f64> = p.learnable().iter().map(|v| 3.0 * v).collect();
        p.set_learnable(&x);
        p
    }

    #[test]
    fn zero_weights_give_constant_outputs() {
        let p = AnsatzParams::zeros(6, 0.4, 1.1, 1.0).unwrap();
        for t in [0.0, 0.3, 0.77] {
            assert_eq!(p.point(t), [0.4, 1.1, 0.0, 0.0]);
        }
        assert_eq!(p.clone().pin_initial_biases().b2, 0.4);
    }

    #[test]
    fn pinning_fixes_initial_values() {
        let p = sample(3);
        let v = p.point(0.0);
        assert!((v[0] - 0.3).abs() < 1e-14 && (v[1] + 0.2).abs() < 1e-14);
        let mut q = p.clone();
        q.w1[1] += 0.7;
        q.phi2[0] -= 0.4;
        q.pin();
        let v = q.point(0.0);
        assert!((v[0] - 0.3).abs() < 1e-14 && (v[1] + 0.2).abs() < 1e-14);
    }

    #[test]
    fn outputs_are_periodic() {
        let p = sample(5);
        let l = p.period;
        for k in 0..100 {
            let t = 0.0137 * k as f64;
            let (a, b, c) = (p.point(t), p.point(t + l), p.point(t + 2.0 * l));
            assert!((a[0] - b[0]).abs() < 1e-12);
            assert!((a[1] - c[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn time_derivatives_match_finite_difference() {
        let p = sample(9);
        let h = 1e-5 * p.period;
        for k in 0..20 {
            let t = 0.061 * k as f64;
            let v = p.point(t);
            let (a, b) = (p.point(t + h), p.point(t - h));
            for (idx, didx) in [(0, 2), (1, 3)] {
                let fd = (a[idx] - b[idx]) / (2.0 * h);
                assert!((fd - v[didx]).abs() <= 1e-6 * v[didx].abs().max(1.0));
            }
        }
    }

    #[test]
    fn parameter_gradients_match_finite_difference() {
        let p = sample(11);
        let x0 = p.learnable();
        for k in 0..50 {
            let t = 0.027 * k as f64;
            let g = p.parameter_gradients(t);
            let j = (k * 7) % x0.len();
            let h = 1e-6;
            let eval = |s: f64| {
                let mut q = p.clone();
                let mut x = x0.clone();
                x[j] += s;
                q.set_learnable(&x);
                q.point(t)
            };
            let (a, b) = (eval(h), eval(-h));
            for (out, grad) in [(0, &g.mu), (1, &g.eta), (2, &g.dmu), (3, &g.deta)] {
                let fd = (a[out] - b[out]) / (2.0 * h);
                let err = (fd - grad[j]).abs();
                assert!(err <= 1e-6 * fd.abs().max(grad[j].abs()) + 1e-8, "t {t} param {j} out {out}: {fd} vs {}", grad[j]);
            }
        }
    }

    #[test]
    fn pinned_gradient_vanishes_at_origin() {
        let p = sample(2);
        let g = p.parameter_gradients(0.0);
        assert!(g.mu.iter().all(|v| v.abs() < 1e-14));
        assert!(g.eta.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn branches_are_disconnected() {
        let p = sample(4);
        let g = p.parameter_gradients(0.4);
        let half = p.n_learnable() / 2;
        assert!(g.eta[..half].iter().chain(&g.deta[..half]).all(|&v| v == 0.0));
        assert!(g.mu[half..].iter().chain(&g.dmu[half..]).all(|&v| v == 0.0));
        let mut q = p.clone();
        q.w3[0] += 1.0;
        q.pin();
        assert_eq!(p.point(0.4)[0], q.point(0.4)[0]);
    }

    #[test]
    fn learnable_round_trip_and_groups() {
        let p = sample(8);
        let mut q = AnsatzParams::zeros(6, 0.3, -0.2, 1.3).unwrap();
        q.set_learnable(&p.learnable());
        assert_eq!(p, q);
        let groups = p.groups();
        assert_eq!(groups.len(), 24);
        assert_eq!(groups[0], ParamGroup::W1);
        assert_eq!(groups[23], ParamGroup::Phi2);
        assert_eq!(groups[8], ParamGroup::W2);
    }

    #[test]
    fn odd_hidden_count_rejected() {
        assert!(AnsatzParams::zeros(5, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn pretrain_fits_constant_mu() {
        let target = TrigProtocol { mu0: 0.5, eta0: 0.0, lambda: 0.0, period: 1.0 };
        let grid = TimeGrid::new(1.0, 200).unwrap();
        let init = AnsatzParams::random(6, 0.5, 0.0, 1.0, 42).unwrap();
        let (p, report) = pretrain(&init, &target, &grid, 300).unwrap();
        assert!(report.max_error_mu < 1e-10, "{report:?}");
        assert_eq!(p.point(0.0)[0], 0.5);
    }

    #[test]
    fn pretrain_fits_t_gate_target() {
        let lambda = crate::control::select_lambda(0.0, 7.0 * PI / 8.0).unwrap();
        let target = TrigProtocol { mu0: 0.0, eta0: 0.0, lambda, period: 1.0 };
        let grid = TimeGrid::new(1.0, 1000).unwrap();
        let init = AnsatzParams::random(6, 0.0, 0.0, 1.0, 42).unwrap();
        let (p, report) = pretrain(&init, &target, &grid, 500).unwrap();
        assert!(report.max_error() < 1e-3, "{report:?}");
        assert!(p.point(0.0)[0].abs() < 1e-14 && p.point(0.0)[1].abs() < 1e-14);
    }

    #[test]
    fn checkpoint_json_layout() {
        let ck = Checkpoint {
            params: sample(1),
            metadata: CheckpointMeta { gate: "T".into(), fidelity: 0.9999, sweeps: 3 },
        };
        let v: serde_json::Value = serde_json::to_value(&ck).unwrap();
        for key in ["n_hidden", "W1", "W2", "W3", "W4", "B1", "B2", "B3", "B4", "phi1", "phi2", "mu0", "eta0", "L"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["metadata"]["gate"], "T");
        let back: Checkpoint = serde_json::from_value(v).unwrap();
        assert_eq!(back, ck);
    }
}
