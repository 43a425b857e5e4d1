//! Per-slice gradient ascent of the average gate fidelity over the ansatz parameters.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ansatz::{pretrain, AnsatzParams, ParamGroup, PretrainReport};
use crate::control::{geometric_theta, omega_point, omega_point_jacobian, TimeGrid, TrigProtocol};
use crate::error::{Error, Result};
use crate::fidelity::{nearest_theta_branch, GateKind, GateSpec};
use crate::linalg::{c, dmatrix_to_mat2, su2_step, su2_step_with_derivative, Mat2, C64};
use crate::protocol::trig_protocol_for;

/// Learning rate per parameter group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningRates {
    pub w1: f64,
    pub b1: f64,
    pub w2: f64,
    pub phi1: f64,
    pub w3: f64,
    pub b3: f64,
    pub w4: f64,
    pub phi2: f64,
}

impl LearningRates {
    /// `output` for W2 and W4, `other` for every other group.
    pub fn split(output: f64, other: f64) -> Self {
        Self { w1: other, b1: other, w2: output, phi1: other, w3: other, b3: other, w4: output, phi2: other }
    }

    pub fn get(&self, group: ParamGroup) -> f64 {
        match group {
            ParamGroup::W1 => self.w1,
            ParamGroup::B1 => self.b1,
            ParamGroup::W2 => self.w2,
            ParamGroup::Phi1 => self.phi1,
            ParamGroup::W3 => self.w3,
            ParamGroup::B3 => self.b3,
            ParamGroup::W4 => self.w4,
            ParamGroup::Phi2 => self.phi2,
        }
    }

    fn validate(&self) -> Result<()> {
        for g in ParamGroup::ALL {
            let v = self.get(g);
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("learning rate for {g:?} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// A block of sweeps run with fixed learning rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainPhase {
    pub rates: LearningRates,
    pub sweeps: usize,
}

/// What each slice update ascends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceObjective {
    /// The slice's own contribution to ∂F(L)/∂p.
    FinalState,
    /// ∂F(tᵢ)/∂p with M(tᵢ) = U_G† U(tᵢ, 0) against the full target.
    Intermediate,
}

/// How propagators are refreshed within a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Propagation {
    /// Single forward pass using parameters as they are updated.
    Greedy,
    /// Recompute every propagator from the current parameters before each slice update.
    Exact,
}

/// Training configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Number of grid points n on [0, L]; the pulse has n − 1 slices.
    pub n_slices: usize,
    pub n_hidden: usize,
    /// Gate duration L in µs.
    pub period: f64,
    pub phase1: TrainPhase,
    pub phase2: TrainPhase,
    pub target_fidelity: f64,
    pub seed: u64,
    pub objective: SliceObjective,
    pub propagation: Propagation,
    pub pretrain_iters: usize,
    /// Trigonometric seed amplitude; chosen by `select_lambda` when absent.
    pub lambda: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_slices: 1000,
            n_hidden: 6,
            period: 1.0,
            phase1: TrainPhase { rates: LearningRates::split(1e-4, 1e-5), sweeps: 1240 },
            phase2: TrainPhase { rates: LearningRates::split(1e-5, 1e-6), sweeps: 1890 },
            target_fidelity: 0.9999,
            seed: 42,
            objective: SliceObjective::FinalState,
            propagation: Propagation::Greedy,
            pretrain_iters: 500,
            lambda: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_slices < 2 {
            return Err(Error::InvalidParams("n_slices must be at least 2".into()));
        }
        self.phase1.rates.validate()?;
        self.phase2.rates.validate()?;
        TimeGrid::new(self.period, self.n_slices)?;
        Ok(())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.period, self.n_slices)
    }
}

/// Per-sweep record of a training run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub fidelity: Vec<f64>,
    pub theta: Vec<f64>,
    /// Seconds since the start of training; excluded from the CSV export.
    pub elapsed_s: Vec<f64>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.fidelity.len()
    }
    pub fn is_empty(&self) -> bool {
        self.fidelity.is_empty()
    }

    /// CSV with columns sweep, F, theta.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["sweep", "F", "theta"])?;
        for (k, (f, th)) in self.fidelity.iter().zip(&self.theta).enumerate() {
            w.write_record([(k + 1).to_string(), format!("{f:.15e}"), format!("{th:.15e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Average fidelity of the driven 2×2 block against its target, for D = 2 or the controlled
/// D = 4 structure diag(I, U).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityModel {
    target_dag: Mat2,
    identity_dim: f64,
    norm: f64,
}

impl FidelityModel {
    pub fn for_gate(gate: &GateSpec) -> Result<Self> {
        let block = gate
            .block()
            .ok_or_else(|| Error::InvalidParams(format!("gate {} cannot be trained directly", gate.name)))?;
        let identity_dim = match gate.kind {
            GateKind::Single => 0.0,
            GateKind::Controlled => 2.0,
            GateKind::Register => unreachable!("register gates carry no angles"),
        };
        let d = 2.0 + identity_dim;
        Ok(Self { target_dag: dmatrix_to_mat2(&block).adjoint(), identity_dim, norm: 1.0 / (d * (d + 1.0)) })
    }

    pub fn fidelity(&self, u: &Mat2) -> f64 {
        let m = self.target_dag * u;
        let tr_mm = self.identity_dim + (m * m.adjoint()).trace().re;
        let tr = m.trace() + self.identity_dim;
        (tr_mm + tr.norm_sqr()) * self.norm
    }

    /// Linear functional dU ↦ dF for the product M = G† · left · U · right.
    fn differential(&self, left: &Mat2, u: &Mat2, right: &Mat2) -> Differential {
        let l = self.target_dag * left;
        let m = l * u * right;
        let tr = m.trace() + self.identity_dim;
        // Tr(dM M†) = Tr(dU R M† L), Tr(dM) = Tr(dU R L).
        Differential { x: right * m.adjoint() * l, y: right * l, tr_conj: tr.conj(), norm: self.norm }
    }
}

struct Differential {
    x: Mat2,
    y: Mat2,
    tr_conj: C64,
    norm: f64,
}

impl Differential {
    fn apply(&self, du: &Mat2) -> f64 {
        let a = (du * self.x).trace().re;
        let b = (self.tr_conj * (du * self.y).trace()).re;
        2.0 * (a + b) * self.norm
    }
}

/// Slice propagator at the current parameters with its derivatives for every learnable entry.
struct SliceJet {
    u: Mat2,
    du: Vec<Mat2>,
}

fn slice_step(params: &AnsatzParams, t: f64, dt: f64) -> Mat2 {
    let p = params.point(t);
    su2_step(omega_point(p[0], p[1], p[2], p[3]), dt)
}

fn slice_jet(params: &AnsatzParams, t: f64, dt: f64) -> SliceJet {
    let (jm, je) = params.jets(t);
    let (mu, eta, dmu, deta) = (jm.value, je.value, jm.rate, je.rate);
    let omega = omega_point(mu, eta, dmu, deta);
    let jac = omega_point_jacobian(mu, eta, dmu, deta);
    let (u, du_domega) = su2_step_with_derivative(omega, dt);
    let half = jm.d_value.len();
    let mut du = Vec::with_capacity(2 * half);
    for (branch, jet) in [(0usize, &jm), (1, &je)] {
        // μ feeds columns 0 and 2 of the Jacobian, η columns 1 and 3.
        let (cv, cr) = if branch == 0 { (0, 2) } else { (1, 3) };
        for j in 0..half {
            let mut d = Mat2::zeros();
            for (axis, dk) in du_domega.iter().enumerate() {
                let w = jac[axis][cv] * jet.d_value[j] + jac[axis][cr] * jet.d_rate[j];
                if w != 0.0 {
                    d += dk * c(w, 0.0);
                }
            }
            du.push(d);
        }
    }
    SliceJet { u, du }
}

fn step_unitaries(params: &AnsatzParams, grid: &TimeGrid) -> Vec<Mat2> {
    (0..grid.slices()).map(|k| slice_step(params, grid.midpoint(k), grid.dt())).collect()
}

/// suffix[k] = U_{n−2} ⋯ U_{k+1} for slice steps U_0 … U_{n−2}.
fn suffix_products(steps: &[Mat2]) -> Vec<Mat2> {
    let mut out = vec![Mat2::identity(); steps.len()];
    for k in (0..steps.len().saturating_sub(1)).rev() {
        out[k] = out[k + 1] * steps[k + 1];
    }
    out
}

/// U(L, 0) in the 2×2 block.
pub fn final_unitary(params: &AnsatzParams, grid: &TimeGrid) -> Mat2 {
    step_unitaries(params, grid).into_iter().fold(Mat2::identity(), |acc, u| u * acc)
}

/// Final-state fidelity and θ of the ansatz on `grid`.
pub fn evaluate(params: &AnsatzParams, model: &FidelityModel, grid: &TimeGrid) -> Result<(f64, f64)> {
    let f = model.fidelity(&final_unitary(params, grid));
    let theta = geometric_theta(&params.forward(&grid.nodes())?);
    Ok((f, theta))
}

/// Exact gradient used by the slice update ending at node i ∈ 1..n−1 (zero for i = 0).
///
/// `Intermediate` returns ∇F(tᵢ); `FinalState` returns the part of ∇F(L) flowing through
/// slice i − 1.
pub fn slice_fidelity_gradient(
    params: &AnsatzParams,
    model: &FidelityModel,
    grid: &TimeGrid,
    i: usize,
    objective: SliceObjective,
) -> Result<Vec<f64>> {
    if i >= grid.len() {
        return Err(Error::InvalidParams(format!("node index {i} outside grid of {}", grid.len())));
    }
    let n = params.n_learnable();
    if i == 0 {
        return Ok(vec![0.0; n]);
    }
    let dt = grid.dt();
    let steps = step_unitaries(params, grid);
    match objective {
        SliceObjective::FinalState => {
            let k = i - 1;
            let suffix = suffix_products(&steps);
            let prefix = steps[..k].iter().fold(Mat2::identity(), |acc, u| u * acc);
            let jet = slice_jet(params, grid.midpoint(k), dt);
            let diff = model.differential(&suffix[k], &jet.u, &prefix);
            Ok(jet.du.iter().map(|d| diff.apply(d)).collect())
        }
        SliceObjective::Intermediate => {
            let mut total = vec![0.0; n];
            let mut prefix = Mat2::identity();
            let u_i = steps[..i].iter().fold(Mat2::identity(), |acc, u| u * acc);
            let mut suffix = u_i;
            for (k, step) in steps[..i].iter().enumerate() {
                // suffix = U_{i−1} ⋯ U_{k+1}
                suffix *= step.adjoint();
                let jet = slice_jet(params, grid.midpoint(k), dt);
                let diff = model.differential(&suffix, &jet.u, &prefix);
                for (g, d) in total.iter_mut().zip(&jet.du) {
                    *g += diff.apply(d);
                }
                prefix = step * prefix;
            }
            Ok(total)
        }
    }
}

/// Result of a single sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub params: AnsatzParams,
    pub fidelity: f64,
    pub theta: f64,
}

fn apply_update(params: &mut AnsatzParams, x: &mut [f64], rates: &[f64], grad: &[f64]) {
    let mut changed = false;
    for ((xi, &r), &g) in x.iter_mut().zip(rates).zip(grad) {
        if r != 0.0 && g != 0.0 {
            *xi += r * g;
            changed = true;
        }
    }
    if changed {
        params.set_learnable(x);
    }
}

/// One pass over the slices in time order, updating the parameters at every slice.
pub fn sweep(
    params: &AnsatzParams,
    model: &FidelityModel,
    grid: &TimeGrid,
    rates: &LearningRates,
    objective: SliceObjective,
    propagation: Propagation,
) -> Result<SweepOutcome> {
    let mut p = params.clone();
    p.pin();
    let rates: Vec<f64> = p.groups().into_iter().map(|g| rates.get(g)).collect();
    let mut x = p.learnable();
    let dt = grid.dt();
    match propagation {
        Propagation::Exact => {
            for i in 1..grid.len() {
                let g = slice_fidelity_gradient(&p, model, grid, i, objective)?;
                apply_update(&mut p, &mut x, &rates, &g);
            }
        }
        Propagation::Greedy => match objective {
            SliceObjective::FinalState => {
                let suffix = suffix_products(&step_unitaries(&p, grid));
                let mut prefix = Mat2::identity();
                for (k, after) in suffix.iter().enumerate() {
                    let t = grid.midpoint(k);
                    let jet = slice_jet(&p, t, dt);
                    let diff = model.differential(after, &jet.u, &prefix);
                    let g: Vec<f64> = jet.du.iter().map(|d| diff.apply(d)).collect();
                    apply_update(&mut p, &mut x, &rates, &g);
                    prefix = slice_step(&p, t, dt) * prefix;
                }
            }
            SliceObjective::Intermediate => {
                let mut prefix = Mat2::identity();
                let mut acc = vec![Mat2::zeros(); x.len()];
                for k in 0..grid.slices() {
                    let jet = slice_jet(&p, grid.midpoint(k), dt);
                    let next = jet.u * prefix;
                    let next_dag = next.adjoint();
                    for (a, d) in acc.iter_mut().zip(&jet.du) {
                        *a += next_dag * d * prefix;
                    }
                    prefix = next;
                    // dU(t_{k+1}, 0) = U(t_{k+1}, 0)·acc
                    let diff = model.differential(&Mat2::identity(), &prefix, &Mat2::identity());
                    let g: Vec<f64> = acc.iter().map(|a| diff.apply(&(prefix * a))).collect();
                    apply_update(&mut p, &mut x, &rates, &g);
                }
            }
        },
    }
    let (fidelity, theta) = evaluate(&p, model, grid)?;
    Ok(SweepOutcome { params: p, fidelity, theta })
}

/// Fidelity below which a sweep is declared divergent.
pub const DIVERGENCE_FLOOR: f64 = 0.01;

/// Everything produced by a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: AnsatzParams,
    pub history: TrainHistory,
    pub pretrain: PretrainReport,
    pub seed_protocol: TrigProtocol,
    pub initial_fidelity: f64,
    pub initial_theta: f64,
    pub fidelity: f64,
    pub theta: f64,
    /// Ideal θ branch (θ_ideal + kπ) nearest the achieved θ.
    pub theta_branch: f64,
    pub theta_error: f64,
}

impl TrainOutcome {
    pub fn sweeps(&self) -> usize {
        self.history.len()
    }
}

/// Pre-trains on the trigonometric seed and then runs both sweep phases, stopping once the
/// target fidelity is reached.
pub fn train(gate: &GateSpec, config: &TrainConfig) -> Result<TrainOutcome> {
    train_with_progress(gate, config, |_, _, _| {})
}

/// `train` with a callback receiving (sweep, F, θ) after every sweep.
pub fn train_with_progress<F: FnMut(usize, f64, f64)>(
    gate: &GateSpec,
    config: &TrainConfig,
    mut progress: F,
) -> Result<TrainOutcome> {
    config.validate()?;
    let model = FidelityModel::for_gate(gate)?;
    let angles = gate.angles.expect("checked by FidelityModel");
    let grid = config.grid()?;
    let seed_protocol = match config.lambda {
        Some(lambda) => TrigProtocol { mu0: angles.mu0, eta0: angles.eta0, lambda, period: config.period },
        None => trig_protocol_for(gate, config.period)?,
    };
    let init = AnsatzParams::random(config.n_hidden, angles.mu0, angles.eta0, config.period, config.seed)?;
    let (mut params, report) = pretrain(&init, &seed_protocol, &grid, config.pretrain_iters)?;
    let (initial_fidelity, initial_theta) = evaluate(&params, &model, &grid)?;
    let (mut fidelity, mut theta) = (initial_fidelity, initial_theta);
    let mut history = TrainHistory::default();
    let start = Instant::now();
    'phases: for phase in [config.phase1, config.phase2] {
        for _ in 0..phase.sweeps {
            if fidelity >= config.target_fidelity {
                break 'phases;
            }
            let out = sweep(&params, &model, &grid, &phase.rates, config.objective, config.propagation)?;
            params = out.params;
            fidelity = out.fidelity;
            theta = out.theta;
            history.fidelity.push(fidelity);
            history.theta.push(theta);
            history.elapsed_s.push(start.elapsed().as_secs_f64());
            progress(history.len(), fidelity, theta);
            if fidelity.is_nan() || fidelity < DIVERGENCE_FLOOR {
                return Err(Error::DivergenceDetected { fidelity, sweep: history.len() });
            }
        }
    }
    let (theta_error, theta_branch) = nearest_theta_branch(theta, angles.theta);
    Ok(TrainOutcome {
        params,
        history,
        pretrain: report,
        seed_protocol,
        initial_fidelity,
        initial_theta,
        fidelity,
        theta,
        theta_branch,
        theta_error,
    })
}
