//! Robustness of realized gates: multiplicative field errors, additive white Gaussian noise,
//! and open-system decoherence.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cat::{cat_states, PhysicalParams};
use crate::control::{drive_from_omega, DriveFields, TimeGrid};
use crate::error::{Error, Result};
use crate::fidelity::{average_fidelity, state_fidelity, GateKind, GateSpec};
use crate::linalg::{mat2_to_dmatrix, C64};
use crate::propagator::{evolve_fock, evolve_subspace_final, lindblad_evolve, DensityMatrix};
use crate::protocol::lift_block;

/// Field component Ω_x, Ω_y or Ω_z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

impl FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            other => Err(Error::InvalidParams(format!("axis must be x, y or z, got '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseMetadata {
    pub gate: String,
    pub seed: Option<u64>,
    /// Monte-Carlo repetitions behind the last point (1 for deterministic sweeps).
    pub reps: usize,
}

/// Fidelity series over a swept parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSweepResult {
    pub label: String,
    pub points: Vec<f64>,
    pub fidelities: Vec<f64>,
    /// log₁₀ |mean F − ideal F| per point (Monte-Carlo runs only).
    pub log10_delta: Option<Vec<f64>>,
    /// Standard error of the mean per point (Monte-Carlo runs only).
    pub std_error: Option<Vec<f64>>,
    pub metadata: NoiseMetadata,
}

impl NoiseSweepResult {
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn min_fidelity(&self) -> f64 {
        self.fidelities.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Columns (label, fidelity), plus log10_deltaF and std_error when present.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![self.label.clone(), "fidelity".into()];
        if self.log10_delta.is_some() {
            header.push("log10_deltaF".into());
        }
        if self.std_error.is_some() {
            header.push("std_error".into());
        }
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row = vec![format!("{}", self.points[i]), format!("{:.15e}", self.fidelities[i])];
            if let Some(d) = &self.log10_delta {
                row.push(format!("{:.6}", d[i]));
            }
            if let Some(s) = &self.std_error {
                row.push(format!("{:.6e}", s[i]));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn block_fidelity(gate: &GateSpec, fields: &DriveFields, grid: &TimeGrid) -> Result<f64> {
    let u = lift_block(gate, &mat2_to_dmatrix(&evolve_subspace_final(fields, grid)?))?;
    average_fidelity(&gate.matrix, &u, None)
}

/// Final-state fidelity with Ω_axis replaced by (1 + δ)Ω_axis, for each δ.
pub fn systematic_sweep(
    fields: &DriveFields,
    gate: &GateSpec,
    grid: &TimeGrid,
    axis: Axis,
    deltas: &[f64],
) -> Result<NoiseSweepResult> {
    let fidelities = deltas
        .iter()
        .map(|&d| block_fidelity(gate, &fields.scaled_axis(axis.index(), d), grid))
        .collect::<Result<Vec<_>>>()?;
    Ok(NoiseSweepResult {
        label: format!("delta_{axis}"),
        points: deltas.to_vec(),
        fidelities,
        log10_delta: None,
        std_error: None,
        metadata: NoiseMetadata { gate: gate.name.clone(), seed: None, reps: 1 },
    })
}

/// Adds i.i.d. Gaussian noise of variance mean(Ω_k²)/10^(SNR/10) to every sample of each axis.
pub fn awgn_apply(fields: &DriveFields, snr_db: f64, seed: u64) -> Result<DriveFields> {
    if !snr_db.is_finite() {
        return Err(Error::InvalidParams(format!("SNR must be finite, got {snr_db}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ratio = 10f64.powf(-snr_db / 10.0);
    let mut out = fields.clone();
    out.drive = None;
    for axis in &mut out.omega {
        if axis.is_empty() {
            continue;
        }
        let power = axis.iter().map(|v| v * v).sum::<f64>() / axis.len() as f64;
        let sigma = (power * ratio).sqrt();
        if sigma == 0.0 {
            continue;
        }
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParams(e.to_string()))?;
        for v in axis.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(out)
}

/// Runs per batch index p.
pub const RUNS_PER_P: usize = 50;

/// Monte-Carlo AWGN result with the convergence diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct AwgnReport {
    /// Points are R = 50p, fidelities the running mean over the first R runs.
    pub series: NoiseSweepResult,
    /// Noiseless fidelity of the same pulse.
    pub ideal: f64,
    /// First p after which the running mean moved by < 10⁻⁵ across 10 consecutive p.
    pub converged_p: Option<usize>,
    /// |mean − ideal| at `converged_p`, or at p_max when not converged.
    pub delta: f64,
}

/// Running mean and deviation for R = 50p noisy runs, p = 1..=p_max; run r uses seed + r.
pub fn awgn_monte_carlo(
    fields: &DriveFields,
    gate: &GateSpec,
    grid: &TimeGrid,
    snr_db: f64,
    p_max: usize,
    seed: u64,
) -> Result<AwgnReport> {
    if p_max == 0 {
        return Err(Error::InvalidParams("p_max must be at least 1".into()));
    }
    let ideal = block_fidelity(gate, fields, grid)?;
    let total = RUNS_PER_P * p_max;
    let runs = (0..total)
        .into_par_iter()
        .map(|r| block_fidelity(gate, &awgn_apply(fields, snr_db, seed.wrapping_add(r as u64))?, grid))
        .collect::<Result<Vec<f64>>>()?;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    let mut points = Vec::with_capacity(p_max);
    let mut means = Vec::with_capacity(p_max);
    let mut errs = Vec::with_capacity(p_max);
    let mut logs = Vec::with_capacity(p_max);
    for p in 1..=p_max {
        for &f in &runs[(p - 1) * RUNS_PER_P..p * RUNS_PER_P] {
            sum += f;
            sum_sq += f * f;
        }
        let r = (p * RUNS_PER_P) as f64;
        let mean = sum / r;
        let var = ((sum_sq - r * mean * mean) / (r - 1.0)).max(0.0);
        points.push(r);
        means.push(mean);
        errs.push((var / r).sqrt());
        logs.push((mean - ideal).abs().log10());
    }
    let converged_p = converged_index(&means, 1e-5, 10).map(|i| i + 1);
    let at = converged_p.unwrap_or(p_max) - 1;
    Ok(AwgnReport {
        delta: (means[at] - ideal).abs(),
        ideal,
        converged_p,
        series: NoiseSweepResult {
            label: "R".into(),
            points,
            fidelities: means,
            log10_delta: Some(logs),
            std_error: Some(errs),
            metadata: NoiseMetadata { gate: gate.name.clone(), seed: Some(seed), reps: total },
        },
    })
}

/// First index i such that |x_j − x_i| < tol for the `window` entries following i.
fn converged_index(x: &[f64], tol: f64, window: usize) -> Option<usize> {
    (0..x.len().saturating_sub(window)).find(|&i| x[i + 1..=i + window].iter().all(|v| (v - x[i]).abs() < tol))
}

fn single_mode_target(gate: &GateSpec) -> Result<nalgebra::DMatrix<C64>> {
    match gate.kind {
        GateKind::Single => Ok(gate.matrix.clone()),
        _ => Err(Error::InvalidParams(format!("gate {} does not act on a single mode", gate.name))),
    }
}

fn with_drive(fields: &DriveFields, params: &PhysicalParams) -> DriveFields {
    if fields.drive.is_some() {
        fields.clone()
    } else {
        drive_from_omega(fields, params)
    }
}

fn input_vector(input: [C64; 2]) -> DVector<C64> {
    DVector::from_vec(input.to_vec())
}

/// State fidelity of the open-system evolution from the cat state with subspace amplitudes
/// `input`, against the ideal gate applied to that state.
pub fn decoherence_run(
    params: &PhysicalParams,
    fields: &DriveFields,
    gate: &GateSpec,
    grid: &TimeGrid,
    gamma: f64,
    gamma_phi: f64,
    input: [C64; 2],
) -> Result<f64> {
    let target = single_mode_target(gate)?;
    let proj = cat_states(params)?;
    let rho0 = DensityMatrix::from_pure(&proj.state(input));
    let rho = lindblad_evolve(params, &with_drive(fields, params), &rho0, gamma, gamma_phi, grid)?;
    state_fidelity(&rho, &target, Some(&input_vector(input)), Some(&proj.basis_matrix()))
}

/// Closed-system counterpart of `decoherence_run` using the unitary Fock propagator.
pub fn closed_system_fidelity(
    params: &PhysicalParams,
    fields: &DriveFields,
    gate: &GateSpec,
    grid: &TimeGrid,
    input: [C64; 2],
) -> Result<f64> {
    let target = single_mode_target(gate)?;
    let proj = cat_states(params)?;
    let psi = proj.state(input);
    let u = evolve_fock(params, &with_drive(fields, params), grid)?;
    let out = u.final_unitary() * &psi.coeffs;
    let rho = DensityMatrix::new(&out * out.adjoint())?;
    state_fidelity(&rho, &target, Some(&input_vector(input)), Some(&proj.basis_matrix()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fidelity::named_gate;
    use crate::linalg::c;
    use crate::protocol::trig_protocol_for;

    fn trig_t(grid: &TimeGrid) -> (GateSpec, DriveFields) {
        let g = named_gate("T").unwrap();
        let f = trig_protocol_for(&g, 1.0).unwrap().midpoint_fields(grid);
        (g, f)
    }

    #[test]
    fn zero_delta_is_baseline_on_every_axis() {
        let grid = TimeGrid::new(1.0, 200).unwrap();
        let (g, f) = trig_t(&grid);
        let base = block_fidelity(&g, &f, &grid).unwrap();
        for axis in Axis::ALL {
            let r = systematic_sweep(&f, &g, &grid, axis, &[0.0]).unwrap();
            assert_eq!(r.fidelities[0], base);
        }
    }

    #[test]
    fn huge_snr_leaves_fields_unchanged() {
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let (_, f) = trig_t(&grid);
        let noisy = awgn_apply(&f, 300.0, 1).unwrap();
        for k in 0..3 {
            for (a, b) in f.omega[k].iter().zip(&noisy.omega[k]) {
                assert!((a - b).abs() < 1e-10);
            }
        }
        assert!(awgn_apply(&f, f64::INFINITY, 1).is_err());
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let (_, f) = trig_t(&grid);
        assert_eq!(awgn_apply(&f, 10.0, 9).unwrap(), awgn_apply(&f, 10.0, 9).unwrap());
        assert_ne!(awgn_apply(&f, 10.0, 9).unwrap(), awgn_apply(&f, 10.0, 10).unwrap());
    }

    #[test]
    fn noise_power_matches_snr() {
        let n = 100_000;
        let t: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let x: Vec<f64> = t.iter().map(|&s| (0.001 * s).sin() * 3.0).collect();
        let f = DriveFields::new(t, [x.clone(), x.clone(), x.clone()]).unwrap();
        let noisy = awgn_apply(&f, 10.0, 4).unwrap();
        let p_sig = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
        for k in 0..3 {
            let p_noise = noisy.omega[k].iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64;
            assert!((p_noise / p_sig / 0.1 - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn monte_carlo_at_huge_snr_has_no_deviation() {
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let (g, f) = trig_t(&grid);
        let r = awgn_monte_carlo(&f, &g, &grid, 300.0, 2, 0).unwrap();
        assert_eq!(r.series.len(), 2);
        assert_eq!(r.series.points, vec![50.0, 100.0]);
        assert!(r.delta < 1e-8);
    }

    #[test]
    fn convergence_window() {
        let x = [1.0, 0.5, 0.4, 0.4, 0.4, 0.4];
        assert_eq!(converged_index(&x, 1e-5, 3), Some(2));
        assert_eq!(converged_index(&x, 1e-5, 5), None);
    }

    #[test]
    fn closed_lindblad_matches_fock_evolution() {
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let (g, f) = trig_t(&grid);
        let params = PhysicalParams::default();
        let input = [c(1.0, 0.0), c(0.0, 0.0)];
        let open = decoherence_run(&params, &f, &g, &grid, 0.0, 0.0, input).unwrap();
        let closed = closed_system_fidelity(&params, &f, &g, &grid, input).unwrap();
        assert!((open - closed).abs() < 1e-6, "{open} vs {closed}");
        let cnot = named_gate("CNOTmod").unwrap();
        assert!(decoherence_run(&params, &f, &cnot, &grid, 0.0, 0.0, input).is_err());
    }

    #[test]
    fn more_decay_lowers_fidelity() {
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let (g, f) = trig_t(&grid);
        let params = PhysicalParams::default();
        let input = [c(1.0, 0.0), c(0.0, 0.0)];
        let fs: Vec<f64> = [0.025, 0.05, 0.1]
            .iter()
            .map(|&gm| decoherence_run(&params, &f, &g, &grid, gm, gm, input).unwrap())
            .collect();
        assert!(fs[0] > fs[1] && fs[1] > fs[2], "{fs:?}");
    }

    #[test]
    fn csv_columns() {
        let r = NoiseSweepResult {
            label: "R".into(),
            points: vec![50.0],
            fidelities: vec![0.99],
            log10_delta: Some(vec![-3.0]),
            std_error: Some(vec![1e-4]),
            metadata: NoiseMetadata { gate: "T".into(), seed: Some(1), reps: 50 },
        };
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("R,fidelity,log10_deltaF,std_error\n50,"));
    }
}
