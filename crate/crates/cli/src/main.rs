//! `catgate` command-line driver.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "catgate", version, about = "Geometric gates on Kerr-cat qubits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pre-train and train the pulse ansatz for a gate.
    Train(TrainArgs),
    /// Tabulate the closed-form θ(μ₀, Λ) of the trigonometric protocol.
    ThetaScan(ThetaScanArgs),
    /// Robustness sweeps of a trained (or trigonometric) pulse.
    #[command(subcommand)]
    Noise(NoiseCommand),
    /// Bloch trajectories of the invariant eigenstates.
    Bloch(BlochArgs),
    /// Toffoli fidelities from composed gates.
    Toffoli(ToffoliArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Objective {
    FinalState,
    Intermediate,
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    #[arg(long)]
    gate: String,
    #[arg(long, default_value_t = 6)]
    hidden: usize,
    /// Grid points on [0, L].
    #[arg(long, default_value_t = 1000)]
    slices: usize,
    /// Total sweep budget, spent on phase 1 first (default: 1240 + 1890).
    #[arg(long)]
    sweeps: Option<usize>,
    #[arg(long, default_value_t = 1e-4)]
    lr_output1: f64,
    #[arg(long, default_value_t = 1e-5)]
    lr_other1: f64,
    #[arg(long, default_value_t = 1e-5)]
    lr_output2: f64,
    #[arg(long, default_value_t = 1e-6)]
    lr_other2: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 0.9999)]
    target: f64,
    #[arg(long, value_enum, default_value_t = Objective::FinalState)]
    objective: Objective,
    /// Recompute all propagators after every slice update.
    #[arg(long)]
    exact: bool,
    /// Seed amplitude of the trigonometric pre-training target.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 500)]
    pretrain_iters: usize,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct ThetaScanArgs {
    /// Comma-separated μ₀ values.
    #[arg(long, value_delimiter = ',', default_value = "0,1.5707963267948966,3.141592653589793")]
    mu0: Vec<f64>,
    /// Λ grid as start:stop:count.
    #[arg(long, default_value = "0.1:30:300", allow_hyphen_values = true)]
    range: String,
    #[arg(long, default_value = "theta_scan.csv")]
    out: PathBuf,
}

/// Pulse selection shared by the noise and Bloch commands.
#[derive(Debug, Args, Serialize)]
struct PulseArgs {
    /// Trained checkpoint; the gate is read from its metadata.
    #[arg(long, required_unless_present = "gate")]
    checkpoint: Option<PathBuf>,
    /// Use the trigonometric protocol for this gate instead of a checkpoint.
    #[arg(long, conflicts_with = "checkpoint")]
    gate: Option<String>,
    #[arg(long, default_value_t = 1000)]
    slices: usize,
}

#[derive(Debug, Subcommand)]
enum NoiseCommand {
    /// Multiplicative error (1 + δ) on one field axis.
    Systematic(SystematicArgs),
    /// Additive white Gaussian noise Monte Carlo.
    Awgn(AwgnArgs),
    /// Photon loss and dephasing in the full Fock space.
    Lindblad(LindbladArgs),
}

#[derive(Debug, Args, Serialize)]
struct SystematicArgs {
    #[command(flatten)]
    pulse: PulseArgs,
    #[arg(long, default_value = "x")]
    axis: String,
    /// δ grid as start:stop:count.
    #[arg(long, default_value = "-0.1:0.1:41", allow_hyphen_values = true)]
    range: String,
    #[arg(long, default_value = "systematic.csv")]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct AwgnArgs {
    #[command(flatten)]
    pulse: PulseArgs,
    #[arg(long, default_value_t = 10.0)]
    snr: f64,
    #[arg(long, default_value_t = 40)]
    pmax: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "awgn.csv")]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct LindbladArgs {
    #[command(flatten)]
    pulse: PulseArgs,
    /// Photon-loss rate (rad/µs).
    #[arg(long, default_value_t = 0.05)]
    gamma: f64,
    /// Dephasing rate (rad/µs).
    #[arg(long, default_value_t = 0.05)]
    gamma_phi: f64,
    /// Input state amplitudes on (C₊, C₋) as "re,im,re,im".
    #[arg(long, default_value = "1,0,0,0")]
    input: String,
    #[arg(long, default_value_t = 10)]
    cutoff: usize,
    #[arg(long, default_value = "lindblad.json")]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct BlochArgs {
    #[command(flatten)]
    pulse: PulseArgs,
    #[arg(long, default_value = "bloch.csv")]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct ToffoliArgs {
    /// Trained T checkpoint.
    #[arg(long)]
    t: Option<PathBuf>,
    /// Trained T† checkpoint.
    #[arg(long)]
    tdag: Option<PathBuf>,
    /// Trained H checkpoint.
    #[arg(long)]
    h: Option<PathBuf>,
    /// Trained CNOTmod checkpoint.
    #[arg(long)]
    cnot: Option<PathBuf>,
    /// Circuit description file evaluated in addition to the standard protocols.
    #[arg(long)]
    circuit: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    slices: usize,
    #[arg(long, default_value = "toffoli.json")]
    out: PathBuf,
}

fn configure_threads() -> Result<(), String> {
    if let Ok(v) = std::env::var("CATGATE_THREADS") {
        let n: usize = v.parse().map_err(|_| format!("CATGATE_THREADS must be a positive integer, got '{v}'"))?;
        if n == 0 {
            return Err("CATGATE_THREADS must be a positive integer".into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let result = match cli.command {
        Command::Train(a) => commands::train(&a),
        Command::ThetaScan(a) => commands::theta_scan(&a),
        Command::Noise(NoiseCommand::Systematic(a)) => commands::systematic(&a),
        Command::Noise(NoiseCommand::Awgn(a)) => commands::awgn(&a),
        Command::Noise(NoiseCommand::Lindblad(a)) => commands::lindblad(&a),
        Command::Bloch(a) => commands::bloch(&a),
        Command::Toffoli(a) => commands::toffoli(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
