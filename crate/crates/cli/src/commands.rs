use std::collections::HashMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use catgate::ansatz::{AnsatzParams, Checkpoint, CheckpointMeta};
use catgate::cat::PhysicalParams;
use catgate::circuits::{circuit_average_fidelity, compose, load_circuit, toffoli_circuit};
use catgate::control::{bloch_trajectories, drive_from_omega, omega_from_path, write_pulse_csv, DriveFields, TimeGrid};
use catgate::fidelity::{named_gate, GateKind, GateSpec};
use catgate::fresnel::theta_fresnel;
use catgate::linalg::{c, C64};
use catgate::noise::{awgn_monte_carlo, decoherence_run, systematic_sweep, Axis};
use catgate::protocol::{trig_protocol_for, PulseSource};
use catgate::trainer::{train_with_progress, LearningRates, Propagation, SliceObjective, TrainConfig, TrainPhase};
use catgate::{Error, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::{AwgnArgs, BlochArgs, LindbladArgs, Objective, PulseArgs, SystematicArgs, ThetaScanArgs, ToffoliArgs, TrainArgs};

/// Inclusive linear grid from "start:stop:count".
pub(crate) fn parse_range(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidParams(format!("range must be start:stop:count, got '{spec}'"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
}

fn config_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.config.json"))
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn write_config(out: &Path, command: &str, args: &impl Serialize, metadata: Value) -> Result<()> {
    write_config_at(&config_path(out), command, args, metadata)
}

fn write_config_at(path: &Path, command: &str, args: &impl Serialize, metadata: Value) -> Result<()> {
    write_json(path, &json!({ "command": command, "args": args, "metadata": metadata }))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    ensure_parent(path)?;
    Ok(BufWriter::new(File::create(path)?))
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let gate = named_gate(&args.gate)?;
    let mut cfg = TrainConfig {
        n_slices: args.slices,
        n_hidden: args.hidden,
        phase1: TrainPhase { rates: LearningRates::split(args.lr_output1, args.lr_other1), sweeps: 1240 },
        phase2: TrainPhase { rates: LearningRates::split(args.lr_output2, args.lr_other2), sweeps: 1890 },
        target_fidelity: args.target,
        seed: args.seed,
        objective: match args.objective {
            Objective::FinalState => SliceObjective::FinalState,
            Objective::Intermediate => SliceObjective::Intermediate,
        },
        propagation: if args.exact { Propagation::Exact } else { Propagation::Greedy },
        pretrain_iters: args.pretrain_iters,
        lambda: args.lambda,
        ..TrainConfig::default()
    };
    if let Some(total) = args.sweeps {
        cfg.phase1.sweeps = total.min(cfg.phase1.sweeps);
        cfg.phase2.sweeps = total - cfg.phase1.sweeps;
    }
    let out = train_with_progress(&gate, &cfg, |k, f, th| {
        if k % 100 == 0 {
            eprintln!("sweep {k}: F = {f:.8}, theta = {th:.6}");
        }
    })?;

    let dir = &args.out;
    fs::create_dir_all(dir)?;
    let name = &gate.name;
    Checkpoint {
        params: out.params.clone(),
        metadata: CheckpointMeta { gate: name.clone(), fidelity: out.fidelity, sweeps: out.sweeps() },
    }
    .save(&dir.join(format!("{name}_checkpoint.json")))?;
    out.history.write_csv(create(&dir.join(format!("{name}_history.csv")))?)?;

    let grid = cfg.grid()?;
    let path = out.params.forward(&grid.nodes())?;
    let mut fields = omega_from_path(&path);
    if gate.kind == GateKind::Single {
        fields = drive_from_omega(&fields, &PhysicalParams::default());
    }
    write_pulse_csv(create(&dir.join(format!("{name}_pulse.csv")))?, &path, &fields)?;

    let summary = json!({
        "gate": name,
        "fidelity": out.fidelity,
        "initial_fidelity": out.initial_fidelity,
        "theta": out.theta,
        "theta_ideal": out.theta_branch,
        "theta_error": out.theta_error,
        "sweeps": out.sweeps(),
        "lambda": out.seed_protocol.lambda,
        "pretrain_max_error": out.pretrain.max_error(),
    });
    write_json(&dir.join(format!("{name}_summary.json")), &summary)?;
    write_config_at(&dir.join(format!("{name}_config.json")), "train", args, json!({ "train_config": cfg }))?;
    println!(
        "gate {name}  F = {:.6}  theta = {:.6}  theta_ideal = {:.6}  error = {:.4e}  sweeps = {}",
        out.fidelity,
        out.theta,
        out.theta_branch,
        out.theta_error,
        out.sweeps()
    );
    Ok(())
}

pub fn theta_scan(args: &ThetaScanArgs) -> Result<()> {
    let lambdas = parse_range(&args.range)?;
    let mut w = csv::Writer::from_writer(create(&args.out)?);
    w.write_record(["mu0", "Lambda", "theta"]).map_err(Error::from)?;
    for &mu0 in &args.mu0 {
        for &l in &lambdas {
            let th = theta_fresnel(mu0, l)?;
            w.write_record([mu0.to_string(), l.to_string(), format!("{th:.12}")]).map_err(Error::from)?;
        }
    }
    w.flush()?;
    write_config(&args.out, "theta-scan", args, Value::Null)?;
    println!("wrote {} rows to {}", args.mu0.len() * lambdas.len(), args.out.display());
    Ok(())
}

struct Pulse {
    gate: GateSpec,
    grid: TimeGrid,
    fields: DriveFields,
    params: Option<AnsatzParams>,
    source: String,
}

fn load_pulse(args: &PulseArgs) -> Result<Pulse> {
    let grid = TimeGrid::new(1.0, args.slices)?;
    match (&args.checkpoint, &args.gate) {
        (Some(path), _) => {
            if !path.exists() {
                return Err(Error::InvalidParams(format!("checkpoint {} not found", path.display())));
            }
            let ck = Checkpoint::load(path)?;
            let gate = named_gate(&ck.metadata.gate)?;
            let grid = TimeGrid::new(ck.params.period, args.slices)?;
            Ok(Pulse {
                fields: ck.params.midpoint_fields(&grid),
                gate,
                grid,
                params: Some(ck.params),
                source: path.display().to_string(),
            })
        }
        (None, Some(name)) => {
            let gate = named_gate(name)?;
            let fields = trig_protocol_for(&gate, grid.period())?.midpoint_fields(&grid);
            Ok(Pulse { gate, grid, fields, params: None, source: "trig".into() })
        }
        (None, None) => Err(Error::InvalidParams("either --checkpoint or --gate is required".into())),
    }
}

pub fn systematic(args: &SystematicArgs) -> Result<()> {
    let axis: Axis = args.axis.parse()?;
    let deltas = parse_range(&args.range)?;
    let p = load_pulse(&args.pulse)?;
    let res = systematic_sweep(&p.fields, &p.gate, &p.grid, axis, &deltas)?;
    res.write_csv(create(&args.out)?)?;
    write_config(&args.out, "noise systematic", args, json!({ "source": p.source, "result": res.metadata }))?;
    println!("{} delta_{axis}: min F = {:.6} over {} points", p.gate.name, res.min_fidelity(), res.len());
    Ok(())
}

pub fn awgn(args: &AwgnArgs) -> Result<()> {
    let p = load_pulse(&args.pulse)?;
    let rep = awgn_monte_carlo(&p.fields, &p.gate, &p.grid, args.snr, args.pmax, args.seed)?;
    rep.series.write_csv(create(&args.out)?)?;
    let meta = json!({
        "source": p.source,
        "result": rep.series.metadata,
        "ideal_fidelity": rep.ideal,
        "delta": rep.delta,
        "converged_p": rep.converged_p,
    });
    write_config(&args.out, "noise awgn", args, meta)?;
    println!(
        "{} SNR {} dB: ideal F = {:.6}, mean F = {:.6}, deltaF = {:.3e}, converged p = {}",
        p.gate.name,
        args.snr,
        rep.ideal,
        rep.series.fidelities.last().copied().unwrap_or(f64::NAN),
        rep.delta,
        rep.converged_p.map_or("none".into(), |v| v.to_string())
    );
    Ok(())
}

fn parse_input(spec: &str) -> Result<[C64; 2]> {
    let v: Vec<f64> = spec
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::InvalidParams(format!("input must be four numbers re,im,re,im, got '{spec}'")))?;
    if v.len() != 4 {
        return Err(Error::InvalidParams(format!("input must be four numbers re,im,re,im, got '{spec}'")));
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::InvalidParams("input state must be non-zero".into()));
    }
    Ok([c(v[0] / norm, v[1] / norm), c(v[2] / norm, v[3] / norm)])
}

pub fn lindblad(args: &LindbladArgs) -> Result<()> {
    let input = parse_input(&args.input)?;
    let p = load_pulse(&args.pulse)?;
    let params = PhysicalParams::default().with_fock_cutoff(args.cutoff)?;
    let f = decoherence_run(&params, &p.fields, &p.gate, &p.grid, args.gamma, args.gamma_phi, input)?;
    let result = json!({
        "gate": p.gate.name,
        "source": p.source,
        "gamma": args.gamma,
        "gamma_phi": args.gamma_phi,
        "fidelity": f,
    });
    write_json(&args.out, &result)?;
    write_config(&args.out, "noise lindblad", args, Value::Null)?;
    println!("{} Gamma = {}, Gamma_phi = {}: F = {f:.6}", p.gate.name, args.gamma, args.gamma_phi);
    Ok(())
}

pub fn bloch(args: &BlochArgs) -> Result<()> {
    let p = load_pulse(&args.pulse)?;
    let nodes = p.grid.nodes();
    let mut paths = vec![("trig", trig_protocol_for(&p.gate, p.grid.period())?.sample(&nodes)?)];
    if let Some(params) = &p.params {
        paths.push(("trained", params.forward(&nodes)?));
    }
    let mut w = csv::Writer::from_writer(create(&args.out)?);
    w.write_record(["protocol", "t", "rp_x", "rp_y", "rp_z", "rm_x", "rm_y", "rm_z"]).map_err(Error::from)?;
    for (label, path) in &paths {
        let (plus, minus) = bloch_trajectories(path);
        for k in 0..path.len() {
            let mut row = vec![label.to_string(), path.t[k].to_string()];
            row.extend(plus[k].iter().chain(&minus[k]).map(|v| format!("{v:.12}")));
            w.write_record(&row).map_err(Error::from)?;
        }
    }
    w.flush()?;
    write_config(&args.out, "bloch", args, json!({ "source": p.source }))?;
    println!("wrote {} trajectories to {}", paths.len(), args.out.display());
    Ok(())
}

fn checkpoint_source(path: &Path, expected: &str) -> Result<PulseSource> {
    if !path.exists() {
        return Err(Error::InvalidParams(format!("checkpoint {} not found", path.display())));
    }
    let ck = Checkpoint::load(path)?;
    if ck.metadata.gate != expected {
        return Err(Error::InvalidParams(format!(
            "checkpoint {} holds gate {}, expected {expected}",
            path.display(),
            ck.metadata.gate
        )));
    }
    Ok(PulseSource::Ansatz(Box::new(ck.params)))
}

pub fn toffoli(args: &ToffoliArgs) -> Result<()> {
    let grid = TimeGrid::new(1.0, args.slices)?;
    let target = named_gate("Toffoli_mod")?;
    let ideal = compose(&toffoli_circuit())?;
    let phase = (target.matrix.adjoint() * &ideal).trace() / c(8.0, 0.0);
    let deviation = (&ideal - &target.matrix * phase).iter().map(|z| z.norm()).fold(0.0, f64::max);

    let trained: HashMap<&str, PulseSource> = [("T", &args.t), ("Tdag", &args.tdag), ("H", &args.h), ("CNOTmod", &args.cnot)]
        .into_iter()
        .filter_map(|(n, p)| p.as_ref().map(|p| checkpoint_source(p, n).map(|s| (n, s))))
        .collect::<Result<_>>()?;
    let evaluate = |choice: &[(&str, bool)]| -> Result<Option<f64>> {
        let mut sources = HashMap::new();
        for &(name, use_trained) in choice {
            let src = if use_trained {
                match trained.get(name) {
                    Some(s) => s.clone(),
                    None => return Ok(None),
                }
            } else {
                PulseSource::Trig
            };
            sources.insert(name.to_string(), src);
        }
        Ok(Some(circuit_average_fidelity(&toffoli_circuit().realized(&sources, &grid)?, &target)?))
    };
    let all_trig = evaluate(&[("H", false), ("T", false), ("Tdag", false), ("CNOTmod", false)])?;
    let mixed = evaluate(&[("H", false), ("T", true), ("Tdag", true), ("CNOTmod", false)])?;
    let all_trained = evaluate(&[("H", true), ("T", true), ("Tdag", true), ("CNOTmod", true)])?;
    let custom = match &args.circuit {
        Some(path) => {
            if !path.exists() {
                return Err(Error::InvalidParams(format!("circuit file {} not found", path.display())));
            }
            Some(circuit_average_fidelity(&load_circuit(path, &grid)?, &target)?)
        }
        None => None,
    };
    let summary = json!({
        "ideal_deviation": deviation,
        "global_phase": [phase.re, phase.im],
        "all_trig": all_trig,
        "trig_h_cnot_trained_t": mixed,
        "all_trained": all_trained,
        "circuit": custom,
    });
    write_json(&args.out, &summary)?;
    write_config(&args.out, "toffoli", args, Value::Null)?;
    let show = |v: Option<f64>| v.map_or("n/a".to_string(), |f| format!("{f:.6}"));
    println!("ideal composition deviation (up to global phase): {deviation:.2e}");
    println!("all trig:                      F = {}", show(all_trig));
    println!("trig H/CNOT, trained T/Tdag:   F = {}", show(mixed));
    println!("all trained:                   F = {}", show(all_trained));
    if custom.is_some() {
        println!("circuit file:                  F = {}", show(custom));
    }
    Ok(())
}
