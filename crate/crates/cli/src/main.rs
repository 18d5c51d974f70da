//! `qec-steer` command line.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use serde_json::{json, Value};

use qecsteer::agent::Checkpoint;
use qecsteer::circuit::dump_circuit;
use qecsteer::decoder::{build_decoding_graph, DecoderKind};
use qecsteer::harness::gradcheck::run_gradient_check;
use qecsteer::harness::lab::{tag, Lab};
use qecsteer::harness::output::{write_json, JsonlWriter};
use qecsteer::harness::psd::analyze_psd;
use qecsteer::harness::recovery::run_recovery;
use qecsteer::harness::report;
use qecsteer::harness::scaling::run_scaling;
use qecsteer::harness::steering::{run_phase_diagram, run_steering_on, RunIo};
use qecsteer::harness::ExperimentConfig;
use qecsteer::noise::p_tot;
use qecsteer::simulator::{derive_seed, sample_program};

#[derive(Parser)]
#[command(
    name = "qec-steer",
    version,
    about = "Detection-event driven steering of simulated QEC memory experiments"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config (`"schema": 1`); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Write the sampled error model to `model.json`.
    #[arg(long, global = true)]
    dump_model: bool,
    /// Write the factor graph and decoding graph to JSON.
    #[arg(long, global = true)]
    dump_graph: bool,
    /// Write one candidate's worth of detection records at the optimum.
    #[arg(long, global = true)]
    dump_records: bool,
    #[arg(long, global = true)]
    decoder: Option<DecoderKind>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build the memory circuit and write its text dump.
    Circuit,
    /// Fit detector sensitivities per parameter group.
    Calibrate,
    /// Real-time steering with the four evaluation scenarios.
    Steer {
        /// Resume from a checkpoint written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Checkpoint period in epochs (0 = only at the end).
        #[arg(long, default_value_t = 0)]
        checkpoint_every: usize,
    },
    /// Scan drift frequency and entropy coefficient.
    Phase,
    /// Convergence from random policies across distances and parameter counts.
    Scale,
    /// Training from the calibrated policy with periodic decoded evaluation.
    Finetune,
    /// Recovery from a policy spoiled to the 50% logical error level.
    Recover,
    /// Finite-difference relation between detection and logical error rates.
    Gradcheck,
    /// Spectra of fixed and learned logical error traces.
    Psd {
        /// Existing `trace.jsonl` files; a fresh steering run is used otherwise.
        #[arg(long = "trace")]
        traces: Vec<PathBuf>,
    },
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(d) = c.decoder {
        cfg.decoder = d;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_summary(out: &Path, command: &str, cfg: &ExperimentConfig, body: Value) -> Result<()> {
    let summary = json!({
        "command": command,
        "seed": cfg.seed,
        "config": serde_json::from_str::<Value>(&cfg.to_json()?)?,
        "result": body,
    });
    write_json(&out.join("summary.json"), &summary)?;
    Ok(())
}

/// Optional dumps shared by every subcommand that builds a lab.
fn dumps(c: &Common, cfg: &ExperimentConfig, lab: &Lab) -> Result<()> {
    if c.dump_model {
        write_json(&c.out.join("model.json"), &lab.model.to_json())?;
    }
    if c.dump_graph {
        write_json(&c.out.join("factor_graph.json"), &lab.graph.to_json())?;
        let noisy = lab.noisy_circuit(&lab.circuit, &lab.optimum(0.0), 0.0)?;
        let graph = build_decoding_graph(&noisy, cfg.prior)?;
        write_json(&c.out.join("decoding_graph.json"), &graph.to_json())?;
    }
    if c.dump_records {
        let noise = lab.bound(&lab.optimum(0.0), 0.0)?;
        let seed = derive_seed(cfg.seed, &[tag::EVAL, u64::MAX]);
        let rec = sample_program(&lab.program, &noise, cfg.shots_per_candidate(), seed, 0)?;
        rec.write_dump(&c.out.join("records.qsdr"))?;
    }
    Ok(())
}

fn build_lab(c: &Common, cfg: &ExperimentConfig) -> Result<Lab> {
    let lab = Lab::build(cfg, cfg.distance, &cfg.model, cfg.seed)?;
    dumps(c, cfg, &lab)?;
    Ok(lab)
}

fn steer(
    c: &Common,
    cfg: &ExperimentConfig,
    resume: Option<&Path>,
    every: usize,
    evaluate: bool,
) -> Result<Value> {
    let mut cfg = cfg.clone();
    if evaluate {
        cfg.evaluation.enabled = true;
    }
    let lab = build_lab(c, &cfg)?;
    let ck = resume.map(Checkpoint::load).transpose()?;
    let trace_path = c.out.join("trace.jsonl");
    let mut log = if ck.is_some() {
        JsonlWriter::append(&trace_path)?
    } else {
        JsonlWriter::create(&trace_path)?
    };
    let checkpoint = c.out.join("checkpoint.json");
    let io = RunIo {
        log: Some(&mut log),
        checkpoint: Some(&checkpoint),
        checkpoint_every: every,
        stop_after: None,
    };
    let trace = run_steering_on(&lab, &cfg, derive_seed(cfg.seed, &[tag::TRAIN]), ck, io)?;
    Ok(report::steering_summary(&trace))
}

/// Learned and fixed evaluation series from `trace.jsonl` lines.
fn ler_series(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let (mut fixed, mut learned) = (Vec::new(), Vec::new());
    for line in fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
    {
        let v: Value = serde_json::from_str(line)?;
        if let (Some(f), Some(l)) = (v["ler_fixed"].as_f64(), v["ler_learned"].as_f64()) {
            fixed.push(f);
            learned.push(l);
        }
    }
    Ok((fixed, learned))
}

fn run(cli: Cli) -> Result<Value> {
    let c = &cli.common;
    let cfg = load_config(c)?;
    fs::create_dir_all(&c.out)?;
    let (name, body) = match &cli.cmd {
        Cmd::Circuit => {
            let circuit = cfg.circuit()?;
            fs::write(c.out.join("circuit.txt"), dump_circuit(&circuit))?;
            if c.dump_model || c.dump_graph || c.dump_records {
                build_lab(c, &cfg)?;
            }
            let body = json!({
                "qubits": circuit.num_qubits(),
                "detectors": circuit.num_detectors(),
                "sites": circuit.sites.len(),
                "p_tot": p_tot(cfg.distance, cfg.model.params_per_site),
            });
            ("circuit", body)
        }
        Cmd::Calibrate => {
            if !cfg.calibration.enabled {
                bail!("calibration is disabled in the config");
            }
            let lab = build_lab(c, &cfg)?;
            ("calibrate", json!({ "groups": lab.calibration }))
        }
        Cmd::Steer {
            resume,
            checkpoint_every,
        } => (
            "steer",
            steer(c, &cfg, resume.as_deref(), *checkpoint_every, false)?,
        ),
        Cmd::Finetune => {
            let mut f = cfg.clone();
            f.scenarios = false;
            ("finetune", steer(c, &f, None, 0, true)?)
        }
        Cmd::Phase => {
            let phase = run_phase_diagram(&cfg, &cfg.phase.frequencies, &cfg.phase.entropies)?;
            report::write_phase_csv(&c.out.join("phase.csv"), &phase)?;
            ("phase", report::phase_summary(&phase))
        }
        Cmd::Scale => {
            for &d in &cfg.scaling.distances {
                for &p in &cfg.scaling.params_per_site {
                    info!("d={d} P={p}: P_tot = {}", p_tot(d, p));
                    println!("d={d} P={p} P_tot={}", p_tot(d, p));
                }
            }
            let rep = run_scaling(&cfg, c.decoder.unwrap_or(DecoderKind::UnionFind))?;
            report::write_scaling_csv(&c.out.join("scaling.csv"), &rep)?;
            ("scale", report::scaling_summary(&rep))
        }
        Cmd::Recover => {
            let rep = run_recovery(&cfg)?;
            let mut log = JsonlWriter::create(&c.out.join("trace.jsonl"))?;
            for v in report::recovery_trace(&rep) {
                log.write(&v)?;
            }
            log.flush()?;
            ("recover", report::recovery_summary(&rep))
        }
        Cmd::Gradcheck => {
            let g = run_gradient_check(&cfg)?;
            ("gradcheck", report::gradcheck_summary(&g))
        }
        Cmd::Psd { traces } => {
            let mut fixed = Vec::new();
            let mut learned = Vec::new();
            if traces.is_empty() {
                let mut f = cfg.clone();
                f.scenarios = false;
                steer(c, &f, None, 0, true)?;
                let (a, b) = ler_series(&c.out.join("trace.jsonl"))?;
                fixed.push(a);
                learned.push(b);
            } else {
                for t in traces {
                    let (a, b) = ler_series(t)?;
                    fixed.push(a);
                    learned.push(b);
                }
            }
            let psd = analyze_psd(&fixed, &learned, cfg.psd.points, cfg.psd.smoothing)?;
            report::write_psd_csv(&c.out.join("psd.csv"), &psd)?;
            let body = json!({
                "traces": fixed.len(),
                "trace_len": fixed.iter().map(Vec::len).min(),
                "mean_filter_db": psd.filter_db.iter().sum::<f64>() / psd.filter_db.len() as f64,
            });
            ("psd", body)
        }
    };
    write_summary(&c.out, name, &cfg, body.clone())?;
    Ok(body)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if cli.common.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.common.threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let body = run(cli)?;
    println!("{}", qecsteer::harness::output::to_json_string(&body));
    Ok(())
}
