//! Real-time steering under drift: training with the four evaluation
//! scenarios, the normalized improvement r and the (f, entropy) phase grid.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::ExperimentConfig;
use super::lab::{tag, Evaluator, Lab, Trainer};
use super::output::JsonlWriter;
use crate::agent::Checkpoint;
use crate::error::Result;
use crate::noise::{DriftProfile, DriftSpec};
use crate::simulator::derive_seed;

/// Scenario order in every per-scenario array.
pub const SCENARIOS: [&str; 4] = ["fixed", "optimal", "stochastic", "learned"];
const FIXED: usize = 0;
const OPTIMAL: usize = 1;
const STOCHASTIC: usize = 2;
const LEARNED: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u64,
    pub drift_t: f64,
    /// Mean detection rate per scenario.
    pub dr: [f64; 4],
    pub events: [u64; 4],
    pub entropy: f64,
    pub mu_norm: f64,
    pub sigma_mean: f64,
    /// Per-cycle logical error rate of the learned and fixed policies on
    /// evaluation epochs.
    pub ler_learned: Option<f64>,
    pub ler_fixed: Option<f64>,
}

impl EpochRecord {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "epoch": self.epoch,
            "mean_dr": self.dr[STOCHASTIC],
            "entropy": self.entropy,
            "mu_norm": self.mu_norm,
            "sigma_mean": self.sigma_mean,
            "drift_t": self.drift_t,
            "dr_fixed": self.dr[FIXED],
            "dr_optimal": self.dr[OPTIMAL],
            "dr_learned": self.dr[LEARNED],
            "ler_learned": self.ler_learned,
            "ler_fixed": self.ler_fixed,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTrace {
    pub epochs: Vec<EpochRecord>,
    /// Cumulative detection events N per scenario.
    pub cumulative: [u64; 4],
    /// QEC cycles simulated per scenario.
    pub cycles_per_scenario: u64,
    /// Cycles spent on decoded evaluations.
    pub eval_cycles: u64,
}

/// Normalized improvements of the stochastic and learned policies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Advantage {
    pub r_stochastic: Option<f64>,
    pub r_learned: Option<f64>,
}

/// `(n - n_fixed) / (n_optimal - n_fixed)`, undefined for a degenerate
/// denominator. Fewer events than the fixed policy give r > 0.
pub fn advantage_ratio(n_fixed: f64, n_optimal: f64, n: f64) -> Option<f64> {
    let den = n_optimal - n_fixed;
    (den != 0.0).then(|| (n - n_fixed) / den)
}

pub fn steering_advantage(trace: &ScenarioTrace) -> Advantage {
    let n = trace.cumulative.map(|x| x as f64);
    Advantage {
        r_stochastic: advantage_ratio(n[FIXED], n[OPTIMAL], n[STOCHASTIC]),
        r_learned: advantage_ratio(n[FIXED], n[OPTIMAL], n[LEARNED]),
    }
}

/// Hooks for long runs: per-epoch log and periodic checkpoints.
#[derive(Default)]
pub struct RunIo<'a> {
    pub log: Option<&'a mut JsonlWriter>,
    pub checkpoint: Option<&'a Path>,
    pub checkpoint_every: usize,
    /// Stop after this many epochs of the current call (for resume tests).
    pub stop_after: Option<usize>,
}

/// Steering on a prepared lab. The initial mean is the optimum at drift
/// time 0, which is also the fixed scenario's policy.
pub fn run_steering_on(
    lab: &Lab,
    cfg: &ExperimentConfig,
    seed: u64,
    resume: Option<Checkpoint>,
    io: RunIo<'_>,
) -> Result<ScenarioTrace> {
    let shots = cfg.shots_per_candidate();
    let fixed = lab.optimum(0.0);
    let mut trainer = match resume {
        Some(ck) => Trainer::from_checkpoint(&cfg.agent, shots, ck)?,
        None => Trainer::new(&cfg.agent, shots, seed, fixed.clone())?,
    };
    let evaluator = if cfg.evaluation.enabled {
        Some(Evaluator::new(
            lab,
            lab.circuit.clone(),
            cfg.decoder,
            cfg.prior,
        )?)
    } else {
        None
    };
    let RunIo {
        mut log,
        checkpoint,
        checkpoint_every,
        stop_after,
    } = io;
    let mut trace = ScenarioTrace {
        epochs: Vec::new(),
        cumulative: [0; 4],
        cycles_per_scenario: 0,
        eval_cycles: 0,
    };
    let batch_cycles = (cfg.agent.batch * shots * cfg.cycles) as u64;
    let mut done = 0;
    while (trainer.policy.epoch as usize) < cfg.epochs {
        if stop_after.is_some_and(|s| done >= s) {
            break;
        }
        let t = trainer.policy.epoch as f64;
        let mu = trainer.policy.mu.clone();
        let out = trainer.step(lab, t)?;
        let mut counts = [None, None, Some(out.total()), None];
        if cfg.scenarios {
            let opt = lab.optimum(t);
            let policies = [(FIXED, &fixed), (OPTIMAL, &opt), (LEARNED, &mu)];
            let res: Vec<_> = policies
                .par_iter()
                .map(|(i, th)| {
                    lab.matched_counts(th, t, shots, &out.seeds)
                        .map(|c| (*i, c))
                })
                .collect::<Result<_>>()?;
            for (i, c) in res {
                counts[i] = Some(c);
            }
        }
        let mut rec = EpochRecord {
            epoch: out.epoch,
            drift_t: t,
            dr: [f64::NAN; 4],
            events: [0; 4],
            entropy: trainer.policy.entropy(),
            mu_norm: trainer.policy.mu_norm(),
            sigma_mean: trainer.policy.mean_sigma(),
            ler_learned: None,
            ler_fixed: None,
        };
        for (i, c) in counts.iter().enumerate() {
            if let Some(c) = c {
                rec.dr[i] = c.mean_rate();
                rec.events[i] = c.total();
                trace.cumulative[i] += c.total();
            }
        }
        if let Some(ev) = &evaluator {
            if out.epoch % cfg.evaluation.every as u64 == 0 {
                let s = derive_seed(trainer.seed, &[tag::EVAL, out.epoch]);
                rec.ler_learned = Some(ev.stats(lab, &mu, t, cfg.evaluation.shots, s)?.eps_l);
                rec.ler_fixed = Some(ev.stats(lab, &fixed, t, cfg.evaluation.shots, s)?.eps_l);
                trace.eval_cycles += 2 * (cfg.evaluation.shots * cfg.cycles) as u64;
            }
        }
        trace.cycles_per_scenario += batch_cycles;
        if let Some(l) = log.as_deref_mut() {
            l.write(&rec.to_json())?;
        }
        trace.epochs.push(rec);
        done += 1;
        if let Some(p) = checkpoint {
            if checkpoint_every > 0 && done % checkpoint_every == 0 {
                trainer.checkpoint().save(p)?;
            }
        }
    }
    if let Some(p) = checkpoint {
        trainer.checkpoint().save(p)?;
    }
    if let Some(l) = log {
        l.flush()?;
    }
    Ok(trace)
}

/// Builds the lab from the config and runs the steering experiment.
pub fn run_steering(cfg: &ExperimentConfig) -> Result<ScenarioTrace> {
    cfg.validate()?;
    let lab = Lab::build(cfg, cfg.distance, &cfg.model, cfg.seed)?;
    run_steering_on(
        &lab,
        cfg,
        derive_seed(cfg.seed, &[tag::TRAIN]),
        None,
        RunIo::default(),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub frequency: f64,
    pub entropy: f64,
    pub advantage: Option<Advantage>,
    pub cumulative: [u64; 4],
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub points: Vec<PhasePoint>,
    pub cycles_per_point: u64,
}

/// Independent steering runs over the `(f, entropy)` grid. The error model
/// and its calibration are shared; run seeds depend on the frequency index
/// only, so entropy values at one frequency see common random numbers.
pub fn run_phase_diagram(
    cfg: &ExperimentConfig,
    f_list: &[f64],
    lambda_list: &[f64],
) -> Result<PhaseDiagram> {
    cfg.validate()?;
    if f_list.is_empty() || lambda_list.is_empty() {
        return Err(crate::error::Error::InvalidArgument(
            "phase grid lists must be non-empty".into(),
        ));
    }
    let base = Lab::build(cfg, cfg.distance, &cfg.model, cfg.seed)?;
    let grid: Vec<(usize, f64, f64)> = f_list
        .iter()
        .enumerate()
        .flat_map(|(fi, &f)| lambda_list.iter().map(move |&l| (fi, f, l)))
        .collect();
    let points: Vec<(PhasePoint, u64)> = grid
        .par_iter()
        .map(|&(fi, f, lambda)| {
            let drift = DriftSpec {
                profile: DriftProfile::Sinusoid {
                    frequency: f,
                    amplitude: cfg.phase.amplitude,
                },
                sites: cfg.model.drift.sites.clone(),
            };
            let lab = base.with_drift(&drift);
            let mut c = cfg.clone();
            c.agent.entropy = lambda;
            c.scenarios = true;
            c.evaluation.enabled = false;
            let seed = derive_seed(cfg.seed, &[tag::TRAIN, fi as u64]);
            match run_steering_on(&lab, &c, seed, None, RunIo::default()) {
                Ok(trace) => (
                    PhasePoint {
                        frequency: f,
                        entropy: lambda,
                        advantage: Some(steering_advantage(&trace)),
                        cumulative: trace.cumulative,
                        error: None,
                    },
                    trace.cycles_per_scenario,
                ),
                Err(e) => (
                    PhasePoint {
                        frequency: f,
                        entropy: lambda,
                        advantage: None,
                        cumulative: [0; 4],
                        error: Some(e.to_string()),
                    },
                    0,
                ),
            }
        })
        .collect();
    let cycles_per_point = points.iter().map(|p| p.1).max().unwrap_or(0);
    Ok(PhaseDiagram {
        points: points.into_iter().map(|p| p.0).collect(),
        cycles_per_point,
    })
}
