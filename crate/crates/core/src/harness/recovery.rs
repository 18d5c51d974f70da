//! Recovery from a spoiled policy at the 50% logical error level, compared
//! with fine-tuning from the calibrated policy on the same model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::lab::{tag, Evaluator, Lab, Trainer};
use crate::error::{Error, Result};
use crate::noise::DriftSpec;
use crate::simulator::{derive_seed, detection_fractions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryPoint {
    pub epoch: u64,
    pub p_err: f64,
    /// Lower quartile, median and upper quartile of per-detector DR.
    pub dr_quartiles: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRun {
    pub points: Vec<RecoveryPoint>,
    /// First evaluated epoch within `tolerance` of the reference.
    pub epochs_to_tolerance: Option<u64>,
    pub final_p_err: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub reference: RecoveryPoint,
    pub spoil_scale: f64,
    pub spoiled: RecoveryPoint,
    pub recovery: RecoveryRun,
    pub finetune: RecoveryRun,
    pub train_cycles: u64,
    pub eval_cycles: u64,
}

/// Quartiles by linear interpolation between order statistics.
pub fn quartiles(values: &[f64]) -> [f64; 3] {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return [f64::NAN; 3];
    }
    v.sort_by(f64::total_cmp);
    let at = |q: f64| {
        let x = q * (v.len() - 1) as f64;
        let (i, w) = (x.floor() as usize, x - x.floor());
        if i + 1 < v.len() {
            v[i] * (1.0 - w) + v[i + 1] * w
        } else {
            v[i]
        }
    };
    [at(0.25), at(0.5), at(0.75)]
}

struct Setup<'a> {
    lab: &'a Lab,
    ev: &'a Evaluator,
    shots: usize,
    cycles: usize,
}

impl Setup<'_> {
    fn point(&self, theta: &[f64], epoch: u64, seed: u64) -> Result<RecoveryPoint> {
        let rec = self.ev.record(self.lab, theta, 0.0, self.shots, seed)?;
        let stats = self.ev.decoder.stats(&rec)?;
        Ok(RecoveryPoint {
            epoch,
            p_err: stats.p_err,
            dr_quartiles: quartiles(&detection_fractions(&rec).0),
        })
    }
}

/// Smallest scale `s` along the offset `u` whose decoded logical error
/// probability lands in `[lo, hi]`: doubling, then bisection.
fn spoil(
    setup: &Setup<'_>,
    base: &[f64],
    u: &[f64],
    target: [f64; 2],
    seed: u64,
) -> Result<(f64, RecoveryPoint)> {
    let [lo, hi] = target;
    let at = |s: f64| -> Result<RecoveryPoint> {
        let theta: Vec<f64> = base.iter().zip(u).map(|(b, x)| b + s * x).collect();
        setup.point(&theta, 0, seed)
    };
    const MAX_SCALE: f64 = 1e4;
    let (mut s_lo, mut s_hi) = (0.0, 0.5);
    let mut p = at(s_hi)?;
    while p.p_err < lo {
        if s_hi >= MAX_SCALE {
            return Err(Error::SpoilFailed {
                reached: p.p_err,
                scale: s_hi,
            });
        }
        s_lo = s_hi;
        s_hi *= 2.0;
        p = at(s_hi)?;
    }
    if p.p_err <= hi {
        // Tighten towards the crossing so the spoil is no larger than needed.
        for _ in 0..12 {
            let mid = 0.5 * (s_lo + s_hi);
            let q = at(mid)?;
            if q.p_err >= lo && q.p_err <= hi {
                s_hi = mid;
                p = q;
            } else if q.p_err < lo {
                s_lo = mid;
            } else {
                break;
            }
        }
        return Ok((s_hi, p));
    }
    for _ in 0..40 {
        let mid = 0.5 * (s_lo + s_hi);
        let q = at(mid)?;
        if q.p_err < lo {
            s_lo = mid;
        } else if q.p_err > hi {
            s_hi = mid;
        } else {
            return Ok((mid, q));
        }
    }
    Err(Error::SpoilFailed {
        reached: p.p_err,
        scale: s_hi,
    })
}

fn train(
    cfg: &ExperimentConfig,
    setup: &Setup<'_>,
    mu: Vec<f64>,
    seed: u64,
    reference: f64,
    eval_cycles: &mut u64,
) -> Result<RecoveryRun> {
    let rc = &cfg.recovery;
    let mut trainer = Trainer::new(&cfg.agent, cfg.shots_per_candidate(), seed, mu)?;
    let mut points = Vec::new();
    let mut reached = None;
    for e in 0..=rc.epochs as u64 {
        if e % rc.eval_every as u64 == 0 {
            let pt = setup.point(&trainer.policy.mu, e, derive_seed(seed, &[tag::EVAL, e]))?;
            *eval_cycles += (setup.shots * setup.cycles) as u64;
            if reached.is_none() && pt.p_err <= rc.tolerance * reference {
                reached = Some(e);
            }
            points.push(pt);
        }
        if e < rc.epochs as u64 {
            trainer.step(setup.lab, 0.0)?;
        }
    }
    let final_p_err = points.last().map_or(f64::NAN, |p| p.p_err);
    Ok(RecoveryRun {
        points,
        epochs_to_tolerance: reached,
        final_p_err,
    })
}

/// Spoils the calibrated policy of the drift-free model along a random
/// offset until the `recovery.cycles`-round memory experiment decodes at
/// the target error level, then trains from there and, with the same seed,
/// from the calibrated policy.
pub fn run_recovery(cfg: &ExperimentConfig) -> Result<RecoveryReport> {
    cfg.validate()?;
    let rc = &cfg.recovery;
    let lab =
        Lab::build(cfg, cfg.distance, &cfg.model, cfg.seed)?.with_drift(&DriftSpec::default());
    let long = cfg.circuit_with(cfg.distance, rc.cycles)?;
    let ev = Evaluator::new(&lab, long, cfg.decoder, cfg.prior)?;
    let setup = Setup {
        lab: &lab,
        ev: &ev,
        shots: rc.eval_shots,
        cycles: rc.cycles,
    };
    let calibrated = lab.optimum(0.0);
    let reference = setup.point(&calibrated, 0, derive_seed(cfg.seed, &[tag::REFERENCE]))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[tag::SPOIL]));
    let u: Vec<f64> = (0..lab.num_params())
        .map(|_| rng.random_range(-1.0..=1.0))
        .collect();
    let (spoil_scale, spoiled) = spoil(
        &setup,
        &calibrated,
        &u,
        rc.target,
        derive_seed(cfg.seed, &[tag::SPOIL, 0]),
    )?;
    log::info!(
        "reference P_err {:.4}; spoiled to {:.4} at scale {spoil_scale:.4}",
        reference.p_err,
        spoiled.p_err
    );
    let start: Vec<f64> = calibrated
        .iter()
        .zip(&u)
        .map(|(b, x)| b + spoil_scale * x)
        .collect();
    let seed = derive_seed(cfg.seed, &[tag::TRAIN, tag::SPOIL]);
    let mut eval_cycles = 0;
    let recovery = train(cfg, &setup, start, seed, reference.p_err, &mut eval_cycles)?;
    let finetune = train(
        cfg,
        &setup,
        calibrated,
        seed,
        reference.p_err,
        &mut eval_cycles,
    )?;
    Ok(RecoveryReport {
        reference,
        spoil_scale,
        spoiled,
        recovery,
        finetune,
        train_cycles: (2 * rc.epochs * cfg.agent.batch * cfg.cycles_per_candidate) as u64,
        eval_cycles,
    })
}
