//! Finite-difference check that log of the logical error rate moves
//! proportionally to log of the mean detection rate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::lab::{tag, Evaluator, Lab};
use crate::error::{Error, Result};
use crate::noise::DriftSpec;
use crate::simulator::{derive_seed, detection_fractions};

/// Fewest logical errors an evaluation may see before the rate is
/// considered unresolved.
pub const MIN_ERRORS: u64 = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradPoint {
    pub c_plus: f64,
    pub c_minus: f64,
    pub eps_plus: f64,
    pub eps_minus: f64,
    pub dlog_c: f64,
    pub dlog_eps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheck {
    pub distance: usize,
    pub points: Vec<GradPoint>,
    pub slope: f64,
    pub slope_se: f64,
    /// `(d + 1) / 2`.
    pub expected: f64,
    pub shots: usize,
    pub cycles_simulated: u64,
}

/// Least squares `y = s x`; returns `(s, standard error)`. Pairs with
/// `x == 0` carry no information and are skipped.
pub fn slope_through_origin(x: &[f64], y: &[f64]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|p| *p.0 != 0.0)
        .map(|(a, b)| (*a, *b))
        .collect();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    if pts.is_empty() || sxx == 0.0 {
        return (f64::NAN, f64::NAN);
    }
    let s = pts.iter().map(|p| p.0 * p.1).sum::<f64>() / sxx;
    if pts.len() < 2 {
        return (s, f64::NAN);
    }
    let rss: f64 = pts.iter().map(|p| (p.1 - s * p.0).powi(2)).sum();
    (s, (rss / (pts.len() - 1) as f64 / sxx).sqrt())
}

fn gaussian(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect()
}

/// Runs on the drift-free model of `cfg` at its distance. The base policy
/// is the optimum with every coordinate moved by `base_offset` in a random
/// direction; each Gaussian direction is evaluated at `base +- delta` with
/// matched simulation seeds.
pub fn run_gradient_check(cfg: &ExperimentConfig) -> Result<GradCheck> {
    cfg.validate()?;
    let g = &cfg.gradcheck;
    if g.directions == 0 || g.step <= 0.0 {
        return Err(Error::Config(
            "gradcheck needs directions >= 1 and step > 0".into(),
        ));
    }
    let lab =
        Lab::build(cfg, cfg.distance, &cfg.model, cfg.seed)?.with_drift(&DriftSpec::default());
    let ev = Evaluator::new(&lab, lab.circuit.clone(), cfg.decoder, cfg.prior)?;
    let n = lab.num_params();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[tag::GRADCHECK]));
    let base: Vec<f64> = lab
        .optimum(0.0)
        .iter()
        .map(|p| {
            if rng.random::<bool>() {
                p + g.base_offset
            } else {
                p - g.base_offset
            }
        })
        .collect();
    let mut points = Vec::with_capacity(g.directions);
    for i in 0..g.directions {
        let delta = gaussian(n, g.step, &mut rng);
        let seed = derive_seed(cfg.seed, &[tag::GRADCHECK, i as u64]);
        let eval = |sign: f64| -> Result<(f64, f64)> {
            let theta: Vec<f64> = base.iter().zip(&delta).map(|(b, d)| b + sign * d).collect();
            let rec = ev.record(&lab, &theta, 0.0, g.shots, seed)?;
            let errors = ev.decoder.count_errors(&rec);
            if errors < MIN_ERRORS {
                let suggested = (g.shots as u64).saturating_mul(MIN_ERRORS) / errors.max(1);
                return Err(Error::Unresolvable {
                    errors,
                    shots: g.shots as u64,
                    suggested,
                });
            }
            let stats =
                crate::decoder::LogicalStats::from_counts(errors, g.shots as u64, cfg.cycles)?;
            Ok((detection_fractions(&rec).1, stats.eps_l))
        };
        let (c_plus, eps_plus) = eval(1.0)?;
        let (c_minus, eps_minus) = eval(-1.0)?;
        log::debug!(
            "direction {i}: C {c_minus:.6}..{c_plus:.6}, eps {eps_minus:.3e}..{eps_plus:.3e}"
        );
        points.push(GradPoint {
            c_plus,
            c_minus,
            eps_plus,
            eps_minus,
            dlog_c: c_plus.ln() - c_minus.ln(),
            dlog_eps: eps_plus.ln() - eps_minus.ln(),
        });
    }
    let x: Vec<f64> = points.iter().map(|p| p.dlog_c).collect();
    let y: Vec<f64> = points.iter().map(|p| p.dlog_eps).collect();
    let (slope, slope_se) = slope_through_origin(&x, &y);
    Ok(GradCheck {
        distance: cfg.distance,
        points,
        slope,
        slope_se,
        expected: (cfg.distance as f64 + 1.0) / 2.0,
        shots: g.shots,
        cycles_simulated: (2 * g.directions * g.shots * cfg.cycles) as u64,
    })
}
