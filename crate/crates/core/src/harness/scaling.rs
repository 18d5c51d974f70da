//! Training from random initial policies at several code distances and
//! parameter counts, with Λ point estimates and the convergence-rate fit.

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::lab::{random_policy, tag, Evaluator, Lab, Trainer};
use crate::decoder::{lambda_point_estimate, DecoderKind, LogicalStats};
use crate::error::{Error, Result};
use crate::noise::{p_tot, DriftSpec, ModelSpec};
use crate::simulator::derive_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub epoch: u64,
    pub eps_l: f64,
    pub lambda: f64,
}

/// Convergence-rate estimates for `(Λ* - Λ)/Λ* = A exp(-γ t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaFit {
    pub gamma: f64,
    pub amplitude: f64,
    /// 95% interval from the linearized covariance.
    pub ci: [f64; 2],
    pub r2: f64,
    /// Regression of the finite-difference derivative of Λ/Λ* on 1 - Λ/Λ*.
    pub gamma_fd: f64,
    /// Set for a constant trace or a non-positive rate.
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRun {
    pub distance: usize,
    pub params_per_site: usize,
    pub p_tot: usize,
    pub lambda_star: f64,
    pub eps_star: f64,
    pub trace: Vec<ScalingPoint>,
    pub fit: GammaFit,
    pub train_cycles: u64,
    pub eval_cycles: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub runs: Vec<ScalingRun>,
}

fn flagged(gamma_fd: f64) -> GammaFit {
    GammaFit {
        gamma: f64::NAN,
        amplitude: f64::NAN,
        ci: [f64::NAN; 2],
        r2: f64::NAN,
        gamma_fd,
        flagged: true,
    }
}

/// Fits `y = A exp(-γ t)` by Gauss-Newton started from a log-linear fit of
/// the positive points; the finite-difference estimate uses the raw trace.
pub fn fit_gamma(t: &[f64], lambda: &[f64], lambda_star: f64) -> GammaFit {
    let y: Vec<f64> = lambda
        .iter()
        .map(|l| (lambda_star - l) / lambda_star)
        .collect();
    let gamma_fd = finite_difference_gamma(t, &y);
    let n = t.len();
    let mean = y.iter().sum::<f64>() / n.max(1) as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if n < 3 || sst <= 1e-12 * (1.0 + mean * mean) * n as f64 {
        return flagged(gamma_fd);
    }
    let pos: Vec<(f64, f64)> = t
        .iter()
        .zip(&y)
        .filter(|p| *p.1 > 0.0)
        .map(|(a, b)| (*a, b.ln()))
        .collect();
    let (mut a, mut g) = if pos.len() >= 2 {
        let (c, s) = ols(&pos);
        (c.exp(), -s)
    } else {
        (y[0].abs().max(1e-3), 0.0)
    };
    let t0 = t[0];
    let model = |a: f64, g: f64, ti: f64| a * (-g * (ti - t0)).exp();
    let rss = |a: f64, g: f64| -> f64 {
        t.iter()
            .zip(&y)
            .map(|(ti, yi)| (yi - model(a, g, *ti)).powi(2))
            .sum()
    };
    // The log-linear intercept refers to t = 0; move it to t0.
    a *= (-g * t0).exp();
    let mut damping = 1e-3;
    let mut cur = rss(a, g);
    for _ in 0..200 {
        let (mut jtj, mut jtr) = ([[0.0; 2]; 2], [0.0; 2]);
        for (ti, yi) in t.iter().zip(&y) {
            let e = (-g * (ti - t0)).exp();
            let j = [e, -a * (ti - t0) * e];
            let r = yi - a * e;
            for p in 0..2 {
                jtr[p] += j[p] * r;
                for q in 0..2 {
                    jtj[p][q] += j[p] * j[q];
                }
            }
        }
        let m = [
            [jtj[0][0] * (1.0 + damping), jtj[0][1]],
            [jtj[1][0], jtj[1][1] * (1.0 + damping)],
        ];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if det.abs() < 1e-300 {
            break;
        }
        let da = (m[1][1] * jtr[0] - m[0][1] * jtr[1]) / det;
        let dg = (m[0][0] * jtr[1] - m[1][0] * jtr[0]) / det;
        let next = rss(a + da, g + dg);
        if next <= cur {
            let done = (cur - next) <= 1e-14 * cur.max(1e-300);
            a += da;
            g += dg;
            cur = next;
            damping = (damping * 0.3).max(1e-9);
            if done {
                break;
            }
        } else {
            damping *= 10.0;
            if damping > 1e12 {
                break;
            }
        }
    }
    let (mut jtj, dof) = ([[0.0; 2]; 2], (n as f64 - 2.0).max(1.0));
    for ti in t {
        let e = (-g * (ti - t0)).exp();
        let j = [e, -a * (ti - t0) * e];
        for p in 0..2 {
            for q in 0..2 {
                jtj[p][q] += j[p] * j[q];
            }
        }
    }
    let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
    let var_g = if det > 0.0 {
        cur / dof * jtj[0][0] / det
    } else {
        f64::NAN
    };
    let half = 1.96 * var_g.sqrt();
    GammaFit {
        gamma: g,
        amplitude: a,
        ci: [g - half, g + half],
        r2: 1.0 - cur / sst,
        gamma_fd,
        flagged: !(g > 0.0) || !g.is_finite(),
    }
}

/// Ordinary least squares `y = c + s x`; returns `(c, s)`.
fn ols(p: &[(f64, f64)]) -> (f64, f64) {
    let n = p.len() as f64;
    let mx = p.iter().map(|q| q.0).sum::<f64>() / n;
    let my = p.iter().map(|q| q.1).sum::<f64>() / n;
    let sxy: f64 = p.iter().map(|q| (q.0 - mx) * (q.1 - my)).sum();
    let sxx: f64 = p.iter().map(|q| (q.0 - mx).powi(2)).sum();
    let s = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - s * mx, s)
}

/// With `y = 1 - Λ/Λ*`, the law reads `-dy/dt = γ y`.
fn finite_difference_gamma(t: &[f64], y: &[f64]) -> f64 {
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for i in 1..t.len() {
        let dt = t[i] - t[i - 1];
        if dt <= 0.0 {
            continue;
        }
        let x = 0.5 * (y[i] + y[i - 1]);
        sxy += x * (-(y[i] - y[i - 1]) / dt);
        sxx += x * x;
    }
    if sxx > 0.0 {
        sxy / sxx
    } else {
        f64::NAN
    }
}

/// Drift-free copy of the configured model with `p` parameters per site.
fn static_spec(cfg: &ExperimentConfig, p: usize) -> ModelSpec {
    ModelSpec {
        params_per_site: p,
        drift: DriftSpec::default(),
        ..cfg.model.clone()
    }
}

/// Labs and reference rates at the optimum for every distance at one `P`.
fn references(
    cfg: &ExperimentConfig,
    p: usize,
    kind: DecoderKind,
) -> Result<Vec<(Lab, Evaluator, LogicalStats)>> {
    let spec = static_spec(cfg, p);
    let shots = 10 * cfg.scaling.eval_shots;
    cfg.scaling
        .distances
        .iter()
        .map(|&d| {
            let seed = derive_seed(cfg.seed, &[tag::MODEL, d as u64, p as u64]);
            let lab = Lab::build(cfg, d, &spec, seed)?;
            let ev = Evaluator::new(&lab, lab.circuit.clone(), kind, cfg.prior)?;
            let s = derive_seed(cfg.seed, &[tag::REFERENCE, d as u64, p as u64]);
            let stats = ev.stats(&lab, &lab.optimum(0.0), 0.0, shots, s)?;
            log::info!(
                "reference d={d} P={p}: eps_l={:.4e} ({} errors)",
                stats.eps_l,
                stats.errors
            );
            Ok((lab, ev, stats))
        })
        .collect()
}

/// Scaling experiment over `cfg.scaling.distances` and `params_per_site`.
/// Λ* is the ratio of optimum rates at the two largest distances.
pub fn run_scaling(cfg: &ExperimentConfig, kind: DecoderKind) -> Result<ScalingReport> {
    cfg.validate()?;
    let sc = &cfg.scaling;
    if sc.distances.len() < 2 {
        return Err(Error::Config(
            "scaling needs at least two distances to estimate the Lambda ceiling".into(),
        ));
    }
    if sc.distances.iter().any(|&d| d < 3 || d % 2 == 0) {
        return Err(Error::Config(
            "scaling distances must be odd and >= 3".into(),
        ));
    }
    let mut runs = Vec::new();
    for &p in &sc.params_per_site {
        let refs = references(cfg, p, kind)?;
        let mut order: Vec<usize> = (0..refs.len()).collect();
        order.sort_by_key(|&i| sc.distances[i]);
        let (i1, i2) = (order[order.len() - 2], order[order.len() - 1]);
        let lambda_star = refs[i1].2.eps_l / refs[i2].2.eps_l;
        if !(lambda_star.is_finite() && lambda_star > 0.0) {
            return Err(Error::Unresolvable {
                errors: refs[i2].2.errors,
                shots: refs[i2].2.shots,
                suggested: 10 * refs[i2].2.shots,
            });
        }
        log::info!("P={p}: Lambda* = {lambda_star:.4}");
        for (k, (lab, ev, reference)) in refs.iter().enumerate() {
            let d = sc.distances[k];
            runs.push(train_one(cfg, lab, ev, d, p, lambda_star, reference.eps_l)?);
        }
    }
    Ok(ScalingReport { runs })
}

fn train_one(
    cfg: &ExperimentConfig,
    lab: &Lab,
    ev: &Evaluator,
    d: usize,
    p: usize,
    lambda_star: f64,
    eps_star: f64,
) -> Result<ScalingRun> {
    let sc = &cfg.scaling;
    let shots = cfg.shots_per_candidate();
    let seed = derive_seed(cfg.seed, &[tag::TRAIN, d as u64, p as u64]);
    let mu = random_policy(
        lab,
        sc.init_half_width,
        derive_seed(cfg.seed, &[tag::INIT, d as u64, p as u64]),
    );
    let mut trainer = Trainer::new(&cfg.agent, shots, seed, mu)?;
    let mut trace = Vec::new();
    let mut eval_cycles = 0u64;
    for e in 0..=sc.epochs as u64 {
        if e % sc.eval_every as u64 == 0 {
            let s = derive_seed(seed, &[tag::EVAL, e]);
            let stats = ev.stats(lab, &trainer.policy.mu, 0.0, sc.eval_shots, s)?;
            eval_cycles += (sc.eval_shots * cfg.cycles) as u64;
            let eps = stats
                .eps_l
                .max(0.5 / sc.eval_shots as f64 / cfg.cycles as f64);
            trace.push(ScalingPoint {
                epoch: e,
                eps_l: stats.eps_l,
                lambda: lambda_point_estimate(eps, d, lambda_star, eps_star),
            });
        }
        if e < sc.epochs as u64 {
            trainer.step(lab, 0.0)?;
        }
    }
    let fit_pts: Vec<&ScalingPoint> = trace
        .iter()
        .filter(|pt| pt.epoch as usize >= sc.fit_skip)
        .collect();
    let t: Vec<f64> = fit_pts.iter().map(|pt| pt.epoch as f64).collect();
    let l: Vec<f64> = fit_pts.iter().map(|pt| pt.lambda).collect();
    let fit = fit_gamma(&t, &l, lambda_star);
    log::info!(
        "d={d} P={p}: gamma={:.4} r2={:.3} gamma_fd={:.4}",
        fit.gamma,
        fit.r2,
        fit.gamma_fd
    );
    Ok(ScalingRun {
        distance: d,
        params_per_site: p,
        p_tot: p_tot(d, p),
        lambda_star,
        eps_star,
        trace,
        fit,
        train_cycles: (sc.epochs * cfg.agent.batch * shots * cfg.cycles) as u64,
        eval_cycles,
    })
}
