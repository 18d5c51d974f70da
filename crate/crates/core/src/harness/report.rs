//! Writers for the result files and the summary payloads of each experiment.

use std::path::Path;

use serde_json::{json, Value};

use super::gradcheck::GradCheck;
use super::output::{write_csv, Cell};
use super::psd::PsdResult;
use super::recovery::{RecoveryReport, RecoveryRun};
use super::scaling::ScalingReport;
use super::steering::{steering_advantage, PhaseDiagram, ScenarioTrace, SCENARIOS};
use crate::error::Result;

/// `phase.csv`: one row per grid point; undefined ratios are written as NaN.
pub fn write_phase_csv(path: &Path, phase: &PhaseDiagram) -> Result<()> {
    let rows: Vec<Vec<Cell>> = phase
        .points
        .iter()
        .map(|p| {
            let a = p.advantage;
            vec![
                p.frequency.into(),
                p.entropy.into(),
                a.and_then(|a| a.r_stochastic).unwrap_or(f64::NAN).into(),
                a.and_then(|a| a.r_learned).unwrap_or(f64::NAN).into(),
            ]
        })
        .collect();
    write_csv(path, &["f", "lambda_h", "r_stochastic", "r_learned"], &rows)
}

/// `scaling.csv`: every evaluated epoch of every `(d, P)` run.
pub fn write_scaling_csv(path: &Path, report: &ScalingReport) -> Result<()> {
    let rows: Vec<Vec<Cell>> = report
        .runs
        .iter()
        .flat_map(|r| {
            r.trace.iter().map(move |p| {
                vec![
                    (r.distance as u64).into(),
                    (r.params_per_site as u64).into(),
                    p.epoch.into(),
                    p.eps_l.into(),
                    p.lambda.into(),
                ]
            })
        })
        .collect();
    write_csv(path, &["d", "P", "epoch", "eps_L", "lambda"], &rows)
}

pub fn write_psd_csv(path: &Path, psd: &PsdResult) -> Result<()> {
    let rows: Vec<Vec<Cell>> = (0..psd.freq.len())
        .map(|i| {
            vec![
                psd.freq[i].into(),
                psd.psd_fixed[i].into(),
                psd.psd_steered[i].into(),
                psd.filter_db[i].into(),
            ]
        })
        .collect();
    write_csv(
        path,
        &["freq", "psd_fixed", "psd_steered", "filter_db"],
        &rows,
    )
}

pub fn steering_summary(trace: &ScenarioTrace) -> Value {
    let adv = steering_advantage(trace);
    let cumulative: serde_json::Map<String, Value> = SCENARIOS
        .iter()
        .zip(trace.cumulative)
        .map(|(s, n)| (s.to_string(), json!(n)))
        .collect();
    json!({
        "epochs": trace.epochs.len(),
        "cumulative_events": cumulative,
        "r_stochastic": adv.r_stochastic,
        "r_learned": adv.r_learned,
        "budget": {
            "cycles_per_scenario": trace.cycles_per_scenario,
            "eval_cycles": trace.eval_cycles,
        },
    })
}

pub fn phase_summary(phase: &PhaseDiagram) -> Value {
    json!({
        "points": phase.points.iter().map(|p| json!({
            "f": p.frequency,
            "lambda_h": p.entropy,
            "r_stochastic": p.advantage.and_then(|a| a.r_stochastic),
            "r_learned": p.advantage.and_then(|a| a.r_learned),
            "cumulative_events": p.cumulative,
            "error": p.error,
        })).collect::<Vec<_>>(),
        "budget": { "cycles_per_point_per_scenario": phase.cycles_per_point },
    })
}

pub fn scaling_summary(report: &ScalingReport) -> Value {
    json!({
        "runs": report.runs.iter().map(|r| json!({
            "d": r.distance,
            "P": r.params_per_site,
            "p_tot": r.p_tot,
            "lambda_star": r.lambda_star,
            "eps_star": r.eps_star,
            "gamma": r.fit.gamma,
            "gamma_ci": r.fit.ci,
            "gamma_r2": r.fit.r2,
            "gamma_fd": r.fit.gamma_fd,
            "gamma_flagged": r.fit.flagged,
            "budget": { "train_cycles": r.train_cycles, "eval_cycles": r.eval_cycles },
        })).collect::<Vec<_>>(),
    })
}

pub fn gradcheck_summary(g: &GradCheck) -> Value {
    json!({
        "d": g.distance,
        "slope": g.slope,
        "slope_se": g.slope_se,
        "expected_slope": g.expected,
        "shots_per_evaluation": g.shots,
        "points": g.points.iter().map(|p| json!({
            "dlog_c": p.dlog_c,
            "dlog_eps": p.dlog_eps,
        })).collect::<Vec<_>>(),
        "budget": { "cycles": g.cycles_simulated },
    })
}

fn run_summary(r: &RecoveryRun) -> Value {
    json!({
        "epochs_to_tolerance": r.epochs_to_tolerance,
        "final_p_err": r.final_p_err,
    })
}

pub fn recovery_summary(r: &RecoveryReport) -> Value {
    json!({
        "reference_p_err": r.reference.p_err,
        "reference_dr_quartiles": r.reference.dr_quartiles,
        "spoil_scale": r.spoil_scale,
        "spoiled_p_err": r.spoiled.p_err,
        "recovery": run_summary(&r.recovery),
        "finetune": run_summary(&r.finetune),
        "budget": { "train_cycles": r.train_cycles, "eval_cycles": r.eval_cycles },
    })
}

/// Trace lines of a recovery report, tagged by run.
pub fn recovery_trace(r: &RecoveryReport) -> Vec<Value> {
    [("recovery", &r.recovery), ("finetune", &r.finetune)]
        .iter()
        .flat_map(|(name, run)| {
            run.points.iter().map(move |p| {
                json!({
                    "run": name,
                    "epoch": p.epoch,
                    "p_err": p.p_err,
                    "dr_q1": p.dr_quartiles[0],
                    "dr_median": p.dr_quartiles[1],
                    "dr_q3": p.dr_quartiles[2],
                })
            })
        })
        .collect()
}
