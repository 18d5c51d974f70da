//! Detector classes, the class <-> parameter factor graph, and sensitivity
//! calibration.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, DetectingRegionMap, Phase, SiteKind};
use crate::error::{Error, Result};
use crate::noise::{ControlParameter, ErrorModel, NoiseBinder};
use crate::simulator::{derive_seed, sample_counts, BoundNoise, EventCounts, Program};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorClass {
    pub class_id: usize,
    pub members: Vec<usize>,
    pub space: u32,
    pub phase: Phase,
}

/// Groups detectors by `(measure qubit, phase)`.
pub fn fold_detectors(c: &Circuit) -> Vec<DetectorClass> {
    let mut map: BTreeMap<(Phase, u32), Vec<usize>> = BTreeMap::new();
    for d in &c.detectors {
        map.entry((d.phase, d.space)).or_default().push(d.id);
    }
    map.into_iter()
        .enumerate()
        .map(|(class_id, ((phase, space), members))| DetectorClass {
            class_id,
            members,
            space,
            phase,
        })
        .collect()
}

/// Class index of every detector.
pub fn class_of_detector(classes: &[DetectorClass], num_detectors: usize) -> Vec<usize> {
    let mut out = vec![usize::MAX; num_detectors];
    for c in classes {
        for &d in &c.members {
            out[d] = c.class_id;
        }
    }
    out
}

/// Mean event fraction of each class.
pub fn class_rates(classes: &[DetectorClass], counts: &EventCounts) -> Vec<f64> {
    let shots = counts.shots.max(1) as f64;
    classes
        .iter()
        .map(|c| {
            let n: u64 = c.members.iter().map(|&d| counts.per_detector[d]).sum();
            n as f64 / (shots * c.members.len() as f64)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeStats {
    pub mean_params_per_class: f64,
    pub mean_classes_per_param: f64,
    pub max_params_per_class: usize,
    pub isolated_params: usize,
    pub edges: usize,
}

#[derive(Clone, Debug)]
pub struct FactorGraph {
    pub classes: Vec<DetectorClass>,
    pub params: Vec<ControlParameter>,
    pub class_params: Vec<Vec<u32>>,
    pub param_classes: Vec<Vec<u32>>,
}

pub fn build_factor_graph(
    c: &Circuit,
    regions: &DetectingRegionMap,
    params: &[ControlParameter],
) -> FactorGraph {
    let classes = fold_detectors(c);
    let mut by_site: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for p in params {
        by_site.entry(p.site_id).or_default().push(p.param_id);
    }
    let mut class_params = Vec::with_capacity(classes.len());
    let mut param_classes = vec![Vec::new(); params.len()];
    for class in &classes {
        let sites: BTreeSet<usize> = class
            .members
            .iter()
            .flat_map(|&d| regions.region(d).iter().copied())
            .collect();
        let mut ps: Vec<u32> = sites
            .iter()
            .flat_map(|s| by_site.get(s).into_iter().flatten())
            .map(|&k| k as u32)
            .collect();
        ps.sort_unstable();
        for &k in &ps {
            param_classes[k as usize].push(class.class_id as u32);
        }
        class_params.push(ps);
    }
    FactorGraph {
        classes,
        params: params.to_vec(),
        class_params,
        param_classes,
    }
}

impl FactorGraph {
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn degrees(&self) -> DegreeStats {
        let edges: usize = self.class_params.iter().map(|v| v.len()).sum();
        DegreeStats {
            mean_params_per_class: edges as f64 / self.num_classes().max(1) as f64,
            mean_classes_per_param: edges as f64 / self.num_params().max(1) as f64,
            max_params_per_class: self.class_params.iter().map(|v| v.len()).max().unwrap_or(0),
            isolated_params: self.param_classes.iter().filter(|v| v.is_empty()).count(),
            edges,
        }
    }

    /// Graph where every parameter is adjacent to every class.
    pub fn dense(&self) -> FactorGraph {
        let all_p: Vec<u32> = (0..self.num_params() as u32).collect();
        let all_c: Vec<u32> = (0..self.num_classes() as u32).collect();
        FactorGraph {
            classes: self.classes.clone(),
            params: self.params.clone(),
            class_params: vec![all_p; self.num_classes()],
            param_classes: vec![all_c; self.num_params()],
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let phase = |p: Phase| match p {
            Phase::First => "first",
            Phase::Bulk => "bulk",
            Phase::Final => "final",
        };
        let edges: Vec<[u32; 2]> = self
            .class_params
            .iter()
            .enumerate()
            .flat_map(|(c, ps)| ps.iter().map(move |&k| [c as u32, k]))
            .collect();
        serde_json::json!({
            "classes": self.classes.iter().map(|c| serde_json::json!({
                "id": c.class_id,
                "space": c.space,
                "phase": phase(c.phase),
                "dets": c.members,
            })).collect::<Vec<_>>(),
            "edges": edges,
            "degrees": self.degrees(),
        })
    }
}

/// Parameters calibrated together.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeGroup {
    pub name: String,
    pub params: Vec<usize>,
}

/// One group per (site kind, slot index).
pub fn default_groups(c: &Circuit, model: &ErrorModel) -> Vec<TypeGroup> {
    let mut out = Vec::new();
    for kind in [SiteKind::SingleQubit, SiteKind::Cz] {
        for j in 0..model.params_per_site {
            let params: Vec<usize> = c
                .sites
                .iter()
                .filter(|s| s.kind == kind)
                .map(|s| model.param_id(s.id, j))
                .collect();
            if !params.is_empty() {
                let k = if kind == SiteKind::Cz { "cz" } else { "sq" };
                out.push(TypeGroup {
                    name: format!("{k}{j}"),
                    params,
                });
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityScale {
    pub group: String,
    /// Physical units per rescaled unit; infinite when the fit has no
    /// positive curvature.
    pub sigma0: f64,
    pub dr0: f64,
    pub residual: f64,
    pub flagged: bool,
    /// `(sigma, mean DR)` sweep points.
    pub sweep: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct CalibrationSettings {
    pub sigma_grid: Vec<f64>,
    pub shots: usize,
    /// Independent perturbation draws per grid point, sharing `shots`.
    pub draws: usize,
    pub seed: u64,
    pub t: f64,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        CalibrationSettings {
            sigma_grid: vec![0.0, 0.05, 0.1, 0.2, 0.4],
            shots: 100_000,
            draws: 10,
            seed: 0,
            t: 0.0,
        }
    }
}

/// Least-squares fit of `y = a + b x`; returns `(a, b, rms residual)`.
pub(crate) fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let rms = (x
        .iter()
        .zip(y)
        .map(|(u, v)| (v - a - b * u).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (a, b, rms)
}

/// Sweeps each group's perturbation width around `base` (rescaled policy)
/// and fits `DR = DR0 + (sigma/sigma0)^2` in physical units.
pub fn calibrate_sensitivities(
    c: &Circuit,
    model: &ErrorModel,
    base: &[f64],
    groups: &[TypeGroup],
    settings: &CalibrationSettings,
) -> Result<Vec<SensitivityScale>> {
    if settings.sigma_grid.len() < 3 {
        return Err(Error::InvalidArgument(
            "calibration grid needs at least 3 points".into(),
        ));
    }
    if base.len() != model.num_params() {
        return Err(Error::LengthMismatch {
            expected: model.num_params(),
            got: base.len(),
        });
    }
    let program = Program::compile(c);
    let binder = NoiseBinder::new(&program, model)?;
    let draws = settings.draws.max(1);
    let shots_per_draw = (settings.shots / draws).max(64);

    let mut out = Vec::with_capacity(groups.len());
    for (gi, g) in groups.iter().enumerate() {
        let points: Vec<(f64, f64)> = settings
            .sigma_grid
            .par_iter()
            .enumerate()
            .map(|(si, &sigma)| -> Result<(f64, f64)> {
                let mut total = EventCounts::default();
                for draw in 0..draws {
                    let seed = derive_seed(settings.seed, &[gi as u64, si as u64, draw as u64]);
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let normal = Normal::new(0.0, sigma.max(0.0))
                        .map_err(|e| Error::InvalidArgument(format!("bad sigma {sigma}: {e}")))?;
                    let mut p = base.to_vec();
                    for &k in &g.params {
                        p[k] += normal.sample(&mut rng) / model.scales[k];
                    }
                    let probs = binder.bind(model, settings.t, &p)?;
                    let noise = BoundNoise::new(&program, &probs)?;
                    let counts =
                        sample_counts(&program, &noise, shots_per_draw, derive_seed(seed, &[1]))?;
                    total.merge(&counts);
                }
                Ok((sigma, total.mean_rate()))
            })
            .collect::<Result<_>>()?;
        // DR in percent: sigma0 is the width that adds one percentage point.
        let x: Vec<f64> = points.iter().map(|p| p.0 * p.0).collect();
        let y: Vec<f64> = points.iter().map(|p| 100.0 * p.1).collect();
        let (a, b, rms) = linear_fit(&x, &y);
        let flagged = !(b > 0.0);
        if flagged {
            log::warn!(
                "group {} shows no positive DR curvature; left unscaled",
                g.name
            );
        }
        out.push(SensitivityScale {
            group: g.name.clone(),
            sigma0: if flagged {
                f64::INFINITY
            } else {
                1.0 / b.sqrt()
            },
            dr0: a / 100.0,
            residual: rms / 100.0,
            flagged,
            sweep: points,
        });
    }
    Ok(out)
}

/// Writes fitted scales into the model; flagged groups keep their scale.
pub fn apply_scales(model: &mut ErrorModel, groups: &[TypeGroup], scales: &[SensitivityScale]) {
    for (g, s) in groups.iter().zip(scales) {
        if s.flagged || !s.sigma0.is_finite() {
            continue;
        }
        for &k in &g.params {
            model.scales[k] = s.sigma0;
        }
    }
}
