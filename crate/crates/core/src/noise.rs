//! Control parameters, the quadratic error model and its drift.
//!
//! Every gate site owns `P` control parameters. The depolarizing rate of site
//! `i` at drift time `t` under policy `p` is
//! `min(eps_max, eps_tilde_i + sum_j omega_ij (p_ij - p_opt_ij(t))^2)`.
//! Policies are stored in rescaled units; parameter `k` has physical value
//! `p_k * scale_k`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, NoiseRole, SiteKind};
use crate::error::{Error, Result};
use crate::simulator::Program;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftProfile {
    None,
    /// `amplitude * sin(2 pi frequency t)` in rescaled units, frequency in 1/epochs.
    Sinusoid {
        frequency: f64,
        amplitude: f64,
    },
    /// `delta` from epoch `t0` on.
    Step {
        t0: f64,
        delta: f64,
    },
    /// `delta` during the first `duty` fraction of every period.
    Stroboscopic {
        period: f64,
        duty: f64,
        delta: f64,
    },
}

impl DriftProfile {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            DriftProfile::None => 0.0,
            DriftProfile::Sinusoid {
                frequency,
                amplitude,
            } => amplitude * (2.0 * std::f64::consts::PI * frequency * t).sin(),
            DriftProfile::Step { t0, delta } => {
                if t >= t0 {
                    delta
                } else {
                    0.0
                }
            }
            DriftProfile::Stroboscopic {
                period,
                duty,
                delta,
            } => {
                if period > 0.0 && t.rem_euclid(period) < duty * period {
                    delta
                } else {
                    0.0
                }
            }
        }
    }
}

/// Drift attached to every parameter, or only to those of `sites`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub profile: DriftProfile,
    #[serde(default)]
    pub sites: Option<Vec<usize>>,
}

impl Default for DriftSpec {
    fn default() -> Self {
        DriftSpec {
            profile: DriftProfile::None,
            sites: None,
        }
    }
}

/// Probability bound to the reset and readout bit flips of a site.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ReadoutNoise {
    /// The site's irreducible rate, independent of the policy.
    EpsTilde,
    /// The site's full policy-dependent rate.
    Controlled,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub params_per_site: usize,
    pub omega_range: [f64; 2],
    pub eps_tilde_range: [f64; 2],
    pub eps_max_1q: f64,
    pub eps_max_2q: f64,
    pub drift: DriftSpec,
    pub readout: ReadoutNoise,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            params_per_site: 1,
            omega_range: [0.01, 0.1],
            eps_tilde_range: [5e-4, 2e-3],
            eps_max_1q: 0.75,
            eps_max_2q: 0.9375,
            drift: DriftSpec::default(),
            readout: ReadoutNoise::Controlled,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotModel {
    pub omega: f64,
    pub drift: DriftProfile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteModel {
    pub site_id: usize,
    pub kind: SiteKind,
    pub eps_tilde: f64,
    pub eps_max: f64,
    pub slots: Vec<SlotModel>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlParameter {
    pub param_id: usize,
    pub site_id: usize,
    pub slot: usize,
    pub scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    pub params_per_site: usize,
    pub sites: Vec<SiteModel>,
    /// Physical units per rescaled unit, one per parameter.
    pub scales: Vec<f64>,
    pub readout: ReadoutNoise,
}

/// Total parameter count of a distance-`d` surface code with `p` parameters
/// per gate site.
pub fn p_tot(d: usize, p: usize) -> usize {
    (2 * d * d - 1) * p + (4 * d * d - 4 * d) * p
}

fn check_range(r: [f64; 2]) -> Result<()> {
    if !(r[0] >= 0.0 && r[1] >= r[0]) {
        return Err(Error::InvalidRange { lo: r[0], hi: r[1] });
    }
    Ok(())
}

fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[1] > r[0] {
        rng.random_range(r[0]..r[1])
    } else {
        r[0]
    }
}

pub fn sample_error_model(seed: u64, circuit: &Circuit, spec: &ModelSpec) -> Result<ErrorModel> {
    check_range(spec.omega_range)?;
    check_range(spec.eps_tilde_range)?;
    if spec.params_per_site == 0 {
        return Err(Error::InvalidArgument(
            "params_per_site must be >= 1".into(),
        ));
    }
    if !(0.0..=0.75).contains(&spec.eps_max_1q) || !(0.0..=0.9375).contains(&spec.eps_max_2q) {
        return Err(Error::InvalidArgument(
            "eps_max must not exceed full depolarization".into(),
        ));
    }
    if let ReadoutNoise::Fixed(q) = spec.readout {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidProbability {
                op: "X_ERROR",
                value: q,
                max: 1.0,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sites = circuit
        .sites
        .iter()
        .map(|s| {
            let eps_tilde = uniform(&mut rng, spec.eps_tilde_range);
            let drifting = spec
                .drift
                .sites
                .as_ref()
                .is_none_or(|list| list.contains(&s.id));
            let slots = (0..spec.params_per_site)
                .map(|_| SlotModel {
                    omega: uniform(&mut rng, spec.omega_range),
                    drift: if drifting {
                        spec.drift.profile
                    } else {
                        DriftProfile::None
                    },
                })
                .collect();
            SiteModel {
                site_id: s.id,
                kind: s.kind,
                eps_tilde,
                eps_max: match s.kind {
                    SiteKind::SingleQubit => spec.eps_max_1q,
                    SiteKind::Cz => spec.eps_max_2q,
                },
                slots,
            }
        })
        .collect::<Vec<_>>();
    let n = sites.len() * spec.params_per_site;
    Ok(ErrorModel {
        params_per_site: spec.params_per_site,
        sites,
        scales: vec![1.0; n],
        readout: spec.readout,
    })
}

impl ErrorModel {
    pub fn num_params(&self) -> usize {
        self.scales.len()
    }

    pub fn param_id(&self, site: usize, slot: usize) -> usize {
        site * self.params_per_site + slot
    }

    pub fn params(&self) -> Vec<ControlParameter> {
        (0..self.num_params())
            .map(|k| ControlParameter {
                param_id: k,
                site_id: k / self.params_per_site,
                slot: k % self.params_per_site,
                scale: self.scales[k],
            })
            .collect()
    }

    /// Physical optimum of every parameter at drift time `t`. Drift
    /// profiles are in rescaled units, so each optimum is the profile value
    /// times the parameter's scale.
    pub fn optimal_physical(&self, t: f64) -> Vec<f64> {
        self.sites
            .iter()
            .flat_map(|s| s.slots.iter().map(move |slot| slot.drift.at(t)))
            .zip(&self.scales)
            .map(|(x, s)| x * s)
            .collect()
    }

    fn check_len(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.num_params() {
            return Err(Error::LengthMismatch {
                expected: self.num_params(),
                got: p.len(),
            });
        }
        Ok(())
    }

    /// Quadratic rate of one site under rescaled policy `p`.
    pub fn epsilon(&self, site: usize, t: f64, p: &[f64]) -> f64 {
        let s = &self.sites[site];
        let base = site * self.params_per_site;
        let mut eps = s.eps_tilde;
        for (j, slot) in s.slots.iter().enumerate() {
            let k = base + j;
            let off = (p[k] - slot.drift.at(t)) * self.scales[k];
            eps += slot.omega * off * off;
        }
        eps.min(s.eps_max)
    }

    pub fn site_epsilons(&self, t: f64, p: &[f64]) -> Result<Vec<f64>> {
        self.check_len(p)?;
        Ok((0..self.sites.len())
            .map(|i| self.epsilon(i, t, p))
            .collect())
    }

    /// Multiplies the scale of every parameter in `params` by `factor`.
    pub fn rescale(&mut self, params: &[usize], factor: f64) {
        for &k in params {
            self.scales[k] *= factor;
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "sites": self.sites.iter().map(|s| serde_json::json!({
                "site_id": s.site_id,
                "eps_tilde": s.eps_tilde,
                "slots": s.slots.iter().map(|j| serde_json::json!({
                    "omega": j.omega,
                    "drift": j.drift,
                })).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
            "scales": self.scales,
        })
    }
}

/// Rescaled optimal policy at drift time `t`: the drift profile values.
pub fn optimal_policy(model: &ErrorModel, t: f64) -> Vec<f64> {
    model
        .sites
        .iter()
        .flat_map(|s| s.slots.iter().map(move |slot| slot.drift.at(t)))
        .collect()
}

pub fn epsilon_at(model: &ErrorModel, site: usize, t: f64, p: &[f64]) -> Result<f64> {
    model.check_len(p)?;
    if site >= model.sites.len() {
        return Err(Error::InvalidArgument(format!("unknown site {site}")));
    }
    Ok(model.epsilon(site, t, p))
}

/// Maps each noise slot of a compiled program to the probability source in
/// the error model.
#[derive(Clone, Debug)]
pub struct NoiseBinder {
    slot_site: Vec<usize>,
    slot_readout: Vec<bool>,
    readout: ReadoutNoise,
}

impl NoiseBinder {
    pub fn new(program: &Program, model: &ErrorModel) -> Result<NoiseBinder> {
        let mut slot_site = Vec::with_capacity(program.num_slots());
        let mut slot_readout = Vec::with_capacity(program.num_slots());
        for (i, s) in program.slots.iter().enumerate() {
            let site = s.site.ok_or(Error::UnboundNoise(s.instruction))?;
            if site >= model.sites.len() {
                return Err(Error::InvalidArgument(format!(
                    "noise slot {i} refers to site {site} outside the model"
                )));
            }
            slot_site.push(site);
            slot_readout.push(s.role == Some(NoiseRole::Readout));
        }
        Ok(NoiseBinder {
            slot_site,
            slot_readout,
            readout: model.readout,
        })
    }

    /// Slot probabilities for policy `p` at drift time `t`.
    pub fn bind(&self, model: &ErrorModel, t: f64, p: &[f64]) -> Result<Vec<f64>> {
        let eps = model.site_epsilons(t, p)?;
        Ok(self.bind_epsilons(model, &eps))
    }

    pub fn bind_epsilons(&self, model: &ErrorModel, eps: &[f64]) -> Vec<f64> {
        self.slot_site
            .iter()
            .zip(&self.slot_readout)
            .map(|(&site, &readout)| {
                if !readout {
                    return eps[site];
                }
                match self.readout {
                    ReadoutNoise::EpsTilde => model.sites[site].eps_tilde.min(1.0),
                    ReadoutNoise::Controlled => eps[site].min(1.0),
                    ReadoutNoise::Fixed(q) => q,
                }
            })
            .collect()
    }
}

/// Copy of `circuit` with every noise slot bound to the model's rate.
pub fn instantiate_noisy_circuit(
    circuit: &Circuit,
    model: &ErrorModel,
    p: &[f64],
    t: f64,
) -> Result<Circuit> {
    let program = Program::compile(circuit);
    let probs = NoiseBinder::new(&program, model)?.bind(model, t, p)?;
    let mut out = circuit.clone();
    for (slot, q) in program.slots.iter().zip(probs) {
        let ins = &mut out.instructions[slot.instruction];
        ins.op = ins.op.with_probability(q);
    }
    Ok(out)
}
