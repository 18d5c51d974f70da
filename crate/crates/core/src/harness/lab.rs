//! A prepared experiment: circuit, compiled program, error model with
//! calibrated scales and the detector-class factor graph.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::ExperimentConfig;
use crate::agent::{
    reward_from_counts, sample_candidates, update, AgentHyperparams, Checkpoint, EpochBatch,
    PolicyDistribution, ReplayBuffer, UpdateInfo,
};
use crate::circuit::{compute_detecting_regions, Circuit};
use crate::decoder::{
    build_decoding_graph, Decoder, DecoderKind, DecodingGraph, LogicalStats, Prior,
};
use crate::detgraph::{
    apply_scales, build_factor_graph, calibrate_sensitivities, default_groups, CalibrationSettings,
    FactorGraph, SensitivityScale,
};
use crate::error::Result;
use crate::noise::{
    instantiate_noisy_circuit, optimal_policy, sample_error_model, DriftSpec, ErrorModel,
    ModelSpec, NoiseBinder,
};
use crate::simulator::{
    derive_seed, sample_counts, sample_program, BoundNoise, DetectionRecord, EventCounts, Program,
};

/// Seed-derivation tags, one per experiment stage.
pub mod tag {
    pub const MODEL: u64 = 1;
    pub const CALIBRATION: u64 = 2;
    pub const TRAIN: u64 = 3;
    pub const EVAL: u64 = 4;
    pub const INIT: u64 = 5;
    pub const GRADCHECK: u64 = 6;
    pub const SPOIL: u64 = 7;
    pub const REFERENCE: u64 = 8;
}

#[derive(Clone, Debug)]
pub struct Lab {
    pub circuit: Circuit,
    pub program: Program,
    pub binder: NoiseBinder,
    pub model: ErrorModel,
    pub graph: FactorGraph,
    pub calibration: Vec<SensitivityScale>,
}

impl Lab {
    /// Samples the model from `seed`, calibrates it if enabled and builds
    /// the factor graph. Calibration runs at drift time 0 around the optimum.
    pub fn build(
        cfg: &ExperimentConfig,
        distance: usize,
        spec: &ModelSpec,
        seed: u64,
    ) -> Result<Lab> {
        let circuit = cfg.circuit_with(distance, cfg.cycles)?;
        let mut model = sample_error_model(derive_seed(seed, &[tag::MODEL]), &circuit, spec)?;
        let mut calibration = Vec::new();
        if cfg.calibration.enabled {
            let groups = default_groups(&circuit, &model);
            let settings = CalibrationSettings {
                sigma_grid: cfg.calibration.sigma_grid.clone(),
                shots: cfg.calibration.shots,
                draws: cfg.calibration.draws,
                seed: derive_seed(seed, &[tag::CALIBRATION]),
                t: 0.0,
            };
            let base = optimal_policy(&model, 0.0);
            calibration = calibrate_sensitivities(&circuit, &model, &base, &groups, &settings)?;
            apply_scales(&mut model, &groups, &calibration);
        }
        Self::from_parts(circuit, model, calibration)
    }

    pub fn from_parts(
        circuit: Circuit,
        model: ErrorModel,
        calibration: Vec<SensitivityScale>,
    ) -> Result<Lab> {
        let program = Program::compile(&circuit);
        let binder = NoiseBinder::new(&program, &model)?;
        let regions = compute_detecting_regions(&circuit);
        let graph = build_factor_graph(&circuit, &regions, &model.params());
        Ok(Lab {
            circuit,
            program,
            binder,
            model,
            graph,
            calibration,
        })
    }

    /// Same lab with a different drift attached to the model.
    pub fn with_drift(&self, drift: &DriftSpec) -> Lab {
        let mut lab = self.clone();
        for site in &mut lab.model.sites {
            let on = drift
                .sites
                .as_ref()
                .is_none_or(|s| s.contains(&site.site_id));
            for slot in &mut site.slots {
                slot.drift = if on {
                    drift.profile
                } else {
                    crate::noise::DriftProfile::None
                };
            }
        }
        lab
    }

    pub fn num_params(&self) -> usize {
        self.model.num_params()
    }

    pub fn optimum(&self, t: f64) -> Vec<f64> {
        optimal_policy(&self.model, t)
    }

    pub fn bound(&self, theta: &[f64], t: f64) -> Result<BoundNoise> {
        let probs = self.binder.bind(&self.model, t, theta)?;
        BoundNoise::new(&self.program, &probs)
    }

    pub fn counts(&self, theta: &[f64], t: f64, shots: usize, seed: u64) -> Result<EventCounts> {
        sample_counts(&self.program, &self.bound(theta, t)?, shots, seed)
    }

    /// Events of `theta` over `seeds.len()` batches, one seed per batch.
    pub fn matched_counts(
        &self,
        theta: &[f64],
        t: f64,
        shots: usize,
        seeds: &[u64],
    ) -> Result<EventCounts> {
        let noise = self.bound(theta, t)?;
        let parts: Vec<EventCounts> = seeds
            .par_iter()
            .map(|&s| sample_counts(&self.program, &noise, shots, s))
            .collect::<Result<_>>()?;
        let mut total = EventCounts::default();
        for p in &parts {
            total.merge(p);
        }
        Ok(total)
    }

    /// Copy of the circuit with every noise slot bound for `theta`.
    pub fn noisy_circuit(&self, circuit: &Circuit, theta: &[f64], t: f64) -> Result<Circuit> {
        instantiate_noisy_circuit(circuit, &self.model, theta, t)
    }
}

/// Decoded logical error evaluation of policies on a memory circuit that
/// shares the lab's sites (possibly with a different number of rounds).
#[derive(Clone, Debug)]
pub struct Evaluator {
    pub circuit: Circuit,
    pub program: Program,
    pub binder: NoiseBinder,
    pub graph: DecodingGraph,
    pub decoder: Decoder,
}

impl Evaluator {
    /// The decoder prior is built from the model at the optimum of drift
    /// time 0 unless a uniform prior is requested.
    pub fn new(lab: &Lab, circuit: Circuit, kind: DecoderKind, prior: Prior) -> Result<Evaluator> {
        let reference = lab.noisy_circuit(&circuit, &lab.optimum(0.0), 0.0)?;
        let graph = build_decoding_graph(&reference, prior)?;
        let decoder = Decoder::new(&graph, kind)?;
        let program = Program::compile(&circuit);
        let binder = NoiseBinder::new(&program, &lab.model)?;
        Ok(Evaluator {
            circuit,
            program,
            binder,
            graph,
            decoder,
        })
    }

    pub fn record(
        &self,
        lab: &Lab,
        theta: &[f64],
        t: f64,
        shots: usize,
        seed: u64,
    ) -> Result<DetectionRecord> {
        let probs = self.binder.bind(&lab.model, t, theta)?;
        let noise = BoundNoise::new(&self.program, &probs)?;
        sample_program(&self.program, &noise, shots, seed, 0)
    }

    pub fn stats(
        &self,
        lab: &Lab,
        theta: &[f64],
        t: f64,
        shots: usize,
        seed: u64,
    ) -> Result<LogicalStats> {
        let rec = self.record(lab, theta, t, shots, seed)?;
        self.decoder.stats(&rec)
    }
}

/// Result of one training epoch.
#[derive(Clone, Debug)]
pub struct EpochOutcome {
    pub epoch: u64,
    pub thetas: Vec<Vec<f64>>,
    pub counts: Vec<EventCounts>,
    /// Simulation seed of each candidate, reusable for matched scenarios.
    pub seeds: Vec<u64>,
    pub info: UpdateInfo,
}

impl EpochOutcome {
    pub fn total(&self) -> EventCounts {
        let mut t = EventCounts::default();
        for c in &self.counts {
            t.merge(c);
        }
        t
    }
}

/// Training loop state. All randomness of epoch `e` derives from
/// `(seed, e)`, so a checkpoint only needs the policy, buffer and seed.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub hp: AgentHyperparams,
    pub shots: usize,
    pub seed: u64,
    pub policy: PolicyDistribution,
    pub buffer: ReplayBuffer,
}

impl Trainer {
    pub fn new(hp: &AgentHyperparams, shots: usize, seed: u64, mu: Vec<f64>) -> Result<Trainer> {
        hp.validate()?;
        Ok(Trainer {
            hp: hp.clone(),
            shots,
            seed,
            policy: PolicyDistribution::new(mu, hp.sigma_init),
            buffer: ReplayBuffer::new(hp.buffer),
        })
    }

    pub fn from_checkpoint(hp: &AgentHyperparams, shots: usize, ck: Checkpoint) -> Result<Trainer> {
        hp.validate()?;
        Ok(Trainer {
            hp: hp.clone(),
            shots,
            seed: ck.seed,
            policy: ck.policy,
            buffer: ck.buffer,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            policy: self.policy.clone(),
            buffer: self.buffer.clone(),
            seed: self.seed,
        }
    }

    /// Candidate simulation seeds of epoch `e`.
    pub fn epoch_seeds(&self, e: u64) -> Vec<u64> {
        (0..self.hp.batch as u64)
            .map(|b| derive_seed(self.seed, &[tag::TRAIN, e, 1, b]))
            .collect()
    }

    /// Samples, simulates and learns from one batch at drift time `t`.
    pub fn step(&mut self, lab: &Lab, t: f64) -> Result<EpochOutcome> {
        let e = self.policy.epoch;
        let thetas = sample_candidates(
            &self.policy,
            self.hp.batch,
            derive_seed(self.seed, &[tag::TRAIN, e, 0]),
        );
        let seeds = self.epoch_seeds(e);
        let counts: Vec<EventCounts> = thetas
            .par_iter()
            .zip(&seeds)
            .map(|(th, &s)| lab.counts(th, t, self.shots, s))
            .collect::<Result<_>>()?;
        let rewards = counts
            .iter()
            .map(|c| reward_from_counts(c, &lab.graph.classes))
            .collect();
        self.buffer.push(EpochBatch {
            epoch: e,
            mu: self.policy.mu.clone(),
            log_sigma: self.policy.log_sigma.clone(),
            thetas: thetas.clone(),
            rewards,
        });
        let (next, info) = update(&self.policy, &self.buffer, &lab.graph, &self.hp)?;
        self.policy = next;
        Ok(EpochOutcome {
            epoch: e,
            thetas,
            counts,
            seeds,
            info,
        })
    }
}

/// Rescaled policy with physical offsets drawn from `U[-w, w]` around the
/// optimum at time 0.
pub fn random_policy(lab: &Lab, half_width: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    lab.optimum(0.0)
        .iter()
        .zip(&lab.model.scales)
        .map(|(p, s)| p + rng.random_range(-half_width..=half_width) / s)
        .collect()
}
