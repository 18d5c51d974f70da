//! Versioned JSON experiment configuration (`"schema": 1`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::AgentHyperparams;
use crate::circuit::{build_repetition_code_memory, build_surface_code_memory, Basis, Circuit};
use crate::decoder::{DecoderKind, Prior};
use crate::error::{Error, Result};
use crate::noise::{DriftProfile, ModelSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodeKind {
    Repetition,
    Surface,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub enabled: bool,
    /// Physical perturbation widths.
    pub sigma_grid: Vec<f64>,
    pub shots: usize,
    pub draws: usize,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            enabled: true,
            sigma_grid: vec![0.0, 0.05, 0.1, 0.2, 0.4],
            shots: 100_000,
            draws: 10,
        }
    }
}

/// Periodic decoded evaluation of the learned policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub enabled: bool,
    pub every: usize,
    pub shots: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            enabled: false,
            every: 5,
            shots: 20_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseConfig {
    /// Drift frequencies in 1/epochs.
    pub frequencies: Vec<f64>,
    pub entropies: Vec<f64>,
    /// Drift amplitude in rescaled policy units.
    pub amplitude: f64,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        PhaseConfig {
            frequencies: vec![1.0 / 1000.0, 1.0 / 300.0, 1.0 / 30.0],
            entropies: vec![0.1, 0.01, 0.001],
            amplitude: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingConfig {
    pub distances: Vec<usize>,
    pub params_per_site: Vec<usize>,
    pub epochs: usize,
    /// Initial policy drawn from `U[-w, w]` (physical units).
    pub init_half_width: f64,
    pub eval_every: usize,
    pub eval_shots: usize,
    /// Epochs skipped before fitting the convergence rate.
    pub fit_skip: usize,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig {
            distances: vec![3, 5, 7],
            params_per_site: vec![1, 10],
            epochs: 300,
            init_half_width: 0.5,
            eval_every: 5,
            eval_shots: 20_000,
            fit_skip: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckConfig {
    pub directions: usize,
    pub shots: usize,
    /// Rescaled length of each finite-difference step.
    pub step: f64,
    /// Rescaled offset of the base policy from the optimum.
    pub base_offset: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            directions: 40,
            shots: 1_000_000,
            step: 0.1,
            base_offset: 0.3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoveryConfig {
    /// Rounds of the decoded memory circuit.
    pub cycles: usize,
    pub eval_shots: usize,
    pub eval_every: usize,
    pub target: [f64; 2],
    pub epochs: usize,
    /// Recovered when within this factor of the reference.
    pub tolerance: f64,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        RecoveryConfig {
            cycles: 25,
            eval_shots: 20_000,
            eval_every: 10,
            target: [0.45, 0.5],
            epochs: 800,
            tolerance: 1.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsdConfig {
    pub points: usize,
    /// Gaussian smoothing width of the filter in grid points (0 disables).
    pub smoothing: f64,
}

impl Default for PsdConfig {
    fn default() -> Self {
        PsdConfig {
            points: 64,
            smoothing: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub code: CodeKind,
    pub distance: usize,
    /// Rounds per shot.
    pub cycles: usize,
    pub basis: Basis,
    pub cycles_per_candidate: usize,
    pub epochs: usize,
    pub seed: u64,
    pub agent: AgentHyperparams,
    pub model: ModelSpec,
    pub prior: Prior,
    pub decoder: DecoderKind,
    pub calibration: CalibrationConfig,
    pub evaluation: EvalConfig,
    /// Also simulate the fixed, optimal and learned scenarios.
    pub scenarios: bool,
    pub phase: PhaseConfig,
    pub scaling: ScalingConfig,
    pub gradcheck: GradcheckConfig,
    pub recovery: RecoveryConfig,
    pub psd: PsdConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema: SCHEMA_VERSION,
            code: CodeKind::Surface,
            distance: 3,
            cycles: 10,
            basis: Basis::Z,
            cycles_per_candidate: 3_600,
            epochs: 300,
            seed: 0,
            agent: AgentHyperparams::default(),
            model: ModelSpec {
                drift: crate::noise::DriftSpec {
                    profile: DriftProfile::Sinusoid {
                        frequency: 1.0 / 1000.0,
                        amplitude: 1.0,
                    },
                    sites: None,
                },
                ..ModelSpec::default()
            },
            prior: Prior::TrueModel,
            decoder: DecoderKind::Mwpm,
            calibration: CalibrationConfig::default(),
            evaluation: EvalConfig::default(),
            scenarios: true,
            phase: PhaseConfig::default(),
            scaling: ScalingConfig::default(),
            gradcheck: GradcheckConfig::default(),
            recovery: RecoveryConfig::default(),
            psd: PsdConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn shots_per_candidate(&self) -> usize {
        self.cycles_per_candidate / self.cycles.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema {} (expected {SCHEMA_VERSION})",
                self.schema
            )));
        }
        if self.cycles == 0 {
            return Err(Error::InvalidCycles(0));
        }
        if self.cycles_per_candidate == 0 || self.cycles_per_candidate % self.cycles != 0 {
            return Err(Error::Config(format!(
                "cycles_per_candidate ({}) must be a positive multiple of cycles ({})",
                self.cycles_per_candidate, self.cycles
            )));
        }
        if self.code == CodeKind::Surface && (self.distance < 3 || self.distance % 2 == 0) {
            return Err(Error::InvalidDistance(self.distance));
        }
        self.agent.validate()?;
        if self.evaluation.every == 0
            || self.scaling.eval_every == 0
            || self.recovery.eval_every == 0
        {
            return Err(Error::Config("evaluation cadence must be positive".into()));
        }
        if let Prior::Uniform { q0 } = self.prior {
            if !(q0 > 0.0 && q0 < 0.5) {
                return Err(Error::Config(format!(
                    "uniform prior q0 must lie in (0, 0.5), got {q0}"
                )));
            }
        }
        let [lo, hi] = self.recovery.target;
        if !(0.0 < lo && lo < hi && hi <= 0.5) {
            return Err(Error::InvalidRange { lo, hi });
        }
        Ok(())
    }

    /// Memory circuit of the configured code with `cycles` rounds.
    pub fn circuit_with(&self, distance: usize, cycles: usize) -> Result<Circuit> {
        match self.code {
            CodeKind::Surface => build_surface_code_memory(distance, cycles, self.basis),
            CodeKind::Repetition => build_repetition_code_memory(distance, cycles),
        }
    }

    pub fn circuit(&self) -> Result<Circuit> {
        self.circuit_with(self.distance, self.cycles)
    }
}
