//! Experiment orchestration: configuration, steering, phase diagrams,
//! scaling, gradient checks, recovery and spectral analysis.

pub mod config;
pub mod gradcheck;
pub mod lab;
pub mod output;
pub mod psd;
pub mod recovery;
pub mod report;
pub mod scaling;
pub mod steering;

pub use config::ExperimentConfig;
pub use lab::{Evaluator, Lab, Trainer};
pub use steering::{
    run_phase_diagram, run_steering, steering_advantage, PhaseDiagram, ScenarioTrace,
};
