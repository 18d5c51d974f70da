//! Layered Clifford memory circuits with detectors and a logical observable.
//!
//! Circuits are built from a minimal instruction set (`R`, `H`, `CZ`, `M` plus
//! three Pauli noise channels). Every noise instruction carries the
//! [`GateSite`] it models; a site is a spatial gate location that is reused
//! every cycle and owns the learnable control parameters bound to it.

mod builder;
mod dump;
mod regions;
mod repetition;
mod surface;

pub use dump::{dump_circuit, parse_dump};
pub use regions::{compute_detecting_regions, DetectingRegionMap};
pub use repetition::build_repetition_code_memory;
pub use surface::build_surface_code_memory;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QubitId {
    pub index: u32,
    /// (row, col) on the doubled grid: data qubits sit on odd coordinates,
    /// measure qubits on even ones.
    pub coord: (i32, i32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SiteKind {
    /// Single-qubit layer slot of one qubit.
    SingleQubit,
    /// CZ between a measure qubit and one of its data neighbours.
    Cz,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateSite {
    pub id: usize,
    pub kind: SiteKind,
    pub targets: Vec<u32>,
    /// Within-cycle layer: 0 for single-qubit slots, 1..=4 for the CZ layers.
    pub layer: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    X,
    Z,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Op {
    ResetZ,
    H,
    Cz,
    MeasureZ,
    /// Probability `None` marks an unbound noise slot.
    Depolarize1(Option<f64>),
    Depolarize2(Option<f64>),
    XFlip(Option<f64>),
}

impl Op {
    pub fn is_noise(&self) -> bool {
        matches!(self, Op::Depolarize1(_) | Op::Depolarize2(_) | Op::XFlip(_))
    }

    pub fn probability(&self) -> Option<f64> {
        match *self {
            Op::Depolarize1(p) | Op::Depolarize2(p) | Op::XFlip(p) => p,
            _ => None,
        }
    }

    pub fn with_probability(self, p: f64) -> Op {
        match self {
            Op::Depolarize1(_) => Op::Depolarize1(Some(p)),
            Op::Depolarize2(_) => Op::Depolarize2(Some(p)),
            Op::XFlip(_) => Op::XFlip(Some(p)),
            other => other,
        }
    }

    /// Largest meaningful probability for the channel.
    pub fn max_probability(&self) -> f64 {
        match self {
            Op::Depolarize1(_) => 0.75,
            Op::Depolarize2(_) => 15.0 / 16.0,
            _ => 1.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Op::ResetZ => "R",
            Op::H => "H",
            Op::Cz => "CZ",
            Op::MeasureZ => "M",
            Op::Depolarize1(_) => "DEPOLARIZE1",
            Op::Depolarize2(_) => "DEPOLARIZE2",
            Op::XFlip(_) => "X_ERROR",
        }
    }
}

/// Role of a noise instruction within its site.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NoiseRole {
    /// Depolarization following a gate (or an idle slot) of the site.
    Gate,
    /// Bit flip modelling reset or readout error.
    Readout,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instruction {
    pub op: Op,
    pub targets: Vec<u32>,
    pub site: Option<usize>,
    pub role: Option<NoiseRole>,
    /// Cycle index the instruction belongs to; the final readout uses `T`.
    pub cycle: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    First,
    Bulk,
    Final,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detector {
    pub id: usize,
    /// Absolute measurement-record indices.
    pub measurements: Vec<usize>,
    /// Measure qubit the detector is attached to.
    pub space: u32,
    pub time: u32,
    pub phase: Phase,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CodeFamily {
    Repetition,
    Surface,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub family: CodeFamily,
    pub distance: usize,
    pub cycles: usize,
    pub basis: Basis,
    pub qubits: Vec<QubitId>,
    pub data_qubits: Vec<u32>,
    pub measure_qubits: Vec<u32>,
    pub sites: Vec<GateSite>,
    pub instructions: Vec<Instruction>,
    pub num_measurements: usize,
    pub detectors: Vec<Detector>,
    pub observable: Vec<usize>,
}

impl Circuit {
    pub fn num_qubits(&self) -> usize {
        self.qubits.len()
    }

    pub fn num_detectors(&self) -> usize {
        self.detectors.len()
    }

    pub fn count_sites(&self, kind: SiteKind) -> usize {
        self.sites.iter().filter(|s| s.kind == kind).count()
    }

    /// Indices of the noise instructions, in program order.
    pub fn noise_instructions(&self) -> impl Iterator<Item = (usize, &Instruction)> {
        self.instructions
            .iter()
            .enumerate()
            .filter(|(_, ins)| ins.op.is_noise())
    }

    /// Sets every noise instruction to probability `p` (clamped to the channel maximum).
    pub fn with_uniform_noise(&self, p: f64) -> Circuit {
        let mut out = self.clone();
        for ins in out.instructions.iter_mut().filter(|i| i.op.is_noise()) {
            let q = p.min(ins.op.max_probability());
            ins.op = ins.op.with_probability(q);
        }
        out
    }

    /// Structural and probability checks; every built or parsed circuit passes.
    pub fn validate(&self) -> Result<()> {
        let nq = self.qubits.len() as u32;
        let mut measurements = 0usize;
        for (i, ins) in self.instructions.iter().enumerate() {
            if ins.targets.iter().any(|&t| t >= nq) {
                return Err(Error::InvalidArgument(format!(
                    "instruction {i} targets a qubit outside 0..{nq}"
                )));
            }
            let arity = match ins.op {
                Op::Cz | Op::Depolarize2(_) => 2,
                _ => 1,
            };
            if ins.targets.is_empty() || ins.targets.len() % arity != 0 {
                return Err(Error::InvalidArgument(format!(
                    "instruction {i} has {} targets for arity {arity}",
                    ins.targets.len()
                )));
            }
            if let Some(p) = ins.op.probability() {
                let max = ins.op.max_probability();
                if !(0.0..=max).contains(&p) || p.is_nan() {
                    return Err(Error::InvalidProbability {
                        op: ins.op.name(),
                        value: p,
                        max,
                    });
                }
            }
            if let Some(s) = ins.site {
                if s >= self.sites.len() {
                    return Err(Error::InvalidArgument(format!(
                        "instruction {i} references unknown site {s}"
                    )));
                }
            }
            if ins.op == Op::MeasureZ {
                measurements += ins.targets.len();
            }
        }
        if measurements != self.num_measurements {
            return Err(Error::InvalidArgument(format!(
                "measurement count {measurements} != recorded {}",
                self.num_measurements
            )));
        }
        let in_range = |m: &usize| *m < self.num_measurements;
        if !self
            .detectors
            .iter()
            .all(|d| d.measurements.iter().all(in_range))
            || !self.observable.iter().all(in_range)
        {
            return Err(Error::InvalidArgument(
                "detector or observable references a measurement out of range".into(),
            ));
        }
        Ok(())
    }
}

pub(crate) fn check_distance(d: usize) -> Result<()> {
    if d < 3 || d % 2 == 0 {
        return Err(Error::InvalidDistance(d));
    }
    Ok(())
}

pub(crate) fn check_cycles(t: usize) -> Result<()> {
    if t < 1 {
        return Err(Error::InvalidCycles(t));
    }
    Ok(())
}
