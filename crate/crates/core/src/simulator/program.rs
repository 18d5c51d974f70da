use crate::circuit::{Circuit, NoiseRole, Op};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Channel {
    Depolarize1,
    Depolarize2,
    XFlip,
}

impl Channel {
    pub fn arity(self) -> usize {
        match self {
            Channel::Depolarize2 => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) enum Kernel {
    Reset(Vec<u32>),
    H(Vec<u32>),
    Cz(Vec<(u32, u32)>),
    Measure(Vec<u32>),
    Noise {
        slot: usize,
        channel: Channel,
        targets: Vec<u32>,
    },
}

/// Metadata of one noise instruction of the source circuit.
#[derive(Clone, Debug)]
pub struct NoiseSlot {
    pub instruction: usize,
    pub channel: Channel,
    pub targets: Vec<u32>,
    pub site: Option<usize>,
    pub role: Option<NoiseRole>,
    pub cycle: u32,
}

/// A circuit lowered to frame kernels. Noise probabilities live outside the
/// program so that one compilation serves every policy candidate.
#[derive(Clone, Debug)]
pub struct Program {
    pub(crate) kernels: Vec<Kernel>,
    pub num_qubits: usize,
    pub num_measurements: usize,
    pub detectors: Vec<Vec<u32>>,
    pub observable: Vec<u32>,
    pub slots: Vec<NoiseSlot>,
    pub cycles: usize,
}

impl Program {
    pub fn compile(c: &Circuit) -> Program {
        let mut kernels = Vec::with_capacity(c.instructions.len());
        let mut slots = Vec::new();
        for (i, ins) in c.instructions.iter().enumerate() {
            let t = ins.targets.clone();
            let k = match ins.op {
                Op::ResetZ => Kernel::Reset(t),
                Op::H => Kernel::H(t),
                Op::Cz => Kernel::Cz(t.chunks(2).map(|p| (p[0], p[1])).collect()),
                Op::MeasureZ => Kernel::Measure(t),
                Op::Depolarize1(_) | Op::Depolarize2(_) | Op::XFlip(_) => {
                    let channel = match ins.op {
                        Op::Depolarize1(_) => Channel::Depolarize1,
                        Op::Depolarize2(_) => Channel::Depolarize2,
                        _ => Channel::XFlip,
                    };
                    let slot = slots.len();
                    slots.push(NoiseSlot {
                        instruction: i,
                        channel,
                        targets: t.clone(),
                        site: ins.site,
                        role: ins.role,
                        cycle: ins.cycle,
                    });
                    Kernel::Noise {
                        slot,
                        channel,
                        targets: t,
                    }
                }
            };
            kernels.push(k);
        }
        Program {
            kernels,
            num_qubits: c.num_qubits(),
            num_measurements: c.num_measurements,
            detectors: c
                .detectors
                .iter()
                .map(|d| d.measurements.iter().map(|&m| m as u32).collect())
                .collect(),
            observable: c.observable.iter().map(|&m| m as u32).collect(),
            slots,
            cycles: c.cycles,
        }
    }

    pub fn num_detectors(&self) -> usize {
        self.detectors.len()
    }

    pub fn num_slots(&self) -> usize {
        self.slots.len()
    }

    /// Probabilities currently written into the source circuit's noise
    /// instructions, in slot order.
    pub fn probabilities_of(c: &Circuit) -> Result<Vec<f64>> {
        c.noise_instructions()
            .map(|(i, ins)| ins.op.probability().ok_or(Error::UnboundNoise(i)))
            .collect()
    }
}

/// Per-slot constants for the geometric-gap Bernoulli sampler.
#[derive(Clone, Debug)]
pub struct BoundNoise {
    pub(crate) p: Vec<f64>,
    /// `(1-p)^64`: a uniform draw below this means no event in the block.
    pub(crate) none_below: Vec<f64>,
    pub(crate) ln_q: Vec<f64>,
}

impl BoundNoise {
    pub fn new(program: &Program, probs: &[f64]) -> Result<BoundNoise> {
        if probs.len() != program.slots.len() {
            return Err(Error::LengthMismatch {
                expected: program.slots.len(),
                got: probs.len(),
            });
        }
        for (s, &p) in program.slots.iter().zip(probs) {
            let op = match s.channel {
                Channel::Depolarize1 => Op::Depolarize1(Some(p)),
                Channel::Depolarize2 => Op::Depolarize2(Some(p)),
                Channel::XFlip => Op::XFlip(Some(p)),
            };
            let max = op.max_probability();
            if !(0.0..=max).contains(&p) {
                return Err(Error::InvalidProbability {
                    op: op.name(),
                    value: p,
                    max,
                });
            }
        }
        Ok(BoundNoise {
            p: probs.to_vec(),
            none_below: probs.iter().map(|&p| (1.0 - p).powi(64)).collect(),
            ln_q: probs.iter().map(|&p| (1.0 - p).ln()).collect(),
        })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }
}
