use super::{Detector, Instruction, NoiseRole, Op, Phase};

/// Incremental instruction emitter shared by the code constructions.
#[derive(Default)]
pub(super) struct Builder {
    pub instructions: Vec<Instruction>,
    pub detectors: Vec<Detector>,
    pub num_measurements: usize,
    pub cycle: u32,
    /// Single-qubit site owning each qubit.
    pub sq_site: Vec<usize>,
}

impl Builder {
    pub fn new(sq_site: Vec<usize>) -> Self {
        Builder {
            sq_site,
            ..Default::default()
        }
    }

    fn push(&mut self, op: Op, targets: Vec<u32>, site: Option<usize>, role: Option<NoiseRole>) {
        self.instructions.push(Instruction {
            op,
            targets,
            site,
            role,
            cycle: self.cycle,
        });
    }

    /// Reset followed by a readout-role bit flip on each target.
    pub fn reset(&mut self, qubits: &[u32]) {
        if qubits.is_empty() {
            return;
        }
        self.push(Op::ResetZ, qubits.to_vec(), None, None);
        for &q in qubits {
            self.push(
                Op::XFlip(None),
                vec![q],
                Some(self.sq_site[q as usize]),
                Some(NoiseRole::Readout),
            );
        }
    }

    /// Hadamard layer, each gate followed by its site's depolarization.
    pub fn h(&mut self, qubits: &[u32]) {
        if qubits.is_empty() {
            return;
        }
        self.push(Op::H, qubits.to_vec(), None, None);
        self.idle(qubits);
    }

    /// Depolarizing single-qubit layer slot without a Clifford gate.
    pub fn idle(&mut self, qubits: &[u32]) {
        for &q in qubits {
            self.push(
                Op::Depolarize1(None),
                vec![q],
                Some(self.sq_site[q as usize]),
                Some(NoiseRole::Gate),
            );
        }
    }

    /// CZ layer over `(a, b, site)` triples.
    pub fn cz(&mut self, pairs: &[(u32, u32, usize)]) {
        if pairs.is_empty() {
            return;
        }
        let targets = pairs.iter().flat_map(|&(a, b, _)| [a, b]).collect();
        self.push(Op::Cz, targets, None, None);
        for &(a, b, site) in pairs {
            self.push(
                Op::Depolarize2(None),
                vec![a, b],
                Some(site),
                Some(NoiseRole::Gate),
            );
        }
    }

    /// Readout-role bit flip then measurement; returns the record indices.
    pub fn measure(&mut self, qubits: &[u32]) -> Vec<usize> {
        for &q in qubits {
            self.push(
                Op::XFlip(None),
                vec![q],
                Some(self.sq_site[q as usize]),
                Some(NoiseRole::Readout),
            );
        }
        self.push(Op::MeasureZ, qubits.to_vec(), None, None);
        let start = self.num_measurements;
        self.num_measurements += qubits.len();
        (start..self.num_measurements).collect()
    }

    pub fn detector(&mut self, measurements: Vec<usize>, space: u32, time: u32, phase: Phase) {
        let id = self.detectors.len();
        self.detectors.push(Detector {
            id,
            measurements,
            space,
            time,
            phase,
        });
    }
}
