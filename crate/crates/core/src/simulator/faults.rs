use super::frame::{parity, Frame};
use super::program::{Kernel, Program};

/// Detectors and observable flipped by one Pauli error in a noiseless run.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Effect {
    /// Sorted detector indices.
    pub dets: Vec<u32>,
    pub obs: bool,
}

impl Effect {
    pub fn is_empty(&self) -> bool {
        self.dets.is_empty() && !self.obs
    }

    /// Symmetric difference (the effect of applying both errors).
    pub fn xor(&self, other: &Effect) -> Effect {
        let (a, b) = (&self.dets, &other.dets);
        let mut dets = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            if j == b.len() || (i < a.len() && a[i] < b[j]) {
                dets.push(a[i]);
                i += 1;
            } else if i == a.len() || b[j] < a[i] {
                dets.push(b[j]);
                j += 1;
            } else {
                i += 1;
                j += 1;
            }
        }
        Effect {
            dets,
            obs: self.obs ^ other.obs,
        }
    }
}

/// Effects of X and Z injected on each target of each noise slot, right at
/// the slot's position in the program.
#[derive(Clone, Debug)]
pub struct FaultTable {
    /// Start of each slot's entries in `effects`.
    offsets: Vec<usize>,
    /// `[X effect, Z effect]` per (slot, target).
    effects: Vec<[Effect; 2]>,
}

impl FaultTable {
    /// Deterministic propagation of every single-qubit X and Z injection,
    /// 64 injections per frame word.
    pub fn build(program: &Program) -> FaultTable {
        let mut offsets = Vec::with_capacity(program.slots.len() + 1);
        let mut injections: Vec<(usize, u32, usize)> = Vec::new();
        for (s, slot) in program.slots.iter().enumerate() {
            offsets.push(injections.len() / 2);
            for &q in &slot.targets {
                injections.push((s, q, 0));
                injections.push((s, q, 1));
            }
        }
        offsets.push(injections.len() / 2);

        let mut effects = vec![[Effect::default(), Effect::default()]; injections.len() / 2];
        let mut frame = Frame::new(program);
        let kernel_of_slot: Vec<usize> = {
            let mut v = vec![0; program.slots.len()];
            for (k, kern) in program.kernels.iter().enumerate() {
                if let Kernel::Noise { slot, .. } = kern {
                    v[*slot] = k;
                }
            }
            v
        };
        let mut measure_base = vec![0usize; program.kernels.len()];
        let mut m = 0;
        for (k, kern) in program.kernels.iter().enumerate() {
            measure_base[k] = m;
            if let Kernel::Measure(t) = kern {
                m += t.len();
            }
        }

        for (chunk_index, chunk) in injections.chunks(64).enumerate() {
            frame.clear();
            frame.rec.fill(0);
            let start = kernel_of_slot[chunk[0].0];
            let mut next = 0;
            let mut m = measure_base[start];
            for kern in &program.kernels[start..] {
                match kern {
                    Kernel::Reset(t) => {
                        for &q in t {
                            frame.x[q as usize] = 0;
                            frame.z[q as usize] = 0;
                        }
                    }
                    Kernel::H(t) => {
                        for &q in t {
                            let q = q as usize;
                            std::mem::swap(&mut frame.x[q], &mut frame.z[q]);
                        }
                    }
                    Kernel::Cz(pairs) => {
                        for &(a, b) in pairs {
                            let (a, b) = (a as usize, b as usize);
                            frame.z[a] ^= frame.x[b];
                            frame.z[b] ^= frame.x[a];
                        }
                    }
                    Kernel::Measure(t) => {
                        for &q in t {
                            frame.rec[m] = frame.x[q as usize];
                            frame.z[q as usize] = 0;
                            m += 1;
                        }
                    }
                    Kernel::Noise { slot, .. } => {
                        while next < chunk.len() && chunk[next].0 == *slot {
                            let (_, q, pauli) = chunk[next];
                            let bit = 1u64 << next;
                            if pauli == 0 {
                                frame.x[q as usize] ^= bit;
                            } else {
                                frame.z[q as usize] ^= bit;
                            }
                            next += 1;
                        }
                    }
                }
            }
            let base = chunk_index * 64;
            for (d, ms) in program.detectors.iter().enumerate() {
                let mut w = parity(&frame.rec, ms);
                while w != 0 {
                    let lane = w.trailing_zeros() as usize;
                    w &= w - 1;
                    let inj = base + lane;
                    effects[inj / 2][inj % 2].dets.push(d as u32);
                }
            }
            let mut w = parity(&frame.rec, &program.observable);
            while w != 0 {
                let lane = w.trailing_zeros() as usize;
                w &= w - 1;
                let inj = base + lane;
                effects[inj / 2][inj % 2].obs = true;
            }
        }
        FaultTable { offsets, effects }
    }

    pub fn num_slots(&self) -> usize {
        self.offsets.len() - 1
    }

    /// `[X, Z]` effects for each target of `slot`, in target order.
    pub fn slot(&self, slot: usize) -> &[[Effect; 2]] {
        &self.effects[self.offsets[slot]..self.offsets[slot + 1]]
    }

    /// Effect of the Pauli given by `(x, z)` bits on one target.
    pub fn pauli(&self, slot: usize, target: usize, x: bool, z: bool) -> Effect {
        let e = &self.slot(slot)[target];
        match (x, z) {
            (false, false) => Effect::default(),
            (true, false) => e[0].clone(),
            (false, true) => e[1].clone(),
            (true, true) => e[0].xor(&e[1]),
        }
    }
}
