use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::program::{BoundNoise, Channel, Kernel, Program};

/// Stream for shot block `block` under `seed`. Streams are independent of the
/// order in which blocks are processed.
pub(crate) fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut s = seed;
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut s).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(block);
    rng
}

pub(crate) fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent seed from `seed` and a list of indices.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    let mut s = seed;
    let mut out = splitmix64(&mut s);
    for &p in path {
        s = out ^ p.wrapping_mul(0xD1B5_4A32_D192_ED03);
        out = splitmix64(&mut s);
    }
    out
}

/// X/Z flip bits of 64 shots per qubit plus the measurement record.
pub(crate) struct Frame {
    pub x: Vec<u64>,
    pub z: Vec<u64>,
    pub rec: Vec<u64>,
}

impl Frame {
    pub fn new(p: &Program) -> Frame {
        Frame {
            x: vec![0; p.num_qubits],
            z: vec![0; p.num_qubits],
            rec: vec![0; p.num_measurements],
        }
    }

    pub fn clear(&mut self) {
        self.x.fill(0);
        self.z.fill(0);
    }

    #[inline]
    fn h(&mut self, q: u32) {
        let q = q as usize;
        std::mem::swap(&mut self.x[q], &mut self.z[q]);
    }

    #[inline]
    fn cz(&mut self, a: u32, b: u32) {
        let (a, b) = (a as usize, b as usize);
        self.z[a] ^= self.x[b];
        self.z[b] ^= self.x[a];
    }
}

/// Bernoulli(p) mask over 64 lanes by geometric gap sampling.
#[inline]
fn event_mask(rng: &mut ChaCha8Rng, noise: &BoundNoise, slot: usize) -> u64 {
    let p = noise.p[slot];
    if p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return !0;
    }
    let u = 1.0 - rng.random::<f64>();
    if u <= noise.none_below[slot] {
        return 0;
    }
    let ln_q = noise.ln_q[slot];
    let mut mask = 0u64;
    let mut pos = (u.ln() / ln_q) as u64;
    while pos < 64 {
        mask |= 1 << pos;
        let u = 1.0 - rng.random::<f64>();
        pos += 1 + (u.ln() / ln_q) as u64;
    }
    mask
}

/// Runs the program on one block of 64 shots. Resets and measurements
/// randomize the Z frame so that a non-deterministic detector would fire with
/// probability one half instead of silently reading zero.
pub(crate) fn run_block(
    program: &Program,
    noise: &BoundNoise,
    rng: &mut ChaCha8Rng,
    f: &mut Frame,
) {
    f.clear();
    let mut m = 0usize;
    for k in &program.kernels {
        match k {
            Kernel::Reset(t) => {
                for &q in t {
                    f.x[q as usize] = 0;
                    f.z[q as usize] = rng.next_u64();
                }
            }
            Kernel::H(t) => {
                for &q in t {
                    f.h(q);
                }
            }
            Kernel::Cz(pairs) => {
                for &(a, b) in pairs {
                    f.cz(a, b);
                }
            }
            Kernel::Measure(t) => {
                for &q in t {
                    f.rec[m] = f.x[q as usize];
                    f.z[q as usize] = rng.next_u64();
                    m += 1;
                }
            }
            Kernel::Noise {
                slot,
                channel,
                targets,
            } => match channel {
                Channel::XFlip => {
                    for &q in targets {
                        f.x[q as usize] ^= event_mask(rng, noise, *slot);
                    }
                }
                Channel::Depolarize1 => {
                    for &q in targets {
                        let mut mask = event_mask(rng, noise, *slot);
                        while mask != 0 {
                            let lane = mask.trailing_zeros();
                            mask &= mask - 1;
                            let r: u32 = rng.random_range(1..4);
                            let bit = 1u64 << lane;
                            if r & 1 != 0 {
                                f.x[q as usize] ^= bit;
                            }
                            if r & 2 != 0 {
                                f.z[q as usize] ^= bit;
                            }
                        }
                    }
                }
                Channel::Depolarize2 => {
                    for pair in targets.chunks_exact(2) {
                        let (a, b) = (pair[0] as usize, pair[1] as usize);
                        let mut mask = event_mask(rng, noise, *slot);
                        while mask != 0 {
                            let lane = mask.trailing_zeros();
                            mask &= mask - 1;
                            let r: u32 = rng.random_range(1..16);
                            let bit = 1u64 << lane;
                            if r & 1 != 0 {
                                f.x[a] ^= bit;
                            }
                            if r & 2 != 0 {
                                f.z[a] ^= bit;
                            }
                            if r & 4 != 0 {
                                f.x[b] ^= bit;
                            }
                            if r & 8 != 0 {
                                f.z[b] ^= bit;
                            }
                        }
                    }
                }
            },
        }
    }
}

#[inline]
pub(crate) fn parity(rec: &[u64], ms: &[u32]) -> u64 {
    ms.iter().fold(0, |acc, &m| acc ^ rec[m as usize])
}
