//! Bit-packed Pauli-frame sampler.
//!
//! Shots are processed in blocks of 64, one bit per shot. Each block draws
//! from its own ChaCha8 stream keyed by `(seed, block)`, so results do not
//! depend on how blocks are scheduled over threads.

mod faults;
mod frame;
mod program;
mod record;

pub use faults::{Effect, FaultTable};
pub use frame::derive_seed;
pub use program::{BoundNoise, Channel, NoiseSlot, Program};
pub use record::{DetectionRecord, EventCounts};

use rayon::prelude::*;

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use frame::{block_rng, parity, run_block, Frame};
use record::words_for;

/// Samples `shots` shots of a circuit whose noise instructions are all bound.
pub fn sample(c: &Circuit, shots: usize, seed: u64) -> Result<DetectionRecord> {
    let program = Program::compile(c);
    let probs = Program::probabilities_of(c)?;
    let noise = BoundNoise::new(&program, &probs)?;
    sample_program(&program, &noise, shots, seed, 0)
}

fn check_shots(shots: usize) -> Result<()> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be >= 1".into()));
    }
    Ok(())
}

fn lane_mask(shots: usize, block: usize) -> u64 {
    let lanes = (shots - block * 64).min(64);
    if lanes == 64 {
        !0
    } else {
        (1u64 << lanes) - 1
    }
}

/// Full record sampler. `block_offset` shifts the RNG block counter so a run
/// can be split into consecutive pieces: sampling `2N` shots equals
/// concatenating an `N`-shot run at offset 0 with one at offset `N/64`
/// (for `N` a multiple of 64).
pub fn sample_program(
    program: &Program,
    noise: &BoundNoise,
    shots: usize,
    seed: u64,
    block_offset: u64,
) -> Result<DetectionRecord> {
    check_shots(shots)?;
    let words = words_for(shots);
    let nd = program.num_detectors();
    let blocks: Vec<(Vec<u64>, u64)> = (0..words)
        .into_par_iter()
        .map_init(
            || Frame::new(program),
            |frame, b| {
                let mut rng = block_rng(seed, block_offset + b as u64);
                run_block(program, noise, &mut rng, frame);
                let mask = lane_mask(shots, b);
                let dets = program
                    .detectors
                    .iter()
                    .map(|ms| parity(&frame.rec, ms) & mask)
                    .collect();
                (dets, parity(&frame.rec, &program.observable) & mask)
            },
        )
        .collect();
    let mut rec = DetectionRecord::zeros(nd, shots, program.cycles);
    for (b, (dets, obs)) in blocks.into_iter().enumerate() {
        for (d, w) in dets.into_iter().enumerate() {
            rec.events[d * words + b] = w;
        }
        rec.logical[b] = obs;
    }
    Ok(rec)
}

/// Streaming variant returning only per-detector counts.
pub fn sample_counts(
    program: &Program,
    noise: &BoundNoise,
    shots: usize,
    seed: u64,
) -> Result<EventCounts> {
    check_shots(shots)?;
    let words = words_for(shots);
    let nd = program.num_detectors();
    let zero = || EventCounts {
        shots: 0,
        per_detector: vec![0; nd],
        logical_flips: 0,
    };
    let counts = (0..words)
        .into_par_iter()
        .fold(
            || (Frame::new(program), zero()),
            |(mut frame, mut acc), b| {
                let mut rng = block_rng(seed, b as u64);
                run_block(program, noise, &mut rng, &mut frame);
                let mask = lane_mask(shots, b);
                for (c, ms) in acc.per_detector.iter_mut().zip(&program.detectors) {
                    *c += (parity(&frame.rec, ms) & mask).count_ones() as u64;
                }
                acc.logical_flips +=
                    (parity(&frame.rec, &program.observable) & mask).count_ones() as u64;
                acc.shots += mask.count_ones() as u64;
                (frame, acc)
            },
        )
        .map(|(_, acc)| acc)
        .reduce(zero, |mut a, b| {
            a.merge(&b);
            a
        });
    Ok(counts)
}

/// Per-detector event fractions and their mean (the surrogate objective).
pub fn detection_fractions(rec: &DetectionRecord) -> (Vec<f64>, f64) {
    let counts = EventCounts::from(rec);
    (counts.rates(), counts.mean_rate())
}

/// Total number of detection events in the record.
pub fn count_events(rec: &DetectionRecord) -> u64 {
    rec.events.iter().map(|w| w.count_ones() as u64).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_repetition_code_memory, build_surface_code_memory, Basis};

    #[test]
    fn noiseless_circuits_are_silent() {
        for c in [
            build_repetition_code_memory(5, 4).unwrap(),
            build_surface_code_memory(3, 3, Basis::Z).unwrap(),
            build_surface_code_memory(5, 2, Basis::X).unwrap(),
        ] {
            let rec = sample(&c.with_uniform_noise(0.0), 1000, 1).unwrap();
            assert_eq!(count_events(&rec), 0);
            assert_eq!(rec.logical_count(), 0);
        }
    }

    #[test]
    fn unbound_noise_is_rejected() {
        let c = build_repetition_code_memory(3, 1).unwrap();
        assert!(matches!(sample(&c, 10, 0), Err(Error::UnboundNoise(_))));
    }

    #[test]
    fn counts_agree_with_record() {
        let c = build_surface_code_memory(3, 3, Basis::Z)
            .unwrap()
            .with_uniform_noise(0.01);
        let program = Program::compile(&c);
        let noise = BoundNoise::new(&program, &Program::probabilities_of(&c).unwrap()).unwrap();
        let rec = sample_program(&program, &noise, 1000, 9, 0).unwrap();
        let counts = sample_counts(&program, &noise, 1000, 9).unwrap();
        assert_eq!(EventCounts::from(&rec), counts);
        assert_eq!(counts.total(), count_events(&rec));
    }

    #[test]
    fn fractions_of_trivial_records() {
        let mut r = DetectionRecord::zeros(2, 10, 1);
        assert_eq!(detection_fractions(&r), (vec![0.0, 0.0], 0.0));
        for s in 0..10 {
            r.set_event(0, s, true);
            r.set_event(1, s, true);
        }
        assert_eq!(detection_fractions(&r), (vec![1.0, 1.0], 1.0));
        assert_eq!(count_events(&r), 20);
    }
}
