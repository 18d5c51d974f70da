//! Shared oracles and property checks for the integration tests and the
//! acceptance runner.
#![allow(dead_code)]

use std::collections::HashMap;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use qecsteer::agent::{
    sample_candidates, update, AgentHyperparams, EpochBatch, PolicyDistribution, ReplayBuffer,
};
use qecsteer::circuit::{
    build_repetition_code_memory, build_surface_code_memory, Basis, Circuit, Op, Phase,
};
use qecsteer::decoder::DecoderKind;
use qecsteer::detgraph::{DetectorClass, FactorGraph};
use qecsteer::harness::lab::{tag, Lab};
use qecsteer::harness::steering::{run_steering_on, RunIo};
use qecsteer::harness::ExperimentConfig;
use qecsteer::noise::{ControlParameter, DriftProfile, DriftSpec};
use qecsteer::simulator::{derive_seed, sample};

/// Exact distribution of `(detector bits, observable bit)` of a small
/// circuit, packed as `obs << n | dets`. Faults are propagated by a
/// standalone Pauli tracker over the circuit's instruction list.
pub fn exact_outcome_distribution(c: &Circuit) -> Vec<f64> {
    let nd = c.num_detectors();
    assert!(nd < 24, "too many detectors for exhaustive enumeration");
    let mut dist = vec![0.0; 1 << (nd + 1)];
    dist[0] = 1.0;
    for (i, ins) in c.instructions.iter().enumerate() {
        let Some(p) = ins.op.probability() else {
            continue;
        };
        // Outcomes of one independent error component: (probability, paulis).
        let mut components: Vec<Vec<(f64, Vec<(u32, bool, bool)>)>> = Vec::new();
        match ins.op {
            Op::XFlip(_) => {
                for &q in &ins.targets {
                    components.push(vec![(p, vec![(q, true, false)])]);
                }
            }
            Op::Depolarize1(_) => {
                for &q in &ins.targets {
                    components.push(
                        [(true, false), (true, true), (false, true)]
                            .iter()
                            .map(|&(x, z)| (p / 3.0, vec![(q, x, z)]))
                            .collect(),
                    );
                }
            }
            Op::Depolarize2(_) => {
                for pair in ins.targets.chunks(2) {
                    components.push(
                        (1..16u32)
                            .map(|r| {
                                (
                                    p / 15.0,
                                    vec![
                                        (pair[0], r & 1 != 0, r & 2 != 0),
                                        (pair[1], r & 4 != 0, r & 8 != 0),
                                    ],
                                )
                            })
                            .collect(),
                    );
                }
            }
            _ => unreachable!(),
        }
        for comp in components {
            let mut next = vec![0.0; dist.len()];
            let total: f64 = comp.iter().map(|o| o.0).sum();
            for (s, &w) in dist.iter().enumerate() {
                next[s] += w * (1.0 - total);
            }
            for (prob, paulis) in &comp {
                let mask = propagate(c, i + 1, paulis);
                for (s, &w) in dist.iter().enumerate() {
                    next[s ^ mask] += w * prob;
                }
            }
            dist = next;
        }
    }
    dist
}

/// Detector and observable flips of a Pauli error injected before
/// instruction `start`, as a packed outcome mask.
fn propagate(c: &Circuit, start: usize, paulis: &[(u32, bool, bool)]) -> usize {
    let n = c.num_qubits();
    let (mut x, mut z) = (vec![false; n], vec![false; n]);
    for &(q, px, pz) in paulis {
        x[q as usize] ^= px;
        z[q as usize] ^= pz;
    }
    let mut flips = vec![false; c.num_measurements];
    let mut m = c.instructions[..start]
        .iter()
        .filter(|ins| ins.op == Op::MeasureZ)
        .map(|ins| ins.targets.len())
        .sum::<usize>();
    for ins in &c.instructions[start..] {
        match ins.op {
            Op::ResetZ => {
                for &q in &ins.targets {
                    x[q as usize] = false;
                    z[q as usize] = false;
                }
            }
            Op::H => {
                for &q in &ins.targets {
                    let q = q as usize;
                    std::mem::swap(&mut x[q], &mut z[q]);
                }
            }
            Op::Cz => {
                for pair in ins.targets.chunks(2) {
                    let (a, b) = (pair[0] as usize, pair[1] as usize);
                    z[a] ^= x[b];
                    z[b] ^= x[a];
                }
            }
            Op::MeasureZ => {
                for &q in &ins.targets {
                    flips[m] = x[q as usize];
                    m += 1;
                }
            }
            _ => {}
        }
    }
    let nd = c.num_detectors();
    let mut mask = 0usize;
    for (d, det) in c.detectors.iter().enumerate() {
        if det.measurements.iter().filter(|&&k| flips[k]).count() % 2 == 1 {
            mask |= 1 << d;
        }
    }
    if c.observable.iter().filter(|&&k| flips[k]).count() % 2 == 1 {
        mask |= 1 << nd;
    }
    mask
}

/// Largest deviation of sampled per-detector and observable rates from the
/// exact marginals, in units of the binomial standard error.
pub fn oracle_marginal_deviation(c: &Circuit, shots: usize, seed: u64) -> f64 {
    let nd = c.num_detectors();
    let dist = exact_outcome_distribution(c);
    let rec = sample(c, shots, seed).unwrap();
    let mut worst: f64 = 0.0;
    for bit in 0..=nd {
        let exact: f64 = dist
            .iter()
            .enumerate()
            .filter(|(s, _)| s >> bit & 1 == 1)
            .map(|(_, w)| w)
            .sum();
        let hits = if bit < nd {
            rec.detector_count(bit)
        } else {
            rec.logical_count()
        };
        let se = (exact * (1.0 - exact) / shots as f64).sqrt();
        let z = (hits as f64 / shots as f64 - exact).abs() / se;
        worst = worst.max(z);
    }
    worst
}

/// Pearson chi-square of the sampled joint outcome histogram against the
/// exact distribution, pooling outcomes with expected count below 5.
/// Returns `(statistic, degrees of freedom)`.
pub fn oracle_joint_chi2(c: &Circuit, shots: usize, seed: u64) -> (f64, usize) {
    let nd = c.num_detectors();
    let dist = exact_outcome_distribution(c);
    let rec = sample(c, shots, seed).unwrap();
    let mut observed: HashMap<usize, u64> = HashMap::new();
    for s in 0..shots {
        let mut key = 0usize;
        for d in 0..nd {
            if rec.event(d, s) {
                key |= 1 << d;
            }
        }
        if rec.logical_flip(s) {
            key |= 1 << nd;
        }
        *observed.entry(key).or_default() += 1;
    }
    let (mut chi2, mut cells) = (0.0, 0usize);
    let (mut pool_e, mut pool_o) = (0.0, 0.0);
    for (s, &w) in dist.iter().enumerate() {
        let e = w * shots as f64;
        let o = *observed.get(&s).unwrap_or(&0) as f64;
        if e < 5.0 {
            pool_e += e;
            pool_o += o;
        } else {
            chi2 += (o - e).powi(2) / e;
            cells += 1;
        }
    }
    if pool_e > 0.0 {
        chi2 += (pool_o - pool_e).powi(2) / pool_e;
        cells += 1;
    }
    (chi2, cells - 1)
}

/// Small repetition-code circuit with distinct probabilities per noise
/// instruction.
pub fn oracle_circuit(cycles: usize, base: f64) -> Circuit {
    let mut c = build_repetition_code_memory(3, cycles).unwrap();
    let mut k = 0;
    for ins in c.instructions.iter_mut() {
        if ins.op.is_noise() {
            ins.op = ins
                .op
                .with_probability(base * (1.0 + 0.25 * (k % 5) as f64));
            k += 1;
        }
    }
    c
}

pub fn toy_graph(n: usize, classes: usize, edges: &[(usize, usize)]) -> FactorGraph {
    let mut class_params = vec![Vec::new(); classes];
    let mut param_classes = vec![Vec::new(); n];
    for &(c, k) in edges {
        class_params[c].push(k as u32);
        param_classes[k].push(c as u32);
    }
    FactorGraph {
        classes: (0..classes)
            .map(|c| DetectorClass {
                class_id: c,
                members: vec![c],
                space: c as u32,
                phase: Phase::Bulk,
            })
            .collect(),
        params: (0..n)
            .map(|k| ControlParameter {
                param_id: k,
                site_id: k,
                slot: 0,
                scale: 1.0,
            })
            .collect(),
        class_params,
        param_classes,
    }
}

/// Buffer of `epochs` batches sampled around `policy` with arbitrary rewards.
fn random_buffer(
    policy: &PolicyDistribution,
    batch: usize,
    epochs: usize,
    classes: usize,
    seed: u64,
) -> ReplayBuffer {
    let mut buf = ReplayBuffer::new(epochs.max(1));
    for e in 0..epochs as u64 {
        let thetas = sample_candidates(policy, batch, derive_seed(seed, &[e, 0]));
        let rewards = thetas
            .iter()
            .enumerate()
            .map(|(b, t)| {
                (0..classes)
                    .map(|c| {
                        let h = derive_seed(seed, &[e, 1, b as u64, c as u64]);
                        (h % 1000) as f64 / 1000.0 - t.iter().map(|x| x * x).sum::<f64>()
                    })
                    .collect()
            })
            .collect();
        buf.push(EpochBatch {
            epoch: e,
            mu: policy.mu.clone(),
            log_sigma: policy.log_sigma.clone(),
            thetas,
            rewards,
        });
    }
    buf
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg.into()))
    }
}

pub fn check_noiseless_silence(
    d: usize,
    cycles: usize,
    x_basis: bool,
    repetition: bool,
) -> Result<(), TestCaseError> {
    let c = if repetition {
        build_repetition_code_memory(d, cycles).unwrap()
    } else {
        build_surface_code_memory(d, cycles, if x_basis { Basis::X } else { Basis::Z }).unwrap()
    };
    let rec = sample(&c.with_uniform_noise(0.0), 200, 3).unwrap();
    let events: u64 = (0..c.num_detectors()).map(|k| rec.detector_count(k)).sum();
    ensure(events == 0, format!("{events} events without noise"))?;
    ensure(rec.logical_count() == 0, "logical flip without noise")?;
    let g =
        qecsteer::decoder::build_decoding_graph(&c.with_uniform_noise(1e-3), Default::default())
            .unwrap();
    let dec = qecsteer::decoder::Decoder::new(&g, DecoderKind::Mwpm).unwrap();
    ensure(
        dec.count_errors(&rec) == 0,
        "decoder reports errors on a silent record",
    )
}

/// Same seed gives the same record, on one thread and on several.
pub fn check_seed_reproducibility(p: f64, shots: usize, seed: u64) -> Result<(), TestCaseError> {
    let c = build_surface_code_memory(3, 2, Basis::Z)
        .unwrap()
        .with_uniform_noise(p);
    let serial = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let wide = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap();
    let a = serial.install(|| sample(&c, shots, seed).unwrap());
    let b = wide.install(|| sample(&c, shots, seed).unwrap());
    let again = sample(&c, shots, seed).unwrap();
    ensure(a == b, "parallel record differs from serial")?;
    ensure(a == again, "repeated record differs")
}

/// A parameter with no detector class moves its mean by nothing and its
/// log-width by exactly the entropy bonus (unless clamped).
pub fn check_masking(
    n: usize,
    edges: &[(usize, usize)],
    classes: usize,
    seed: u64,
    entropy: f64,
) -> Result<(), TestCaseError> {
    let g = toy_graph(n, classes, edges);
    let hp = AgentHyperparams {
        batch: 6,
        entropy,
        ..AgentHyperparams::default()
    };
    let p = PolicyDistribution::new(vec![0.1; n], 0.2);
    let buf = random_buffer(&p, hp.batch, 2, classes, seed);
    let (next, info) = update(&p, &buf, &g, &hp).map_err(|e| TestCaseError::fail(e.to_string()))?;
    for k in 0..n {
        if g.param_classes[k].is_empty() {
            ensure(
                info.grad_mu[k] == 0.0 && info.grad_log_sigma[k] == 0.0,
                format!("gradient leaks into parameter {k}"),
            )?;
            ensure(
                next.mu[k] == p.mu[k],
                format!("mean of parameter {k} moved"),
            )?;
            let want = (p.log_sigma[k] + hp.learning_rate * entropy)
                .clamp(hp.sigma_min.ln(), hp.sigma_max.ln());
            ensure(
                (next.log_sigma[k] - want).abs() < 1e-12,
                format!("width of parameter {k} off"),
            )?;
        }
    }
    Ok(())
}

/// Mean moves at most `clip * sigma`, widths stay inside their bounds and
/// importance ratios inside the clip interval.
pub fn check_clip_bounds(lr: f64, clip: f64, sigma: f64, seed: u64) -> Result<(), TestCaseError> {
    let n = 5;
    let edges: Vec<(usize, usize)> = (0..n).map(|k| (k % 2, k)).collect();
    let g = toy_graph(n, 2, &edges);
    let hp = AgentHyperparams {
        batch: 8,
        learning_rate: lr,
        clip,
        sigma_min: 0.01,
        sigma_max: 0.5,
        sigma_init: sigma,
        ..AgentHyperparams::default()
    };
    let old = PolicyDistribution::new(vec![0.0; n], sigma);
    let buf = random_buffer(&old, hp.batch, 3, 2, seed);
    let mut cur = old.clone();
    cur.mu = vec![0.05; n];
    let (next, info) =
        update(&cur, &buf, &g, &hp).map_err(|e| TestCaseError::fail(e.to_string()))?;
    ensure(
        info.min_ratio >= 1.0 - clip - 1e-12 && info.max_ratio <= 1.0 + clip + 1e-12,
        "ratio outside the clip interval",
    )?;
    for k in 0..n {
        ensure(
            (next.mu[k] - cur.mu[k]).abs() <= clip * cur.sigma(k) * (1.0 + 1e-12),
            format!("mean step {k} exceeds clip * sigma"),
        )?;
        let s = next.sigma(k);
        ensure(
            s >= hp.sigma_min * (1.0 - 1e-12) && s <= hp.sigma_max * (1.0 + 1e-12),
            format!("sigma {s} out of bounds"),
        )?;
    }
    Ok(())
}

pub fn check_config_round_trip(
    distance: usize,
    cycles: usize,
    seed: u64,
    lr: f64,
    entropy: f64,
    uf: bool,
) -> Result<(), TestCaseError> {
    let mut cfg = ExperimentConfig {
        distance,
        cycles,
        seed,
        cycles_per_candidate: cycles * 360,
        ..ExperimentConfig::default()
    };
    cfg.agent.learning_rate = lr;
    cfg.agent.entropy = entropy;
    cfg.decoder = if uf {
        DecoderKind::UnionFind
    } else {
        DecoderKind::Mwpm
    };
    let text = cfg
        .to_json()
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    let back =
        ExperimentConfig::from_json(&text).map_err(|e| TestCaseError::fail(e.to_string()))?;
    ensure(back == cfg, "config changed on round trip")
}

/// Small steering configuration used by the resume check.
pub fn tiny_steering_config(epochs: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        epochs,
        cycles: 4,
        cycles_per_candidate: 4 * 64,
        ..ExperimentConfig::default()
    };
    cfg.agent.batch = 6;
    cfg.calibration.enabled = false;
    cfg
}

/// Stopping after `cut` epochs, checkpointing and resuming reproduces the
/// uninterrupted run epoch by epoch and in the final policy.
pub fn check_resume_equivalence(cut: usize) -> Result<(), String> {
    let cfg = tiny_steering_config(8);
    let lab = Lab::build(&cfg, 3, &cfg.model, cfg.seed)
        .map_err(|e| e.to_string())?
        .with_drift(&DriftSpec {
            profile: DriftProfile::Sinusoid {
                frequency: 0.05,
                amplitude: 1.0,
            },
            sites: None,
        });
    let seed = derive_seed(cfg.seed, &[tag::TRAIN]);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let full_ck = dir.path().join("full.json");
    let full = run_steering_on(
        &lab,
        &cfg,
        seed,
        None,
        RunIo {
            checkpoint: Some(&full_ck),
            ..RunIo::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let part_ck = dir.path().join("part.json");
    let first = run_steering_on(
        &lab,
        &cfg,
        seed,
        None,
        RunIo {
            checkpoint: Some(&part_ck),
            stop_after: Some(cut),
            ..RunIo::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let ck = qecsteer::agent::Checkpoint::load(&part_ck).map_err(|e| e.to_string())?;
    let second = run_steering_on(
        &lab,
        &cfg,
        seed,
        Some(ck),
        RunIo {
            checkpoint: Some(&part_ck),
            ..RunIo::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let joined: Vec<_> = first.epochs.iter().chain(&second.epochs).cloned().collect();
    if joined.len() != full.epochs.len() {
        return Err(format!(
            "{} epochs after resume, {} uninterrupted",
            joined.len(),
            full.epochs.len()
        ));
    }
    for (a, b) in joined.iter().zip(&full.epochs) {
        if a.epoch != b.epoch || a.events != b.events || a.mu_norm.to_bits() != b.mu_norm.to_bits()
        {
            return Err(format!("epoch {} differs after resume", b.epoch));
        }
    }
    let end_full = qecsteer::agent::Checkpoint::load(&full_ck).map_err(|e| e.to_string())?;
    let end_part = qecsteer::agent::Checkpoint::load(&part_ck).map_err(|e| e.to_string())?;
    if end_full != end_part {
        return Err("final checkpoints differ".into());
    }
    Ok(())
}

/// Runs every invariant as a property with `cases` random cases each.
/// Returns the name and outcome of each property.
pub fn property_suite(cases: u32) -> Vec<(&'static str, Result<(), String>)> {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut out = Vec::new();
    let mut run = |name: &'static str, f: &mut dyn FnMut(&mut TestRunner) -> Result<(), String>| {
        let mut runner = TestRunner::new(config.clone());
        out.push((name, f(&mut runner)));
    };
    run("noiseless zero detection", &mut |r| {
        r.run(
            &(
                prop::sample::select(vec![3usize, 5]),
                1usize..4,
                any::<bool>(),
                any::<bool>(),
            ),
            |(d, t, x, rep)| check_noiseless_silence(d, t, x, rep),
        )
        .map_err(|e| e.to_string())
    });
    run("seed reproducibility, parallel = serial", &mut |r| {
        r.run(
            &(1e-4f64..0.05, 1usize..700, any::<u64>()),
            |(p, shots, seed)| check_seed_reproducibility(p, shots, seed),
        )
        .map_err(|e| e.to_string())
    });
    run("masking zero-gradient", &mut |r| {
        let graph = (2usize..7, 1usize..4).prop_flat_map(|(n, c)| {
            (
                Just(n),
                Just(c),
                prop::collection::vec((0..c, 0..n), 0..8),
                any::<u64>(),
                0.0f64..0.2,
            )
        });
        r.run(&graph, |(n, c, edges, seed, ent)| {
            check_masking(n, &edges, c, seed, ent)
        })
        .map_err(|e| e.to_string())
    });
    run("clip bounds", &mut |r| {
        r.run(
            &(1e-3f64..5.0, 0.01f64..1.0, 0.01f64..0.5, any::<u64>()),
            |(lr, clip, s, seed)| check_clip_bounds(lr, clip, s, seed),
        )
        .map_err(|e| e.to_string())
    });
    run("config round-trip", &mut |r| {
        r.run(
            &(
                prop::sample::select(vec![3usize, 5, 7, 9]),
                1usize..20,
                any::<u64>(),
                1e-4f64..1.0,
                0.0f64..1.0,
                any::<bool>(),
            ),
            |(d, t, seed, lr, ent, uf)| check_config_round_trip(d, t, seed, lr, ent, uf),
        )
        .map_err(|e| e.to_string())
    });
    out.push((
        "resume equivalence",
        (1..8).try_for_each(check_resume_equivalence),
    ));
    out
}

pub fn white_trace(n: usize, seed: u64) -> Vec<f64> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            1.0 + 0.1 * z
        })
        .collect()
}

/// Scales every Fourier component below `cut` by `gain`.
pub fn attenuate(x: &[f64], cut: f64, gain: f64) -> Vec<f64> {
    use rustfft::{num_complex::Complex, FftPlanner};
    let n = x.len();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let f = k.min(n - k) as f64 / n as f64;
        if k != 0 && f < cut {
            *c *= gain;
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

/// Identical inputs read 0 dB everywhere; halving the amplitude below
/// `f = 0.02` reads -6 dB (within 1.5 dB) on the grid points below 0.015.
/// Returns the worst deviations `(identical, low band)`.
pub fn psd_constructed_deviation() -> (f64, f64) {
    use qecsteer::harness::psd::analyze_psd;
    let same: Vec<Vec<f64>> = (0..5).map(|s| white_trace(300, s)).collect();
    let r = analyze_psd(&same, &same, 64, 0.0).unwrap();
    let flat = r.filter_db.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let fixed: Vec<Vec<f64>> = (0..20).map(|s| white_trace(1024, 100 + s)).collect();
    let steered: Vec<Vec<f64>> = fixed.iter().map(|x| attenuate(x, 0.02, 0.5)).collect();
    let r = analyze_psd(&fixed, &steered, 64, 0.0).unwrap();
    let low = r
        .freq
        .iter()
        .zip(&r.filter_db)
        .filter(|(f, _)| **f < 0.015)
        .fold(0.0f64, |m, (_, v)| m.max((v + 6.0).abs()));
    (flat, low)
}

/// Counts random syndromes where the blossom matching weight differs from
/// the subset-DP minimum.
pub fn mwpm_weight_mismatches(syndromes: usize, seed: u64) -> usize {
    use qecsteer::decoder::mwpm::{brute_force_weight, MwpmDecoder};
    use rand::seq::index::sample as pick;
    use rand::{Rng, SeedableRng};
    let c = build_surface_code_memory(3, 2, Basis::Z)
        .unwrap()
        .with_uniform_noise(5e-3);
    let g = qecsteer::decoder::build_decoding_graph(&c, Default::default()).unwrap();
    let dec = MwpmDecoder::new(&g);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..syndromes)
        .filter(|_| {
            let k = rng.random_range(1..=12);
            let mut defects: Vec<u32> = pick(&mut rng, g.num_detectors, k)
                .into_iter()
                .map(|d| d as u32)
                .collect();
            defects.sort_unstable();
            dec.matching(&defects).weight != brute_force_weight(&dec, &defects)
        })
        .count()
}

/// Decoded logical error probability of noiseless surface-code records.
pub fn noiseless_p_err(d: usize) -> f64 {
    let c = build_surface_code_memory(d, d, Basis::Z).unwrap();
    let g =
        qecsteer::decoder::build_decoding_graph(&c.with_uniform_noise(1e-3), Default::default())
            .unwrap();
    let rec = sample(&c.with_uniform_noise(0.0), 1000, 1).unwrap();
    qecsteer::decoder::Decoder::new(&g, DecoderKind::Mwpm)
        .unwrap()
        .stats(&rec)
        .unwrap()
        .p_err
}
