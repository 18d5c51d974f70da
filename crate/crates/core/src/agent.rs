//! Factorized Gaussian policy updated by masked parameter-exploring policy
//! gradients with clipped importance ratios, an entropy bonus and a replay
//! buffer of recent epochs.

use std::collections::VecDeque;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::detgraph::{class_rates, DetectorClass, FactorGraph};
use crate::error::{Error, Result};
use crate::simulator::{DetectionRecord, EventCounts};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentHyperparams {
    pub batch: usize,
    pub learning_rate: f64,
    pub clip: f64,
    pub entropy: f64,
    pub buffer: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub sigma_init: f64,
}

impl Default for AgentHyperparams {
    fn default() -> Self {
        AgentHyperparams {
            batch: 50,
            learning_rate: 0.05,
            clip: 0.2,
            entropy: 0.01,
            buffer: 4,
            sigma_min: 1e-3,
            sigma_max: 1.0,
            sigma_init: 0.15,
        }
    }
}

impl AgentHyperparams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.learning_rate,
            self.clip,
            self.sigma_min,
            self.sigma_max,
            self.sigma_init,
        ];
        if self.batch < 2 || self.batch % 2 != 0 {
            return Err(Error::Config(format!(
                "batch must be even and >= 2 for mirrored sampling, got {}",
                self.batch
            )));
        }
        if positive.iter().any(|&v| !(v > 0.0)) || self.entropy < 0.0 || self.buffer == 0 {
            return Err(Error::Config(
                "agent hyperparameters must be positive".into(),
            ));
        }
        if self.clip > 1.0 {
            return Err(Error::Config(format!(
                "clip ratio must lie in (0, 1], got {}",
                self.clip
            )));
        }
        if self.sigma_min > self.sigma_max
            || !(self.sigma_min..=self.sigma_max).contains(&self.sigma_init)
        {
            return Err(Error::Config(
                "sigma_init must lie within the sigma bounds".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyDistribution {
    pub mu: Vec<f64>,
    pub log_sigma: Vec<f64>,
    pub epoch: u64,
}

impl PolicyDistribution {
    pub fn new(mu: Vec<f64>, sigma: f64) -> Self {
        let n = mu.len();
        PolicyDistribution {
            mu,
            log_sigma: vec![sigma.ln(); n],
            epoch: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn sigma(&self, k: usize) -> f64 {
        self.log_sigma[k].exp()
    }

    pub fn mean_sigma(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.log_sigma.iter().map(|l| l.exp()).sum::<f64>() / self.len() as f64
    }

    pub fn entropy(&self) -> f64 {
        let c = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
        self.log_sigma.iter().map(|l| l + c).sum()
    }

    pub fn mu_norm(&self) -> f64 {
        self.mu.iter().map(|m| m * m).sum::<f64>().sqrt()
    }
}

/// Mean of the distribution.
pub fn learned_policy(policy: &PolicyDistribution) -> &[f64] {
    &policy.mu
}

/// Mirrored Gaussian candidates `mu +/- sigma z`.
pub fn sample_candidates(policy: &PolicyDistribution, batch: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma: Vec<f64> = policy.log_sigma.iter().map(|l| l.exp()).collect();
    let mut out = Vec::with_capacity(batch);
    while out.len() < batch {
        let z: Vec<f64> = (0..policy.len())
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let plus = (0..policy.len())
            .map(|k| policy.mu[k] + sigma[k] * z[k])
            .collect();
        let minus = (0..policy.len())
            .map(|k| policy.mu[k] - sigma[k] * z[k])
            .collect();
        out.push(plus);
        if out.len() < batch {
            out.push(minus);
        }
    }
    out
}

/// `r_c = -(events in class c) / (shots * |c|)`.
pub fn reward_from_counts(counts: &EventCounts, classes: &[DetectorClass]) -> Vec<f64> {
    class_rates(classes, counts)
        .into_iter()
        .map(|r| -r)
        .collect()
}

pub fn reward_from_record(rec: &DetectionRecord, classes: &[DetectorClass]) -> Vec<f64> {
    reward_from_counts(&EventCounts::from(rec), classes)
}

/// Candidates and rewards of one epoch with the policy that sampled them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochBatch {
    pub epoch: u64,
    pub mu: Vec<f64>,
    pub log_sigma: Vec<f64>,
    pub thetas: Vec<Vec<f64>>,
    pub rewards: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    pub capacity: usize,
    pub batches: VecDeque<EpochBatch>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            capacity,
            batches: VecDeque::with_capacity(capacity),
        }
    }

    /// Appends a batch, evicting the oldest when full.
    pub fn push(&mut self, batch: EpochBatch) {
        if self.batches.len() == self.capacity {
            self.batches.pop_front();
        }
        self.batches.push_back(batch);
    }

    pub fn len(&self) -> usize {
        self.batches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.batches.is_empty()
    }
}

/// Diagnostics of one update.
#[derive(Clone, Debug, Default)]
pub struct UpdateInfo {
    pub grad_mu: Vec<f64>,
    pub grad_log_sigma: Vec<f64>,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

/// Per-class standardized advantages of one batch, `[b][c]`.
pub fn standardized_advantages(rewards: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let b = rewards.len();
    let nc = rewards.first().map_or(0, |r| r.len());
    let mut out = vec![vec![0.0; nc]; b];
    for c in 0..nc {
        let mean = rewards.iter().map(|r| r[c]).sum::<f64>() / b as f64;
        let var = rewards.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / b as f64;
        let std = var.sqrt();
        if std == 0.0 {
            continue;
        }
        for (row, r) in out.iter_mut().zip(rewards) {
            row[c] = (r[c] - mean) / (std + 1e-8);
        }
    }
    out
}

/// Raw masked PEPG gradient estimates over the whole buffer.
pub fn policy_gradient(
    policy: &PolicyDistribution,
    buffer: &ReplayBuffer,
    graph: &FactorGraph,
    clip: f64,
) -> Result<UpdateInfo> {
    if buffer.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let n = policy.len();
    if graph.num_params() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: graph.num_params(),
        });
    }
    let sigma: Vec<f64> = policy.log_sigma.iter().map(|l| l.exp()).collect();
    let mut g_mu = vec![0.0; n];
    let mut g_ls = vec![0.0; n];
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut count = 0usize;
    let mut masked = vec![0.0; n];
    for batch in &buffer.batches {
        if batch.rewards.iter().any(|r| r.len() != graph.num_classes()) {
            return Err(Error::LengthMismatch {
                expected: graph.num_classes(),
                got: batch.rewards[0].len(),
            });
        }
        let adv = standardized_advantages(&batch.rewards);
        let old_sigma: Vec<f64> = batch.log_sigma.iter().map(|l| l.exp()).collect();
        for (theta, a) in batch.thetas.iter().zip(&adv) {
            for (k, m) in masked.iter_mut().enumerate() {
                let cs = &graph.param_classes[k];
                *m = if cs.is_empty() {
                    0.0
                } else {
                    cs.iter().map(|&c| a[c as usize]).sum::<f64>() / cs.len() as f64
                };
            }
            for k in 0..n {
                let d = theta[k] - policy.mu[k];
                let d_old = theta[k] - batch.mu[k];
                let log_ratio = (old_sigma[k] / sigma[k]).ln()
                    - d * d / (2.0 * sigma[k] * sigma[k])
                    + d_old * d_old / (2.0 * old_sigma[k] * old_sigma[k]);
                let rho = log_ratio.exp().clamp(1.0 - clip, 1.0 + clip);
                lo = lo.min(rho);
                hi = hi.max(rho);
                let w = rho * masked[k];
                let s2 = sigma[k] * sigma[k];
                g_mu[k] += w * d / s2;
                g_ls[k] += w * (d * d / s2 - 1.0);
            }
            count += 1;
        }
    }
    for k in 0..n {
        g_mu[k] /= count as f64;
        g_ls[k] /= count as f64;
    }
    Ok(UpdateInfo {
        grad_mu: g_mu,
        grad_log_sigma: g_ls,
        min_ratio: lo,
        max_ratio: hi,
    })
}

/// One learning step: gradient ascent on the mean, limited to `clip * sigma`
/// per coordinate, and on log sigma (plus the entropy bonus), with log
/// sigma clamped to its bounds.
pub fn update(
    policy: &PolicyDistribution,
    buffer: &ReplayBuffer,
    graph: &FactorGraph,
    hp: &AgentHyperparams,
) -> Result<(PolicyDistribution, UpdateInfo)> {
    let info = policy_gradient(policy, buffer, graph, hp.clip)?;
    let (lo, hi) = (hp.sigma_min.ln(), hp.sigma_max.ln());
    let mut next = policy.clone();
    for k in 0..policy.len() {
        // Proximal bound: a mean move of kappa * sigma keeps the per-coordinate
        // likelihood ratio of a typical sample near the clip range.
        let reach = hp.clip * policy.log_sigma[k].exp();
        next.mu[k] += (hp.learning_rate * info.grad_mu[k]).clamp(-reach, reach);
        next.log_sigma[k] = (policy.log_sigma[k]
            + hp.learning_rate * (info.grad_log_sigma[k] + hp.entropy))
            .clamp(lo, hi);
    }
    next.epoch += 1;
    Ok((next, info))
}

/// Resumable training state. Candidate sampling is keyed by
/// `(seed, epoch)`, so the RNG state is the pair itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub policy: PolicyDistribution,
    pub buffer: ReplayBuffer,
    pub seed: u64,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Phase;
    use crate::detgraph::DetectorClass;
    use crate::noise::ControlParameter;

    fn toy_graph(n: usize, classes: usize, edges: &[(usize, usize)]) -> FactorGraph {
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

    #[test]
    fn mirrored_pairs_average_to_mean() {
        let p = PolicyDistribution::new(vec![0.3, -1.0, 2.0], 0.2);
        let c = sample_candidates(&p, 10, 4);
        for pair in c.chunks(2) {
            for k in 0..3 {
                assert!(((pair[0][k] + pair[1][k]) / 2.0 - p.mu[k]).abs() < 1e-12);
            }
        }
        assert_eq!(c, sample_candidates(&p, 10, 4));
        let mut tiny = p.clone();
        tiny.log_sigma = vec![-60.0; 3];
        assert!(sample_candidates(&tiny, 4, 1)
            .iter()
            .all(|t| t.iter().zip(&p.mu).all(|(a, b)| (a - b).abs() < 1e-20)));
    }

    #[test]
    fn disconnected_parameter_only_feels_entropy() {
        let g = toy_graph(2, 1, &[(0, 0)]);
        let hp = AgentHyperparams {
            batch: 4,
            entropy: 0.1,
            ..AgentHyperparams::default()
        };
        let p = PolicyDistribution::new(vec![0.0, 0.0], 0.1);
        let thetas = sample_candidates(&p, 4, 0);
        let rewards = thetas
            .iter()
            .map(|t| vec![-t[0] * t[0] - t[1] * t[1]])
            .collect();
        let mut buf = ReplayBuffer::new(4);
        buf.push(EpochBatch {
            epoch: 0,
            mu: p.mu.clone(),
            log_sigma: p.log_sigma.clone(),
            thetas,
            rewards,
        });
        let (next, _) = update(&p, &buf, &g, &hp).unwrap();
        assert_eq!(next.mu[1], 0.0);
        assert!((next.log_sigma[1] - (p.log_sigma[1] + hp.learning_rate * 0.1)).abs() < 1e-15);
    }

    #[test]
    fn buffer_evicts_oldest() {
        let mut b = ReplayBuffer::new(2);
        for e in 0..3 {
            b.push(EpochBatch {
                epoch: e,
                mu: vec![],
                log_sigma: vec![],
                thetas: vec![],
                rewards: vec![],
            });
        }
        let epochs: Vec<u64> = b.batches.iter().map(|x| x.epoch).collect();
        assert_eq!(epochs, vec![1, 2]);
    }

    #[test]
    fn entropy_alone_saturates_sigma() {
        let g = toy_graph(1, 1, &[(0, 0)]);
        let hp = AgentHyperparams {
            batch: 4,
            entropy: 5.0,
            learning_rate: 0.5,
            ..AgentHyperparams::default()
        };
        let mut p = PolicyDistribution::new(vec![0.0], 0.15);
        for e in 0..20 {
            let thetas = sample_candidates(&p, 4, e);
            let mut buf = ReplayBuffer::new(1);
            buf.push(EpochBatch {
                epoch: e,
                mu: p.mu.clone(),
                log_sigma: p.log_sigma.clone(),
                thetas,
                rewards: vec![vec![0.0]; 4],
            });
            p = update(&p, &buf, &g, &hp).unwrap().0;
        }
        assert!((p.sigma(0) - hp.sigma_max).abs() < 1e-12);
    }

    #[test]
    fn empty_buffer_is_an_error() {
        let g = toy_graph(1, 1, &[(0, 0)]);
        let p = PolicyDistribution::new(vec![0.0], 0.1);
        assert!(matches!(
            update(&p, &ReplayBuffer::new(2), &g, &AgentHyperparams::default()),
            Err(Error::EmptyBuffer)
        ));
    }

    #[test]
    fn hyperparameter_validation() {
        assert!(AgentHyperparams::default().validate().is_ok());
        let odd = AgentHyperparams {
            batch: 5,
            ..AgentHyperparams::default()
        };
        assert!(odd.validate().is_err());
        let clip = AgentHyperparams {
            clip: 1.5,
            ..AgentHyperparams::default()
        };
        assert!(clip.validate().is_err());
    }
}
