use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::simulator::{Channel, Effect, FaultTable, Program};

/// Node index standing for the code boundary.
pub const BOUNDARY: u32 = u32::MAX;
/// Weight cap for mechanisms with vanishing probability.
pub const WEIGHT_CAP: f64 = 40.0;
const WEIGHT_FLOOR: f64 = 1e-6;
/// Fixed-point scale of integer edge weights.
pub const WEIGHT_SCALE: f64 = 1e4;

/// Where mechanism probabilities come from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Prior {
    /// Probabilities bound into the circuit.
    #[default]
    TrueModel,
    /// Same probability on every edge.
    Uniform { q0: f64 },
}

/// Log-likelihood weight `ln((1-q)/q)`, capped.
pub fn edge_weight(q: f64) -> f64 {
    if q <= 0.0 {
        return WEIGHT_CAP;
    }
    ((1.0 - q) / q).ln().clamp(WEIGHT_FLOOR, WEIGHT_CAP)
}

/// Probability that an odd number of two independent mechanisms fire.
pub fn compose(q1: f64, q2: f64) -> f64 {
    q1 * (1.0 - q2) + q2 * (1.0 - q1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub a: u32,
    /// Second detector or [`BOUNDARY`].
    pub b: u32,
    pub q: f64,
    pub obs: bool,
}

impl GraphEdge {
    pub fn weight(&self) -> f64 {
        edge_weight(self.q)
    }

    pub fn int_weight(&self) -> i64 {
        (self.weight() * WEIGHT_SCALE).round() as i64
    }
}

/// A merged error mechanism before decomposition (may flip many detectors).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mechanism {
    pub dets: Vec<u32>,
    pub obs: bool,
    pub q: f64,
}

/// Matching graph: detectors plus a boundary node.
#[derive(Clone, Debug)]
pub struct DecodingGraph {
    pub num_detectors: usize,
    pub edges: Vec<GraphEdge>,
    pub mechanisms: Vec<Mechanism>,
    /// Number of mechanisms that had to be split.
    pub decomposed: usize,
    /// Total elementary probability per noise slot.
    pub slot_totals: Vec<f64>,
    adjacency: Vec<Vec<(u32, u32)>>,
}

impl DecodingGraph {
    /// `(neighbour, edge index)` pairs of a detector.
    pub fn neighbours(&self, det: usize) -> &[(u32, u32)] {
        &self.adjacency[det]
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "num_detectors": self.num_detectors,
            "decomposed": self.decomposed,
            "edges": self.edges.iter().map(|e| serde_json::json!({
                "a": e.a,
                "b": if e.b == BOUNDARY { serde_json::Value::Null } else { e.b.into() },
                "q": e.q,
                "weight": e.weight(),
                "obs": e.obs,
            })).collect::<Vec<_>>(),
        })
    }
}

/// Average of the per-slot probabilities recovered from the mechanisms.
pub fn average_physical_error_rate(graph: &DecodingGraph) -> f64 {
    if graph.slot_totals.is_empty() {
        return 0.0;
    }
    graph.slot_totals.iter().sum::<f64>() / graph.slot_totals.len() as f64
}

pub fn build_decoding_graph(circuit: &Circuit, prior: Prior) -> Result<DecodingGraph> {
    let program = Program::compile(circuit);
    let probs = match prior {
        Prior::TrueModel => Program::probabilities_of(circuit)?,
        Prior::Uniform { .. } => vec![0.0; program.num_slots()],
    };
    let table = FaultTable::build(&program);
    build_from_program(&program, &table, &probs, prior)
}

struct Elementary {
    components: Vec<Effect>,
    q: f64,
}

fn elementary_mechanisms(
    program: &Program,
    table: &FaultTable,
    probs: &[f64],
) -> Vec<(usize, Elementary)> {
    let mut out = Vec::new();
    for (s, slot) in program.slots.iter().enumerate() {
        let p = probs[s];
        let fx = table.slot(s);
        match slot.channel {
            Channel::XFlip => {
                for t in 0..slot.targets.len() {
                    out.push((
                        s,
                        Elementary {
                            components: vec![fx[t][0].clone()],
                            q: p,
                        },
                    ));
                }
            }
            Channel::Depolarize1 => {
                for t in 0..slot.targets.len() {
                    for r in 1..4u32 {
                        let mut components = Vec::new();
                        if r & 1 != 0 {
                            components.push(fx[t][0].clone());
                        }
                        if r & 2 != 0 {
                            components.push(fx[t][1].clone());
                        }
                        out.push((
                            s,
                            Elementary {
                                components,
                                q: p / 3.0,
                            },
                        ));
                    }
                }
            }
            Channel::Depolarize2 => {
                for pair in 0..slot.targets.len() / 2 {
                    let (ta, tb) = (2 * pair, 2 * pair + 1);
                    for r in 1..16u32 {
                        let mut components = Vec::new();
                        for (bit, (t, k)) in
                            [(ta, 0), (ta, 1), (tb, 0), (tb, 1)].into_iter().enumerate()
                        {
                            if r >> bit & 1 != 0 {
                                components.push(fx[t][k].clone());
                            }
                        }
                        out.push((
                            s,
                            Elementary {
                                components,
                                q: p / 15.0,
                            },
                        ));
                    }
                }
            }
        }
    }
    out
}

fn fold(components: &[Effect]) -> Effect {
    components
        .iter()
        .fold(Effect::default(), |acc, c| acc.xor(c))
}

/// Set partitions of `0..n` as block labels, fewest blocks first.
fn partitions(n: usize) -> Vec<Vec<usize>> {
    fn rec(i: usize, n: usize, labels: &mut Vec<usize>, blocks: usize, out: &mut Vec<Vec<usize>>) {
        if i == n {
            out.push(labels.clone());
            return;
        }
        for b in 0..=blocks {
            labels.push(b);
            rec(i + 1, n, labels, blocks.max(b + 1), out);
            labels.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, &mut Vec::new(), 0, &mut out);
    out.sort_by_key(|l| l.iter().max().map_or(0, |m| m + 1));
    out
}

type Known = HashMap<Vec<u32>, [bool; 2]>;

fn is_known(known: &Known, e: &Effect) -> bool {
    known.get(&e.dets).is_some_and(|o| o[e.obs as usize])
}

/// Split by grouping the Pauli components of the mechanism.
fn split_components(components: &[Effect], known: &Known) -> Option<Vec<Effect>> {
    let (silent, loud): (Vec<&Effect>, Vec<&Effect>) =
        components.iter().partition(|c| c.dets.is_empty());
    let silent_obs = silent.iter().fold(false, |a, c| a ^ c.obs);
    if loud.is_empty() || loud.len() > 6 {
        return None;
    }
    let mut fallback = None;
    for labels in partitions(loud.len()) {
        let nb = labels.iter().max().unwrap() + 1;
        let mut blocks = vec![Effect::default(); nb];
        for (c, &l) in loud.iter().zip(&labels) {
            blocks[l] = blocks[l].xor(c);
        }
        blocks[0].obs ^= silent_obs;
        if blocks.iter().any(|b| b.dets.is_empty() || b.dets.len() > 2) {
            continue;
        }
        if blocks.iter().all(|b| is_known(known, b)) {
            return Some(blocks);
        }
        if fallback.is_none() {
            fallback = Some(blocks);
        }
    }
    fallback
}

/// Split the detector set directly into known graphlike edges.
fn split_detectors(target: &Effect, known: &Known) -> Option<Vec<Effect>> {
    fn rec(rest: &[u32], obs: bool, known: &Known, acc: &mut Vec<Effect>) -> bool {
        let Some((&d0, tail)) = rest.split_first() else {
            return !obs;
        };
        let mut options: Vec<(Vec<u32>, Vec<u32>)> = vec![(vec![d0], tail.to_vec())];
        for (i, &x) in tail.iter().enumerate() {
            let mut left = tail.to_vec();
            left.remove(i);
            options.push((vec![d0, x], left));
        }
        for (dets, left) in options {
            let Some(o) = known.get(&dets) else { continue };
            for flag in [false, true] {
                if o[flag as usize] {
                    acc.push(Effect {
                        dets: dets.clone(),
                        obs: flag,
                    });
                    if rec(&left, obs ^ flag, known, acc) {
                        return true;
                    }
                    acc.pop();
                }
            }
        }
        false
    }
    if target.dets.len() > 8 {
        return None;
    }
    let mut acc = Vec::new();
    rec(&target.dets, target.obs, known, &mut acc).then_some(acc)
}

/// Builds the graph from a compiled program. Under a uniform prior `probs`
/// is ignored apart from its length.
pub fn build_from_program(
    program: &Program,
    table: &FaultTable,
    probs: &[f64],
    prior: Prior,
) -> Result<DecodingGraph> {
    if probs.len() != program.num_slots() {
        return Err(Error::LengthMismatch {
            expected: program.num_slots(),
            got: probs.len(),
        });
    }
    let elementary = elementary_mechanisms(program, table, probs);
    let mut slot_totals = vec![0.0; program.num_slots()];
    let groups: Vec<f64> = program
        .slots
        .iter()
        .map(|s| (s.targets.len() / s.channel.arity()).max(1) as f64)
        .collect();
    let mut merged: BTreeMap<Effect, (f64, usize)> = BTreeMap::new();
    let mut comps: Vec<Vec<Effect>> = Vec::new();
    for (s, m) in elementary {
        slot_totals[s] += m.q / groups[s];
        let full = fold(&m.components);
        if full.dets.is_empty() {
            if full.obs {
                log::warn!("undetectable logical mechanism in noise slot {s}");
            }
            continue;
        }
        match merged.get_mut(&full) {
            Some(entry) => entry.0 = compose(entry.0, m.q),
            None => {
                merged.insert(full, (m.q, comps.len()));
                comps.push(m.components);
            }
        }
    }
    let mut known: Known = HashMap::new();
    for e in merged.keys().filter(|e| e.dets.len() <= 2) {
        known.entry(e.dets.clone()).or_default()[e.obs as usize] = true;
    }

    // Per (a, b): probability for each observable label.
    let mut edge_q: BTreeMap<(u32, u32), ([f64; 2], [bool; 2])> = BTreeMap::new();
    let mut add = |e: &Effect, q: f64| {
        let key = match e.dets[..] {
            [a] => (a, BOUNDARY),
            [a, b] => (a, b),
            _ => unreachable!(),
        };
        let (qs, seen) = edge_q.entry(key).or_default();
        let k = e.obs as usize;
        qs[k] = compose(qs[k], q);
        seen[k] = true;
    };
    let mut decomposed = 0;
    let mut mechanisms = Vec::with_capacity(merged.len());
    for (effect, &(q, ci)) in &merged {
        mechanisms.push(Mechanism {
            dets: effect.dets.clone(),
            obs: effect.obs,
            q,
        });
        if effect.dets.len() <= 2 {
            add(effect, q);
            continue;
        }
        let parts = split_components(&comps[ci], &known)
            .or_else(|| split_detectors(effect, &known))
            .ok_or_else(|| Error::Decomposition(effect.dets.clone()))?;
        decomposed += 1;
        for part in &parts {
            add(part, q);
        }
    }

    let n = program.num_detectors();
    let mut edges = Vec::with_capacity(edge_q.len());
    let mut adjacency = vec![Vec::new(); n];
    for ((a, b), (qs, seen)) in edge_q {
        if seen[0] && seen[1] {
            log::debug!("edge ({a}, {b}) carries both observable labels");
        }
        let obs = if seen[0] && seen[1] {
            qs[1] > qs[0]
        } else {
            seen[1]
        };
        let q = match prior {
            Prior::TrueModel => compose(qs[0], qs[1]),
            Prior::Uniform { q0 } => q0,
        };
        let id = edges.len() as u32;
        adjacency[a as usize].push((b, id));
        if b != BOUNDARY {
            adjacency[b as usize].push((a, id));
        }
        edges.push(GraphEdge { a, b, q, obs });
    }
    if let Prior::Uniform { q0 } = prior {
        for m in &mut mechanisms {
            m.q = q0;
        }
    }
    Ok(DecodingGraph {
        num_detectors: n,
        edges,
        mechanisms,
        decomposed,
        slot_totals,
        adjacency,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_repetition_code_memory, build_surface_code_memory, Basis};
    use approx::assert_relative_eq;

    #[test]
    fn composition_and_weights() {
        assert_relative_eq!(compose(0.1, 0.1), 0.18, epsilon = 1e-15);
        assert_eq!(edge_weight(0.0), WEIGHT_CAP);
        assert_eq!(edge_weight(1e-300), WEIGHT_CAP);
        assert!(edge_weight(0.01) > 0.0 && edge_weight(0.49) > 0.0);
        assert_relative_eq!(edge_weight(0.1), 9f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn partitions_are_bell_numbers() {
        assert_eq!(partitions(3).len(), 5);
        assert_eq!(partitions(4).len(), 15);
        assert_eq!(partitions(4)[0], vec![0, 0, 0, 0]);
    }

    #[test]
    fn repetition_needs_no_decomposition() {
        let c = build_repetition_code_memory(3, 3)
            .unwrap()
            .with_uniform_noise(1e-3);
        let g = build_decoding_graph(&c, Prior::TrueModel).unwrap();
        assert_eq!(g.decomposed, 0);
        assert!(g.mechanisms.iter().all(|m| m.dets.len() <= 2));
    }

    #[test]
    fn surface_graph_is_graphlike() {
        let c = build_surface_code_memory(3, 3, Basis::Z)
            .unwrap()
            .with_uniform_noise(1e-3);
        let g = build_decoding_graph(&c, Prior::TrueModel).unwrap();
        assert!(g.decomposed > 0);
        for e in &g.edges {
            assert!(e.a < g.num_detectors as u32);
            assert!(e.b == BOUNDARY || (e.a < e.b && e.b < g.num_detectors as u32));
            assert!(e.weight() > 0.0 && e.weight() <= WEIGHT_CAP);
        }
        let u = build_decoding_graph(&c, Prior::Uniform { q0: 0.01 }).unwrap();
        assert_eq!(u.edges.len(), g.edges.len());
        assert!(u.edges.iter().all(|e| e.q == 0.01));
    }

    #[test]
    fn slot_totals_recover_bound_rates() {
        let c = build_surface_code_memory(3, 2, Basis::Z)
            .unwrap()
            .with_uniform_noise(2e-3);
        let g = build_decoding_graph(&c, Prior::TrueModel).unwrap();
        assert_relative_eq!(average_physical_error_rate(&g), 2e-3, max_relative = 1e-9);
    }
}
