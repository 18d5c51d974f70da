use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use super::blossom::max_weight_matching;
use super::graph::{DecodingGraph, BOUNDARY};

const INF: i64 = i64::MAX / 4;

/// All-pairs shortest paths between detectors (and to the boundary) with
/// the observable parity of each path.
#[derive(Clone, Debug)]
pub struct MwpmDecoder {
    n: usize,
    /// `n x (n + 1)`; column `n` is the boundary.
    dist: Vec<i64>,
    parity: Vec<bool>,
}

/// Minimum-weight correction for one syndrome.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matching {
    pub obs: bool,
    pub weight: i64,
    /// Matched pairs; `None` partner means the boundary.
    pub pairs: Vec<(u32, Option<u32>)>,
}

fn dijkstra(graph: &DecodingGraph, w: &[i64], src: usize) -> (Vec<i64>, Vec<bool>) {
    let n = graph.num_detectors;
    let mut dist = vec![INF; n + 1];
    let mut par = vec![false; n + 1];
    let mut heap = BinaryHeap::new();
    dist[src] = 0;
    heap.push(Reverse((0i64, src)));
    while let Some(Reverse((d, v))) = heap.pop() {
        if d > dist[v] || v == n {
            continue;
        }
        for &(u, e) in graph.neighbours(v) {
            let e = e as usize;
            let u = if u == BOUNDARY { n } else { u as usize };
            let nd = d + w[e];
            if nd < dist[u] {
                dist[u] = nd;
                par[u] = par[v] ^ graph.edges[e].obs;
                heap.push(Reverse((nd, u)));
            }
        }
    }
    (dist, par)
}

impl MwpmDecoder {
    pub fn new(graph: &DecodingGraph) -> MwpmDecoder {
        let n = graph.num_detectors;
        let w: Vec<i64> = graph.edges.iter().map(|e| e.int_weight()).collect();
        let rows: Vec<(Vec<i64>, Vec<bool>)> = (0..n)
            .into_par_iter()
            .map(|s| dijkstra(graph, &w, s))
            .collect();
        let mut dist = Vec::with_capacity(n * (n + 1));
        let mut parity = Vec::with_capacity(n * (n + 1));
        for (d, p) in rows {
            dist.extend(d);
            parity.extend(p);
        }
        MwpmDecoder { n, dist, parity }
    }

    /// Path length between detectors, or to the boundary when `b` is `None`.
    pub fn distance(&self, a: u32, b: Option<u32>) -> Option<i64> {
        let d = self.dist[a as usize * (self.n + 1) + b.map_or(self.n, |b| b as usize)];
        (d < INF).then_some(d)
    }

    fn path_parity(&self, a: u32, b: Option<u32>) -> bool {
        self.parity[a as usize * (self.n + 1) + b.map_or(self.n, |b| b as usize)]
    }

    pub fn decode(&self, defects: &[u32]) -> bool {
        self.matching(defects).obs
    }

    /// Exact minimum-weight perfect matching where every defect may pair
    /// with another defect or with its own boundary copy.
    pub fn matching(&self, defects: &[u32]) -> Matching {
        let k = defects.len();
        let mut m = Matching {
            obs: false,
            weight: 0,
            pairs: Vec::new(),
        };
        let push = |m: &mut Matching, a: u32, b: Option<u32>| {
            m.weight += self.distance(a, b).unwrap_or(INF);
            m.obs ^= self.path_parity(a, b);
            m.pairs.push((a, b));
        };
        match k {
            0 => return m,
            1 => {
                push(&mut m, defects[0], None);
                return m;
            }
            2 => {
                let (a, b) = (defects[0], defects[1]);
                let pair = self.distance(a, Some(b)).unwrap_or(INF);
                let both = self
                    .distance(a, None)
                    .unwrap_or(INF)
                    .saturating_add(self.distance(b, None).unwrap_or(INF));
                if pair <= both {
                    push(&mut m, a, Some(b));
                } else {
                    push(&mut m, a, None);
                    push(&mut m, b, None);
                }
                return m;
            }
            _ => {}
        }
        let mut edges: Vec<(usize, usize, i64)> = Vec::with_capacity(k * k);
        for i in 0..k {
            for j in i + 1..k {
                if let Some(d) = self.distance(defects[i], Some(defects[j])) {
                    edges.push((i, j, d));
                }
            }
            if let Some(d) = self.distance(defects[i], None) {
                edges.push((i, k + i, d));
            }
            for j in i + 1..k {
                edges.push((k + i, k + j, 0));
            }
        }
        let top = edges.iter().map(|e| e.2).max().unwrap_or(0) + 1;
        let flipped: Vec<(usize, usize, i64)> =
            edges.iter().map(|&(a, b, w)| (a, b, top - w)).collect();
        let mate = max_weight_matching(2 * k, &flipped, true);
        for i in 0..k {
            match mate[i] {
                Some(j) if j < k => {
                    if i < j {
                        push(&mut m, defects[i], Some(defects[j]));
                    }
                }
                Some(_) => push(&mut m, defects[i], None),
                None => {}
            }
        }
        m
    }
}

/// Minimum total weight over all perfect matchings, by subset dynamic
/// programming. Test oracle for small defect sets.
pub fn brute_force_weight(dec: &MwpmDecoder, defects: &[u32]) -> i64 {
    let k = defects.len();
    assert!(k <= 20, "too many defects for the brute-force oracle");
    let full = (1usize << k) - 1;
    let mut best = vec![INF; 1 << k];
    best[0] = 0;
    for mask in 1..=full {
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        let mut b = INF;
        if let Some(d) = dec.distance(defects[i], None) {
            b = b.min(best[rest].saturating_add(d));
        }
        let mut r = rest;
        while r != 0 {
            let j = r.trailing_zeros() as usize;
            r &= r - 1;
            if let Some(d) = dec.distance(defects[i], Some(defects[j])) {
                b = b.min(best[rest & !(1 << j)].saturating_add(d));
            }
        }
        best[mask] = b;
    }
    best[full]
}
