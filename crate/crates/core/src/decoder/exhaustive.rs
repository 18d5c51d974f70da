use std::collections::HashMap;

use super::graph::DecodingGraph;
use crate::error::{Error, Result};

/// Largest mechanism count the maximum-likelihood table accepts.
pub const MAX_MECHANISMS: usize = 20;

/// Maximum-likelihood decoder by enumeration of all mechanism subsets,
/// using the undecomposed mechanisms.
#[derive(Clone, Debug)]
pub struct ExhaustiveDecoder {
    /// Syndrome bitmask to the probability of each observable value.
    table: HashMap<u64, [f64; 2]>,
}

impl ExhaustiveDecoder {
    pub fn new(graph: &DecodingGraph) -> Result<ExhaustiveDecoder> {
        let mechs: Vec<_> = graph
            .mechanisms
            .iter()
            .filter(|x| x.q > 0.0 && x.q < 1.0)
            .collect();
        let m = mechs.len();
        if m > MAX_MECHANISMS {
            return Err(Error::TooManyMechanisms {
                max: MAX_MECHANISMS,
                got: m,
            });
        }
        if graph.num_detectors > 64 {
            return Err(Error::InvalidArgument(format!(
                "exhaustive decoding supports at most 64 detectors, got {}",
                graph.num_detectors
            )));
        }
        let masks: Vec<u64> = mechs
            .iter()
            .map(|mech| mech.dets.iter().fold(0u64, |acc, &d| acc | 1 << d))
            .collect();
        let mut table: HashMap<u64, [f64; 2]> = HashMap::new();
        // Gray-code walk keeps each step O(1).
        let base: f64 = mechs.iter().map(|x| 1.0 - x.q).product();
        let odds: Vec<f64> = mechs.iter().map(|x| x.q / (1.0 - x.q)).collect();
        let (mut syn, mut obs, mut prob) = (0u64, false, base);
        let mut on = vec![false; m];
        *table.entry(0).or_default() = [base, 0.0];
        for i in 1..(1u64 << m) {
            let k = i.trailing_zeros() as usize;
            syn ^= masks[k];
            obs ^= mechs[k].obs;
            if on[k] {
                prob /= odds[k];
            } else {
                prob *= odds[k];
            }
            on[k] = !on[k];
            table.entry(syn).or_default()[obs as usize] += prob;
        }
        Ok(ExhaustiveDecoder { table })
    }

    pub fn decode(&self, defects: &[u32]) -> bool {
        let syn = defects.iter().fold(0u64, |acc, &d| acc | 1 << d);
        self.table.get(&syn).is_some_and(|p| p[1] > p[0])
    }
}
