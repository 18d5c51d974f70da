//! Decoders for detection records: minimum-weight perfect matching,
//! union-find and exhaustive maximum likelihood.

pub mod blossom;
pub mod exhaustive;
pub mod graph;
pub mod mwpm;
pub mod stats;
pub mod union_find;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::DetectionRecord;

pub use exhaustive::ExhaustiveDecoder;
pub use graph::{
    average_physical_error_rate, build_decoding_graph, build_from_program, DecodingGraph,
    GraphEdge, Mechanism, Prior, BOUNDARY,
};
pub use mwpm::MwpmDecoder;
pub use stats::{
    lambda_point_estimate, logical_error_rate, per_cycle_rate, total_error_probability,
    LogicalStats,
};
pub use union_find::UnionFindDecoder;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum DecoderKind {
    #[default]
    #[serde(rename = "mwpm")]
    Mwpm,
    #[serde(rename = "uf")]
    UnionFind,
    #[serde(rename = "exhaustive")]
    Exhaustive,
}

impl FromStr for DecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mwpm" => Ok(DecoderKind::Mwpm),
            "uf" | "union_find" => Ok(DecoderKind::UnionFind),
            "exhaustive" => Ok(DecoderKind::Exhaustive),
            other => Err(Error::InvalidArgument(format!("unknown decoder {other:?}"))),
        }
    }
}

impl fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecoderKind::Mwpm => "mwpm",
            DecoderKind::UnionFind => "uf",
            DecoderKind::Exhaustive => "exhaustive",
        })
    }
}

/// A prepared decoder bound to one graph.
#[derive(Clone, Debug)]
pub enum Decoder {
    Mwpm(MwpmDecoder),
    UnionFind(UnionFindDecoder),
    Exhaustive(ExhaustiveDecoder),
}

impl Decoder {
    pub fn new(graph: &DecodingGraph, kind: DecoderKind) -> Result<Decoder> {
        Ok(match kind {
            DecoderKind::Mwpm => Decoder::Mwpm(MwpmDecoder::new(graph)),
            DecoderKind::UnionFind => Decoder::UnionFind(UnionFindDecoder::new(graph)),
            DecoderKind::Exhaustive => Decoder::Exhaustive(ExhaustiveDecoder::new(graph)?),
        })
    }

    /// Predicted logical flip for one syndrome (sorted fired detectors).
    pub fn decode_syndrome(&self, defects: &[u32]) -> bool {
        match self {
            Decoder::Mwpm(d) => d.decode(defects),
            Decoder::UnionFind(d) => d.decode(defects),
            Decoder::Exhaustive(d) => d.decode(defects),
        }
    }

    fn decode_block(&self, rec: &DetectionRecord, block: usize) -> Vec<(bool, bool)> {
        let syndromes = rec.block_syndromes(block);
        match self {
            Decoder::UnionFind(d) => {
                let mut ws = d.workspace();
                syndromes
                    .iter()
                    .map(|(s, a)| (d.decode_with(&mut ws, s), *a))
                    .collect()
            }
            _ => syndromes
                .iter()
                .map(|(s, a)| (self.decode_syndrome(s), *a))
                .collect(),
        }
    }

    /// Predictions for every shot, decoded in parallel.
    pub fn decode_record(&self, rec: &DetectionRecord) -> Vec<bool> {
        (0..rec.num_blocks())
            .into_par_iter()
            .flat_map_iter(|b| self.decode_block(rec, b).into_iter().map(|p| p.0))
            .collect()
    }

    /// Number of shots whose prediction disagrees with the actual flip.
    pub fn count_errors(&self, rec: &DetectionRecord) -> u64 {
        (0..rec.num_blocks())
            .into_par_iter()
            .map(|b| {
                self.decode_block(rec, b)
                    .into_iter()
                    .filter(|(p, a)| p != a)
                    .count() as u64
            })
            .sum()
    }

    pub fn stats(&self, rec: &DetectionRecord) -> Result<LogicalStats> {
        LogicalStats::from_counts(self.count_errors(rec), rec.shots as u64, rec.cycles)
    }
}

/// Predicted logical flips of every shot of `rec`.
pub fn decode(
    graph: &DecodingGraph,
    rec: &DetectionRecord,
    method: DecoderKind,
) -> Result<Vec<bool>> {
    if rec.num_detectors != graph.num_detectors {
        return Err(Error::LengthMismatch {
            expected: graph.num_detectors,
            got: rec.num_detectors,
        });
    }
    Ok(Decoder::new(graph, method)?.decode_record(rec))
}
