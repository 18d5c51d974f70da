use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Bit-packed detection events (row per detector, 64 shots per word) and
/// logical-observable flips.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DetectionRecord {
    pub num_detectors: usize,
    pub shots: usize,
    pub cycles: usize,
    pub(crate) words: usize,
    pub(crate) events: Vec<u64>,
    pub(crate) logical: Vec<u64>,
}

pub(crate) fn words_for(shots: usize) -> usize {
    shots.div_ceil(64)
}

impl DetectionRecord {
    pub fn zeros(num_detectors: usize, shots: usize, cycles: usize) -> Self {
        let words = words_for(shots);
        DetectionRecord {
            num_detectors,
            shots,
            cycles,
            words,
            events: vec![0; num_detectors * words],
            logical: vec![0; words],
        }
    }

    pub fn row(&self, det: usize) -> &[u64] {
        &self.events[det * self.words..(det + 1) * self.words]
    }

    pub fn event(&self, det: usize, shot: usize) -> bool {
        self.row(det)[shot / 64] >> (shot % 64) & 1 == 1
    }

    pub fn set_event(&mut self, det: usize, shot: usize, value: bool) {
        let w = &mut self.events[det * self.words + shot / 64];
        let bit = 1u64 << (shot % 64);
        if value {
            *w |= bit;
        } else {
            *w &= !bit;
        }
    }

    pub fn logical_flip(&self, shot: usize) -> bool {
        self.logical[shot / 64] >> (shot % 64) & 1 == 1
    }

    pub fn set_logical_flip(&mut self, shot: usize, value: bool) {
        let bit = 1u64 << (shot % 64);
        if value {
            self.logical[shot / 64] |= bit;
        } else {
            self.logical[shot / 64] &= !bit;
        }
    }

    pub fn logical_words(&self) -> &[u64] {
        &self.logical
    }

    pub fn detector_count(&self, det: usize) -> u64 {
        self.row(det).iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn logical_count(&self) -> u64 {
        self.logical.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Fired detectors of every shot in block `block` (64 shots), as
    /// `(detectors, logical flip)` per valid lane.
    pub fn block_syndromes(&self, block: usize) -> Vec<(Vec<u32>, bool)> {
        let lanes = (self.shots - block * 64).min(64);
        let mut out: Vec<(Vec<u32>, bool)> = (0..lanes)
            .map(|l| (Vec::new(), self.logical[block] >> l & 1 == 1))
            .collect();
        for det in 0..self.num_detectors {
            let mut w = self.events[det * self.words + block];
            while w != 0 {
                let lane = w.trailing_zeros() as usize;
                w &= w - 1;
                if lane < lanes {
                    out[lane].0.push(det as u32);
                }
            }
        }
        out
    }

    pub fn num_blocks(&self) -> usize {
        self.words
    }

    /// Concatenates records over the shot axis.
    pub fn concat(parts: &[DetectionRecord]) -> Result<DetectionRecord> {
        let first = parts
            .first()
            .ok_or(Error::InvalidArgument("no records".into()))?;
        let shots = parts.iter().map(|r| r.shots).sum();
        let mut out = DetectionRecord::zeros(first.num_detectors, shots, first.cycles);
        let mut offset = 0;
        for r in parts {
            if r.num_detectors != first.num_detectors {
                return Err(Error::LengthMismatch {
                    expected: first.num_detectors,
                    got: r.num_detectors,
                });
            }
            for s in 0..r.shots {
                for d in 0..r.num_detectors {
                    if r.event(d, s) {
                        out.set_event(d, offset + s, true);
                    }
                }
                out.set_logical_flip(offset + s, r.logical_flip(s));
            }
            offset += r.shots;
        }
        Ok(out)
    }

    /// Writes the `QSDR1` event matrix to `path` and the logical flips to
    /// `path` with extension `.b8`.
    pub fn write_dump(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(b"QSDR1")?;
        f.write_all(&(self.num_detectors as u32).to_le_bytes())?;
        f.write_all(&(self.shots as u32).to_le_bytes())?;
        for det in 0..self.num_detectors {
            for w in self.row(det) {
                f.write_all(&w.to_le_bytes())?;
            }
        }
        f.flush()?;
        let mut g = std::io::BufWriter::new(std::fs::File::create(path.with_extension("b8"))?);
        for w in &self.logical {
            g.write_all(&w.to_le_bytes())?;
        }
        g.flush()?;
        Ok(())
    }

    pub fn read_dump(path: &Path, cycles: usize) -> Result<DetectionRecord> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        if buf.len() < 13 || &buf[..5] != b"QSDR1" {
            return Err(Error::InvalidArgument("missing QSDR1 header".into()));
        }
        let dets = u32::from_le_bytes(buf[5..9].try_into().unwrap()) as usize;
        let shots = u32::from_le_bytes(buf[9..13].try_into().unwrap()) as usize;
        let mut rec = DetectionRecord::zeros(dets, shots, cycles);
        let body = &buf[13..];
        if body.len() != rec.events.len() * 8 {
            return Err(Error::LengthMismatch {
                expected: rec.events.len() * 8,
                got: body.len(),
            });
        }
        for (w, c) in rec.events.iter_mut().zip(body.chunks_exact(8)) {
            *w = u64::from_le_bytes(c.try_into().unwrap());
        }
        let mut lb = Vec::new();
        std::fs::File::open(path.with_extension("b8"))?.read_to_end(&mut lb)?;
        if lb.len() != rec.logical.len() * 8 {
            return Err(Error::LengthMismatch {
                expected: rec.logical.len() * 8,
                got: lb.len(),
            });
        }
        for (w, c) in rec.logical.iter_mut().zip(lb.chunks_exact(8)) {
            *w = u64::from_le_bytes(c.try_into().unwrap());
        }
        Ok(rec)
    }
}

/// Per-detector event counts without the shot-level record.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct EventCounts {
    pub shots: u64,
    pub per_detector: Vec<u64>,
    pub logical_flips: u64,
}

impl EventCounts {
    pub fn total(&self) -> u64 {
        self.per_detector.iter().sum()
    }

    pub fn rates(&self) -> Vec<f64> {
        let n = self.shots.max(1) as f64;
        self.per_detector.iter().map(|&c| c as f64 / n).collect()
    }

    pub fn mean_rate(&self) -> f64 {
        if self.per_detector.is_empty() {
            return 0.0;
        }
        self.total() as f64 / (self.shots.max(1) as f64 * self.per_detector.len() as f64)
    }

    pub fn merge(&mut self, other: &EventCounts) {
        if self.per_detector.is_empty() {
            self.per_detector = vec![0; other.per_detector.len()];
        }
        self.shots += other.shots;
        self.logical_flips += other.logical_flips;
        for (a, b) in self.per_detector.iter_mut().zip(&other.per_detector) {
            *a += b;
        }
    }
}

impl From<&DetectionRecord> for EventCounts {
    fn from(r: &DetectionRecord) -> Self {
        EventCounts {
            shots: r.shots as u64,
            per_detector: (0..r.num_detectors).map(|d| r.detector_count(d)).collect(),
            logical_flips: r.logical_count(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trip() {
        let mut r = DetectionRecord::zeros(3, 70, 2);
        r.set_event(0, 0, true);
        r.set_event(2, 69, true);
        r.set_logical_flip(65, true);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rec.qsdr");
        r.write_dump(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..5], b"QSDR1");
        assert_eq!(bytes.len(), 13 + 3 * 2 * 8);
        let back = DetectionRecord::read_dump(&path, 2).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn block_syndromes_match_events() {
        let mut r = DetectionRecord::zeros(4, 100, 1);
        r.set_event(1, 70, true);
        r.set_event(3, 70, true);
        r.set_logical_flip(99, true);
        let s = r.block_syndromes(1);
        assert_eq!(s.len(), 36);
        assert_eq!(s[6].0, vec![1, 3]);
        assert!(s[35].1);
    }
}
