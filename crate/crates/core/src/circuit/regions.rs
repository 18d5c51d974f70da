use std::collections::BTreeSet;

use super::Circuit;
use crate::simulator::{Channel, FaultTable, Program};

/// Detector -> gate sites whose errors can flip it, plus the same map with
/// each site tagged by the cycle of the offending instruction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DetectingRegionMap {
    pub regions: Vec<BTreeSet<usize>>,
    pub tagged: Vec<BTreeSet<(usize, u32)>>,
}

impl DetectingRegionMap {
    pub fn region(&self, det: usize) -> &BTreeSet<usize> {
        &self.regions[det]
    }

    pub fn mean_region_size(&self) -> f64 {
        if self.regions.is_empty() {
            return 0.0;
        }
        self.regions.iter().map(|r| r.len()).sum::<usize>() as f64 / self.regions.len() as f64
    }

    /// Builds the map from an already computed fault table.
    pub fn from_faults(program: &Program, table: &FaultTable) -> Self {
        let n = program.num_detectors();
        let mut regions = vec![BTreeSet::new(); n];
        let mut tagged = vec![BTreeSet::new(); n];
        for (s, slot) in program.slots.iter().enumerate() {
            let Some(site) = slot.site else { continue };
            for effects in table.slot(s) {
                let paulis: &[_] = match slot.channel {
                    Channel::XFlip => &effects[..1],
                    _ => &effects[..],
                };
                for e in paulis {
                    for &d in &e.dets {
                        regions[d as usize].insert(site);
                        tagged[d as usize].insert((site, slot.cycle));
                    }
                }
            }
        }
        DetectingRegionMap { regions, tagged }
    }
}

/// Detecting regions by exhaustive single-Pauli injection at every noise
/// location of the circuit.
pub fn compute_detecting_regions(c: &Circuit) -> DetectingRegionMap {
    let program = Program::compile(c);
    let table = FaultTable::build(&program);
    DetectingRegionMap::from_faults(&program, &table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{
        build_repetition_code_memory, build_surface_code_memory, Basis, Phase, SiteKind,
    };

    #[test]
    fn repetition_bulk_region() {
        let c = build_repetition_code_memory(3, 4).unwrap();
        let map = compute_detecting_regions(&c);
        for det in c.detectors.iter().filter(|d| d.phase == Phase::Bulk) {
            let region = map.region(det.id);
            let i = (det.space - 3) as usize;
            for s in &c.sites {
                let touches = s.kind == SiteKind::Cz && s.targets[0] == det.space;
                if touches {
                    assert!(region.contains(&s.id));
                }
            }
            assert!(region.contains(&i));
            assert!(region.contains(&(i + 1)));
            assert!(region.contains(&(det.space as usize)));
        }
    }

    #[test]
    fn bulk_regions_are_time_local_and_shift_invariant() {
        let c = build_surface_code_memory(3, 5, Basis::Z).unwrap();
        let map = compute_detecting_regions(&c);
        for det in c.detectors.iter().filter(|d| d.phase == Phase::Bulk) {
            let cycles: BTreeSet<u32> = map.tagged[det.id].iter().map(|&(_, t)| t).collect();
            assert!(cycles.len() <= 2);
            assert!(cycles.iter().all(|&t| t + 1 >= det.time && t <= det.time));
        }
        for a in c
            .detectors
            .iter()
            .filter(|d| d.phase == Phase::Bulk && d.time < 4)
        {
            let b = c
                .detectors
                .iter()
                .find(|d| d.space == a.space && d.time == a.time + 1)
                .unwrap();
            let shifted: BTreeSet<(usize, u32)> =
                map.tagged[a.id].iter().map(|&(s, t)| (s, t + 1)).collect();
            assert_eq!(shifted, map.tagged[b.id]);
        }
    }

    #[test]
    fn every_mapped_site_exists() {
        let c = build_surface_code_memory(5, 2, Basis::X).unwrap();
        let map = compute_detecting_regions(&c);
        assert!(map.regions.iter().flatten().all(|&s| s < c.sites.len()));
        assert!(map.regions.iter().all(|r| !r.is_empty()));
    }
}
