use super::builder::Builder;
use super::{
    check_cycles, check_distance, Basis, Circuit, CodeFamily, GateSite, Phase, QubitId, SiteKind,
};
use crate::error::Result;

/// Bit-flip repetition code memory with CZ+H syndrome extraction.
///
/// Qubits `0..d` are data, `d..2d-1` measure qubits; measure qubit `i` checks
/// `Z_i Z_{i+1}`. Per cycle: reset, H, CZ to the left neighbour, CZ to the
/// right neighbour, H, measure; data qubits get one idle depolarizing slot
/// during readout.
pub fn build_repetition_code_memory(d: usize, cycles: usize) -> Result<Circuit> {
    check_distance(d)?;
    check_cycles(cycles)?;
    let n_data = d as u32;
    let n_meas = (d - 1) as u32;

    let mut qubits = Vec::with_capacity(2 * d - 1);
    for i in 0..n_data {
        qubits.push(QubitId {
            index: i,
            coord: (0, 2 * i as i32 + 1),
        });
    }
    for i in 0..n_meas {
        qubits.push(QubitId {
            index: n_data + i,
            coord: (0, 2 * i as i32 + 2),
        });
    }
    let data: Vec<u32> = (0..n_data).collect();
    let meas: Vec<u32> = (n_data..n_data + n_meas).collect();

    let mut sites: Vec<GateSite> = qubits
        .iter()
        .map(|q| GateSite {
            id: q.index as usize,
            kind: SiteKind::SingleQubit,
            targets: vec![q.index],
            layer: 0,
        })
        .collect();
    let mut layers: [Vec<(u32, u32, usize)>; 2] = Default::default();
    for (layer, offset) in [(0usize, 0u32), (1, 1)] {
        for (i, &m) in meas.iter().enumerate() {
            let id = sites.len();
            let dq = i as u32 + offset;
            sites.push(GateSite {
                id,
                kind: SiteKind::Cz,
                targets: vec![m, dq],
                layer: layer as u8 + 1,
            });
            layers[layer].push((m, dq, id));
        }
    }

    let mut b = Builder::new((0..qubits.len()).collect());
    b.reset(&data);
    let mut prev: Vec<usize> = Vec::new();
    for t in 0..cycles as u32 {
        b.cycle = t;
        b.reset(&meas);
        b.h(&meas);
        b.cz(&layers[0]);
        b.cz(&layers[1]);
        b.h(&meas);
        b.idle(&data);
        let recs = b.measure(&meas);
        for (i, &r) in recs.iter().enumerate() {
            if t == 0 {
                b.detector(vec![r], meas[i], t, Phase::First);
            } else {
                b.detector(vec![prev[i], r], meas[i], t, Phase::Bulk);
            }
        }
        prev = recs;
    }
    b.cycle = cycles as u32;
    let data_recs = b.measure(&data);
    for (i, &m) in meas.iter().enumerate() {
        b.detector(
            vec![data_recs[i], data_recs[i + 1], prev[i]],
            m,
            cycles as u32,
            Phase::Final,
        );
    }

    Ok(Circuit {
        family: CodeFamily::Repetition,
        distance: d,
        cycles,
        basis: Basis::Z,
        qubits,
        data_qubits: data,
        measure_qubits: meas,
        sites,
        instructions: b.instructions,
        num_measurements: b.num_measurements,
        detectors: b.detectors,
        observable: vec![data_recs[0]],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::SiteKind;

    #[test]
    fn detector_counts() {
        let c = build_repetition_code_memory(3, 2).unwrap();
        assert_eq!(c.num_qubits(), 5);
        assert_eq!(c.measure_qubits.len(), 2);
        assert_eq!(c.num_detectors(), 6);
        let phases: Vec<_> = c.detectors.iter().map(|d| d.phase).collect();
        assert_eq!(phases.iter().filter(|p| **p == Phase::Bulk).count(), 2);

        let c = build_repetition_code_memory(3, 1).unwrap();
        assert_eq!(c.num_detectors(), 4);
        assert!(c.detectors.iter().all(|d| d.phase != Phase::Bulk));

        let c = build_repetition_code_memory(5, 10).unwrap();
        assert_eq!(c.num_detectors(), 44);
        c.validate().unwrap();
    }

    #[test]
    fn site_counts() {
        let c = build_repetition_code_memory(5, 3).unwrap();
        assert_eq!(c.count_sites(SiteKind::SingleQubit), 9);
        assert_eq!(c.count_sites(SiteKind::Cz), 8);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(build_repetition_code_memory(4, 2).is_err());
        assert!(build_repetition_code_memory(1, 2).is_err());
        assert!(build_repetition_code_memory(3, 0).is_err());
    }
}
