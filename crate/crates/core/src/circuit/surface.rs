use super::builder::Builder;
use super::{
    check_cycles, check_distance, Basis, Circuit, CodeFamily, GateSite, Phase, QubitId, SiteKind,
};
use crate::error::{Error, Result};

/// Neighbour directions of a measure qubit at grid vertex `(r, c)`; data
/// qubit `(i, j)` offsets from the vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Dir {
    NE,
    NW,
    SE,
    SW,
}

impl Dir {
    fn offset(self) -> (i64, i64) {
        match self {
            Dir::NW => (-1, -1),
            Dir::NE => (-1, 0),
            Dir::SW => (0, -1),
            Dir::SE => (0, 0),
        }
    }
}

/// CZ order for X-type measure qubits (hook errors run horizontally).
pub(crate) const X_SCHEDULE: [Dir; 4] = [Dir::NE, Dir::NW, Dir::SE, Dir::SW];
/// CZ order for Z-type measure qubits (hook errors run vertically).
pub(crate) const Z_SCHEDULE: [Dir; 4] = [Dir::NE, Dir::SE, Dir::NW, Dir::SW];

struct Stabilizer {
    qubit: u32,
    basis: Basis,
    /// Data neighbour per CZ layer (None on the boundary).
    layer_data: [Option<u32>; 4],
    layer_site: [Option<usize>; 4],
}

/// Rotated surface code memory experiment in the `basis` memory.
///
/// Data qubit `(i, j)` has index `i*d + j`; measure qubits follow in row-major
/// order of their grid vertex. X-type plaquettes sit on vertices with even
/// `r + c` (top and bottom boundaries), Z-type on odd (left and right).
///
/// Each cycle: reset measure qubits, H, four CZ layers, H, measure, plus one
/// idle slot on the data qubits. X-type checks realise `CNOT(m -> d)` as
/// `H_d CZ H_d`; data Hadamards are inserted only where a data qubit's frame
/// has to change between layers.
pub fn build_surface_code_memory(d: usize, cycles: usize, basis: Basis) -> Result<Circuit> {
    check_distance(d)?;
    check_cycles(cycles)?;
    let di = d as i64;

    let mut qubits = Vec::new();
    for i in 0..d {
        for j in 0..d {
            qubits.push(QubitId {
                index: (i * d + j) as u32,
                coord: (2 * i as i32 + 1, 2 * j as i32 + 1),
            });
        }
    }
    let data: Vec<u32> = (0..(d * d) as u32).collect();

    let mut vertices = Vec::new();
    for r in 0..=di {
        for c in 0..=di {
            let x_type = (r + c) % 2 == 0;
            let interior = (1..di).contains(&r) && (1..di).contains(&c);
            let top_bottom = (r == 0 || r == di) && (1..di).contains(&c) && x_type;
            let left_right = (c == 0 || c == di) && (1..di).contains(&r) && !x_type;
            if interior || top_bottom || left_right {
                vertices.push((r, c, if x_type { Basis::X } else { Basis::Z }));
            }
        }
    }

    let mut sites: Vec<GateSite> = Vec::new();
    let mut stabs = Vec::with_capacity(vertices.len());
    for (k, &(r, c, b)) in vertices.iter().enumerate() {
        let index = (d * d + k) as u32;
        qubits.push(QubitId {
            index,
            coord: (2 * r as i32, 2 * c as i32),
        });
        let schedule = if b == Basis::X {
            X_SCHEDULE
        } else {
            Z_SCHEDULE
        };
        let mut layer_data = [None; 4];
        for (layer, dir) in schedule.iter().enumerate() {
            let (dr, dc) = dir.offset();
            let (i, j) = (r + dr, c + dc);
            if (0..di).contains(&i) && (0..di).contains(&j) {
                layer_data[layer] = Some((i * di + j) as u32);
            }
        }
        stabs.push(Stabilizer {
            qubit: index,
            basis: b,
            layer_data,
            layer_site: [None; 4],
        });
    }
    let meas: Vec<u32> = stabs.iter().map(|s| s.qubit).collect();

    for q in &qubits {
        sites.push(GateSite {
            id: q.index as usize,
            kind: SiteKind::SingleQubit,
            targets: vec![q.index],
            layer: 0,
        });
    }
    for layer in 0..4 {
        for s in stabs.iter_mut() {
            if let Some(dq) = s.layer_data[layer] {
                let id = sites.len();
                sites.push(GateSite {
                    id,
                    kind: SiteKind::Cz,
                    targets: vec![s.qubit, dq],
                    layer: layer as u8 + 1,
                });
                s.layer_site[layer] = Some(id);
            }
        }
    }

    let n_data = d * d;
    let mut b = Builder::new((0..qubits.len()).collect());
    b.reset(&data);
    if basis == Basis::X {
        b.h(&data);
    }

    let mut prev: Vec<usize> = Vec::new();
    for t in 0..cycles as u32 {
        b.cycle = t;
        b.reset(&meas);
        b.h(&meas);
        let mut frame = vec![false; n_data];
        for layer in 0..4 {
            let mut want = frame.clone();
            for s in &stabs {
                if let Some(dq) = s.layer_data[layer] {
                    want[dq as usize] = s.basis == Basis::X;
                }
            }
            let flip: Vec<u32> = (0..n_data)
                .filter(|&q| want[q] != frame[q])
                .map(|q| q as u32)
                .collect();
            b.h(&flip);
            frame = want;
            let pairs: Vec<(u32, u32, usize)> = stabs
                .iter()
                .filter_map(|s| Some((s.qubit, s.layer_data[layer]?, s.layer_site[layer]?)))
                .collect();
            b.cz(&pairs);
        }
        let restore: Vec<u32> = (0..n_data)
            .filter(|&q| frame[q])
            .map(|q| q as u32)
            .collect();
        b.h(&restore);
        b.h(&meas);
        b.idle(&data);
        let recs = b.measure(&meas);
        for (k, s) in stabs.iter().enumerate() {
            if t == 0 {
                if s.basis == basis {
                    b.detector(vec![recs[k]], s.qubit, t, Phase::First);
                }
            } else {
                b.detector(vec![prev[k], recs[k]], s.qubit, t, Phase::Bulk);
            }
        }
        prev = recs;
    }

    b.cycle = cycles as u32;
    if basis == Basis::X {
        b.h(&data);
    }
    let data_recs = b.measure(&data);
    for (k, s) in stabs.iter().enumerate() {
        if s.basis == basis {
            let mut m: Vec<usize> = s
                .layer_data
                .iter()
                .flatten()
                .map(|&q| data_recs[q as usize])
                .collect();
            m.sort_unstable();
            m.push(prev[k]);
            b.detector(m, s.qubit, cycles as u32, Phase::Final);
        }
    }

    let logical = logical_support(d, &stabs, basis)?;
    let observable = logical.iter().map(|&q| data_recs[q as usize]).collect();

    Ok(Circuit {
        family: CodeFamily::Surface,
        distance: d,
        cycles,
        basis,
        qubits,
        data_qubits: data,
        measure_qubits: meas,
        sites,
        instructions: b.instructions,
        num_measurements: b.num_measurements,
        detectors: b.detectors,
        observable,
    })
}

/// Data support of the logical operator of type `basis`: the first data row or
/// column with even overlap against every stabilizer of the opposite type.
fn logical_support(d: usize, stabs: &[Stabilizer], basis: Basis) -> Result<Vec<u32>> {
    let row: Vec<u32> = (0..d as u32).collect();
    let col: Vec<u32> = (0..d as u32).map(|i| i * d as u32).collect();
    for cand in [row, col] {
        let commutes = stabs.iter().filter(|s| s.basis != basis).all(|s| {
            s.layer_data
                .iter()
                .flatten()
                .filter(|q| cand.contains(q))
                .count()
                % 2
                == 0
        });
        if commutes {
            return Ok(cand);
        }
    }
    Err(Error::InvalidArgument(
        "no boundary logical operator commutes with the stabilizers".into(),
    ))
}
