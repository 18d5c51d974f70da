//! Line-oriented text form of a [`Circuit`].
//!
//! One instruction per line (`H 0 3`, `CZ 0 1`, `DEPOLARIZE1(0.001) 4`,
//! `X_ERROR(?) 2`, `R 5`, `M 2`), `DETECTOR rec[-1] rec[-5]` and
//! `OBSERVABLE rec[-1] ...` with record offsets counted back from the most
//! recent measurement. `#` starts a comment. Structured comments
//! (`# family=`, `# qubit`, `# site`, `# cycle`, trailing `# site=.. role=..`)
//! carry the metadata needed to rebuild the full circuit; a dump without them
//! still parses into a simulable circuit.

use std::fmt::Write as _;

use super::{
    Basis, Circuit, CodeFamily, Detector, GateSite, Instruction, NoiseRole, Op, Phase, QubitId,
    SiteKind,
};
use crate::error::{Error, Result};

pub fn dump_circuit(c: &Circuit) -> String {
    let mut out = String::new();
    let family = match c.family {
        CodeFamily::Repetition => "repetition",
        CodeFamily::Surface => "surface",
    };
    let _ = writeln!(out, "# qec-steer circuit dump");
    let _ = writeln!(
        out,
        "# family={family} distance={} cycles={} basis={:?}",
        c.distance, c.cycles, c.basis
    );
    match c.family {
        CodeFamily::Surface => {
            let _ = writeln!(
                out,
                "# cz schedule: X-type checks NE,NW,SE,SW; Z-type checks NE,SE,NW,SW"
            );
        }
        CodeFamily::Repetition => {
            let _ = writeln!(out, "# cz schedule: left neighbour, right neighbour");
        }
    }
    for q in &c.qubits {
        let _ = writeln!(out, "# qubit {} coord={},{}", q.index, q.coord.0, q.coord.1);
    }
    for s in &c.sites {
        let kind = match s.kind {
            SiteKind::SingleQubit => "SQ",
            SiteKind::Cz => "CZ",
        };
        let targets: Vec<String> = s.targets.iter().map(|t| t.to_string()).collect();
        let _ = writeln!(
            out,
            "# site {} kind={kind} targets={} layer={}",
            s.id,
            targets.join(","),
            s.layer
        );
    }

    let mut pending: Vec<&Detector> = c.detectors.iter().collect();
    pending.sort_by_key(|d| (d.measurements.iter().max().copied().unwrap_or(0), d.id));
    let mut next_det = 0;
    let mut measured = 0usize;
    let mut cycle: Option<u32> = None;

    for ins in &c.instructions {
        if cycle != Some(ins.cycle) {
            let _ = writeln!(out, "# cycle {}", ins.cycle);
            cycle = Some(ins.cycle);
        }
        let name = match ins.op.probability() {
            Some(p) => format!("{}({})", ins.op.name(), p),
            None if ins.op.is_noise() => format!("{}(?)", ins.op.name()),
            None => ins.op.name().to_string(),
        };
        let targets: Vec<String> = ins.targets.iter().map(|t| t.to_string()).collect();
        let _ = write!(out, "{name} {}", targets.join(" "));
        if let Some(site) = ins.site {
            let role = match ins.role {
                Some(NoiseRole::Readout) => "readout",
                _ => "gate",
            };
            let _ = write!(out, " # site={site} role={role}");
        }
        out.push('\n');
        if ins.op == Op::MeasureZ {
            measured += ins.targets.len();
            while next_det < pending.len() {
                let det = pending[next_det];
                let last = det.measurements.iter().max().copied().unwrap_or(0);
                if last >= measured {
                    break;
                }
                let recs: Vec<String> = det
                    .measurements
                    .iter()
                    .map(|&m| format!("rec[-{}]", measured - m))
                    .collect();
                let phase = match det.phase {
                    Phase::First => "first",
                    Phase::Bulk => "bulk",
                    Phase::Final => "final",
                };
                let _ = writeln!(
                    out,
                    "DETECTOR {} # id={} space={} time={} phase={phase}",
                    recs.join(" "),
                    det.id,
                    det.space,
                    det.time
                );
                next_det += 1;
            }
        }
    }
    let recs: Vec<String> = c
        .observable
        .iter()
        .map(|&m| format!("rec[-{}]", measured - m))
        .collect();
    let _ = writeln!(out, "OBSERVABLE {}", recs.join(" "));
    out
}

fn kv<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    text.split_whitespace()
        .find_map(|tok| tok.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
}

pub fn parse_dump(text: &str) -> Result<Circuit> {
    let mut family = CodeFamily::Surface;
    let mut distance = 0usize;
    let mut cycles: Option<usize> = None;
    let mut basis = Basis::Z;
    let mut qubits: Vec<QubitId> = Vec::new();
    let mut sites: Vec<GateSite> = Vec::new();
    let mut instructions = Vec::new();
    let mut detectors: Vec<Detector> = Vec::new();
    let mut observable = Vec::new();
    let mut measured = 0usize;
    let mut cycle = 0u32;
    let mut max_qubit: i64 = -1;
    let mut measured_qubits: Vec<u32> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let perr = |msg: String| Error::Parse { line: line_no, msg };
        let (body, comment) = match raw.find('#') {
            Some(i) => (raw[..i].trim(), raw[i + 1..].trim()),
            None => (raw.trim(), ""),
        };
        if body.is_empty() {
            if let Some(rest) = comment.strip_prefix("family=") {
                family = match rest.split_whitespace().next() {
                    Some("repetition") => CodeFamily::Repetition,
                    _ => CodeFamily::Surface,
                };
                distance = kv(comment, "distance")
                    .and_then(|v| v.parse().ok())
                    .unwrap_or(0);
                cycles = kv(comment, "cycles").and_then(|v| v.parse().ok());
                basis = match kv(comment, "basis") {
                    Some("X") => Basis::X,
                    _ => Basis::Z,
                };
            } else if let Some(rest) = comment.strip_prefix("qubit ") {
                let index: u32 = rest
                    .split_whitespace()
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| perr("bad qubit index".into()))?;
                let coord = kv(rest, "coord")
                    .and_then(|v| {
                        let (a, b) = v.split_once(',')?;
                        Some((a.parse().ok()?, b.parse().ok()?))
                    })
                    .ok_or_else(|| perr("bad qubit coord".into()))?;
                qubits.push(QubitId { index, coord });
            } else if let Some(rest) = comment.strip_prefix("site ") {
                let id: usize = rest
                    .split_whitespace()
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| perr("bad site id".into()))?;
                let kind = match kv(rest, "kind") {
                    Some("CZ") => SiteKind::Cz,
                    _ => SiteKind::SingleQubit,
                };
                let targets = kv(rest, "targets")
                    .map(|v| v.split(',').filter_map(|x| x.parse().ok()).collect())
                    .unwrap_or_default();
                let layer = kv(rest, "layer").and_then(|v| v.parse().ok()).unwrap_or(0);
                sites.push(GateSite {
                    id,
                    kind,
                    targets,
                    layer,
                });
            } else if let Some(rest) = comment.strip_prefix("cycle ") {
                cycle = rest
                    .trim()
                    .parse()
                    .map_err(|_| perr("bad cycle marker".into()))?;
            }
            continue;
        }

        let mut tokens = body.split_whitespace();
        let head = tokens.next().unwrap_or_default();
        let args: Vec<&str> = tokens.collect();
        let parse_recs = |args: &[&str]| -> Result<Vec<usize>> {
            args.iter()
                .map(|a| {
                    let off: usize = a
                        .strip_prefix("rec[-")
                        .and_then(|r| r.strip_suffix(']'))
                        .and_then(|r| r.parse().ok())
                        .ok_or_else(|| perr(format!("bad record reference {a}")))?;
                    if off == 0 || off > measured {
                        return Err(perr(format!("record offset {a} out of range")));
                    }
                    Ok(measured - off)
                })
                .collect()
        };

        if head == "DETECTOR" {
            let measurements = parse_recs(&args)?;
            let id = kv(comment, "id")
                .and_then(|v| v.parse().ok())
                .unwrap_or(detectors.len());
            let last = measurements.iter().max().copied().unwrap_or(0);
            let space = kv(comment, "space")
                .and_then(|v| v.parse().ok())
                .unwrap_or_else(|| measured_qubits.get(last).copied().unwrap_or(0));
            let time = kv(comment, "time")
                .and_then(|v| v.parse().ok())
                .unwrap_or(cycle);
            let phase = match kv(comment, "phase") {
                Some("first") => Phase::First,
                Some("final") => Phase::Final,
                _ => Phase::Bulk,
            };
            detectors.push(Detector {
                id,
                measurements,
                space,
                time,
                phase,
            });
            continue;
        }
        if head == "OBSERVABLE" {
            observable = parse_recs(&args)?;
            continue;
        }

        let (name, prob) = match head.split_once('(') {
            Some((n, rest)) => {
                let inner = rest
                    .strip_suffix(')')
                    .ok_or_else(|| perr(format!("unterminated argument in {head}")))?;
                let p = if inner == "?" {
                    None
                } else {
                    Some(
                        inner
                            .parse::<f64>()
                            .map_err(|_| perr(format!("bad probability {inner}")))?,
                    )
                };
                (n, p)
            }
            None => (head, None),
        };
        let op = match name {
            "R" => Op::ResetZ,
            "H" => Op::H,
            "CZ" => Op::Cz,
            "M" => Op::MeasureZ,
            "DEPOLARIZE1" => Op::Depolarize1(prob),
            "DEPOLARIZE2" => Op::Depolarize2(prob),
            "X_ERROR" => Op::XFlip(prob),
            other => return Err(perr(format!("unknown instruction {other}"))),
        };
        let targets: Vec<u32> = args
            .iter()
            .map(|a| a.parse().map_err(|_| perr(format!("bad target {a}"))))
            .collect::<Result<_>>()?;
        for &t in &targets {
            max_qubit = max_qubit.max(t as i64);
        }
        if op == Op::MeasureZ {
            measured += targets.len();
            measured_qubits.extend(&targets);
        }
        let site = kv(comment, "site").and_then(|v| v.parse().ok());
        let role = match kv(comment, "role") {
            Some("readout") => Some(NoiseRole::Readout),
            Some(_) => Some(NoiseRole::Gate),
            None if op.is_noise() => Some(NoiseRole::Gate),
            None => None,
        };
        instructions.push(Instruction {
            op,
            targets,
            site,
            role,
            cycle,
        });
    }

    if qubits.is_empty() {
        qubits = (0..=max_qubit.max(-1))
            .map(|i| QubitId {
                index: i as u32,
                coord: (0, i as i32),
            })
            .collect();
    }
    let is_measure_qubit = |q: u32| {
        instructions
            .iter()
            .filter(|i| {
                i.op == Op::MeasureZ && i.cycle < cycles.unwrap_or(u32::MAX as usize) as u32
            })
            .any(|i| i.targets.contains(&q))
    };
    let measure_qubits: Vec<u32> = qubits
        .iter()
        .map(|q| q.index)
        .filter(|&q| is_measure_qubit(q))
        .collect();
    let data_qubits: Vec<u32> = qubits
        .iter()
        .map(|q| q.index)
        .filter(|q| !measure_qubits.contains(q))
        .collect();
    detectors.sort_by_key(|d| d.id);
    if detectors.iter().enumerate().any(|(i, d)| d.id != i) {
        return Err(Error::Parse {
            line: 0,
            msg: "detector ids are not dense".into(),
        });
    }
    let cycles =
        cycles.unwrap_or_else(|| instructions.iter().map(|i| i.cycle).max().unwrap_or(0) as usize);

    let c = Circuit {
        family,
        distance,
        cycles,
        basis,
        qubits,
        data_qubits,
        measure_qubits,
        sites,
        instructions,
        num_measurements: measured,
        detectors,
        observable,
    };
    c.validate()?;
    Ok(c)
}
