//! Line-based text formats.
//!
//! Circuit file:
//!
//! ```text
//! # comment
//! qubits 4 cycles 1 seed 7
//! layer sq
//! q0 X2
//! q1 W2
//! layer tq A
//! q0 q1 fsim 1.5707963267948966 0.5235987755982988 0 0 0
//! ```
//!
//! Topology file: `qubit <id> <x> <y> <on|off>` and
//! `coupler <id1> <id2> <A|B|C|D> <on|off>` lines.
//!
//! fSim table: `<id1> <id2> <theta> <phi> <dplus> <dminus> <dmoff>` lines and
//! an optional `default <theta> <phi> <dplus> <dminus> <dmoff>` line.
//!
//! Angles are decimal radians written with the shortest representation that
//! parses back to the same `f64`, so serialization is byte-stable.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::{
    Circuit, CircuitError, Coupler, FsimParams, FsimTable, GateKind, Layer, Pattern, QubitSite,
    Topology, TwoQubitGate,
};

fn content_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let body = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = body.split_whitespace().collect();
        (!tokens.is_empty()).then_some((i + 1, tokens))
    })
}

fn parse_num<T: std::str::FromStr>(
    line: usize,
    token: &str,
    what: &str,
) -> Result<T, CircuitError> {
    token
        .parse()
        .map_err(|_| CircuitError::parse(line, format!("invalid {what} `{token}`")))
}

fn parse_qubit(line: usize, token: &str, n: usize) -> Result<usize, CircuitError> {
    let q: usize = token
        .strip_prefix('q')
        .ok_or_else(|| {
            CircuitError::parse(line, format!("expected a qubit like `q3`, found `{token}`"))
        })
        .and_then(|rest| parse_num(line, rest, "qubit index"))?;
    if q >= n {
        return Err(CircuitError::parse(
            line,
            format!("qubit q{q} out of range for {n} qubits"),
        ));
    }
    Ok(q)
}

fn parse_flag(line: usize, token: &str) -> Result<bool, CircuitError> {
    match token {
        "on" => Ok(true),
        "off" => Ok(false),
        other => Err(CircuitError::parse(
            line,
            format!("expected on/off, found `{other}`"),
        )),
    }
}

fn parse_angles(line: usize, tokens: &[&str]) -> Result<FsimParams, CircuitError> {
    if tokens.len() != 5 {
        return Err(CircuitError::parse(line, "fSim needs five angles"));
    }
    let mut v = [0.0f64; 5];
    for (slot, tok) in v.iter_mut().zip(tokens) {
        *slot = parse_num(line, tok, "angle")?;
    }
    let p = FsimParams::new(v[0], v[1], v[2], v[3], v[4]);
    if !p.is_finite() || !p.matrix().is_unitary(1e-6) {
        return Err(CircuitError::parse(line, "fSim gate is not unitary"));
    }
    Ok(p)
}

pub fn parse_circuit(text: &str) -> Result<Circuit, CircuitError> {
    let mut lines = content_lines(text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| CircuitError::parse(1, "missing header"))?;
    let (n, cycles, seed) = match header.as_slice() {
        ["qubits", n, "cycles", d, "seed", s] => (
            parse_num::<usize>(hline, n, "qubit count")?,
            parse_num::<usize>(hline, d, "cycle count")?,
            parse_num::<u64>(hline, s, "seed")?,
        ),
        _ => {
            return Err(CircuitError::parse(
                hline,
                "expected `qubits N cycles D seed S`",
            ))
        }
    };

    let mut layers: Vec<Layer> = Vec::new();
    let mut used: Vec<bool> = vec![false; n];
    let mut last_line = hline;
    for (line, tokens) in lines {
        last_line = line;
        match tokens.as_slice() {
            ["layer", "sq"] => {
                if !layers.len().is_multiple_of(2) {
                    return Err(CircuitError::parse(
                        line,
                        "single-qubit layer where a two-qubit layer is expected",
                    ));
                }
                layers.push(Layer::Single(Vec::new()));
                used.iter_mut().for_each(|u| *u = false);
            }
            ["layer", "tq", label] => {
                if layers.len() % 2 != 1 {
                    return Err(CircuitError::parse(
                        line,
                        "two-qubit layer must follow a single-qubit layer",
                    ));
                }
                let pattern: Pattern = label
                    .parse()
                    .map_err(|e: CircuitError| CircuitError::parse(line, e.to_string()))?;
                let expected = Pattern::for_cycle(layers.len() / 2);
                if pattern != expected {
                    return Err(CircuitError::parse(
                        line,
                        format!(
                            "pattern {pattern} breaks the ABCDCDAB sequence (expected {expected})"
                        ),
                    ));
                }
                layers.push(Layer::Two {
                    pattern,
                    gates: Vec::new(),
                });
                used.iter_mut().for_each(|u| *u = false);
            }
            [q, gate] => {
                let q = parse_qubit(line, q, n)?;
                let kind: GateKind = gate
                    .parse()
                    .map_err(|e: CircuitError| CircuitError::parse(line, e.to_string()))?;
                match layers.last_mut() {
                    Some(Layer::Single(gates)) => {
                        if std::mem::replace(&mut used[q], true) {
                            return Err(CircuitError::parse(
                                line,
                                format!("qubit q{q} appears twice in one layer"),
                            ));
                        }
                        gates.push((q, kind));
                    }
                    _ => {
                        return Err(CircuitError::parse(
                            line,
                            "single-qubit gate outside a `layer sq` block",
                        ))
                    }
                }
            }
            [a, b, "fsim", angles @ ..] => {
                let (a, b) = (parse_qubit(line, a, n)?, parse_qubit(line, b, n)?);
                if a == b {
                    return Err(CircuitError::parse(line, "fSim needs two distinct qubits"));
                }
                let params = parse_angles(line, angles)?;
                match layers.last_mut() {
                    Some(Layer::Two { gates, .. }) => {
                        for q in [a, b] {
                            if std::mem::replace(&mut used[q], true) {
                                return Err(CircuitError::parse(
                                    line,
                                    format!("qubit q{q} touched by two fSim gates in one layer"),
                                ));
                            }
                        }
                        gates.push(TwoQubitGate {
                            a: a.min(b),
                            b: a.max(b),
                            params,
                        });
                    }
                    _ => {
                        return Err(CircuitError::parse(
                            line,
                            "fSim gate outside a `layer tq` block",
                        ))
                    }
                }
            }
            _ => {
                return Err(CircuitError::parse(
                    line,
                    format!("unrecognised line `{}`", tokens.join(" ")),
                ))
            }
        }
    }
    for layer in &mut layers {
        if let Layer::Single(gates) = layer {
            gates.sort_unstable_by_key(|g| g.0);
        }
    }
    let circuit = Circuit {
        n_qubits: n,
        seed,
        layers,
    };
    if circuit.cycles() != cycles {
        return Err(CircuitError::parse(
            last_line,
            format!(
                "header announces {cycles} cycles but the file has {}",
                circuit.cycles()
            ),
        ));
    }
    circuit.validate()?;
    Ok(circuit)
}

pub fn serialize_circuit(c: &Circuit) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "qubits {} cycles {} seed {}",
        c.n_qubits(),
        c.cycles(),
        c.seed()
    );
    for layer in c.layers() {
        match layer {
            Layer::Single(gates) => {
                out.push_str("layer sq\n");
                for (q, kind) in gates {
                    let _ = writeln!(out, "q{q} {kind}");
                }
            }
            Layer::Two { pattern, gates } => {
                let _ = writeln!(out, "layer tq {pattern}");
                for g in gates {
                    let p = &g.params;
                    let _ = writeln!(
                        out,
                        "q{} q{} fsim {} {} {} {} {}",
                        g.a, g.b, p.theta, p.phi, p.delta_plus, p.delta_minus, p.delta_minus_off
                    );
                }
            }
        }
    }
    out
}

pub fn parse_topology(text: &str) -> Result<Topology, CircuitError> {
    let mut topo = Topology::default();
    for (line, tokens) in content_lines(text) {
        match tokens.as_slice() {
            ["qubit", id, x, y, flag] => topo.qubits.push(QubitSite {
                id: parse_num(line, id, "qubit id")?,
                x: parse_num(line, x, "coordinate")?,
                y: parse_num(line, y, "coordinate")?,
                enabled: parse_flag(line, flag)?,
            }),
            ["coupler", a, b, label, flag] => topo.couplers.push(Coupler {
                a: parse_num(line, a, "qubit id")?,
                b: parse_num(line, b, "qubit id")?,
                pattern: label
                    .parse()
                    .map_err(|e: CircuitError| CircuitError::parse(line, e.to_string()))?,
                enabled: parse_flag(line, flag)?,
            }),
            _ => {
                return Err(CircuitError::parse(
                    line,
                    format!("unrecognised line `{}`", tokens.join(" ")),
                ))
            }
        }
    }
    topo.validate()?;
    Ok(topo)
}

pub fn serialize_topology(t: &Topology) -> String {
    let flag = |on: bool| if on { "on" } else { "off" };
    let mut out = String::new();
    for q in &t.qubits {
        let _ = writeln!(out, "qubit {} {} {} {}", q.id, q.x, q.y, flag(q.enabled));
    }
    for c in &t.couplers {
        let _ = writeln!(
            out,
            "coupler {} {} {} {}",
            c.a,
            c.b,
            c.pattern,
            flag(c.enabled)
        );
    }
    out
}

pub fn parse_fsim_table(text: &str) -> Result<FsimTable, CircuitError> {
    let mut table = BTreeMap::new();
    let mut fallback = FsimParams::default();
    for (line, tokens) in content_lines(text) {
        match tokens.as_slice() {
            ["default", angles @ ..] => fallback = parse_angles(line, angles)?,
            [a, b, angles @ ..] => {
                let a: u32 = parse_num(line, a, "qubit id")?;
                let b: u32 = parse_num(line, b, "qubit id")?;
                table.insert((a.min(b), a.max(b)), parse_angles(line, angles)?);
            }
            _ => {
                return Err(CircuitError::parse(
                    line,
                    "expected `<id1> <id2> <5 angles>`",
                ))
            }
        }
    }
    Ok(FsimTable::PerCoupler { table, fallback })
}
