use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use super::CircuitError;

/// Two-qubit layer pattern label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pattern {
    A,
    B,
    C,
    D,
}

impl Pattern {
    pub const ALL: [Pattern; 4] = [Pattern::A, Pattern::B, Pattern::C, Pattern::D];

    /// Period-8 layer sequence `ABCDCDAB`.
    pub const SEQUENCE: [Pattern; 8] = [
        Pattern::A,
        Pattern::B,
        Pattern::C,
        Pattern::D,
        Pattern::C,
        Pattern::D,
        Pattern::A,
        Pattern::B,
    ];

    /// Pattern of the two-qubit layer with 0-based index `cycle`.
    pub fn for_cycle(cycle: usize) -> Pattern {
        Self::SEQUENCE[cycle % Self::SEQUENCE.len()]
    }

    pub fn letter(self) -> char {
        match self {
            Pattern::A => 'A',
            Pattern::B => 'B',
            Pattern::C => 'C',
            Pattern::D => 'D',
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for Pattern {
    type Err = CircuitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" => Ok(Pattern::A),
            "B" => Ok(Pattern::B),
            "C" => Ok(Pattern::C),
            "D" => Ok(Pattern::D),
            other => Err(CircuitError::UnknownPattern(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QubitSite {
    pub id: u32,
    pub x: i32,
    pub y: i32,
    pub enabled: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Coupler {
    pub a: u32,
    pub b: u32,
    pub pattern: Pattern,
    pub enabled: bool,
}

/// Device layout: qubit sites and labelled couplers, each possibly disabled.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Topology {
    pub qubits: Vec<QubitSite>,
    pub couplers: Vec<Coupler>,
}

impl Topology {
    /// Enabled qubit ids in increasing order; position in this list is the
    /// dense qubit index used by circuits.
    pub fn enabled_qubits(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self
            .qubits
            .iter()
            .filter(|q| q.enabled)
            .map(|q| q.id)
            .collect();
        ids.sort_unstable();
        ids
    }

    pub fn n_enabled(&self) -> usize {
        self.qubits.iter().filter(|q| q.enabled).count()
    }

    pub fn dense_index(&self) -> BTreeMap<u32, usize> {
        self.enabled_qubits()
            .into_iter()
            .enumerate()
            .map(|(i, id)| (id, i))
            .collect()
    }

    /// Enabled couplers of one pattern as dense `(low, high)` qubit pairs, sorted.
    pub fn pattern_pairs(&self, pattern: Pattern) -> Vec<(usize, usize, u32, u32)> {
        let index = self.dense_index();
        let mut pairs: Vec<_> = self
            .couplers
            .iter()
            .filter(|c| c.enabled && c.pattern == pattern)
            .filter_map(|c| {
                let (ia, ib) = (*index.get(&c.a)?, *index.get(&c.b)?);
                Some(if ia < ib {
                    (ia, ib, c.a, c.b)
                } else {
                    (ib, ia, c.b, c.a)
                })
            })
            .collect();
        pairs.sort_unstable();
        pairs
    }

    /// Checks the structural invariants: known qubit ids, no enabled coupler on
    /// a disabled qubit, each pattern a matching and each qubit pair listed once.
    pub fn validate(&self) -> Result<(), CircuitError> {
        let mut sites = BTreeMap::new();
        for q in &self.qubits {
            if sites.insert(q.id, q.enabled).is_some() {
                return Err(CircuitError::InvalidTopology(format!(
                    "duplicate qubit id {}",
                    q.id
                )));
            }
        }
        let mut seen_pairs = BTreeSet::new();
        let mut busy: BTreeSet<(Pattern, u32)> = BTreeSet::new();
        for c in &self.couplers {
            if c.a == c.b {
                return Err(CircuitError::InvalidTopology(format!(
                    "coupler {}-{} is a self loop",
                    c.a, c.b
                )));
            }
            for id in [c.a, c.b] {
                match sites.get(&id) {
                    None => {
                        return Err(CircuitError::InvalidTopology(format!(
                            "coupler {}-{} references unknown qubit {id}",
                            c.a, c.b
                        )))
                    }
                    Some(false) if c.enabled => {
                        return Err(CircuitError::InvalidTopology(format!(
                            "enabled coupler {}-{} references disabled qubit {id}",
                            c.a, c.b
                        )))
                    }
                    _ => {}
                }
            }
            if !seen_pairs.insert((c.a.min(c.b), c.a.max(c.b))) {
                return Err(CircuitError::InvalidTopology(format!(
                    "coupler {}-{} listed twice",
                    c.a, c.b
                )));
            }
            if c.enabled {
                for id in [c.a, c.b] {
                    if !busy.insert((c.pattern, id)) {
                        return Err(CircuitError::InvalidTopology(format!(
                            "qubit {id} has two couplers in pattern {}",
                            c.pattern
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Square grid of `width x height` qubits. Vertical couplers take A/B by
    /// row parity, horizontal couplers C/D by column parity.
    pub fn grid(width: usize, height: usize) -> Topology {
        let id = |x: usize, y: usize| (y * width + x) as u32;
        let mut topo = Topology::default();
        for y in 0..height {
            for x in 0..width {
                topo.qubits.push(QubitSite {
                    id: id(x, y),
                    x: x as i32,
                    y: y as i32,
                    enabled: true,
                });
            }
        }
        for y in 0..height {
            for x in 0..width {
                if y + 1 < height {
                    let pattern = if y % 2 == 0 { Pattern::A } else { Pattern::B };
                    topo.couplers.push(Coupler {
                        a: id(x, y),
                        b: id(x, y + 1),
                        pattern,
                        enabled: true,
                    });
                }
                if x + 1 < width {
                    let pattern = if x % 2 == 0 { Pattern::C } else { Pattern::D };
                    topo.couplers.push(Coupler {
                        a: id(x, y),
                        b: id(x + 1, y),
                        pattern,
                        enabled: true,
                    });
                }
            }
        }
        topo
    }

    /// Diagonal (45-degree rotated) square lattice with `rows` rows of 6 qubits,
    /// the layout family of the Sycamore and Zuchongzhi 2.x chips. Couplers
    /// join neighbouring rows; the pattern is fixed by direction and row parity.
    fn diagonal_lattice(rows: usize, disabled: &[u32]) -> Topology {
        const COLS: usize = 6;
        let x_of = |r: usize, c: usize| (2 * c + r % 2) as i32;
        let id = |r: usize, c: usize| (r * COLS + c) as u32;
        let mut topo = Topology::default();
        for r in 0..rows {
            for c in 0..COLS {
                let qid = id(r, c);
                topo.qubits.push(QubitSite {
                    id: qid,
                    x: x_of(r, c),
                    y: r as i32,
                    enabled: !disabled.contains(&qid),
                });
            }
        }
        for r in 0..rows.saturating_sub(1) {
            for c in 0..COLS {
                let x = x_of(r, c);
                for c2 in 0..COLS {
                    let dir = x_of(r + 1, c2) - x;
                    if dir.abs() != 1 {
                        continue;
                    }
                    let pattern = match (dir > 0, r % 2 == 0) {
                        (true, true) => Pattern::A,
                        (true, false) => Pattern::B,
                        (false, true) => Pattern::C,
                        (false, false) => Pattern::D,
                    };
                    let (a, b) = (id(r, c), id(r + 1, c2));
                    let enabled = !disabled.contains(&a) && !disabled.contains(&b);
                    topo.couplers.push(Coupler {
                        a,
                        b,
                        pattern,
                        enabled,
                    });
                }
            }
        }
        topo
    }

    /// 54-site Sycamore-like lattice (9 rows of 6) with one corner qubit
    /// disabled: 53 qubits and 86 couplers.
    pub fn sycamore53() -> Topology {
        Self::diagonal_lattice(9, &[5])
    }

    /// 66-site Zuchongzhi-2.0-like lattice (11 rows of 6) with 10 qubits along
    /// one edge disabled, leaving 56.
    pub fn zuchongzhi56() -> Topology {
        let disabled: Vec<u32> = (56..66).collect();
        Self::diagonal_lattice(11, &disabled)
    }
}

/// Looks up a built-in layout: `sycamore53`, `zuchongzhi56`, `grid(WxH)` or `gridWxH`.
pub fn builtin_topology(name: &str) -> Result<Topology, CircuitError> {
    match name {
        "sycamore53" => return Ok(Topology::sycamore53()),
        "zuchongzhi56" => return Ok(Topology::zuchongzhi56()),
        _ => {}
    }
    let unknown = || CircuitError::UnknownTopology(name.to_string());
    let dims = name.strip_prefix("grid").ok_or_else(unknown)?;
    let dims = dims
        .strip_prefix('(')
        .and_then(|d| d.strip_suffix(')'))
        .unwrap_or(dims);
    let (w, h) = dims.split_once(['x', 'X']).ok_or_else(unknown)?;
    let (w, h): (usize, usize) = (
        w.trim().parse().map_err(|_| unknown())?,
        h.trim().parse().map_err(|_| unknown())?,
    );
    if w == 0 || h == 0 {
        return Err(unknown());
    }
    Ok(Topology::grid(w, h))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn enabled_couplers(t: &Topology) -> usize {
        t.couplers.iter().filter(|c| c.enabled).count()
    }

    #[test]
    fn grid_2x2() {
        let t = builtin_topology("grid(2x2)").unwrap();
        assert_eq!(t.n_enabled(), 4);
        assert_eq!(enabled_couplers(&t), 4);
        t.validate().unwrap();
        let labels: BTreeSet<Pattern> = t.couplers.iter().map(|c| c.pattern).collect();
        assert_eq!(labels.len(), 2);
    }

    #[test]
    fn device_assets() {
        let syc = builtin_topology("sycamore53").unwrap();
        syc.validate().unwrap();
        assert_eq!(syc.n_enabled(), 53);
        assert_eq!(enabled_couplers(&syc), 86);
        let zu = builtin_topology("zuchongzhi56").unwrap();
        zu.validate().unwrap();
        assert_eq!(zu.n_enabled(), 56);
    }

    #[test]
    fn grid_name_forms() {
        assert_eq!(builtin_topology("grid4x3").unwrap().n_enabled(), 12);
        assert!(builtin_topology("grid0x3").is_err());
        assert!(builtin_topology("torus").is_err());
    }

    #[test]
    fn every_qubit_pair_has_one_label() {
        for t in [
            Topology::grid(5, 4),
            Topology::sycamore53(),
            Topology::zuchongzhi56(),
        ] {
            let mut per_pattern = 0;
            for p in Pattern::ALL {
                per_pattern += t.pattern_pairs(p).len();
            }
            assert_eq!(per_pattern, enabled_couplers(&t));
        }
    }

    #[test]
    fn validate_rejects_bad_layouts() {
        let mut t = Topology::grid(2, 2);
        t.couplers[0].pattern = t.couplers[1].pattern;
        assert!(t.validate().is_err());

        let mut t = Topology::grid(2, 2);
        t.qubits[0].enabled = false;
        assert!(t.validate().is_err());
        for c in &mut t.couplers {
            if c.a == 0 || c.b == 0 {
                c.enabled = false;
            }
        }
        t.validate().unwrap();
    }

    #[test]
    fn sequence_truncation() {
        let labels: String = (0..12).map(|i| Pattern::for_cycle(i).letter()).collect();
        assert_eq!(labels, "ABCDCDABABCD");
    }
}
