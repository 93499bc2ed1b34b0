use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::gate::{GateKind, GateSet};
use super::layered::LayeredSpec;
use crate::error::{Error, Result};

/// Qubits a gate acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Qubits {
    Single(usize),
    Pair(usize, usize),
}

impl Qubits {
    pub fn iter(&self) -> impl Iterator<Item = usize> {
        let (a, b) = match *self {
            Qubits::Single(q) => (q, None),
            Qubits::Pair(a, b) => (a, Some(b)),
        };
        std::iter::once(a).chain(b)
    }

    pub fn arity(&self) -> usize {
        match self {
            Qubits::Single(_) => 1,
            Qubits::Pair(..) => 2,
        }
    }

    pub fn lowest(&self) -> usize {
        match *self {
            Qubits::Single(q) => q,
            Qubits::Pair(a, b) => a.min(b),
        }
    }
}

/// One tuple of the list representation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Gate {
    pub kind: GateKind,
    pub qubits: Qubits,
}

impl Gate {
    pub fn single(kind: GateKind, q: usize) -> Self {
        Gate {
            kind,
            qubits: Qubits::Single(q),
        }
    }

    pub fn pair(kind: GateKind, a: usize, b: usize) -> Self {
        Gate {
            kind,
            qubits: Qubits::Pair(a, b),
        }
    }
}

/// Anchor of a ring-adjacent pair: the `i` such that the pair is `{i, (i+1) mod n}`.
pub fn ring_anchor(a: usize, b: usize, n: usize) -> Option<usize> {
    if n < 2 || a == b || a >= n || b >= n {
        return None;
    }
    let fwd = (a + 1) % n == b;
    let bwd = (b + 1) % n == a;
    match (fwd, bwd) {
        (true, true) => Some(a.min(b)),
        (true, false) => Some(a),
        (false, true) => Some(b),
        (false, false) => None,
    }
}

/// All distinct ring-adjacent pairs, as `(i, (i+1) mod n)` for anchors `i`.
pub fn ring_pairs(n: usize) -> Vec<(usize, usize)> {
    match n {
        0 | 1 => Vec::new(),
        2 => vec![(0, 1)],
        _ => (0..n).map(|i| (i, (i + 1) % n)).collect(),
    }
}

/// Shortest distance between two qubits on a ring of `n`.
pub fn ring_distance(a: usize, b: usize, n: usize) -> usize {
    let d = a.abs_diff(b);
    d.min(n - d)
}

/// Which pipeline produced a circuit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Gatewise,
    Layerwise,
    Manual,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Gatewise => "gatewise",
            Provenance::Layerwise => "layerwise",
            Provenance::Manual => "manual",
        }
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gatewise" => Ok(Provenance::Gatewise),
            "layerwise" => Ok(Provenance::Layerwise),
            "manual" => Ok(Provenance::Manual),
            other => Err(Error::InvalidArgument(format!("unknown provenance `{other}`"))),
        }
    }
}

/// A single validity problem of a circuit; violations are data, not failures.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    UnknownKind { index: usize, kind: GateKind },
    ArityMismatch { index: usize, kind: GateKind },
    OutOfRange { index: usize, qubit: usize },
    RepeatedQubit { index: usize, qubit: usize },
    NonAdjacent { index: usize, a: usize, b: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownKind { index, kind } => {
                write!(f, "gate {index}: kind {kind} not in gate set")
            }
            Violation::ArityMismatch { index, kind } => {
                write!(f, "gate {index}: wrong number of qubits for {kind}")
            }
            Violation::OutOfRange { index, qubit } => {
                write!(f, "gate {index}: qubit {qubit} out of range")
            }
            Violation::RepeatedQubit { index, qubit } => {
                write!(f, "gate {index}: qubit {qubit} repeated")
            }
            Violation::NonAdjacent { index, a, b } => {
                write!(f, "gate {index}: non-adjacent pair ({a},{b})")
            }
        }
    }
}

/// Layer assignment produced by ASAP scheduling.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layering {
    /// Layer index of every gate, in list order.
    pub layer_of: Vec<usize>,
    pub depth: usize,
}

/// The list representation: gates placed sequentially onto `n` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    pub n: usize,
    pub gates: Vec<Gate>,
    pub gate_set: GateSet,
    pub provenance: Provenance,
    /// Half-layer structure for circuits built from a [`LayeredSpec`].
    pub layered: Option<LayeredSpec>,
}

impl Circuit {
    pub fn new(n: usize, gate_set: GateSet) -> Self {
        Circuit {
            n,
            gates: Vec::new(),
            gate_set,
            provenance: Provenance::Manual,
            layered: None,
        }
    }

    pub fn with_gates(n: usize, gate_set: GateSet, gates: Vec<Gate>) -> Self {
        Circuit {
            gates,
            ..Circuit::new(n, gate_set)
        }
    }

    pub fn push(&mut self, gate: Gate) -> &mut Self {
        self.gates.push(gate);
        self
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Number of trainable angles.
    pub fn num_params(&self) -> usize {
        self.gates
            .iter()
            .filter(|g| g.kind.is_parameterized())
            .count()
    }

    pub fn count_two_qubit(&self) -> usize {
        self.gates.iter().filter(|g| g.kind.arity() == 2).count()
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (index, g) in self.gates.iter().enumerate() {
            if !self.gate_set.contains(g.kind) {
                out.push(Violation::UnknownKind {
                    index,
                    kind: g.kind,
                });
            }
            if g.kind.arity() != g.qubits.arity() {
                out.push(Violation::ArityMismatch {
                    index,
                    kind: g.kind,
                });
            }
            let mut in_range = true;
            for q in g.qubits.iter() {
                if q >= self.n {
                    in_range = false;
                    out.push(Violation::OutOfRange { index, qubit: q });
                }
            }
            if let Qubits::Pair(a, b) = g.qubits {
                if a == b {
                    out.push(Violation::RepeatedQubit { index, qubit: a });
                } else if in_range && ring_anchor(a, b, self.n).is_none() {
                    out.push(Violation::NonAdjacent { index, a, b });
                }
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    pub(crate) fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidCircuit(v))
        }
    }

    /// Greedy earliest-layer placement in list order.
    pub fn compute_layers(&self) -> Result<Layering> {
        self.ensure_valid()?;
        Ok(self.layers_unchecked())
    }

    pub(crate) fn layers_unchecked(&self) -> Layering {
        // next free layer per qubit
        let mut frontier = vec![0usize; self.n];
        let mut layer_of = Vec::with_capacity(self.gates.len());
        let mut depth = 0;
        for g in &self.gates {
            let layer = g.qubits.iter().map(|q| frontier[q]).max().unwrap_or(0);
            for q in g.qubits.iter() {
                frontier[q] = layer + 1;
            }
            depth = depth.max(layer + 1);
            layer_of.push(layer);
        }
        Layering { layer_of, depth }
    }

    pub fn depth(&self) -> Result<usize> {
        Ok(self.compute_layers()?.depth)
    }

    /// Reorder layer by layer, within a layer by (lowest qubit, kind id);
    /// pairs are written in anchor orientation `(i, i+1 mod n)`.
    pub fn canonicalize(&self) -> Result<Circuit> {
        let layering = self.compute_layers()?;
        let mut keyed: Vec<(usize, usize, usize, Gate)> = self
            .gates
            .iter()
            .zip(&layering.layer_of)
            .map(|(g, &layer)| {
                let gate = match g.qubits {
                    Qubits::Pair(a, b) => {
                        let i = ring_anchor(a, b, self.n).expect("validated");
                        Gate::pair(g.kind, i, (i + 1) % self.n)
                    }
                    Qubits::Single(_) => *g,
                };
                let kind_id = self.gate_set.id_of(g.kind).expect("validated");
                (layer, g.qubits.lowest(), kind_id, gate)
            })
            .collect();
        keyed.sort_by_key(|&(layer, low, kind, _)| (layer, low, kind));
        Ok(Circuit {
            gates: keyed.into_iter().map(|(.., g)| g).collect(),
            ..self.clone()
        })
    }

    pub fn to_json(&self) -> Result<CircuitJson> {
        Ok(self.canonicalize()?.to_json_raw())
    }

    /// JSON view in the current list order.
    pub fn to_json_raw(&self) -> CircuitJson {
        let gates = self
            .gates
            .iter()
            .map(|g| {
                let id = self
                    .gate_set
                    .id_of(g.kind)
                    .unwrap_or(usize::MAX);
                let mut row = vec![id];
                row.extend(g.qubits.iter());
                row
            })
            .collect();
        CircuitJson {
            n: self.n,
            gates,
            gate_set: self.gate_set.name().to_string(),
            provenance: self.provenance.as_str().to_string(),
            layered: self.layered.as_ref().map(LayeredSpec::to_json),
        }
    }

    pub fn from_json(json: &CircuitJson) -> Result<Circuit> {
        let gate_set: GateSet = json.gate_set.parse()?;
        let mut gates = Vec::with_capacity(json.gates.len());
        for (index, row) in json.gates.iter().enumerate() {
            let bad = || Error::InvalidArgument(format!("gate {index}: malformed tuple {row:?}"));
            let kind = row
                .first()
                .and_then(|&id| gate_set.kind(id))
                .ok_or_else(bad)?;
            let qubits = match row.len() {
                2 => Qubits::Single(row[1]),
                3 => Qubits::Pair(row[1], row[2]),
                _ => return Err(bad()),
            };
            gates.push(Gate { kind, qubits });
        }
        let layered = json
            .layered
            .as_ref()
            .map(|l| LayeredSpec::from_json(json.n, l))
            .transpose()?;
        Ok(Circuit {
            n: json.n,
            gates,
            gate_set,
            provenance: json.provenance.parse()?,
            layered,
        })
    }

    /// Canonical single-line JSON.
    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_json()?)?)
    }

    pub fn from_json_str(s: &str) -> Result<Circuit> {
        let json: CircuitJson = serde_json::from_str(s)?;
        Circuit::from_json(&json)
    }

    /// Stable content hash of the canonical form (hex, 16 chars).
    pub fn structure_hash(&self) -> Result<String> {
        let canon = self.canonicalize()?;
        let mut hasher = Sha256::new();
        hasher.update(canon.n.to_le_bytes());
        hasher.update(canon.gate_set.name().as_bytes());
        for g in &canon.gates {
            hasher.update([0xff, canon.gate_set.id_of(g.kind).unwrap_or(255) as u8]);
            for q in g.qubits.iter() {
                hasher.update((q as u32).to_le_bytes());
            }
        }
        let digest = hasher.finalize();
        Ok(digest[..8].iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Numeric form of [`Circuit::structure_hash`], used to seed jobs.
    pub fn structure_seed(&self) -> Result<u64> {
        let hex = self.structure_hash()?;
        Ok(u64::from_str_radix(&hex, 16).expect("hex digest"))
    }
}

/// On-disk form of a circuit: `{"n", "gates": [[kind, q0, (q1)], ...], "gate_set", "provenance"}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitJson {
    pub n: usize,
    pub gates: Vec<Vec<usize>>,
    pub gate_set: String,
    pub provenance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layered: Option<super::layered::LayeredJson>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use GateKind::*;

    pub(crate) fn fig1() -> Circuit {
        Circuit::with_gates(
            3,
            GateSet::vqe(),
            vec![
                Gate::single(Rx, 0),
                Gate::pair(ZZ, 0, 1),
                Gate::single(Ry, 2),
                Gate::pair(YY, 1, 2),
                Gate::single(Rz, 0),
                Gate::single(Rx, 1),
            ],
        )
    }

    #[test]
    fn fig1_is_valid_with_depth_four() {
        let c = fig1();
        assert!(c.validate().is_empty());
        let l = c.compute_layers().unwrap();
        assert_eq!(l.layer_of, vec![0, 1, 0, 2, 2, 3]);
        assert_eq!(l.depth, 4);
    }

    #[test]
    fn empty_circuit() {
        let c = Circuit::new(4, GateSet::vqe());
        assert!(c.validate().is_empty());
        assert_eq!(c.depth().unwrap(), 0);
    }

    #[test]
    fn non_adjacent_pair_is_reported() {
        let c = Circuit::with_gates(6, GateSet::vqe(), vec![Gate::pair(ZZ, 0, 2)]);
        assert_eq!(
            c.validate(),
            vec![Violation::NonAdjacent { index: 0, a: 0, b: 2 }]
        );
        assert!(matches!(c.compute_layers(), Err(Error::InvalidCircuit(_))));
    }

    #[test]
    fn collects_every_violation() {
        let c = Circuit::with_gates(
            3,
            GateSet::vqe(),
            vec![
                Gate::single(SwapP, 0),
                Gate::single(Rx, 7),
                Gate::pair(XX, 1, 1),
                Gate::pair(Rx, 0, 1),
            ],
        );
        let v = c.validate();
        assert_eq!(v.len(), 5, "{v:?}");
        assert!(v.contains(&Violation::UnknownKind { index: 0, kind: SwapP }));
        assert!(v.contains(&Violation::ArityMismatch { index: 0, kind: SwapP }));
        assert!(v.contains(&Violation::OutOfRange { index: 1, qubit: 7 }));
        assert!(v.contains(&Violation::RepeatedQubit { index: 2, qubit: 1 }));
        assert!(v.contains(&Violation::ArityMismatch { index: 3, kind: Rx }));
    }

    #[test]
    fn wrap_pair_is_adjacent() {
        let c = Circuit::with_gates(6, GateSet::vqe(), vec![Gate::pair(ZZ, 5, 0), Gate::pair(XX, 0, 5)]);
        assert!(c.is_valid());
    }

    #[test]
    fn hand_layering() {
        let c = Circuit::with_gates(
            2,
            GateSet::vqe(),
            vec![Gate::single(Rx, 0), Gate::single(Rx, 0), Gate::single(Rx, 1)],
        );
        let l = c.compute_layers().unwrap();
        assert_eq!(l.layer_of, vec![0, 1, 0]);
        assert_eq!(l.depth, 2);
    }

    #[test]
    fn canonical_order_within_layer() {
        let c = Circuit::with_gates(
            2,
            GateSet::vqe(),
            vec![Gate::single(Rx, 1), Gate::single(Ry, 0)],
        );
        let canon = c.canonicalize().unwrap();
        assert_eq!(canon.gates, vec![Gate::single(Ry, 0), Gate::single(Rx, 1)]);
        assert_eq!(canon.canonicalize().unwrap(), canon);
    }

    #[test]
    fn commuting_reorderings_share_canonical_form() {
        let a = fig1();
        // Ry on q2 commutes with everything before YY; Rz q0 commutes with YY(1,2).
        let b = Circuit::with_gates(
            3,
            GateSet::vqe(),
            vec![
                Gate::single(Ry, 2),
                Gate::single(Rx, 0),
                Gate::pair(ZZ, 1, 0),
                Gate::single(Rz, 0),
                Gate::pair(YY, 2, 1),
                Gate::single(Rx, 1),
            ],
        );
        assert_ne!(a.gates, b.gates);
        assert_eq!(a.canonicalize().unwrap(), b.canonicalize().unwrap());
        assert_eq!(a.structure_hash().unwrap(), b.structure_hash().unwrap());
    }

    #[test]
    fn json_round_trip() {
        let c = fig1();
        let line = c.to_json_line().unwrap();
        assert!(line.starts_with(r#"{"n":3,"gates":[[1,0],[2,2]"#), "{line}");
        let back = Circuit::from_json_str(&line).unwrap();
        assert_eq!(back, c.canonicalize().unwrap());
    }

    #[test]
    fn malformed_json_tuples() {
        let bad = r#"{"n":3,"gates":[[9,0]],"gate_set":"vqe","provenance":"manual"}"#;
        assert!(Circuit::from_json_str(bad).is_err());
        let bad = r#"{"n":3,"gates":[[1]],"gate_set":"vqe","provenance":"manual"}"#;
        assert!(Circuit::from_json_str(bad).is_err());
        let bad = r#"{"n":3,"gates":[],"gate_set":"vqe","provenance":"other"}"#;
        assert!(Circuit::from_json_str(bad).is_err());
    }

    #[test]
    fn ring_helpers() {
        assert_eq!(ring_anchor(5, 0, 6), Some(5));
        assert_eq!(ring_anchor(0, 5, 6), Some(5));
        assert_eq!(ring_anchor(2, 1, 6), Some(1));
        assert_eq!(ring_anchor(0, 2, 6), None);
        assert_eq!(ring_anchor(1, 0, 2), Some(0));
        assert_eq!(ring_pairs(2), vec![(0, 1)]);
        assert_eq!(ring_pairs(3).len(), 3);
        assert_eq!(ring_distance(0, 5, 6), 1);
        assert_eq!(ring_distance(1, 4, 6), 3);
    }
}
