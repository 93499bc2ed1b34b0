use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::gate::{GateKind, GateSet};
use super::list::{ring_pairs, Circuit, Gate, Provenance};
use crate::error::{Error, Result};

/// Qubit coverage of one layer.
///
/// With 0-based indices, single-qubit `Odd` is qubits 0, 2, 4, ... and `Even`
/// is 1, 3, 5, ...; two-qubit `Odd` is pairs (0,1), (2,3), ... and `Even` is
/// (1,2), (3,4), ..., (N-1,0).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coverage {
    All,
    Even,
    Odd,
}

impl Coverage {
    pub fn is_half(self) -> bool {
        !matches!(self, Coverage::All)
    }
}

impl fmt::Display for Coverage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Coverage::All => "all",
            Coverage::Even => "even",
            Coverage::Odd => "odd",
        })
    }
}

impl FromStr for Coverage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "all" | "" => Ok(Coverage::All),
            "even" => Ok(Coverage::Even),
            "odd" => Ok(Coverage::Odd),
            other => Err(Error::InvalidSpec(format!("unknown coverage `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LayerEntry {
    pub kind: GateKind,
    pub coverage: Coverage,
}

impl LayerEntry {
    pub fn new(kind: GateKind, coverage: Coverage) -> Self {
        LayerEntry { kind, coverage }
    }

    /// Anchors of the placements this entry covers on `n` qubits, in emission order.
    ///
    /// Single-qubit anchors are the qubits; two-qubit anchors are the `i` of
    /// pairs `(i, i+1 mod n)`. A two-qubit `All` layer is emitted as its odd
    /// half followed by its even half so that it schedules into two layers.
    pub fn anchors(&self, n: usize) -> Result<Vec<usize>> {
        let two = self.kind.arity() == 2;
        if two && n < 2 {
            return Err(Error::InvalidSpec(format!(
                "{} needs at least two qubits",
                self.kind
            )));
        }
        let anchors = match (two, self.coverage) {
            (false, Coverage::All) => (0..n).collect(),
            (false, Coverage::Odd) => (0..n).step_by(2).collect(),
            (false, Coverage::Even) => (1..n).step_by(2).collect(),
            (true, Coverage::Odd) => (0..n.saturating_sub(1)).step_by(2).collect(),
            (true, Coverage::Even) => {
                if n % 2 == 1 {
                    return Err(Error::InvalidSpec(format!(
                        "{}-even undefined on an odd ring of {n}",
                        self.kind
                    )));
                }
                if n == 2 {
                    vec![0]
                } else {
                    (1..n).step_by(2).collect()
                }
            }
            (true, Coverage::All) => {
                let pairs = ring_pairs(n);
                let mut a: Vec<usize> = pairs.iter().map(|p| p.0).filter(|i| i % 2 == 0).collect();
                a.extend(pairs.iter().map(|p| p.0).filter(|i| i % 2 == 1));
                a
            }
        };
        Ok(anchors)
    }

    pub fn gates(&self, n: usize) -> Result<Vec<Gate>> {
        let two = self.kind.arity() == 2;
        Ok(self
            .anchors(n)?
            .into_iter()
            .map(|i| {
                if two {
                    Gate::pair(self.kind, i, (i + 1) % n)
                } else {
                    Gate::single(self.kind, i)
                }
            })
            .collect())
    }

    pub fn gate_count(&self, n: usize) -> Result<usize> {
        Ok(self.anchors(n)?.len())
    }
}

impl fmt::Display for LayerEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.coverage {
            Coverage::All => write!(f, "{}", self.kind),
            c => write!(f, "{}-{}", self.kind, c),
        }
    }
}

impl FromStr for LayerEntry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, cov) = match s.split_once('-') {
            Some((k, c)) => (k, c),
            None => (s, "all"),
        };
        Ok(LayerEntry::new(kind.parse()?, cov.parse()?))
    }
}

/// A circuit described as a sequence of (kind, coverage) layers on `n` qubits.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "SpecRepr")]
pub struct LayeredSpec {
    pub n: usize,
    pub layers: Vec<LayerEntry>,
    /// Caps the expanded gate count; surplus gates are trimmed from the end
    /// of the final layer (its highest positions).
    pub gate_limit: Option<usize>,
}

impl LayeredSpec {
    pub fn new(n: usize, layers: Vec<LayerEntry>) -> Self {
        LayeredSpec {
            n,
            layers,
            gate_limit: None,
        }
    }

    /// Parses notation such as `H, YY-odd, ZZ-even, Rx`.
    pub fn parse(n: usize, notation: &str) -> Result<Self> {
        let layers = notation
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<_>>>()?;
        Ok(LayeredSpec::new(n, layers))
    }

    pub fn notation(&self) -> String {
        self.layers
            .iter()
            .map(|l| l.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Gates emitted layer by layer; the gate limit is applied.
    pub fn gates(&self) -> Result<Vec<Gate>> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.extend(layer.gates(self.n)?);
        }
        if let Some(limit) = self.gate_limit {
            out.truncate(limit);
        }
        Ok(out)
    }

    /// Gates grouped by layer entry (no gate limit).
    pub fn gates_by_layer(&self) -> Result<Vec<Vec<Gate>>> {
        self.layers.iter().map(|l| l.gates(self.n)).collect()
    }

    pub fn gate_count(&self) -> Result<usize> {
        Ok(self.gates()?.len())
    }

    pub fn num_params(&self) -> Result<usize> {
        Ok(self
            .gates()?
            .iter()
            .filter(|g| g.kind.is_parameterized())
            .count())
    }

    /// Expands into a circuit over `gate_set`.
    pub fn expand(&self, gate_set: &GateSet, provenance: Provenance) -> Result<Circuit> {
        for l in &self.layers {
            if !gate_set.contains(l.kind) {
                return Err(Error::InvalidSpec(format!(
                    "{} is not in gate set {}",
                    l.kind, gate_set
                )));
            }
        }
        let circuit = Circuit {
            n: self.n,
            gates: self.gates()?,
            gate_set: gate_set.clone(),
            provenance,
            layered: Some(self.clone()),
        };
        circuit.ensure_valid()?;
        Ok(circuit)
    }

    pub fn to_json(&self) -> LayeredJson {
        LayeredJson {
            layers: self
                .layers
                .iter()
                .map(|l| (l.kind.name().to_string(), l.coverage))
                .collect(),
            gate_limit: self.gate_limit,
        }
    }

    pub fn from_json(n: usize, json: &LayeredJson) -> Result<Self> {
        let layers = json
            .layers
            .iter()
            .map(|(k, c)| Ok(LayerEntry::new(k.parse()?, *c)))
            .collect::<Result<Vec<_>>>()?;
        Ok(LayeredSpec {
            n,
            layers,
            gate_limit: json.gate_limit,
        })
    }
}

// serialized as {"n": 6, "notation": "H, YY-odd", "gate_limit": 36}
#[derive(Serialize, Deserialize)]
struct SpecRepr {
    n: usize,
    notation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gate_limit: Option<usize>,
}

impl From<LayeredSpec> for SpecRepr {
    fn from(s: LayeredSpec) -> Self {
        SpecRepr {
            n: s.n,
            notation: s.notation(),
            gate_limit: s.gate_limit,
        }
    }
}

impl TryFrom<SpecRepr> for LayeredSpec {
    type Error = Error;
    fn try_from(r: SpecRepr) -> Result<Self> {
        let mut s = LayeredSpec::parse(r.n, &r.notation)?;
        s.gate_limit = r.gate_limit;
        Ok(s)
    }
}

impl fmt::Display for LayeredSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.notation())
    }
}

/// `{"layers": [["ZZ","even"], ...], "gate_limit": 36}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayeredJson {
    pub layers: Vec<(String, Coverage)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate_limit: Option<usize>,
}

/// Free-function form of [`LayeredSpec::expand`] over the gate set implied by the spec.
pub fn expand_layered(spec: &LayeredSpec, gate_set: &GateSet) -> Result<Circuit> {
    spec.expand(gate_set, Provenance::Manual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use GateKind::*;

    #[test]
    fn zz_even_wraps() {
        let spec = LayeredSpec::parse(6, "ZZ-even").unwrap();
        let c = expand_layered(&spec, &GateSet::vqe()).unwrap();
        assert_eq!(
            c.gates,
            vec![Gate::pair(ZZ, 1, 2), Gate::pair(ZZ, 3, 4), Gate::pair(ZZ, 5, 0)]
        );
    }

    #[test]
    fn odd_single_and_pairs() {
        let c = LayeredSpec::parse(6, "Rx-odd, Rz-even, XX-odd")
            .unwrap()
            .expand(&GateSet::vqe(), Provenance::Manual)
            .unwrap();
        let qubits: Vec<Vec<usize>> = c.gates.iter().map(|g| g.qubits.iter().collect()).collect();
        assert_eq!(
            qubits,
            vec![
                vec![0],
                vec![2],
                vec![4],
                vec![1],
                vec![3],
                vec![5],
                vec![0, 1],
                vec![2, 3],
                vec![4, 5]
            ]
        );
    }

    #[test]
    fn h_all() {
        let c = expand_layered(&LayeredSpec::parse(6, "H").unwrap(), &GateSet::vqe()).unwrap();
        assert_eq!(c.len(), 6);
        assert!(c.gates.iter().all(|g| g.kind == H));
    }

    #[test]
    fn fig10_ansatz_has_thirty_gates() {
        let spec = LayeredSpec::parse(
            6,
            "H, YY-odd, ZZ-even, YY-odd, ZZ-even, YY-odd, Rx-even, ZZ-even, Rx-odd",
        )
        .unwrap();
        let c = expand_layered(&spec, &GateSet::vqe()).unwrap();
        assert_eq!(c.len(), 30);
        assert!(c.is_valid());
        assert_eq!(spec.notation().parse::<String>().unwrap(), spec.to_string());
    }

    #[test]
    fn odd_ring_even_pairs_rejected() {
        let spec = LayeredSpec::parse(5, "ZZ-even").unwrap();
        assert!(matches!(
            expand_layered(&spec, &GateSet::vqe()),
            Err(Error::InvalidSpec(_))
        ));
        // single-qubit even coverage is fine on odd rings
        let spec = LayeredSpec::parse(5, "Rx-even, ZZ-odd").unwrap();
        assert_eq!(expand_layered(&spec, &GateSet::vqe()).unwrap().len(), 4);
    }

    #[test]
    fn full_two_qubit_layer_takes_two_layers() {
        let c = expand_layered(&LayeredSpec::parse(6, "ZZ").unwrap(), &GateSet::vqe()).unwrap();
        assert_eq!(c.len(), 6);
        assert_eq!(c.depth().unwrap(), 2);
    }

    #[test]
    fn gate_limit_trims_highest_positions() {
        let mut spec = LayeredSpec::parse(6, "Rx, Ry-even").unwrap();
        spec.gate_limit = Some(7);
        let c = expand_layered(&spec, &GateSet::vqe()).unwrap();
        assert_eq!(c.len(), 7);
        assert_eq!(c.gates[6], Gate::single(Ry, 1));
    }

    #[test]
    fn kind_outside_gate_set() {
        let spec = LayeredSpec::parse(4, "SWAP-odd").unwrap();
        assert!(expand_layered(&spec, &GateSet::vqe()).is_err());
        assert!(expand_layered(&spec, &GateSet::qml()).is_ok());
    }

    #[test]
    fn notation_round_trip() {
        let s = "H-even, YY, ZZ, YY, ZZ-even, YY-odd, Rx-even";
        let spec = LayeredSpec::parse(10, s).unwrap();
        assert_eq!(spec.notation(), s);
        let json = spec.to_json();
        assert_eq!(LayeredSpec::from_json(10, &json).unwrap(), spec);
    }
}
