use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gate primitives available to the search space.
///
/// Parameterized kinds are rotations `exp(-i θ G / 2)` with generator `G`:
/// `X`, `Y`, `Z` for the single-qubit rotations, `X⊗X`, `Y⊗Y`, `Z⊗Z` for the
/// two-qubit rotations and `I+XX+YY+ZZ` for the parameterized swap.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateKind {
    H,
    Rx,
    Ry,
    Rz,
    XX,
    YY,
    ZZ,
    SwapP,
}

impl GateKind {
    pub const ALL: [GateKind; 8] = [
        GateKind::H,
        GateKind::Rx,
        GateKind::Ry,
        GateKind::Rz,
        GateKind::XX,
        GateKind::YY,
        GateKind::ZZ,
        GateKind::SwapP,
    ];

    pub fn arity(self) -> usize {
        match self {
            GateKind::H | GateKind::Rx | GateKind::Ry | GateKind::Rz => 1,
            GateKind::XX | GateKind::YY | GateKind::ZZ | GateKind::SwapP => 2,
        }
    }

    pub fn is_parameterized(self) -> bool {
        !matches!(self, GateKind::H)
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::H => "H",
            GateKind::Rx => "Rx",
            GateKind::Ry => "Ry",
            GateKind::Rz => "Rz",
            GateKind::XX => "XX",
            GateKind::YY => "YY",
            GateKind::ZZ => "ZZ",
            GateKind::SwapP => "SWAP",
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kind = match s.trim().to_ascii_lowercase().as_str() {
            "h" => GateKind::H,
            "rx" => GateKind::Rx,
            "ry" => GateKind::Ry,
            "rz" => GateKind::Rz,
            "xx" => GateKind::XX,
            "yy" => GateKind::YY,
            "zz" => GateKind::ZZ,
            "swap" | "swapp" => GateKind::SwapP,
            other => return Err(Error::InvalidArgument(format!("unknown gate kind `{other}`"))),
        };
        Ok(kind)
    }
}

/// An ordered set of gate kinds; a kind's position is its id and its image channel.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GateSet {
    name: String,
    kinds: Vec<GateKind>,
}

impl GateSet {
    /// H, Rx, Ry, Rz, XX, YY, ZZ.
    pub fn vqe() -> Self {
        use GateKind::*;
        GateSet {
            name: "vqe".into(),
            kinds: vec![H, Rx, Ry, Rz, XX, YY, ZZ],
        }
    }

    /// Rx, Ry, Rz, XX, YY, ZZ, SWAP.
    pub fn qml() -> Self {
        use GateKind::*;
        GateSet {
            name: "qml".into(),
            kinds: vec![Rx, Ry, Rz, XX, YY, ZZ, SwapP],
        }
    }

    pub fn custom(kinds: Vec<GateKind>) -> Result<Self> {
        if kinds.is_empty() {
            return Err(Error::InvalidArgument("empty gate set".into()));
        }
        for (i, k) in kinds.iter().enumerate() {
            if kinds[..i].contains(k) {
                return Err(Error::InvalidArgument(format!("duplicate gate kind {k}")));
            }
        }
        let name = kinds.iter().map(|k| k.name()).collect::<Vec<_>>().join(",");
        Ok(GateSet { name, kinds })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kinds(&self) -> &[GateKind] {
        &self.kinds
    }

    /// Number of kinds, `t`.
    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn id_of(&self, kind: GateKind) -> Option<usize> {
        self.kinds.iter().position(|&k| k == kind)
    }

    pub fn kind(&self, id: usize) -> Option<GateKind> {
        self.kinds.get(id).copied()
    }

    pub fn contains(&self, kind: GateKind) -> bool {
        self.id_of(kind).is_some()
    }
}

impl FromStr for GateSet {
    type Err = Error;

    /// Accepts `vqe`, `qml`, or a comma separated kind list such as `H,Rx,ZZ`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "vqe" => Ok(GateSet::vqe()),
            "qml" => Ok(GateSet::qml()),
            list => {
                let kinds = list
                    .split(',')
                    .map(str::parse)
                    .collect::<Result<Vec<GateKind>>>()?;
                GateSet::custom(kinds)
            }
        }
    }
}

impl fmt::Display for GateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl Serialize for GateSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name)
    }
}

impl<'de> Deserialize<'de> for GateSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arities() {
        for k in [GateKind::H, GateKind::Rx, GateKind::Ry, GateKind::Rz] {
            assert_eq!(k.arity(), 1);
        }
        for k in [GateKind::XX, GateKind::YY, GateKind::ZZ, GateKind::SwapP] {
            assert_eq!(k.arity(), 2);
        }
        assert!(!GateKind::H.is_parameterized());
        assert!(GateKind::SwapP.is_parameterized());
    }

    #[test]
    fn builtin_sets() {
        let vqe = GateSet::vqe();
        assert_eq!(vqe.len(), 7);
        assert_eq!(vqe.id_of(GateKind::H), Some(0));
        assert!(!vqe.contains(GateKind::SwapP));
        let qml = GateSet::qml();
        assert_eq!(qml.len(), 7);
        assert_eq!(qml.kind(6), Some(GateKind::SwapP));
        assert!(!qml.contains(GateKind::H));
    }

    #[test]
    fn parse_sets() {
        assert_eq!("vqe".parse::<GateSet>().unwrap(), GateSet::vqe());
        let s: GateSet = "H,Rx,ZZ".parse().unwrap();
        assert_eq!(s.kinds(), &[GateKind::H, GateKind::Rx, GateKind::ZZ]);
        assert_eq!(s.name().parse::<GateSet>().unwrap(), s);
        assert!("H,H".parse::<GateSet>().is_err());
        assert!("CNOT".parse::<GateSet>().is_err());
    }
}
