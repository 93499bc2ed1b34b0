//! Gate primitives and the two circuit representations.
//!
//! A [`Circuit`] is the list representation: gate tuples placed sequentially
//! onto a ring of qubits, with two-qubit gates restricted to ring-adjacent
//! pairs. [`CircuitImage`] is the encoder-only image view used by the
//! predictors, and [`LayeredSpec`] describes layerwise circuits in the
//! `H, YY-odd, ZZ-even` notation.

mod gate;
mod image;
mod layered;
mod list;

pub use gate::{GateKind, GateSet};
pub use image::CircuitImage;
pub use layered::{expand_layered, Coverage, LayerEntry, LayeredJson, LayeredSpec};
pub use list::{
    ring_anchor, ring_distance, ring_pairs, Circuit, CircuitJson, Gate, Layering, Provenance,
    Qubits, Violation,
};
