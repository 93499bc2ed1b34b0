//! Exact statevector simulation, Pauli observables and adjoint gradients.

mod gradient;
mod pauli;
mod state;

pub use gradient::{energy_and_gradient, finite_difference_gradient, parameter_shift_gradient};
pub use pauli::{exact_ground_energy, expectation, PauliObservable, PauliWord, MAX_DENSE_QUBITS};
pub use state::{amplitude_encode, run_circuit, StateVector};
pub(crate) use gradient::backprop;
pub(crate) use state::apply_circuit;
