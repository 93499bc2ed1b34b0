//! Fitness evaluators: VQE on the transverse-field Ising ring and the hybrid QML classifier.

mod qml;
mod tfim;

pub use qml::{evaluate_qml, scaled_sigmoid, QmlConfig, QmlModel, QmlResult, QmlSample, QmlTask};
pub use tfim::{
    default_normalizer, descend, error_ratio, evaluate_vqe, evaluate_vqe_with_seeds,
    hardware_efficient_baseline, qaoa_baseline, tfim_hamiltonian, Descent, TfimProblem, VqeConfig,
    VqeResult,
};
