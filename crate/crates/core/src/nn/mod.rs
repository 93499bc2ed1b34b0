//! A small differentiable framework (dense, dilated convolution, batch norm, dropout,
//! ELU, recurrent cells) and the circuit-performance predictors built on it.

mod layers;
mod network;
mod predictor;
mod tensor;


pub use layers::{BatchNorm, Cache, Conv2d, Dense, Layer, Lstm, SimpleRnn};
pub use network::Network;
pub use predictor::{
    classifier_network, regressor_network, train_classifier, train_regressor, Cell,
    ClassifierArch, ClassifierReport, Example, Labeling, Loss, Predictor, PredictorKind,
    RegressorArch, RegressorReport, Target, TrainConfig, CHECKPOINT_VERSION,
    MIN_REGRESSOR_RECORDS,
};
pub use tensor::Tensor;
