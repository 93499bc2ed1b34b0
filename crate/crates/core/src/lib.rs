pub mod circuit;
pub mod data;
pub mod engine;
pub mod error;
pub mod nn;
pub mod optim;
pub mod sampler;
pub mod seed;
pub mod sim;
pub mod stats;
pub mod transfer;
pub mod tasks;

pub use error::{Error, Result};
