//! Trains the hardware-efficient ansatz with the measurement head on T-shirt vs dress.
//!
//! Reads IDX files from `QAS_FASHION_MNIST_DIR` (`images-idx3-ubyte`, `labels-idx1-ubyte`)
//! and falls back to a synthetic image set when they are absent.

use std::path::PathBuf;

use qas::data::{build_qml_task, ingest_idx, synthetic_image_set, QmlTaskSpec};
use qas::tasks::{evaluate_qml, hardware_efficient_baseline, QmlConfig};

fn main() -> qas::Result<()> {
    env_logger::init();
    let dir = PathBuf::from(
        std::env::var("QAS_FASHION_MNIST_DIR").unwrap_or_else(|_| "/root/data/fashion-mnist".into()),
    );
    let images = dir.join("images-idx3-ubyte");
    let raw = if images.exists() {
        ingest_idx(&images, &dir.join("labels-idx1-ubyte"))?
    } else {
        println!("no IDX files under {}, using synthetic images", dir.display());
        synthetic_image_set(600, 1)
    };
    let (task, _, _) = build_qml_task(&raw, &QmlTaskSpec::default(), 7)?;
    let circuit = hardware_efficient_baseline(10)?;
    let result = evaluate_qml(&circuit, &task, &QmlConfig::thorough(), 11)?;
    println!(
        "validation accuracy {:.3} after {} epochs (train MSE {:.3})",
        result.accuracy, result.epochs, result.train_loss
    );
    Ok(())
}
