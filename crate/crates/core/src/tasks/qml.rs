use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate, GateKind, GateSet};
use crate::error::{Error, Result};
use crate::optim::{Adam, AdamConfig};
use crate::seed;
use crate::sim::{amplitude_encode, apply_circuit, backprop, StateVector};

/// One labelled input; `label` is false for class A and true for class B.
#[derive(Clone, Debug, PartialEq)]
pub struct QmlSample {
    pub x: Vec<f64>,
    pub label: bool,
}

/// Binary classification task over amplitude-encoded inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct QmlTask {
    pub n: usize,
    pub train: Vec<QmlSample>,
    pub val: Vec<QmlSample>,
}

impl QmlTask {
    pub fn validate(&self) -> Result<()> {
        if self.train.is_empty() || self.val.is_empty() {
            return Err(Error::Dataset("QML task needs train and validation samples".into()));
        }
        let dim = 1usize << self.n;
        for s in self.train.iter().chain(&self.val) {
            if s.x.len() != dim {
                return Err(Error::Dataset(format!(
                    "sample has {} features, expected {dim}",
                    s.x.len()
                )));
            }
            if s.x.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Dataset("features must be finite and non-negative".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QmlConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Stop after this many epochs without a validation-accuracy improvement.
    pub patience: usize,
    pub init_range: f64,
    /// Head weights start uniform on `(-head_init, head_init)`.
    pub head_init: f64,
    pub target_a: f64,
    pub target_b: f64,
    pub threshold: f64,
}

impl Default for QmlConfig {
    fn default() -> Self {
        QmlConfig {
            lr: 0.005,
            batch_size: 64,
            epochs: 40,
            patience: 5,
            init_range: 0.1,
            head_init: 1.0,
            target_a: 1.0,
            target_b: 9.0,
            threshold: 5.0,
        }
    }
}

impl QmlConfig {
    /// Converged training for reference baselines, as opposed to the loose screening budget.
    pub fn thorough() -> Self {
        QmlConfig {
            epochs: 80,
            patience: 20,
            ..Default::default()
        }
    }
}

/// `10 / (1 + e^{-x})`.
pub fn scaled_sigmoid(x: f64) -> f64 {
    10.0 / (1.0 + (-x).exp())
}

/// Ansatz, appended Rx measurement layer, and the dense head `σ(Σ k_i <Z_i> + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QmlModel {
    pub circuit: Circuit,
    pub params: Vec<f64>,
    pub measurement: Vec<f64>,
    pub k: Vec<f64>,
    pub b: f64,
}

impl QmlModel {
    /// Model with zero angles and an all-zero head.
    pub fn zeros(circuit: Circuit) -> Self {
        let n = circuit.n;
        QmlModel {
            params: vec![0.0; circuit.num_params()],
            measurement: vec![0.0; n],
            k: vec![0.0; n],
            b: 0.0,
            circuit,
        }
    }

    fn extended(&self) -> Circuit {
        extend_with_measurement(&self.circuit)
    }

    fn flat_params(&self) -> Vec<f64> {
        let mut p = self.params.clone();
        p.extend_from_slice(&self.measurement);
        p
    }

    fn z_expectations(ext: &Circuit, angles: &[f64], input: &StateVector) -> (StateVector, Vec<f64>) {
        let mut psi = input.clone();
        apply_circuit(&mut psi, ext, angles);
        let n = psi.num_qubits();
        let mut z = vec![0.0; n];
        for (i, a) in psi.amplitudes().iter().enumerate() {
            let p = a.norm_sqr();
            for (q, zq) in z.iter_mut().enumerate() {
                if i >> q & 1 == 0 {
                    *zq += p;
                } else {
                    *zq -= p;
                }
            }
        }
        (psi, z)
    }

    fn head(&self, z: &[f64]) -> f64 {
        scaled_sigmoid(self.k.iter().zip(z).map(|(k, z)| k * z).sum::<f64>() + self.b)
    }

    /// Prediction in `(0, 10)` for a raw feature vector.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let input = amplitude_encode(x)?;
        self.predict_state(&self.extended(), &self.flat_params(), &input)
    }

    fn predict_state(&self, ext: &Circuit, angles: &[f64], input: &StateVector) -> Result<f64> {
        if input.num_qubits() != self.circuit.n {
            return Err(Error::Dimension(format!(
                "input on {} qubits, model on {}",
                input.num_qubits(),
                self.circuit.n
            )));
        }
        let (_, z) = Self::z_expectations(ext, angles, input);
        Ok(self.head(&z))
    }

    /// Fraction of samples whose thresholded prediction matches the label.
    pub fn accuracy(&self, samples: &[QmlSample], threshold: f64) -> Result<f64> {
        let states = encode_all(samples)?;
        self.accuracy_encoded(&states, samples, threshold)
    }

    fn accuracy_encoded(
        &self,
        states: &[StateVector],
        samples: &[QmlSample],
        threshold: f64,
    ) -> Result<f64> {
        let ext = self.extended();
        let angles = self.flat_params();
        let correct = states
            .par_iter()
            .zip(samples)
            .map(|(s, sample)| {
                self.predict_state(&ext, &angles, s)
                    .map(|y| usize::from((y > threshold) == sample.label))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .sum::<usize>();
        Ok(correct as f64 / samples.len() as f64)
    }
}

fn extend_with_measurement(circuit: &Circuit) -> Circuit {
    let set = GateSet::custom(GateKind::ALL.to_vec()).expect("all kinds are distinct");
    let mut gates = circuit.gates.clone();
    gates.extend((0..circuit.n).map(|q| Gate::single(GateKind::Rx, q)));
    Circuit::with_gates(circuit.n, set, gates)
}

fn encode_all(samples: &[QmlSample]) -> Result<Vec<StateVector>> {
    samples.iter().map(|s| amplitude_encode(&s.x)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct QmlResult {
    /// Validation accuracy of the retained (best-epoch) weights.
    pub accuracy: f64,
    pub epochs: usize,
    pub train_loss: f64,
    pub model: QmlModel,
}

/// Jointly trains circuit angles, the measurement layer and the head on the task's MSE loss.
pub fn evaluate_qml(
    circuit: &Circuit,
    task: &QmlTask,
    config: &QmlConfig,
    seed: u64,
) -> Result<QmlResult> {
    circuit.ensure_valid()?;
    task.validate()?;
    if circuit.n != task.n {
        return Err(Error::Dimension(format!(
            "circuit on {} qubits, task on {}",
            circuit.n, task.n
        )));
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let n = circuit.n;
    let np = circuit.num_params();
    let mut rng = seed::rng(seed, &[seed::tag("qml-init")]);
    let mut model = QmlModel::zeros(circuit.clone());
    for p in model.params.iter_mut() {
        *p = rng.random_range(-config.init_range..=config.init_range);
    }
    for m in model.measurement.iter_mut() {
        *m = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    }
    for k in model.k.iter_mut() {
        *k = rng.random_range(-config.head_init..=config.head_init);
    }

    let train_states = encode_all(&task.train)?;
    let val_states = encode_all(&task.val)?;
    let ext = model.extended();
    let total = np + 2 * n + 1;
    let mut adam = Adam::new(AdamConfig::with_lr(config.lr), total);
    let mut order: Vec<usize> = (0..task.train.len()).collect();

    let mut best = model.clone();
    let mut best_acc = model.accuracy_encoded(&val_states, &task.val, config.threshold)?;
    let mut since_best = 0;
    let mut epochs = 0;
    let mut train_loss = f64::NAN;
    for _ in 0..config.epochs {
        epochs += 1;
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let angles = model.flat_params();
            let per_sample: Vec<(f64, Vec<f64>)> = batch
                .par_iter()
                .map(|&i| {
                    let target = if task.train[i].label {
                        config.target_b
                    } else {
                        config.target_a
                    };
                    sample_gradient(&model, &ext, &angles, &train_states[i], target)
                })
                .collect();
            let mut grad = vec![0.0; total];
            for (loss, g) in &per_sample {
                loss_sum += loss;
                for (a, b) in grad.iter_mut().zip(g) {
                    *a += b;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);

            let mut flat = angles;
            flat.extend_from_slice(&model.k);
            flat.push(model.b);
            adam.step(&mut flat, &grad);
            if flat.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged("QML parameters became non-finite".into()));
            }
            model.params.copy_from_slice(&flat[..np]);
            model.measurement.copy_from_slice(&flat[np..np + n]);
            model.k.copy_from_slice(&flat[np + n..np + 2 * n]);
            model.b = flat[np + 2 * n];
        }
        train_loss = loss_sum / task.train.len() as f64;
        let acc = model.accuracy_encoded(&val_states, &task.val, config.threshold)?;
        log::debug!("qml epoch {epochs}: loss {train_loss:.4} val acc {acc:.4}");
        if acc > best_acc {
            best_acc = acc;
            best = model.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }
    Ok(QmlResult {
        accuracy: best_acc,
        epochs,
        train_loss,
        model: best,
    })
}

/// Squared error and its gradient over `[angles, k, b]` for one sample.
fn sample_gradient(
    model: &QmlModel,
    ext: &Circuit,
    angles: &[f64],
    input: &StateVector,
    target: f64,
) -> (f64, Vec<f64>) {
    let (psi, z) = QmlModel::z_expectations(ext, angles, input);
    let y = model.head(&z);
    let dl_dy = 2.0 * (y - target);
    let dl_ds = dl_dy * y * (1.0 - y / 10.0);
    // cotangent of Σ w_q <Z_q> is (Σ w_q Z_q)|ψ>, diagonal in the computational basis
    let w: Vec<f64> = model.k.iter().map(|k| dl_ds * k).collect();
    let mut lambda = psi.clone();
    for (i, a) in lambda.amplitudes_mut().iter_mut().enumerate() {
        let d: f64 = w
            .iter()
            .enumerate()
            .map(|(q, wq)| if i >> q & 1 == 0 { *wq } else { -*wq })
            .sum();
        *a *= d;
    }
    let mut grad = backprop(ext, angles, psi, lambda);
    grad.extend(z.iter().map(|zq| dl_ds * zq));
    grad.push(dl_ds);
    ((y - target).powi(2), grad)
}
