//! The two circuit-performance predictors: a convolutional classifier of good/bad
//! circuits and a recurrent regressor reading circuit layers as time steps.

use std::path::Path;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::layers::{BatchNorm, Conv2d, Dense, Layer, Lstm, SimpleRnn};
use super::network::Network;
use super::tensor::Tensor;
use crate::circuit::{Circuit, CircuitImage, GateSet};
use crate::error::{Error, Result};
use crate::optim::{Adam, AdamConfig};
use crate::seed;
use crate::stats;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Mse,
    Mae,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cell {
    Lstm,
    Rnn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierArch {
    /// Output channels of each convolution block.
    pub channels: Vec<usize>,
    /// Dilation of each convolution block.
    pub dilations: Vec<usize>,
    pub kernel: usize,
    pub dropout: f64,
    pub l2: f64,
}

impl Default for ClassifierArch {
    fn default() -> Self {
        ClassifierArch {
            channels: vec![16, 32],
            dilations: vec![1, 2],
            kernel: 3,
            dropout: 0.5,
            l2: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegressorArch {
    pub hidden: usize,
    pub dropout: f64,
    pub cell: Cell,
}

impl Default for RegressorArch {
    fn default() -> Self {
        RegressorArch {
            hidden: 64,
            dropout: 0.4,
            cell: Cell::Lstm,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Regressor loss; the classifier always uses binary cross-entropy.
    pub loss: Loss,
    /// Random qubit permutations of the classifier's training images.
    pub augment: bool,
    pub val_fraction: f64,
    /// Keep the weights of the epoch with the lowest held-out loss. Off by default: with
    /// a few dozen held-out records this tends to pick a near-constant early model.
    pub restore_best: bool,
    pub classifier: ClassifierArch,
    pub regressor: RegressorArch,
    /// Classifier label cut on the task metric.
    pub label_threshold: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            batch_size: 32,
            epochs: 150,
            loss: Loss::Mse,
            augment: true,
            val_fraction: 0.2,
            restore_best: false,
            classifier: ClassifierArch::default(),
            regressor: RegressorArch::default(),
            label_threshold: 0.014,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.batch_size == 0 || self.epochs == 0 {
            return bad("batch size and epochs must be positive");
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return bad("val_fraction must lie in [0, 1)");
        }
        if !(self.lr > 0.0) {
            return bad("learning rate must be positive");
        }
        let c = &self.classifier;
        if c.channels.len() != c.dilations.len() || c.channels.is_empty() || c.kernel % 2 == 0 {
            return bad("classifier needs matching channel/dilation lists and an odd kernel");
        }
        for p in [c.dropout, self.regressor.dropout] {
            if !(0.0..1.0).contains(&p) {
                return bad("dropout rate must lie in [0, 1)");
            }
        }
        if self.regressor.hidden == 0 {
            return bad("regressor hidden size must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    Classifier,
    Regressor,
}

/// What a regressor was trained to predict.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Metric,
    Std,
}

/// A labelled circuit image.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub image: CircuitImage,
    pub value: f64,
}

impl Example {
    pub fn from_circuit(circuit: &Circuit, depth: usize, value: f64) -> Result<Self> {
        Ok(Example {
            image: circuit.to_image(depth)?,
            value,
        })
    }
}

/// Classifier labelling rule: an example is "good" when its metric is on the right side of `threshold`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Labeling {
    pub threshold: f64,
    /// `true` for error-like metrics (good means below), `false` for accuracy-like ones.
    pub good_below: bool,
}

impl Labeling {
    /// Error ratio labelling used for the Ising task.
    pub fn error_ratio() -> Self {
        Labeling {
            threshold: 0.014,
            good_below: true,
        }
    }

    pub fn is_good(&self, value: f64) -> bool {
        if self.good_below {
            value < self.threshold
        } else {
            value > self.threshold
        }
    }
}

/// A trained model plus everything needed to score new circuits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    pub version: u32,
    pub kind: PredictorKind,
    pub target: Target,
    pub depth: usize,
    pub qubits: usize,
    /// Gate set of the training circuits, when known; images only carry its size.
    pub gate_set: Option<GateSet>,
    pub network: Network,
    /// Regressor label standardization; identity for the classifier.
    pub label_mean: f64,
    pub label_std: f64,
    pub labeling: Option<Labeling>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub n_train: usize,
    pub n_val: usize,
    pub train_positives: usize,
    pub val_positives: usize,
    /// Held-out precision and recall at a 0.5 cut.
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub best_epoch: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressorReport {
    pub n_train: usize,
    pub n_val: usize,
    pub r2: f64,
    pub spearman: f64,
    pub best_epoch: usize,
}

pub const MIN_REGRESSOR_RECORDS: usize = 30;

pub fn classifier_network(
    depth: usize,
    qubits: usize,
    channels: usize,
    arch: &ClassifierArch,
    rng: &mut ChaCha8Rng,
) -> Result<Network> {
    let mut layers = Vec::new();
    let mut c_in = channels;
    for (&c_out, &dil) in arch.channels.iter().zip(&arch.dilations) {
        layers.push(Layer::Conv2d(Conv2d::new(arch.kernel, dil, c_in, c_out, rng)));
        // axis 2 of [batch, depth, qubit, channel]
        layers.push(Layer::BatchNorm(BatchNorm::new(2, qubits)));
        layers.push(Layer::Elu { alpha: 1.0 });
        layers.push(Layer::Dropout { rate: arch.dropout });
        c_in = c_out;
    }
    layers.push(Layer::Flatten);
    layers.push(Layer::Dense(Dense::new(depth * qubits * c_in, 1, rng)));
    layers.push(Layer::Sigmoid);
    Network::new(vec![depth, qubits, channels], layers)
}

pub fn regressor_network(
    depth: usize,
    qubits: usize,
    channels: usize,
    arch: &RegressorArch,
    rng: &mut ChaCha8Rng,
) -> Result<Network> {
    let step = qubits * channels;
    let cell = match arch.cell {
        Cell::Lstm => Layer::Lstm(Lstm::new(step, arch.hidden, rng)),
        Cell::Rnn => Layer::Rnn(SimpleRnn::new(step, arch.hidden, rng)),
    };
    Network::new(
        vec![depth, qubits, channels],
        vec![
            Layer::Reshape {
                shape: vec![depth, step],
            },
            cell,
            Layer::Dropout { rate: arch.dropout },
            Layer::Dense(Dense::new(arch.hidden, 1, rng)),
        ],
    )
}

fn check_examples(examples: &[Example]) -> Result<[usize; 3]> {
    let first = examples
        .first()
        .ok_or_else(|| Error::Dataset("no training examples".into()))?;
    let shape = first.image.shape();
    if let Some(e) = examples.iter().find(|e| e.image.shape() != shape) {
        return Err(Error::Dimension(format!(
            "mixed image shapes {shape:?} and {:?}",
            e.image.shape()
        )));
    }
    if let Some(e) = examples.iter().find(|e| !e.value.is_finite()) {
        return Err(Error::Dataset(format!("non-finite label {}", e.value)));
    }
    Ok(shape)
}

fn split(len: usize, val_fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..len).collect();
    idx.shuffle(rng);
    let n_val = ((len as f64) * val_fraction).round() as usize;
    let val = idx.split_off(len - n_val.min(len.saturating_sub(1)));
    (idx, val)
}

fn random_permutation(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

fn batch_tensor(images: &[&CircuitImage]) -> Result<Tensor> {
    let shape = images[0].shape();
    let items: Vec<&[f64]> = images.iter().map(|i| i.data.as_slice()).collect();
    Tensor::stack(&items, &shape)
}

enum Objective {
    /// Binary cross-entropy on the sigmoid output; labels are 0/1.
    Bce,
    Regression(Loss),
}

impl Objective {
    /// Mean loss and the gradient at the point where backpropagation starts
    /// (the logit for BCE, the output otherwise).
    fn loss_and_grad(&self, out: &[f64], y: &[f64]) -> (f64, Vec<f64>) {
        let b = out.len() as f64;
        match self {
            Objective::Bce => {
                let mut loss = 0.0;
                let grad = out
                    .iter()
                    .zip(y)
                    .map(|(&p, &t)| {
                        let pc = p.clamp(1e-12, 1.0 - 1e-12);
                        loss -= t * pc.ln() + (1.0 - t) * (1.0 - pc).ln();
                        (p - t) / b
                    })
                    .collect();
                (loss / b, grad)
            }
            Objective::Regression(Loss::Mse) => {
                let loss = out.iter().zip(y).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / b;
                let grad = out.iter().zip(y).map(|(p, t)| 2.0 * (p - t) / b).collect();
                (loss, grad)
            }
            Objective::Regression(Loss::Mae) => {
                let loss = out.iter().zip(y).map(|(p, t)| (p - t).abs()).sum::<f64>() / b;
                let grad = out
                    .iter()
                    .zip(y)
                    .map(|(p, t)| (p - t).signum() * if p == t { 0.0 } else { 1.0 } / b)
                    .collect();
                (loss, grad)
            }
        }
    }

    /// Layers skipped by backpropagation (the final sigmoid for BCE).
    fn skip(&self) -> usize {
        match self {
            Objective::Bce => 1,
            Objective::Regression(_) => 0,
        }
    }
}

/// Loss, plus the L2 penalty, and its gradient for one batch in training mode.
/// Exposed within the crate for gradient checks.
pub(crate) fn batch_loss_and_grad(
    net: &Network,
    objective_bce: bool,
    loss: Loss,
    l2: f64,
    x: &Tensor,
    y: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<(f64, Vec<f64>, Vec<super::layers::Cache>)> {
    let obj = if objective_bce {
        Objective::Bce
    } else {
        Objective::Regression(loss)
    };
    let (out, caches) = net.forward(x, Some(rng))?;
    let (mut value, dy) = obj.loss_and_grad(&out.data, y);
    let keep = caches.len() - obj.skip();
    let mut grad = net.backward(&caches[..keep], &Tensor::new(out.shape.clone(), dy)?)?;
    if l2 > 0.0 {
        let params = net.params();
        for ((g, w), d) in grad.iter_mut().zip(&params).zip(net.decay_mask()) {
            if d {
                value += l2 * w * w;
                *g += 2.0 * l2 * w;
            }
        }
    }
    Ok((value, grad, caches))
}

struct Fit {
    network: Network,
    best_epoch: usize,
}

#[allow(clippy::too_many_arguments)]
fn fit(
    mut net: Network,
    bce: bool,
    augment: bool,
    l2: f64,
    images: &[&CircuitImage],
    labels: &[f64],
    val_images: &[&CircuitImage],
    val_labels: &[f64],
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Fit> {
    let objective = if bce {
        Objective::Bce
    } else {
        Objective::Regression(cfg.loss)
    };
    let mut adam = Adam::new(AdamConfig::with_lr(cfg.lr), net.num_params());
    let mut order: Vec<usize> = (0..images.len()).collect();
    let qubits = images[0].qubits;
    let mut best: Option<(f64, Network, usize)> = None;
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<CircuitImage> = chunk
                .iter()
                .map(|&i| {
                    if augment {
                        images[i].permute_qubits(&random_permutation(qubits, rng))
                    } else {
                        Ok(images[i].clone())
                    }
                })
                .collect::<Result<_>>()?;
            let refs: Vec<&CircuitImage> = batch.iter().collect();
            let x = batch_tensor(&refs)?;
            let y: Vec<f64> = chunk.iter().map(|&i| labels[i]).collect();
            let (loss, grad, caches) = batch_loss_and_grad(&net, bce, cfg.loss, l2, &x, &y, rng)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged(format!(
                    "non-finite training loss at epoch {epoch}; lower the learning rate"
                )));
            }
            net.update_running_stats(&caches);
            let mut params = net.params();
            adam.step(&mut params, &grad);
            net.set_params(&params)?;
        }
        if cfg.restore_best && !val_images.is_empty() {
            let out = net.infer(&batch_tensor(val_images)?)?;
            let (vloss, _) = objective.loss_and_grad(&out.data, val_labels);
            log::debug!("epoch {epoch}: held-out loss {vloss:.5}");
            if best.as_ref().is_none_or(|(b, _, _)| vloss < *b) {
                best = Some((vloss, net.clone(), epoch));
            }
        }
    }
    Ok(match best {
        Some((_, network, best_epoch)) => Fit {
            network,
            best_epoch,
        },
        None => Fit {
            network: net,
            best_epoch: cfg.epochs - 1,
        },
    })
}

/// Trains the good/bad circuit classifier with an 80/20 (configurable) held-out split.
pub fn train_classifier(
    examples: &[Example],
    labeling: Labeling,
    cfg: &TrainConfig,
) -> Result<(Predictor, ClassifierReport)> {
    cfg.validate()?;
    let [depth, qubits, channels] = check_examples(examples)?;
    let labels: Vec<f64> = examples
        .iter()
        .map(|e| if labeling.is_good(e.value) { 1.0 } else { 0.0 })
        .collect();
    let positives = labels.iter().filter(|&&l| l == 1.0).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::Dataset(format!(
            "single-class dataset: {positives} of {} records are good under threshold {}",
            labels.len(),
            labeling.threshold
        )));
    }
    let mut rng = seed::rng(cfg.seed, &[seed::tag("classifier")]);
    let (tr, va) = split(examples.len(), cfg.val_fraction, &mut rng);
    let net = classifier_network(depth, qubits, channels, &cfg.classifier, &mut rng)?;
    let images: Vec<&CircuitImage> = tr.iter().map(|&i| &examples[i].image).collect();
    let y: Vec<f64> = tr.iter().map(|&i| labels[i]).collect();
    let val_images: Vec<&CircuitImage> = va.iter().map(|&i| &examples[i].image).collect();
    let val_y: Vec<f64> = va.iter().map(|&i| labels[i]).collect();
    let fit = fit(
        net,
        true,
        cfg.augment,
        cfg.classifier.l2,
        &images,
        &y,
        &val_images,
        &val_y,
        cfg,
        &mut rng,
    )?;
    let predictor = Predictor {
        version: CHECKPOINT_VERSION,
        kind: PredictorKind::Classifier,
        target: Target::Metric,
        depth,
        qubits,
        gate_set: None,
        network: fit.network,
        label_mean: 0.0,
        label_std: 1.0,
        labeling: Some(labeling),
    };
    let (precision, recall, accuracy) = if va.is_empty() {
        (0.0, 0.0, 0.0)
    } else {
        let scores = predictor.score_images(&val_images)?;
        let truth: Vec<bool> = val_y.iter().map(|&l| l == 1.0).collect();
        let pred: Vec<bool> = scores.iter().map(|&s| s > 0.5).collect();
        let (p, r) = stats::precision_recall(&truth, &pred);
        let acc = truth.iter().zip(&pred).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64;
        (p, r, acc)
    };
    let report = ClassifierReport {
        n_train: tr.len(),
        n_val: va.len(),
        train_positives: y.iter().filter(|&&l| l == 1.0).count(),
        val_positives: val_y.iter().filter(|&&l| l == 1.0).count(),
        precision,
        recall,
        accuracy,
        best_epoch: fit.best_epoch,
    };
    Ok((predictor, report))
}

/// Trains the recurrent regressor on standardized labels.
pub fn train_regressor(
    examples: &[Example],
    target: Target,
    cfg: &TrainConfig,
) -> Result<(Predictor, RegressorReport)> {
    cfg.validate()?;
    let [depth, qubits, channels] = check_examples(examples)?;
    if examples.len() < MIN_REGRESSOR_RECORDS {
        return Err(Error::Dataset(format!(
            "regressor needs at least {MIN_REGRESSOR_RECORDS} records, got {}",
            examples.len()
        )));
    }
    let values: Vec<f64> = examples.iter().map(|e| e.value).collect();
    let mean = stats::mean(&values);
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64).sqrt();
    if std <= 1e-12 * mean.abs().max(1.0) {
        return Err(Error::Dataset(
            "all labels are identical; R² would be undefined".into(),
        ));
    }
    let mut rng = seed::rng(cfg.seed, &[seed::tag("regressor")]);
    let (tr, va) = split(examples.len(), cfg.val_fraction, &mut rng);
    let net = regressor_network(depth, qubits, channels, &cfg.regressor, &mut rng)?;
    let scaled = |i: usize| (values[i] - mean) / std;
    let images: Vec<&CircuitImage> = tr.iter().map(|&i| &examples[i].image).collect();
    let y: Vec<f64> = tr.iter().map(|&i| scaled(i)).collect();
    let val_images: Vec<&CircuitImage> = va.iter().map(|&i| &examples[i].image).collect();
    let val_y: Vec<f64> = va.iter().map(|&i| scaled(i)).collect();
    let fit = fit(net, false, false, 0.0, &images, &y, &val_images, &val_y, cfg, &mut rng)?;
    let predictor = Predictor {
        version: CHECKPOINT_VERSION,
        kind: PredictorKind::Regressor,
        target,
        depth,
        qubits,
        gate_set: None,
        network: fit.network,
        label_mean: mean,
        label_std: std,
        labeling: None,
    };
    let (r2, spearman) = if va.len() < 2 {
        (f64::NAN, f64::NAN)
    } else {
        let pred = predictor.score_images(&val_images)?;
        let truth: Vec<f64> = va.iter().map(|&i| values[i]).collect();
        (
            stats::r_squared(&truth, &pred).unwrap_or(f64::NAN),
            stats::spearman(&truth, &pred).unwrap_or(f64::NAN),
        )
    };
    let report = RegressorReport {
        n_train: tr.len(),
        n_val: va.len(),
        r2,
        spearman,
        best_epoch: fit.best_epoch,
    };
    Ok((predictor, report))
}

impl Predictor {
    /// Inference-mode scores, in label units. Batches run in parallel; results do not
    /// depend on batching because inference is per item.
    pub fn score_images(&self, images: &[&CircuitImage]) -> Result<Vec<f64>> {
        let expect = [self.depth, self.qubits, self.network.input_shape[2]];
        if let Some(bad) = images.iter().find(|i| i.shape() != expect) {
            return Err(Error::Dimension(format!(
                "predictor takes images {expect:?}, got {:?}",
                bad.shape()
            )));
        }
        let chunks: Vec<Vec<f64>> = images
            .par_chunks(128)
            .map(|c| Ok(self.network.infer(&batch_tensor(c)?)?.data))
            .collect::<Result<_>>()?;
        Ok(chunks
            .into_iter()
            .flatten()
            .map(|v| v * self.label_std + self.label_mean)
            .collect())
    }

    /// Scores one circuit; its gate count is free, only depth, width and gate set must fit.
    pub fn predict(&self, circuit: &Circuit) -> Result<f64> {
        Ok(self.predict_many(std::slice::from_ref(circuit))?[0])
    }

    pub fn predict_many(&self, circuits: &[Circuit]) -> Result<Vec<f64>> {
        let images = circuits
            .iter()
            .map(|c| self.image_of(c))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&CircuitImage> = images.iter().collect();
        self.score_images(&refs)
    }

    pub fn image_of(&self, circuit: &Circuit) -> Result<CircuitImage> {
        if circuit.n != self.qubits {
            return Err(Error::Dimension(format!(
                "predictor was trained on {} qubits, circuit has {}",
                self.qubits, circuit.n
            )));
        }
        if let Some(gs) = &self.gate_set {
            if circuit.gate_set != *gs {
                return Err(Error::Dimension(format!(
                    "predictor was trained on gate set {gs}, circuit uses {}",
                    circuit.gate_set
                )));
            }
        }
        circuit.to_image(self.depth)
    }

    pub fn with_gate_set(mut self, gate_set: GateSet) -> Self {
        self.gate_set = Some(gate_set);
        self
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let p: Predictor = serde_json::from_str(&text)?;
        if p.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "{}: checkpoint version {} (this build reads {CHECKPOINT_VERSION})",
                path.display(),
                p.version
            )));
        }
        let shape = p.network.output_shape()?;
        if p.network.input_shape != [p.depth, p.qubits, p.network.input_shape[2]] || shape != [1] {
            return Err(Error::Checkpoint(format!(
                "{}: network does not match the declared image shape",
                path.display()
            )));
        }
        Ok(p)
    }
}
