use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{Cache, Layer};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// A sequential stack of layers with a fixed per-item input shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub input_shape: Vec<usize>,
    pub layers: Vec<Layer>,
}

impl Network {
    pub fn new(input_shape: Vec<usize>, layers: Vec<Layer>) -> Result<Self> {
        let net = Network {
            input_shape,
            layers,
        };
        net.output_shape()?;
        Ok(net)
    }

    pub fn output_shape(&self) -> Result<Vec<usize>> {
        let mut shape = self.input_shape.clone();
        for l in &self.layers {
            shape = l.output_shape(&shape)?;
        }
        Ok(shape)
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.shape.len() != self.input_shape.len() + 1 || x.shape[1..] != self.input_shape[..] {
            return Err(Error::Dimension(format!(
                "network expects items of shape {:?}, got batch {:?}",
                self.input_shape, x.shape
            )));
        }
        Ok(())
    }

    /// Forward pass keeping the caches. Training mode when `rng` is given.
    pub fn forward(&self, x: &Tensor, mut rng: Option<&mut ChaCha8Rng>) -> Result<(Tensor, Vec<Cache>)> {
        self.check_input(x)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for l in &self.layers {
            let (y, c) = l.forward(&h, rng.as_deref_mut())?;
            caches.push(c);
            h = y;
        }
        Ok((h, caches))
    }

    /// Inference: dropout off, batch-norm running statistics.
    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.forward(x, None)?.0)
    }

    /// Folds the batch statistics of a training forward pass into the running averages.
    pub fn update_running_stats(&mut self, caches: &[Cache]) {
        for (l, c) in self.layers.iter_mut().zip(caches) {
            if let (
                Layer::BatchNorm(bn),
                Cache::BatchNorm {
                    batch_mean,
                    batch_var,
                    train: true,
                    ..
                },
            ) = (l, c)
            {
                let m = bn.momentum;
                for f in 0..bn.features {
                    bn.running_mean[f] = m * bn.running_mean[f] + (1.0 - m) * batch_mean[f];
                    bn.running_var[f] = m * bn.running_var[f] + (1.0 - m) * batch_var[f];
                }
            }
        }
    }

    /// Flat gradient of every trainable array, in [`Network::params`] order.
    ///
    /// `caches` may cover only a prefix of the layers; `dy` is then the gradient at the
    /// output of that prefix and the skipped layers get zero gradients.
    pub fn backward(&self, caches: &[Cache], dy: &Tensor) -> Result<Vec<f64>> {
        if caches.len() > self.layers.len() {
            return Err(Error::Dimension("more caches than layers".into()));
        }
        let mut per_layer: Vec<Vec<Vec<f64>>> = self
            .layers
            .iter()
            .map(|l| l.params().iter().map(|p| vec![0.0; p.len()]).collect())
            .collect();
        let mut g = dy.clone();
        for (i, (l, c)) in self.layers.iter().zip(caches).enumerate().rev() {
            let (dx, grads) = l.backward(c, &g)?;
            per_layer[i] = grads;
            g = dx;
        }
        Ok(per_layer.into_iter().flatten().flatten().collect())
    }

    /// Gradient with respect to the network input (used by tests).
    pub fn input_gradient(&self, caches: &[Cache], dy: &Tensor) -> Result<Tensor> {
        let mut g = dy.clone();
        for (l, c) in self.layers.iter().zip(caches).rev() {
            g = l.backward(c, &g)?.0;
        }
        Ok(g)
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| l.params())
            .map(Vec::len)
            .sum()
    }

    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.params())
            .flat_map(|p| p.iter().copied())
            .collect()
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::Dimension(format!(
                "{} parameters given, network has {}",
                flat.len(),
                self.num_params()
            )));
        }
        let mut at = 0;
        for l in self.layers.iter_mut() {
            for p in l.params_mut() {
                let len = p.len();
                p.copy_from_slice(&flat[at..at + len]);
                at += len;
            }
        }
        Ok(())
    }

    /// Per-parameter mask of the weights that carry L2 decay.
    pub fn decay_mask(&self) -> Vec<bool> {
        let mut mask = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            for (p, d) in l.params().iter().zip(l.decayed()) {
                mask.extend(std::iter::repeat_n(d, p.len()));
            }
        }
        mask
    }
}
