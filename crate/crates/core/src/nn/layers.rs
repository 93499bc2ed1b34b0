use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn uniform(rng: &mut ChaCha8Rng, len: usize, limit: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-limit..limit)).collect()
}

/// Fully connected layer on `[B, in]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// `[in, out]` row-major.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / inputs.max(1) as f64).sqrt();
        Dense {
            inputs,
            outputs,
            w: uniform(rng, inputs * outputs, limit),
            b: vec![0.0; outputs],
        }
    }
}

/// 2-D convolution over `[B, H, W, C]` with "same" zero padding and dilation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conv2d {
    pub kernel: usize,
    pub dilation: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    /// `[kh, kw, in, out]` row-major.
    pub k: Vec<f64>,
    pub b: Vec<f64>,
}

impl Conv2d {
    pub fn new(
        kernel: usize,
        dilation: usize,
        in_channels: usize,
        out_channels: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let fan_in = kernel * kernel * in_channels;
        let limit = (6.0 / fan_in.max(1) as f64).sqrt();
        Conv2d {
            kernel,
            dilation,
            in_channels,
            out_channels,
            k: uniform(rng, kernel * kernel * in_channels * out_channels, limit),
            b: vec![0.0; out_channels],
        }
    }

    #[inline]
    fn offset(&self, i: usize) -> isize {
        (i as isize - (self.kernel / 2) as isize) * self.dilation as isize
    }
}

/// Batch normalization with one (gamma, beta) pair per index of `axis`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    /// Axis of the full tensor (batch is axis 0) that indexes the normalized features.
    pub axis: usize,
    pub features: usize,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
}

impl BatchNorm {
    pub fn new(axis: usize, features: usize) -> Self {
        BatchNorm {
            axis,
            features,
            gamma: vec![1.0; features],
            beta: vec![0.0; features],
            running_mean: vec![0.0; features],
            running_var: vec![1.0; features],
            momentum: 0.9,
            eps: 1e-3,
        }
    }

    fn feature_of(&self, shape: &[usize]) -> Result<impl Fn(usize) -> usize> {
        if self.axis == 0 || self.axis >= shape.len() || shape[self.axis] != self.features {
            return Err(Error::Dimension(format!(
                "batch norm over axis {} with {} features cannot take {shape:?}",
                self.axis, self.features
            )));
        }
        let stride: usize = shape[self.axis + 1..].iter().product();
        let f = self.features;
        Ok(move |i: usize| (i / stride) % f)
    }
}

/// Gated recurrent cell (input, forget, cell, output gates) over `[B, T, F]`; emits the last hidden state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lstm {
    pub inputs: usize,
    pub hidden: usize,
    /// `[F, 4H]`, gate blocks ordered i, f, g, o.
    pub wx: Vec<f64>,
    /// `[H, 4H]`.
    pub wh: Vec<f64>,
    pub b: Vec<f64>,
}

impl Lstm {
    pub fn new(inputs: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = 1.0 / (hidden as f64).sqrt();
        let mut b = vec![0.0; 4 * hidden];
        b[hidden..2 * hidden].iter_mut().for_each(|v| *v = 1.0);
        Lstm {
            inputs,
            hidden,
            wx: uniform(rng, inputs * 4 * hidden, limit),
            wh: uniform(rng, hidden * 4 * hidden, limit),
            b,
        }
    }
}

/// Elman cell `h = tanh(x Wx + h Wh + b)` over `[B, T, F]`; emits the last hidden state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimpleRnn {
    pub inputs: usize,
    pub hidden: usize,
    pub wx: Vec<f64>,
    pub wh: Vec<f64>,
    pub b: Vec<f64>,
}

impl SimpleRnn {
    pub fn new(inputs: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = 1.0 / (hidden as f64).sqrt();
        SimpleRnn {
            inputs,
            hidden,
            wx: uniform(rng, inputs * hidden, limit),
            wh: uniform(rng, hidden * hidden, limit),
            b: vec![0.0; hidden],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Layer {
    Dense(Dense),
    Conv2d(Conv2d),
    BatchNorm(BatchNorm),
    Dropout { rate: f64 },
    Elu { alpha: f64 },
    Sigmoid,
    /// `[B, ...] -> [B, prod(...)]`.
    Flatten,
    /// `[B, ...] -> [B, shape...]`.
    Reshape { shape: Vec<usize> },
    Lstm(Lstm),
    Rnn(SimpleRnn),
}

/// Values saved by the forward pass for the backward pass.
#[derive(Clone, Debug)]
pub enum Cache {
    Input(Tensor),
    BatchNorm {
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
        batch_mean: Vec<f64>,
        batch_var: Vec<f64>,
        count: usize,
        train: bool,
    },
    Mask(Option<Vec<f64>>),
    InOut(Tensor, Tensor),
    Output(Tensor),
    Shape(Vec<usize>),
    Lstm {
        inputs: Tensor,
        steps: Vec<LstmStep>,
    },
    Rnn {
        inputs: Tensor,
        hs: Vec<Vec<f64>>,
    },
}

#[derive(Clone, Debug)]
pub struct LstmStep {
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates `[B, 4H]`.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl Layer {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::Dense(_) => "dense",
            Layer::Conv2d(_) => "conv2d",
            Layer::BatchNorm(_) => "batch_norm",
            Layer::Dropout { .. } => "dropout",
            Layer::Elu { .. } => "elu",
            Layer::Sigmoid => "sigmoid",
            Layer::Flatten => "flatten",
            Layer::Reshape { .. } => "reshape",
            Layer::Lstm(_) => "lstm",
            Layer::Rnn(_) => "rnn",
        }
    }

    /// Trainable arrays, in a fixed order.
    pub fn params(&self) -> Vec<&Vec<f64>> {
        match self {
            Layer::Dense(d) => vec![&d.w, &d.b],
            Layer::Conv2d(c) => vec![&c.k, &c.b],
            Layer::BatchNorm(bn) => vec![&bn.gamma, &bn.beta],
            Layer::Lstm(l) => vec![&l.wx, &l.wh, &l.b],
            Layer::Rnn(r) => vec![&r.wx, &r.wh, &r.b],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<f64>> {
        match self {
            Layer::Dense(d) => vec![&mut d.w, &mut d.b],
            Layer::Conv2d(c) => vec![&mut c.k, &mut c.b],
            Layer::BatchNorm(bn) => vec![&mut bn.gamma, &mut bn.beta],
            Layer::Lstm(l) => vec![&mut l.wx, &mut l.wh, &mut l.b],
            Layer::Rnn(r) => vec![&mut r.wx, &mut r.wh, &mut r.b],
            _ => Vec::new(),
        }
    }

    /// Which of [`Layer::params`] carry the L2 penalty (dense and convolution kernels).
    pub fn decayed(&self) -> Vec<bool> {
        match self {
            Layer::Dense(_) | Layer::Conv2d(_) => vec![true, false],
            other => vec![false; other.params().len()],
        }
    }

    /// Output shape (without batch) for an input shape (without batch).
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let bad = || {
            Error::Dimension(format!("{} layer cannot take input shape {input:?}", self.name()))
        };
        match self {
            Layer::Dense(d) => {
                if input != [d.inputs] {
                    return Err(bad());
                }
                Ok(vec![d.outputs])
            }
            Layer::Conv2d(c) => {
                if input.len() != 3 || input[2] != c.in_channels {
                    return Err(bad());
                }
                Ok(vec![input[0], input[1], c.out_channels])
            }
            Layer::BatchNorm(bn) => {
                if bn.axis == 0 || bn.axis > input.len() || input[bn.axis - 1] != bn.features {
                    return Err(bad());
                }
                Ok(input.to_vec())
            }
            Layer::Flatten => Ok(vec![input.iter().product()]),
            Layer::Reshape { shape } => {
                if shape.iter().product::<usize>() != input.iter().product::<usize>() {
                    return Err(bad());
                }
                Ok(shape.clone())
            }
            Layer::Lstm(Lstm { inputs, hidden, .. }) | Layer::Rnn(SimpleRnn { inputs, hidden, .. }) => {
                if input.len() != 2 || input[1] != *inputs {
                    return Err(bad());
                }
                Ok(vec![*hidden])
            }
            _ => Ok(input.to_vec()),
        }
    }

    /// Forward pass; `rng` is `Some` in training mode (dropout active, batch statistics used).
    pub fn forward(&self, x: &Tensor, rng: Option<&mut ChaCha8Rng>) -> Result<(Tensor, Cache)> {
        let item_shape = self.output_shape(&x.shape[1..])?;
        let bsz = x.batch();
        let mut out_shape = vec![bsz];
        out_shape.extend_from_slice(&item_shape);
        match self {
            Layer::Dense(d) => {
                let mut y = Tensor::zeros(out_shape);
                for b in 0..bsz {
                    let xi = x.item(b);
                    let yo = &mut y.data[b * d.outputs..(b + 1) * d.outputs];
                    yo.copy_from_slice(&d.b);
                    for (i, &xv) in xi.iter().enumerate() {
                        if xv == 0.0 {
                            continue;
                        }
                        let row = &d.w[i * d.outputs..(i + 1) * d.outputs];
                        for (o, w) in yo.iter_mut().zip(row) {
                            *o += xv * w;
                        }
                    }
                }
                Ok((y, Cache::Input(x.clone())))
            }
            Layer::Conv2d(c) => {
                let (h, w) = (x.shape[1], x.shape[2]);
                let (ci, co) = (c.in_channels, c.out_channels);
                let mut y = Tensor::zeros(out_shape);
                for b in 0..bsz {
                    for r in 0..h {
                        for s in 0..w {
                            let yo = ((b * h + r) * w + s) * co;
                            y.data[yo..yo + co].copy_from_slice(&c.b);
                            for i in 0..c.kernel {
                                let rr = r as isize + c.offset(i);
                                if rr < 0 || rr >= h as isize {
                                    continue;
                                }
                                for j in 0..c.kernel {
                                    let ss = s as isize + c.offset(j);
                                    if ss < 0 || ss >= w as isize {
                                        continue;
                                    }
                                    let xo = ((b * h + rr as usize) * w + ss as usize) * ci;
                                    for a in 0..ci {
                                        let xv = x.data[xo + a];
                                        if xv == 0.0 {
                                            continue;
                                        }
                                        let ko = ((i * c.kernel + j) * ci + a) * co;
                                        for (o, k) in y.data[yo..yo + co].iter_mut().zip(&c.k[ko..ko + co]) {
                                            *o += xv * k;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                Ok((y, Cache::Input(x.clone())))
            }
            Layer::BatchNorm(bn) => {
                let feat = bn.feature_of(&x.shape)?;
                let nf = bn.features;
                let train = rng.is_some();
                let count = x.data.len() / nf;
                let (mean, var) = if train {
                    let mut mean = vec![0.0; nf];
                    for (i, v) in x.data.iter().enumerate() {
                        mean[feat(i)] += v;
                    }
                    mean.iter_mut().for_each(|m| *m /= count as f64);
                    let mut var = vec![0.0; nf];
                    for (i, v) in x.data.iter().enumerate() {
                        var[feat(i)] += (v - mean[feat(i)]).powi(2);
                    }
                    var.iter_mut().for_each(|s| *s /= count as f64);
                    (mean, var)
                } else {
                    (bn.running_mean.clone(), bn.running_var.clone())
                };
                let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + bn.eps).sqrt()).collect();
                let mut xhat = vec![0.0; x.data.len()];
                let mut y = Tensor::zeros(out_shape);
                for (i, v) in x.data.iter().enumerate() {
                    let f = feat(i);
                    xhat[i] = (v - mean[f]) * inv_std[f];
                    y.data[i] = bn.gamma[f] * xhat[i] + bn.beta[f];
                }
                Ok((
                    y,
                    Cache::BatchNorm {
                        xhat,
                        inv_std,
                        batch_mean: mean,
                        batch_var: var,
                        count,
                        train,
                    },
                ))
            }
            Layer::Dropout { rate } => match rng {
                Some(rng) if *rate > 0.0 => {
                    let keep = 1.0 - rate;
                    let mask: Vec<f64> = (0..x.data.len())
                        .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                        .collect();
                    let data = x.data.iter().zip(&mask).map(|(a, m)| a * m).collect();
                    Ok((Tensor::new(out_shape, data)?, Cache::Mask(Some(mask))))
                }
                _ => Ok((x.clone(), Cache::Mask(None))),
            },
            Layer::Elu { alpha } => {
                let data = x
                    .data
                    .iter()
                    .map(|&v| if v > 0.0 { v } else { alpha * (v.exp() - 1.0) })
                    .collect();
                let y = Tensor::new(out_shape, data)?;
                Ok((y.clone(), Cache::InOut(x.clone(), y)))
            }
            Layer::Sigmoid => {
                let y = Tensor::new(out_shape, x.data.iter().map(|&v| sigmoid(v)).collect())?;
                Ok((y.clone(), Cache::Output(y)))
            }
            Layer::Flatten | Layer::Reshape { .. } => Ok((
                x.clone().reshaped(out_shape)?,
                Cache::Shape(x.shape.clone()),
            )),
            Layer::Lstm(l) => {
                let (t_len, f, hd) = (x.shape[1], x.shape[2], l.hidden);
                let mut h = vec![0.0; bsz * hd];
                let mut c = vec![0.0; bsz * hd];
                let mut steps = Vec::with_capacity(t_len);
                for t in 0..t_len {
                    let mut z = vec![0.0; bsz * 4 * hd];
                    for b in 0..bsz {
                        let zb = &mut z[b * 4 * hd..(b + 1) * 4 * hd];
                        zb.copy_from_slice(&l.b);
                        let xo = (b * t_len + t) * f;
                        for a in 0..f {
                            let xv = x.data[xo + a];
                            if xv == 0.0 {
                                continue;
                            }
                            for (zz, w) in zb.iter_mut().zip(&l.wx[a * 4 * hd..(a + 1) * 4 * hd]) {
                                *zz += xv * w;
                            }
                        }
                        for a in 0..hd {
                            let hv = h[b * hd + a];
                            for (zz, w) in zb.iter_mut().zip(&l.wh[a * 4 * hd..(a + 1) * 4 * hd]) {
                                *zz += hv * w;
                            }
                        }
                    }
                    let mut gates = z;
                    let mut new_c = vec![0.0; bsz * hd];
                    let mut new_h = vec![0.0; bsz * hd];
                    let mut tanh_c = vec![0.0; bsz * hd];
                    for b in 0..bsz {
                        let g = &mut gates[b * 4 * hd..(b + 1) * 4 * hd];
                        for u in 0..hd {
                            g[u] = sigmoid(g[u]);
                            g[hd + u] = sigmoid(g[hd + u]);
                            g[2 * hd + u] = g[2 * hd + u].tanh();
                            g[3 * hd + u] = sigmoid(g[3 * hd + u]);
                            let k = b * hd + u;
                            new_c[k] = g[hd + u] * c[k] + g[u] * g[2 * hd + u];
                            tanh_c[k] = new_c[k].tanh();
                            new_h[k] = g[3 * hd + u] * tanh_c[k];
                        }
                    }
                    steps.push(LstmStep {
                        h_prev: std::mem::replace(&mut h, new_h),
                        c_prev: std::mem::replace(&mut c, new_c),
                        gates,
                        tanh_c,
                    });
                }
                Ok((
                    Tensor::new(out_shape, h)?,
                    Cache::Lstm {
                        inputs: x.clone(),
                        steps,
                    },
                ))
            }
            Layer::Rnn(r) => {
                let (t_len, f, hd) = (x.shape[1], x.shape[2], r.hidden);
                let mut hs = vec![vec![0.0; bsz * hd]];
                for t in 0..t_len {
                    let prev = hs.last().unwrap();
                    let mut h = vec![0.0; bsz * hd];
                    for b in 0..bsz {
                        let hb = &mut h[b * hd..(b + 1) * hd];
                        hb.copy_from_slice(&r.b);
                        let xo = (b * t_len + t) * f;
                        for a in 0..f {
                            let xv = x.data[xo + a];
                            for (zz, w) in hb.iter_mut().zip(&r.wx[a * hd..(a + 1) * hd]) {
                                *zz += xv * w;
                            }
                        }
                        for a in 0..hd {
                            let hv = prev[b * hd + a];
                            for (zz, w) in hb.iter_mut().zip(&r.wh[a * hd..(a + 1) * hd]) {
                                *zz += hv * w;
                            }
                        }
                        hb.iter_mut().for_each(|v| *v = v.tanh());
                    }
                    hs.push(h);
                }
                let last = hs.last().unwrap().clone();
                Ok((
                    Tensor::new(out_shape, last)?,
                    Cache::Rnn {
                        inputs: x.clone(),
                        hs,
                    },
                ))
            }
        }
    }

    /// Gradient with respect to the input, and to every array of [`Layer::params`].
    pub fn backward(&self, cache: &Cache, dy: &Tensor) -> Result<(Tensor, Vec<Vec<f64>>)> {
        let mismatch = || Error::Dimension(format!("cache does not belong to {} layer", self.name()));
        match (self, cache) {
            (Layer::Dense(d), Cache::Input(x)) => {
                let bsz = x.batch();
                let mut dw = vec![0.0; d.w.len()];
                let mut db = vec![0.0; d.outputs];
                let mut dx = Tensor::zeros(x.shape.clone());
                for b in 0..bsz {
                    let g = &dy.data[b * d.outputs..(b + 1) * d.outputs];
                    for (acc, v) in db.iter_mut().zip(g) {
                        *acc += v;
                    }
                    let xi = x.item(b);
                    for i in 0..d.inputs {
                        let row = &d.w[i * d.outputs..(i + 1) * d.outputs];
                        let drow = &mut dw[i * d.outputs..(i + 1) * d.outputs];
                        let mut s = 0.0;
                        for o in 0..d.outputs {
                            drow[o] += xi[i] * g[o];
                            s += row[o] * g[o];
                        }
                        dx.data[b * d.inputs + i] = s;
                    }
                }
                Ok((dx, vec![dw, db]))
            }
            (Layer::Conv2d(c), Cache::Input(x)) => {
                let (bsz, h, w) = (x.shape[0], x.shape[1], x.shape[2]);
                let (ci, co) = (c.in_channels, c.out_channels);
                let mut dk = vec![0.0; c.k.len()];
                let mut db = vec![0.0; co];
                let mut dx = Tensor::zeros(x.shape.clone());
                for b in 0..bsz {
                    for r in 0..h {
                        for s in 0..w {
                            let yo = ((b * h + r) * w + s) * co;
                            let g = &dy.data[yo..yo + co];
                            for (acc, v) in db.iter_mut().zip(g) {
                                *acc += v;
                            }
                            for i in 0..c.kernel {
                                let rr = r as isize + c.offset(i);
                                if rr < 0 || rr >= h as isize {
                                    continue;
                                }
                                for j in 0..c.kernel {
                                    let ss = s as isize + c.offset(j);
                                    if ss < 0 || ss >= w as isize {
                                        continue;
                                    }
                                    let xo = ((b * h + rr as usize) * w + ss as usize) * ci;
                                    for a in 0..ci {
                                        let ko = ((i * c.kernel + j) * ci + a) * co;
                                        let xv = x.data[xo + a];
                                        let mut s_dx = 0.0;
                                        for o in 0..co {
                                            dk[ko + o] += xv * g[o];
                                            s_dx += c.k[ko + o] * g[o];
                                        }
                                        dx.data[xo + a] += s_dx;
                                    }
                                }
                            }
                        }
                    }
                }
                Ok((dx, vec![dk, db]))
            }
            (
                Layer::BatchNorm(bn),
                Cache::BatchNorm {
                    xhat,
                    inv_std,
                    count,
                    train,
                    ..
                },
            ) => {
                let feat = bn.feature_of(&dy.shape)?;
                let nf = bn.features;
                let mut dgamma = vec![0.0; nf];
                let mut dbeta = vec![0.0; nf];
                for (i, g) in dy.data.iter().enumerate() {
                    let f = feat(i);
                    dgamma[f] += g * xhat[i];
                    dbeta[f] += g;
                }
                let mut dx = Tensor::zeros(dy.shape.clone());
                if *train {
                    // d xhat = dy * gamma; dx = inv_std / m * (m dxhat - Σ dxhat - xhat Σ dxhat xhat)
                    let m = *count as f64;
                    let mut sum_dxhat = vec![0.0; nf];
                    let mut sum_dxhat_xhat = vec![0.0; nf];
                    for (i, g) in dy.data.iter().enumerate() {
                        let f = feat(i);
                        let dxh = g * bn.gamma[f];
                        sum_dxhat[f] += dxh;
                        sum_dxhat_xhat[f] += dxh * xhat[i];
                    }
                    for (i, g) in dy.data.iter().enumerate() {
                        let f = feat(i);
                        let dxh = g * bn.gamma[f];
                        dx.data[i] =
                            inv_std[f] / m * (m * dxh - sum_dxhat[f] - xhat[i] * sum_dxhat_xhat[f]);
                    }
                } else {
                    for (i, g) in dy.data.iter().enumerate() {
                        let f = feat(i);
                        dx.data[i] = g * bn.gamma[f] * inv_std[f];
                    }
                }
                Ok((dx, vec![dgamma, dbeta]))
            }
            (Layer::Dropout { .. }, Cache::Mask(mask)) => {
                let dx = match mask {
                    Some(m) => Tensor::new(
                        dy.shape.clone(),
                        dy.data.iter().zip(m).map(|(g, m)| g * m).collect(),
                    )?,
                    None => dy.clone(),
                };
                Ok((dx, Vec::new()))
            }
            (Layer::Elu { alpha }, Cache::InOut(x, y)) => {
                let data = dy
                    .data
                    .iter()
                    .zip(x.data.iter().zip(&y.data))
                    .map(|(g, (&xv, &yv))| if xv > 0.0 { *g } else { g * (yv + alpha) })
                    .collect();
                Ok((Tensor::new(dy.shape.clone(), data)?, Vec::new()))
            }
            (Layer::Sigmoid, Cache::Output(y)) => {
                let data = dy
                    .data
                    .iter()
                    .zip(&y.data)
                    .map(|(g, s)| g * s * (1.0 - s))
                    .collect();
                Ok((Tensor::new(dy.shape.clone(), data)?, Vec::new()))
            }
            (Layer::Flatten | Layer::Reshape { .. }, Cache::Shape(shape)) => {
                Ok((dy.clone().reshaped(shape.clone())?, Vec::new()))
            }
            (Layer::Lstm(l), Cache::Lstm { inputs: x, steps }) => {
                let hd = l.hidden;
                let bsz = dy.batch();
                let t_len = steps.len();
                let f = l.inputs;
                let mut dwx = vec![0.0; l.wx.len()];
                let mut dwh = vec![0.0; l.wh.len()];
                let mut db = vec![0.0; l.b.len()];
                let mut dx = Tensor::zeros(vec![bsz, t_len, f]);
                let mut dh = dy.data.clone();
                let mut dc = vec![0.0; bsz * hd];
                for t in (0..t_len).rev() {
                    let st = &steps[t];
                    let mut dz = vec![0.0; bsz * 4 * hd];
                    for b in 0..bsz {
                        let g = &st.gates[b * 4 * hd..(b + 1) * 4 * hd];
                        let dzb = &mut dz[b * 4 * hd..(b + 1) * 4 * hd];
                        for u in 0..hd {
                            let k = b * hd + u;
                            let (ig, fg, gg, og) = (g[u], g[hd + u], g[2 * hd + u], g[3 * hd + u]);
                            let tc = st.tanh_c[k];
                            let dct = dc[k] + dh[k] * og * (1.0 - tc * tc);
                            dzb[u] = dct * gg * ig * (1.0 - ig);
                            dzb[hd + u] = dct * st.c_prev[k] * fg * (1.0 - fg);
                            dzb[2 * hd + u] = dct * ig * (1.0 - gg * gg);
                            dzb[3 * hd + u] = dh[k] * tc * og * (1.0 - og);
                            dc[k] = dct * fg;
                        }
                    }
                    let mut dh_prev = vec![0.0; bsz * hd];
                    for b in 0..bsz {
                        let dzb = &dz[b * 4 * hd..(b + 1) * 4 * hd];
                        for (acc, v) in db.iter_mut().zip(dzb) {
                            *acc += v;
                        }
                        let xo = (b * t_len + t) * f;
                        for a in 0..f {
                            let xv = x.data[xo + a];
                            let row = &l.wx[a * 4 * hd..(a + 1) * 4 * hd];
                            let drow = &mut dwx[a * 4 * hd..(a + 1) * 4 * hd];
                            let mut s = 0.0;
                            for z in 0..4 * hd {
                                drow[z] += xv * dzb[z];
                                s += row[z] * dzb[z];
                            }
                            dx.data[xo + a] = s;
                        }
                        for a in 0..hd {
                            let hv = st.h_prev[b * hd + a];
                            let row = &l.wh[a * 4 * hd..(a + 1) * 4 * hd];
                            let drow = &mut dwh[a * 4 * hd..(a + 1) * 4 * hd];
                            let mut s = 0.0;
                            for z in 0..4 * hd {
                                drow[z] += hv * dzb[z];
                                s += row[z] * dzb[z];
                            }
                            dh_prev[b * hd + a] = s;
                        }
                    }
                    dh = dh_prev;
                }
                Ok((dx, vec![dwx, dwh, db]))
            }
            (Layer::Rnn(r), Cache::Rnn { inputs, hs }) => {
                let hd = r.hidden;
                let (bsz, t_len, f) = (inputs.shape[0], inputs.shape[1], inputs.shape[2]);
                let mut dwx = vec![0.0; r.wx.len()];
                let mut dwh = vec![0.0; r.wh.len()];
                let mut db = vec![0.0; hd];
                let mut dx = Tensor::zeros(inputs.shape.clone());
                let mut dh = dy.data.clone();
                for t in (0..t_len).rev() {
                    let h = &hs[t + 1];
                    let prev = &hs[t];
                    let dz: Vec<f64> = dh.iter().zip(h).map(|(g, hv)| g * (1.0 - hv * hv)).collect();
                    let mut dh_prev = vec![0.0; bsz * hd];
                    for b in 0..bsz {
                        let dzb = &dz[b * hd..(b + 1) * hd];
                        for (acc, v) in db.iter_mut().zip(dzb) {
                            *acc += v;
                        }
                        let xo = (b * t_len + t) * f;
                        for a in 0..f {
                            let xv = inputs.data[xo + a];
                            let mut s = 0.0;
                            for u in 0..hd {
                                dwx[a * hd + u] += xv * dzb[u];
                                s += r.wx[a * hd + u] * dzb[u];
                            }
                            dx.data[xo + a] = s;
                        }
                        for a in 0..hd {
                            let hv = prev[b * hd + a];
                            let mut s = 0.0;
                            for u in 0..hd {
                                dwh[a * hd + u] += hv * dzb[u];
                                s += r.wh[a * hd + u] * dzb[u];
                            }
                            dh_prev[b * hd + a] = s;
                        }
                    }
                    dh = dh_prev;
                }
                Ok((dx, vec![dwx, dwh, db]))
            }
            _ => Err(mismatch()),
        }
    }
}
