//! Random circuit generation: gatewise and layerwise pipelines with hierarchical gate-type logits.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::circuit::{
    ring_distance, ring_pairs, Circuit, Coverage, Gate, GateKind, GateSet, LayerEntry,
    LayeredSpec, Provenance,
};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Pipeline {
    Gatewise,
    Layerwise,
    /// Layerwise with probability `layerwise_fraction`, gatewise otherwise.
    Mixed { layerwise_fraction: f64 },
}

impl std::str::FromStr for Pipeline {
    type Err = Error;

    /// `gatewise`, `layerwise`, `mixed` (50/50) or `mixed:<layerwise fraction>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gatewise" => Ok(Pipeline::Gatewise),
            "layerwise" => Ok(Pipeline::Layerwise),
            "mixed" => Ok(Pipeline::Mixed {
                layerwise_fraction: 0.5,
            }),
            other => match other.strip_prefix("mixed:").map(str::parse::<f64>) {
                Some(Ok(f)) if (0.0..=1.0).contains(&f) => Ok(Pipeline::Mixed {
                    layerwise_fraction: f,
                }),
                _ => Err(Error::InvalidArgument(format!("unknown pipeline `{other}`"))),
            },
        }
    }
}

impl std::fmt::Display for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Pipeline::Gatewise => f.write_str("gatewise"),
            Pipeline::Layerwise => f.write_str("layerwise"),
            Pipeline::Mixed { layerwise_fraction } => write!(f, "mixed:{layerwise_fraction}"),
        }
    }
}

impl Serialize for Pipeline {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Pipeline {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub n: usize,
    pub n_t: usize,
    pub depth_cutoff: usize,
    pub gate_set: GateSet,
    pub pipeline: Pipeline,
    pub logit_mean: f64,
    pub logit_std: f64,
    pub single_qubit_bias: f64,
    pub repeat_kind_boost: f64,
    pub proximity_boost: f64,
    pub hadamard_start_prob: f64,
    pub max_attempts: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n: 6,
            n_t: 36,
            depth_cutoff: 10,
            gate_set: GateSet::vqe(),
            pipeline: Pipeline::Mixed {
                layerwise_fraction: 0.5,
            },
            logit_mean: 0.0,
            logit_std: 1.35,
            single_qubit_bias: 0.5,
            repeat_kind_boost: 1.0,
            proximity_boost: 1.0,
            hadamard_start_prob: 0.3,
            max_attempts: 100,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    /// Six-qubit VQE search space: 36 gates, depth cutoff 10, mixed pipelines.
    pub fn vqe() -> Self {
        SamplerConfig::default()
    }

    /// Ten-qubit QML search space: 50 gates, depth cutoff 10, layerwise only.
    pub fn qml() -> Self {
        SamplerConfig {
            n: 10,
            n_t: 50,
            gate_set: GateSet::qml(),
            pipeline: Pipeline::Layerwise,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n_t == 0 || self.depth_cutoff == 0 {
            return Err(Error::Config("n, n_t and depth cutoff must be positive".into()));
        }
        if self.n > 63 {
            return Err(Error::Config(format!("n = {} is too large", self.n)));
        }
        if !(self.logit_std >= 0.0) || self.repeat_kind_boost < 0.0 || self.proximity_boost < 0.0 {
            return Err(Error::Config("logit std and boosts must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.hadamard_start_prob) {
            return Err(Error::Config("hadamard_start_prob must lie in [0, 1]".into()));
        }
        if self.max_attempts == 0 {
            return Err(Error::Config("max_attempts must be positive".into()));
        }
        Ok(())
    }
}

/// A sampled circuit and the number of draws the depth filter needed.
#[derive(Clone, Debug, PartialEq)]
pub struct Sampled {
    pub circuit: Circuit,
    pub attempts: usize,
}

/// Softmax of Normal(mean, std) logits, with the single-qubit bias added before normalizing.
pub fn draw_type_distribution(rng: &mut ChaCha8Rng, config: &SamplerConfig) -> Vec<f64> {
    let normal = Normal::new(config.logit_mean, config.logit_std).expect("std validated");
    let logits: Vec<f64> = config
        .gate_set
        .kinds()
        .iter()
        .map(|k| {
            let l = normal.sample(rng);
            if k.arity() == 1 {
                l + config.single_qubit_bias
            } else {
                l
            }
        })
        .collect();
    softmax(&logits)
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn pick(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    // rounding: fall back to the last positive weight
    weights.iter().rposition(|&w| w > 0.0).expect("some weight is positive")
}

/// Legal placements of `kind`: every qubit, or every ring-adjacent pair in anchor orientation.
fn placements(kind: GateKind, n: usize) -> Vec<Gate> {
    if kind.arity() == 1 {
        (0..n).map(|q| Gate::single(kind, q)).collect()
    } else {
        ring_pairs(n)
            .into_iter()
            .map(|(a, b)| Gate::pair(kind, a, b))
            .collect()
    }
}

fn gate_distance(a: &Gate, b: &Gate, n: usize) -> usize {
    a.qubits
        .iter()
        .flat_map(|p| b.qubits.iter().map(move |q| ring_distance(p, q, n)))
        .min()
        .unwrap_or(0)
}

/// One gatewise draw (no depth filter) from a fixed type distribution.
pub fn sample_gatewise_with(
    rng: &mut ChaCha8Rng,
    config: &SamplerConfig,
    probs: &[f64],
) -> Result<Circuit> {
    let kinds = config.gate_set.kinds();
    let n = config.n;
    let mut base: Vec<f64> = probs.to_vec();
    if n < 2 {
        for (p, k) in base.iter_mut().zip(kinds) {
            if k.arity() == 2 {
                *p = 0.0;
            }
        }
    }
    if base.iter().all(|&p| p <= 0.0) {
        return Err(Error::Config(format!(
            "no gate kind of {} can be placed on {n} qubits",
            config.gate_set
        )));
    }
    let mut gates: Vec<Gate> = Vec::with_capacity(config.n_t);
    for _ in 0..config.n_t {
        let mut w = base.clone();
        if let Some(prev) = gates.last() {
            let id = config.gate_set.id_of(prev.kind).expect("sampled from the set");
            w[id] *= 1.0 + config.repeat_kind_boost;
        }
        let kind = kinds[pick(rng, &w)];
        let options = placements(kind, n);
        let pw: Vec<f64> = match gates.last() {
            Some(prev) => options
                .iter()
                .map(|g| (1.0 + config.proximity_boost).powi(-(gate_distance(g, prev, n) as i32)))
                .collect(),
            None => vec![1.0; options.len()],
        };
        gates.push(options[pick(rng, &pw)]);
    }
    let mut c = Circuit::with_gates(n, config.gate_set.clone(), gates);
    c.provenance = Provenance::Gatewise;
    c.ensure_valid()?;
    Ok(c)
}

/// Gatewise pipeline with the depth filter; the whole circuit is redrawn on overflow.
pub fn sample_gatewise(rng: &mut ChaCha8Rng, config: &SamplerConfig) -> Result<Sampled> {
    config.validate()?;
    let mut worst = 0;
    for attempt in 1..=config.max_attempts {
        let probs = draw_type_distribution(rng, config);
        let c = sample_gatewise_with(rng, config, &probs)?;
        let depth = c.depth()?;
        if depth <= config.depth_cutoff {
            return Ok(Sampled {
                circuit: c,
                attempts: attempt,
            });
        }
        worst = worst.max(depth);
    }
    Err(Error::ResampleBudget {
        attempts: config.max_attempts,
        reason: format!(
            "gatewise circuits kept exceeding depth {} (up to {worst})",
            config.depth_cutoff
        ),
    })
}

/// One layerwise draw (no depth filter); `h_prefix` forces a leading full H layer.
pub fn sample_layerwise_with(
    rng: &mut ChaCha8Rng,
    config: &SamplerConfig,
    probs: &[f64],
    h_prefix: bool,
) -> Result<Circuit> {
    let n = config.n;
    if n < 2 || n % 2 != 0 {
        return Err(Error::Config(format!("layerwise sampling needs even n, got {n}")));
    }
    let kinds = config.gate_set.kinds();
    let mut layers = Vec::new();
    let mut count = 0;
    if h_prefix {
        layers.push(LayerEntry::new(GateKind::H, Coverage::All));
        count += n;
    }
    while count < config.n_t {
        let kind = kinds[pick(rng, probs)];
        let coverage = if rng.random::<bool>() {
            Coverage::Even
        } else {
            Coverage::Odd
        };
        let entry = LayerEntry::new(kind, coverage);
        count += entry.gate_count(n)?;
        layers.push(entry);
    }
    let mut spec = LayeredSpec::new(n, layers);
    if count > config.n_t {
        spec.gate_limit = Some(config.n_t);
    }
    spec.expand(&config.gate_set, Provenance::Layerwise)
}

/// Layerwise pipeline with the depth filter.
///
/// The H-prefix decision is made once per draw and kept across depth resamples,
/// so the prefixed fraction matches `hadamard_start_prob` exactly in expectation.
pub fn sample_layerwise(rng: &mut ChaCha8Rng, config: &SamplerConfig) -> Result<Sampled> {
    config.validate()?;
    let h_prefix = config.gate_set.contains(GateKind::H)
        && rng.random::<f64>() < config.hadamard_start_prob;
    let mut worst = 0;
    for attempt in 1..=config.max_attempts {
        let probs = draw_type_distribution(rng, config);
        let c = sample_layerwise_with(rng, config, &probs, h_prefix)?;
        let depth = c.depth()?;
        if depth <= config.depth_cutoff {
            return Ok(Sampled {
                circuit: c,
                attempts: attempt,
            });
        }
        worst = worst.max(depth);
    }
    Err(Error::ResampleBudget {
        attempts: config.max_attempts,
        reason: format!(
            "layerwise circuits kept exceeding depth {} (up to {worst})",
            config.depth_cutoff
        ),
    })
}

/// Draw number `index` of the stream defined by `config.seed`.
pub fn sample(config: &SamplerConfig, index: u64) -> Result<Sampled> {
    let mut rng = seed::rng(config.seed, &[seed::tag("sampler"), index]);
    match config.pipeline {
        Pipeline::Gatewise => sample_gatewise(&mut rng, config),
        Pipeline::Layerwise => sample_layerwise(&mut rng, config),
        Pipeline::Mixed { layerwise_fraction } => {
            if rng.random::<f64>() < layerwise_fraction {
                sample_layerwise(&mut rng, config)
            } else {
                sample_gatewise(&mut rng, config)
            }
        }
    }
}

/// Draws `start..start + count` of the stream.
pub fn sample_batch(config: &SamplerConfig, start: u64, count: usize) -> Result<Vec<Sampled>> {
    use rayon::prelude::*;
    (start..start + count as u64)
        .into_par_iter()
        .map(|i| sample(config, i))
        .collect()
}
