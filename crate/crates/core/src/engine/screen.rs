use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, CircuitJson};
use crate::error::{Error, Result};
use crate::nn::Predictor;
use crate::sampler::{self, SamplerConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScreenConfig {
    /// VQE stage one: classifier score must exceed this.
    pub stage1_threshold: f64,
    /// VQE stage two: predicted error ratio must be below this.
    pub stage2_threshold: f64,
    /// QML: predicted accuracy must exceed this.
    pub qml_threshold: f64,
    /// Number of fresh sampler draws to screen.
    pub candidates: usize,
    /// Maximum number of survivors passed on to full evaluation (best predicted first).
    pub verify_budget: Option<usize>,
    /// First sampler index of the screening stream.
    pub start_index: u64,
}

impl Default for ScreenConfig {
    fn default() -> Self {
        ScreenConfig {
            stage1_threshold: 0.85,
            stage2_threshold: 0.005,
            qml_threshold: 0.89,
            candidates: 5000,
            verify_budget: None,
            start_index: 0,
        }
    }
}

impl ScreenConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.stage1_threshold) {
            return Err(Error::Config("stage-one threshold must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.qml_threshold) {
            return Err(Error::Config("QML threshold must lie in [0, 1]".into()));
        }
        if self.stage2_threshold.is_nan() {
            return Err(Error::Config("stage-two threshold is NaN".into()));
        }
        Ok(())
    }
}

/// Frozen models used for screening.
#[derive(Clone, Debug)]
pub enum ScreenModels {
    /// Classifier followed by an error-ratio regressor.
    TwoStage {
        classifier: Predictor,
        regressor: Predictor,
    },
    /// Accuracy regressor only.
    Single { regressor: Predictor },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub index: u64,
    pub hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage2: Option<f64>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Survivor {
    pub index: u64,
    pub hash: String,
    pub circuit: CircuitJson,
    pub stage1: Option<f64>,
    pub stage2: f64,
}

impl Survivor {
    pub fn circuit(&self) -> Result<Circuit> {
        Circuit::from_json(&self.circuit)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenCounts {
    pub sampled: usize,
    pub sampler_failures: usize,
    pub too_deep: usize,
    /// Draws repeating an earlier draw's canonical form (scored once).
    pub duplicates: usize,
    /// Unique candidates scored.
    pub scored: usize,
    pub passed_stage1: usize,
    pub passed_stage2: usize,
    /// Passing draws counting repeats, for comparison with undeduplicated counts.
    pub passed_with_duplicates: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreenOutcome {
    pub counts: ScreenCounts,
    /// Unique survivors, best predicted first.
    pub survivors: Vec<Survivor>,
    pub decisions: Vec<Decision>,
}

impl ScreenOutcome {
    /// Survivors retained for verification under `budget`.
    pub fn for_verification(&self, budget: Option<usize>) -> Vec<&Survivor> {
        let n = budget.unwrap_or(usize::MAX).min(self.survivors.len());
        self.survivors[..n].iter().collect()
    }
}

enum Draw {
    Failed,
    TooDeep,
    Ok(Circuit, String),
}

/// Scores draws `start_index..start_index + candidates` of the sampler stream with frozen
/// models and keeps those passing every threshold. Pure given the models and configs.
pub fn screen(
    models: &ScreenModels,
    sampler_cfg: &SamplerConfig,
    cfg: &ScreenConfig,
) -> Result<ScreenOutcome> {
    cfg.validate()?;
    let first = match models {
        ScreenModels::TwoStage { classifier, .. } => classifier,
        ScreenModels::Single { regressor } => regressor,
    };
    let indices: Vec<u64> = (cfg.start_index..cfg.start_index + cfg.candidates as u64).collect();
    let draws: Vec<Draw> = indices
        .par_iter()
        .map(|&i| -> Result<Draw> {
            let c = match sampler::sample(sampler_cfg, i) {
                Ok(s) => s.circuit.canonicalize()?,
                Err(_) => return Ok(Draw::Failed),
            };
            match first.image_of(&c) {
                Err(Error::TooDeep { .. }) => Ok(Draw::TooDeep),
                Err(e) => Err(e),
                Ok(_) => {
                    let h = c.structure_hash()?;
                    Ok(Draw::Ok(c, h))
                }
            }
        })
        .collect::<Result<_>>()?;

    let mut counts = ScreenCounts {
        sampled: indices.len(),
        ..Default::default()
    };
    let mut seen = HashSet::new();
    let mut unique: Vec<(u64, Circuit, String)> = Vec::new();
    let mut repeats: Vec<String> = Vec::new();
    for (&i, d) in indices.iter().zip(draws) {
        match d {
            Draw::Failed => counts.sampler_failures += 1,
            Draw::TooDeep => counts.too_deep += 1,
            Draw::Ok(c, h) => {
                if seen.insert(h.clone()) {
                    unique.push((i, c, h));
                } else {
                    counts.duplicates += 1;
                    repeats.push(h);
                }
            }
        }
    }
    counts.scored = unique.len();
    let circuits: Vec<Circuit> = unique.iter().map(|(_, c, _)| c.clone()).collect();

    let (stage1, stage2): (Vec<Option<f64>>, Vec<Option<f64>>) = match models {
        ScreenModels::TwoStage {
            classifier,
            regressor,
        } => {
            let s1 = classifier.predict_many(&circuits)?;
            let pass1: Vec<Circuit> = circuits
                .iter()
                .zip(&s1)
                .filter(|(_, &s)| s > cfg.stage1_threshold)
                .map(|(c, _)| c.clone())
                .collect();
            let mut s2 = regressor.predict_many(&pass1)?.into_iter();
            let s2_all = s1
                .iter()
                .map(|&s| if s > cfg.stage1_threshold { s2.next() } else { None })
                .collect();
            (s1.into_iter().map(Some).collect(), s2_all)
        }
        ScreenModels::Single { regressor } => {
            let s = regressor.predict_many(&circuits)?;
            (vec![None; s.len()], s.into_iter().map(Some).collect())
        }
    };

    let two_stage = matches!(models, ScreenModels::TwoStage { .. });
    let mut survivors = Vec::new();
    let mut decisions = Vec::with_capacity(unique.len());
    for ((i, c, h), (s1, s2)) in unique.into_iter().zip(stage1.into_iter().zip(stage2)) {
        let passed = match (two_stage, s2) {
            (true, Some(e)) => {
                counts.passed_stage1 += 1;
                e < cfg.stage2_threshold
            }
            (false, Some(a)) => a > cfg.qml_threshold,
            (_, None) => false,
        };
        if passed {
            counts.passed_stage2 += 1;
            survivors.push(Survivor {
                index: i,
                hash: h.clone(),
                circuit: c.to_json_raw(),
                stage1: s1,
                stage2: s2.expect("scored"),
            });
        }
        log::debug!("candidate {i} {h}: stage1 {s1:?} stage2 {s2:?} passed {passed}");
        decisions.push(Decision {
            index: i,
            hash: h,
            stage1: s1,
            stage2: s2,
            passed,
        });
    }
    if !two_stage {
        counts.passed_stage1 = counts.passed_stage2;
    }
    let passing: HashSet<&str> = survivors.iter().map(|s| s.hash.as_str()).collect();
    counts.passed_with_duplicates =
        survivors.len() + repeats.iter().filter(|h| passing.contains(h.as_str())).count();
    survivors.sort_by(|a, b| {
        let o = if two_stage {
            a.stage2.total_cmp(&b.stage2)
        } else {
            b.stage2.total_cmp(&a.stage2)
        };
        o.then_with(|| a.index.cmp(&b.index))
    });
    Ok(ScreenOutcome {
        counts,
        survivors,
        decisions,
    })
}
