use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::evaluator::{Evaluator, QmlEvaluator, TfimEvaluator};
use super::report::OptimalRule;
use super::screen::ScreenConfig;
use crate::data::{build_qml_task, ingest_idx, QmlTaskSpec};
use crate::error::{Error, Result};
use crate::nn::{Labeling, TrainConfig};
use crate::sampler::SamplerConfig;
use crate::tasks::{QmlConfig, VqeConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Tfim,
    Qml,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluatorConfig {
    pub task: TaskKind,
    pub vqe: VqeConfig,
    pub qml: QmlConfig,
    /// IDX image and label files for the QML task.
    pub images: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub qml_task: QmlTaskSpec,
}

impl Default for EvaluatorConfig {
    fn default() -> Self {
        EvaluatorConfig {
            task: TaskKind::Tfim,
            vqe: VqeConfig::default(),
            qml: QmlConfig::default(),
            images: None,
            labels: None,
            qml_task: QmlTaskSpec::default(),
        }
    }
}

impl EvaluatorConfig {
    /// Builds the evaluator for `n` qubits; the QML task split is drawn from `seed`.
    pub fn build(&self, n: usize, seed: u64) -> Result<Box<dyn Evaluator>> {
        match self.task {
            TaskKind::Tfim => Ok(Box::new(TfimEvaluator::new(n, self.vqe.clone())?)),
            TaskKind::Qml => {
                let (Some(images), Some(labels)) = (&self.images, &self.labels) else {
                    return Err(Error::Config(
                        "the qml task needs evaluator.images and evaluator.labels".into(),
                    ));
                };
                let raw = ingest_idx(images, labels)?;
                log::info!("read {} images (sha256 {})", raw.images.len(), raw.checksum);
                let (task, _, _) = build_qml_task(&raw, &self.qml_task, seed)?;
                if task.n != n {
                    return Err(Error::Config(format!(
                        "images encode into {} qubits, sampler draws {n}",
                        task.n
                    )));
                }
                Ok(Box::new(QmlEvaluator {
                    task,
                    config: self.qml.clone(),
                }))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub count: usize,
    /// Circuits in the random-search comparison set.
    pub random_baseline: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            count: 300,
            random_baseline: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportConfig {
    pub optimal: OptimalRule,
    pub bins: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            optimal: OptimalRule::tfim_energy(),
            bins: 20,
        }
    }
}

/// Campaign settings, read from a TOML file with `[sampler]`, `[evaluator]`,
/// `[dataset]`, `[screen]`, `[train]` and `[report]` sections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignConfig {
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub sampler: SamplerConfig,
    pub evaluator: EvaluatorConfig,
    pub dataset: DatasetConfig,
    pub screen: ScreenConfig,
    pub train: TrainConfig,
    pub report: ReportConfig,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            seed: 0,
            workers: 0,
            sampler: SamplerConfig::vqe(),
            evaluator: EvaluatorConfig::default(),
            dataset: DatasetConfig::default(),
            screen: ScreenConfig::default(),
            train: TrainConfig::default(),
            report: ReportConfig::default(),
        }
    }
}

impl CampaignConfig {
    /// Six-qubit Ising campaign.
    pub fn tfim() -> Self {
        CampaignConfig::default()
    }

    /// Ten-qubit fashion-MNIST campaign.
    pub fn qml() -> Self {
        CampaignConfig {
            sampler: SamplerConfig::qml(),
            evaluator: EvaluatorConfig {
                task: TaskKind::Qml,
                ..Default::default()
            },
            train: TrainConfig {
                label_threshold: 0.85,
                ..Default::default()
            },
            report: ReportConfig {
                optimal: OptimalRule {
                    threshold: 0.89,
                    below: false,
                },
                bins: 20,
            },
            ..Default::default()
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: CampaignConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        self.screen.validate()?;
        self.train.validate()
    }

    /// Short SHA-256 of the canonical JSON form, logged with every run.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let d = Sha256::digest(json.as_bytes());
        d[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn labeling(&self) -> Labeling {
        Labeling {
            threshold: self.train.label_threshold,
            good_below: self.evaluator.task == TaskKind::Tfim,
        }
    }

    /// Sampler for the training dataset.
    pub fn dataset_sampler(&self) -> SamplerConfig {
        SamplerConfig {
            seed: crate::seed::derive(self.seed, &[crate::seed::tag("dataset")]),
            ..self.sampler.clone()
        }
    }

    /// Sampler for screening candidates: same distribution, independent stream.
    pub fn screen_sampler(&self) -> SamplerConfig {
        SamplerConfig {
            seed: crate::seed::derive(self.seed, &[crate::seed::tag("screen")]),
            ..self.sampler.clone()
        }
    }

    /// Sampler for the random-search comparison set.
    pub fn random_sampler(&self) -> SamplerConfig {
        SamplerConfig {
            seed: crate::seed::derive(self.seed, &[crate::seed::tag("random")]),
            ..self.sampler.clone()
        }
    }
}
