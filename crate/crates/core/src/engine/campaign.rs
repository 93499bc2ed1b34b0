use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{CampaignConfig, TaskKind};
use super::dataset::{build_dataset, verify, BuildSummary};
use super::evaluator::Evaluator;
use super::report::{report, CampaignReport};
use super::screen::{screen, ScreenCounts, ScreenModels, ScreenOutcome};
use super::store::{write_jsonl, DatasetRecord, RecordStore};
use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::nn::{
    train_classifier, train_regressor, ClassifierReport, Example, Predictor, RegressorReport,
    Target,
};

/// File layout of a campaign directory.
#[derive(Clone, Debug)]
pub struct CampaignPaths {
    pub dir: PathBuf,
}

impl CampaignPaths {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        CampaignPaths { dir: dir.into() }
    }
    pub fn dataset(&self) -> PathBuf {
        self.dir.join("dataset.jsonl")
    }
    pub fn random(&self) -> PathBuf {
        self.dir.join("random.jsonl")
    }
    pub fn verified(&self) -> PathBuf {
        self.dir.join("verified.jsonl")
    }
    pub fn decisions(&self) -> PathBuf {
        self.dir.join("screen_decisions.jsonl")
    }
    pub fn survivors(&self) -> PathBuf {
        self.dir.join("survivors.jsonl")
    }
    pub fn screen_counts(&self) -> PathBuf {
        self.dir.join("screen_counts.json")
    }
    pub fn classifier(&self) -> PathBuf {
        self.dir.join("classifier.json")
    }
    pub fn regressor(&self) -> PathBuf {
        self.dir.join("regressor.json")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModels {
    pub classifier: Option<ClassifierReport>,
    pub regressor: RegressorReport,
    /// Records the regressor was trained on.
    pub regressor_records: usize,
}

/// Examples for the predictors from successful records.
pub fn examples(records: &[DatasetRecord], depth: usize) -> Result<Vec<Example>> {
    records
        .iter()
        .filter(|r| r.is_ok())
        .map(|r| Example::from_circuit(&r.circuit()?, depth, r.label))
        .collect()
}

/// Trains the screening models from a dataset: for the Ising task a classifier on all
/// records plus a regressor on the good ones; for QML a regressor on all records.
pub fn train_models(
    cfg: &CampaignConfig,
    records: &[DatasetRecord],
) -> Result<(ScreenModels, TrainedModels)> {
    let depth = cfg.sampler.depth_cutoff;
    let all = examples(records, depth)?;
    let gs = cfg.sampler.gate_set.clone();
    match cfg.evaluator.task {
        TaskKind::Tfim => {
            let labeling = cfg.labeling();
            let (clf, crep) = train_classifier(&all, labeling, &cfg.train)?;
            log::info!(
                "classifier: precision {:.3}, recall {:.3} on {} held-out records",
                crep.precision,
                crep.recall,
                crep.n_val
            );
            let good: Vec<Example> = all.into_iter().filter(|e| labeling.is_good(e.value)).collect();
            let (reg, rrep) = train_regressor(&good, Target::Metric, &cfg.train)?;
            log::info!("regressor: R² {:.3}, Spearman {:.3}", rrep.r2, rrep.spearman);
            Ok((
                ScreenModels::TwoStage {
                    classifier: clf.with_gate_set(gs.clone()),
                    regressor: reg.with_gate_set(gs),
                },
                TrainedModels {
                    classifier: Some(crep),
                    regressor_records: good.len(),
                    regressor: rrep,
                },
            ))
        }
        TaskKind::Qml => {
            let (reg, rrep) = train_regressor(&all, Target::Metric, &cfg.train)?;
            log::info!("regressor: R² {:.3}, Spearman {:.3}", rrep.r2, rrep.spearman);
            Ok((
                ScreenModels::Single {
                    regressor: reg.with_gate_set(gs),
                },
                TrainedModels {
                    classifier: None,
                    regressor_records: all.len(),
                    regressor: rrep,
                },
            ))
        }
    }
}

impl ScreenModels {
    pub fn save(&self, paths: &CampaignPaths) -> Result<()> {
        match self {
            ScreenModels::TwoStage {
                classifier,
                regressor,
            } => {
                classifier.save(&paths.classifier())?;
                regressor.save(&paths.regressor())
            }
            ScreenModels::Single { regressor } => regressor.save(&paths.regressor()),
        }
    }

    pub fn load(paths: &CampaignPaths) -> Result<Self> {
        let regressor = Predictor::load(&paths.regressor())?;
        if paths.classifier().exists() {
            Ok(ScreenModels::TwoStage {
                classifier: Predictor::load(&paths.classifier())?,
                regressor,
            })
        } else {
            Ok(ScreenModels::Single { regressor })
        }
    }
}

impl ScreenOutcome {
    /// Writes decisions, survivors and counts into a campaign directory.
    pub fn write(&self, paths: &CampaignPaths) -> Result<()> {
        write_jsonl(&paths.decisions(), &self.decisions)?;
        write_jsonl(&paths.survivors(), &self.survivors)?;
        let json = serde_json::to_string_pretty(&self.counts).map_err(|e| Error::Dataset(e.to_string()))?;
        std::fs::write(paths.screen_counts(), json).map_err(|e| Error::io(paths.screen_counts(), e))
    }
}

/// Everything a full campaign produced.
#[derive(Debug)]
pub struct CampaignRun {
    pub build: BuildSummary,
    pub dataset: Vec<DatasetRecord>,
    pub models: ScreenModels,
    pub training: TrainedModels,
    pub screening: ScreenOutcome,
    pub verified: Vec<DatasetRecord>,
    pub random: Vec<DatasetRecord>,
    pub report: CampaignReport,
}

/// Phase one (dataset, predictors) and phase two (screening, verification, report)
/// end to end, persisting every artifact under `dir`. Rerunning resumes the dataset.
pub fn run_campaign(cfg: &CampaignConfig, dir: &Path) -> Result<CampaignRun> {
    cfg.validate()?;
    log::info!("campaign seed {} config {}", cfg.seed, cfg.hash());
    let paths = CampaignPaths::new(dir);
    let evaluator = cfg.evaluator.build(cfg.sampler.n, cfg.seed)?;
    let ev: &dyn Evaluator = evaluator.as_ref();

    let (dataset, build) = build_dataset(
        &cfg.dataset_sampler(),
        ev,
        cfg.dataset.count,
        cfg.seed,
        Some(&RecordStore::new(paths.dataset())),
        cfg.workers,
    )?;
    let (models, training) = train_models(cfg, &dataset)?;
    models.save(&paths)?;

    let screening = screen(&models, &cfg.screen_sampler(), &cfg.screen)?;
    screening.write(&paths)?;
    log::info!(
        "screening: {} sampled, {} passed stage one, {} survived",
        screening.counts.sampled,
        screening.counts.passed_stage1,
        screening.counts.passed_stage2
    );
    let chosen: Vec<Circuit> = screening
        .for_verification(cfg.screen.verify_budget)
        .iter()
        .map(|s| s.circuit())
        .collect::<Result<_>>()?;
    let verified = if chosen.is_empty() {
        Vec::new()
    } else {
        verify(&chosen, ev, cfg.seed, Some(&RecordStore::new(paths.verified())), cfg.workers)?
    };

    let (random, _) = build_dataset(
        &cfg.random_sampler(),
        ev,
        cfg.dataset.random_baseline,
        cfg.seed,
        Some(&RecordStore::new(paths.random())),
        cfg.workers,
    )?;
    let rep = report(
        &ev.task_id(),
        &random,
        &verified,
        &screening.counts,
        cfg.report.optimal,
        ev.lower_is_better(),
        cfg.report.bins,
    )?;
    rep.write(dir)?;
    Ok(CampaignRun {
        build,
        dataset,
        models,
        training,
        screening,
        verified,
        random,
        report: rep,
    })
}

/// Reads back a finished campaign's report inputs and recomputes the report.
pub fn recompute_report(cfg: &CampaignConfig, dir: &Path) -> Result<CampaignReport> {
    let paths = CampaignPaths::new(dir);
    let random = RecordStore::new(paths.random()).load()?;
    let verified = RecordStore::new(paths.verified()).load()?;
    if random.is_empty() && verified.is_empty() {
        return Err(Error::Dataset(format!("{}: no campaign records", dir.display())));
    }
    let counts: ScreenCounts = match std::fs::read_to_string(paths.screen_counts()) {
        Ok(text) => serde_json::from_str(&text).map_err(|e| Error::Dataset(e.to_string()))?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => ScreenCounts::default(),
        Err(e) => return Err(Error::io(paths.screen_counts(), e)),
    };
    let lower = cfg.evaluator.task == TaskKind::Tfim;
    report(
        &random.first().or(verified.first()).map(|r| r.task.clone()).unwrap_or_default(),
        &random,
        &verified,
        &counts,
        cfg.report.optimal,
        lower,
        cfg.report.bins,
    )
}
