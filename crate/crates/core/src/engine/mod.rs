//! The two-phase search workflow: dataset building, predictor training, screening of
//! fresh candidates, full verification of survivors and campaign reports.

mod campaign;
mod config;
mod dataset;
mod evaluator;
mod report;
mod screen;
mod store;

pub use campaign::{
    examples, recompute_report, run_campaign, train_models, CampaignPaths, CampaignRun,
    TrainedModels,
};
pub use config::{CampaignConfig, DatasetConfig, EvaluatorConfig, ReportConfig, TaskKind};
pub use dataset::{build_dataset, evaluate_record, evaluation_seed, rank, verify, BuildSummary};
pub use evaluator::{Evaluation, Evaluator, QmlEvaluator, TfimEvaluator};
pub use report::{report, BestCircuit, CampaignReport, Histogram, OptimalRule, SetSummary};
pub use screen::{
    screen, Decision, ScreenConfig, ScreenCounts, ScreenModels, ScreenOutcome, Survivor,
};
pub use store::{load_jsonl, write_jsonl, DatasetRecord, RecordStore};


#[cfg(test)]
mod tests;
