//! Trains the two Ising screening models on an existing dataset file and prints
//! held-out metrics plus the scores of the QAOA-inspired ansatzes.
//!
//! `cargo run --release --example train_predictor -- dataset.jsonl [config.toml]`

use qas::engine::{train_models, CampaignConfig, RecordStore, ScreenModels};
use qas::tasks::qaoa_baseline;

fn main() -> qas::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let Some(path) = args.next() else {
        eprintln!("usage: train_predictor <dataset.jsonl> [config.toml]");
        std::process::exit(2);
    };
    let cfg = match args.next() {
        Some(p) => CampaignConfig::load(p.as_ref())?,
        None => CampaignConfig::tfim(),
    };
    let records = RecordStore::new(path).load()?;
    println!("{} records", records.len());
    let (models, t) = train_models(&cfg, &records)?;
    if let Some(c) = &t.classifier {
        println!(
            "classifier  precision {:.3}  recall {:.3}  accuracy {:.3}  ({} of {} held-out positive, best epoch {})",
            c.precision, c.recall, c.accuracy, c.val_positives, c.n_val, c.best_epoch
        );
    }
    println!(
        "regressor   R² {:.3}  Spearman {:.3}  ({} records, best epoch {})",
        t.regressor.r2, t.regressor.spearman, t.regressor_records, t.regressor.best_epoch
    );
    if let ScreenModels::TwoStage { classifier, regressor } = &models {
        for p in 1..=3 {
            let c = qaoa_baseline(cfg.sampler.n, p)?;
            println!(
                "QAOA p={p} ({} gates): classifier {:.5}  predicted ε {:.5}",
                c.len(),
                classifier.predict(&c)?,
                regressor.predict(&c)?
            );
        }
    }
    Ok(())
}
