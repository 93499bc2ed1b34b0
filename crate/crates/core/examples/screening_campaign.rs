//! End-to-end Ising campaign: 300-record dataset, both predictors, screening of fresh
//! candidates, verification and a report against random search.
//!
//! `cargo run --release --example screening_campaign -- [out_dir] [config.toml]`

use std::path::PathBuf;

use qas::engine::{run_campaign, CampaignConfig};
use qas::tasks::qaoa_baseline;

fn main() -> qas::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "campaign-tfim".into()));
    let cfg = match args.next() {
        Some(p) => CampaignConfig::load(p.as_ref())?,
        None => CampaignConfig::tfim(),
    };
    let run = run_campaign(&cfg, &dir)?;
    let t = &run.training;
    if let Some(c) = &t.classifier {
        println!("classifier  precision {:.3}  recall {:.3}", c.precision, c.recall);
    }
    println!(
        "regressor   R² {:.3}  Spearman {:.3}  ({} records)",
        t.regressor.r2, t.regressor.spearman, t.regressor_records
    );
    let c = &run.screening.counts;
    println!(
        "screened {}: stage one {}, survivors {} ({:.2}%)",
        c.sampled,
        c.passed_stage1,
        c.passed_stage2,
        100.0 * c.passed_stage2 as f64 / c.sampled as f64
    );
    let r = &run.report;
    println!(
        "median ε  random {:.5}  screened {:.5}",
        r.random.median_label.unwrap_or(f64::NAN),
        r.screened.median_label.unwrap_or(f64::NAN)
    );
    if let Some(mw) = &r.mann_whitney {
        println!("Mann-Whitney one-sided p = {:.3e}", mw.p_value);
    }
    match r.efficiency_ratio {
        Some(x) => println!("efficiency ratio {x:.1} (random-search optimal rate {:.4})", r.random.optimal_rate),
        None => println!("efficiency ratio undefined: no optimal circuit in the random set"),
    }
    if let qas::engine::ScreenModels::TwoStage { classifier, regressor } = &run.models {
        let qaoa = qaoa_baseline(6, 3)?;
        println!(
            "p=3 QAOA circuit ({} gates): classifier {:.5}, predicted ε {:.5}",
            qaoa.len(),
            classifier.predict(&qaoa)?,
            regressor.predict(&qaoa)?
        );
    }
    if let Some(b) = &r.best {
        println!("best verified energy {:.5} (ε {:.5})", b.best, b.label);
    }
    println!("artifacts in {}", dir.display());
    Ok(())
}
