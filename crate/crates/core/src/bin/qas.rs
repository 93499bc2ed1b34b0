use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qas::circuit::{Circuit, CircuitJson, LayeredSpec};
use qas::data::{build_qml_task, ingest_idx};
use qas::engine::{
    build_dataset, evaluate_record, recompute_report, screen, train_models, verify, CampaignConfig,
    CampaignPaths, RecordStore, ScreenModels, Survivor, TaskKind,
};
use qas::sampler::{self, Pipeline};
use qas::tasks::{
    evaluate_qml, evaluate_vqe, hardware_efficient_baseline, qaoa_baseline, QmlConfig, TfimProblem,
    VqeConfig,
};
use qas::transfer::{transfer_tfim, TransferConfig};
use qas::{Error, Result};

#[derive(Parser)]
#[command(name = "qas", version, about = "Predictor-based quantum architecture search")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Campaign config (TOML with [sampler], [evaluator], [dataset], [screen], [train], [report]).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Task preset used when no config file is given.
    #[arg(long, global = true, value_enum)]
    task: Option<Task>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, 0 for all cores (overrides the config).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// IDX image file for the QML task.
    #[arg(long, global = true)]
    images: Option<PathBuf>,
    /// IDX label file for the QML task.
    #[arg(long, global = true)]
    labels: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Task {
    Tfim,
    Qml,
}

#[derive(Subcommand)]
enum Command {
    /// Sample circuits from the configured pipeline (the dataset stream) as JSONL.
    Gen {
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        start: u64,
        #[arg(long)]
        n: Option<usize>,
        /// gatewise, layerwise or mixed[:fraction]
        #[arg(long)]
        pipeline: Option<String>,
        #[arg(long)]
        n_gates: Option<usize>,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate circuits from a JSONL file (or `-` for stdin) into dataset records.
    Eval {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build (or resume) the phase-one dataset.
    BuildDataset {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Train the screening models on a dataset and write checkpoints to a directory.
    TrainPredictor {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score circuits with trained models.
    Predict {
        #[arg(long)]
        models: PathBuf,
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Screen fresh candidates with trained models.
    Screen {
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        candidates: Option<usize>,
        #[arg(long)]
        start: Option<u64>,
    },
    /// Fully evaluate screening survivors and rank them.
    Verify {
        survivors: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Fill in a layered ansatz on a larger ring and prune it by beam search.
    Transfer {
        #[arg(long)]
        from_spec: String,
        #[arg(long, default_value_t = 6)]
        from_n: usize,
        #[arg(long, default_value_t = 10)]
        n_target: usize,
        #[arg(long, default_value_t = 2)]
        q: usize,
        /// Absolute energy threshold; defaults to root + delta * |root|.
        #[arg(long, allow_negative_numbers = true)]
        threshold: Option<f64>,
        #[arg(long, default_value_t = 0.005)]
        delta: f64,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long)]
        max_rounds: Option<usize>,
        /// Lineage log (JSONL, one line per kept state per round).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reference ansatzes: QAOA-inspired for the Ising task, hardware-efficient for QML.
    Baseline {
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        p: usize,
    },
    /// Exact ground-state energy of the Ising ring.
    GroundTruth {
        #[arg(long, default_value_t = 6)]
        n: usize,
    },
    /// Recompute a campaign report from its directory.
    Report { dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn config(c: &Common) -> Result<CampaignConfig> {
    let mut cfg = match (&c.config, c.task) {
        (Some(p), _) => CampaignConfig::load(p)?,
        (None, Some(Task::Qml)) => CampaignConfig::qml(),
        (None, _) => CampaignConfig::tfim(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(w) = c.workers {
        cfg.workers = w;
    }
    if let Some(p) = &c.images {
        cfg.evaluator.images = Some(p.clone());
    }
    if let Some(p) = &c.labels {
        cfg.evaluator.labels = Some(p.clone());
    }
    cfg.validate()?;
    log::info!(
        "qas {} seed {} config {}",
        env!("CARGO_PKG_VERSION"),
        cfg.seed,
        cfg.hash()
    );
    Ok(cfg)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        None => Ok(Box::new(std::io::stdout().lock())),
        Some(p) => {
            let f = std::fs::File::create(p).map_err(|e| Error::io(p, e))?;
            Ok(Box::new(std::io::BufWriter::new(f)))
        }
    }
}

fn emit<T: Serialize>(w: &mut dyn Write, v: &T) -> Result<()> {
    let line = serde_json::to_string(v).map_err(|e| Error::Dataset(e.to_string()))?;
    writeln!(w, "{line}").map_err(|e| Error::io("<output>", e))
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(v).map_err(|e| Error::Dataset(e.to_string()))?;
    println!("{s}");
    Ok(())
}

fn read_circuits(path: &Path) -> Result<Vec<Circuit>> {
    let reader: Box<dyn BufRead> = if path.as_os_str() == "-" {
        Box::new(BufReader::new(std::io::stdin()))
    } else {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Box::new(BufReader::new(f))
    };
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        // accept bare circuits or anything carrying a "circuit" field
        let v: serde_json::Value = serde_json::from_str(&line)
            .map_err(|e| Error::Dataset(format!("{}:{}: {e}", path.display(), i + 1)))?;
        let v = v.get("circuit").cloned().unwrap_or(v);
        let json: CircuitJson = serde_json::from_value(v)
            .map_err(|e| Error::Dataset(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(Circuit::from_json(&json)?);
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GroundTruth { n } => {
            let p = TfimProblem::new(n)?;
            println!("{:.7}", p.e0);
        }
        Command::Baseline { n, p } => {
            let cfg = config(&cli.common)?;
            match cfg.evaluator.task {
                TaskKind::Tfim => {
                    let problem = TfimProblem::new(n)?;
                    let c = qaoa_baseline(n, p)?;
                    let r = evaluate_vqe(&c, &problem, &VqeConfig::thorough(), cfg.seed)?;
                    println!("{:.7}", r.best);
                    log::info!(
                        "p={p} QAOA-inspired ansatz: {} gates, {} angles, eps {:.5}",
                        c.len(),
                        c.num_params(),
                        r.eps
                    );
                }
                TaskKind::Qml => {
                    let ev = &cfg.evaluator;
                    let (Some(images), Some(labels)) = (&ev.images, &ev.labels) else {
                        return Err(Error::Config("the qml baseline needs --images and --labels".into()));
                    };
                    let raw = ingest_idx(images, labels)?;
                    let (task, _, _) = build_qml_task(&raw, &ev.qml_task, cfg.seed)?;
                    let c = hardware_efficient_baseline(task.n)?;
                    let r = evaluate_qml(&c, &task, &QmlConfig::thorough(), cfg.seed)?;
                    println!("{:.4}", r.accuracy);
                }
            }
        }
        Command::Gen {
            count,
            start,
            n,
            pipeline,
            n_gates,
            depth,
            out,
        } => {
            let cfg = config(&cli.common)?;
            let mut s = cfg.dataset_sampler();
            if let Some(n) = n {
                s.n = n;
            }
            if let Some(p) = pipeline {
                s.pipeline = p.parse::<Pipeline>()?;
            }
            if let Some(t) = n_gates {
                s.n_t = t;
            }
            if let Some(d) = depth {
                s.depth_cutoff = d;
            }
            let mut w = output(out.as_deref())?;
            for smp in sampler::sample_batch(&s, start, count)? {
                emit(&mut *w, &smp.circuit.to_json()?)?;
            }
        }
        Command::Eval { input, out } => {
            let cfg = config(&cli.common)?;
            let circuits = read_circuits(&input)?;
            let n = circuits.first().map_or(cfg.sampler.n, |c| c.n);
            let ev = cfg.evaluator.build(n, cfg.seed)?;
            let task = ev.task_id();
            let mut w = output(out.as_deref())?;
            for c in &circuits {
                let r = evaluate_record(c, ev.as_ref(), &task, cfg.seed, None)?;
                emit(&mut *w, &r)?;
            }
        }
        Command::BuildDataset { out, count } => {
            let cfg = config(&cli.common)?;
            let ev = cfg.evaluator.build(cfg.sampler.n, cfg.seed)?;
            let (_, summary) = build_dataset(
                &cfg.dataset_sampler(),
                ev.as_ref(),
                count.unwrap_or(cfg.dataset.count),
                cfg.seed,
                Some(&RecordStore::new(&out)),
                cfg.workers,
            )?;
            print_json(&summary)?;
        }
        Command::TrainPredictor { dataset, out } => {
            let cfg = config(&cli.common)?;
            let records = RecordStore::new(&dataset).load()?;
            if records.is_empty() {
                return Err(Error::Dataset(format!("{}: no records", dataset.display())));
            }
            let (models, report) = train_models(&cfg, &records)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            models.save(&CampaignPaths::new(&out))?;
            print_json(&report)?;
        }
        Command::Predict { models, input, out } => {
            let models = ScreenModels::load(&CampaignPaths::new(&models))?;
            let circuits = read_circuits(&input)?;
            let mut w = output(out.as_deref())?;
            #[derive(Serialize)]
            struct Score {
                hash: String,
                #[serde(skip_serializing_if = "Option::is_none")]
                classifier: Option<f64>,
                regressor: f64,
            }
            for c in &circuits {
                let c = c.canonicalize()?;
                let (classifier, regressor) = match &models {
                    ScreenModels::TwoStage { classifier, regressor } => {
                        (Some(classifier.predict(&c)?), regressor.predict(&c)?)
                    }
                    ScreenModels::Single { regressor } => (None, regressor.predict(&c)?),
                };
                emit(
                    &mut *w,
                    &Score {
                        hash: c.structure_hash()?,
                        classifier,
                        regressor,
                    },
                )?;
            }
        }
        Command::Screen {
            models,
            out,
            candidates,
            start,
        } => {
            let mut cfg = config(&cli.common)?;
            if let Some(c) = candidates {
                cfg.screen.candidates = c;
            }
            if let Some(s) = start {
                cfg.screen.start_index = s;
            }
            let m = ScreenModels::load(&CampaignPaths::new(&models))?;
            let outcome = screen(&m, &cfg.screen_sampler(), &cfg.screen)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            outcome.write(&CampaignPaths::new(&out))?;
            print_json(&outcome.counts)?;
        }
        Command::Verify {
            survivors,
            out,
            budget,
        } => {
            let cfg = config(&cli.common)?;
            let list: Vec<Survivor> = qas::engine::load_jsonl(&survivors)?;
            let chosen: Vec<Circuit> = list
                .iter()
                .take(budget.or(cfg.screen.verify_budget).unwrap_or(usize::MAX))
                .map(|s| s.circuit())
                .collect::<Result<_>>()?;
            if chosen.is_empty() {
                return Err(Error::Dataset(format!("{}: no survivors", survivors.display())));
            }
            let n = chosen[0].n;
            let ev = cfg.evaluator.build(n, cfg.seed)?;
            let ranked = verify(&chosen, ev.as_ref(), cfg.seed, Some(&RecordStore::new(&out)), cfg.workers)?;
            for r in ranked.iter().take(10) {
                println!("{}  best {:.6}  label {:.6}", r.hash, r.best, r.label);
            }
        }
        Command::Transfer {
            from_spec,
            from_n,
            n_target,
            q,
            threshold,
            delta,
            steps,
            max_rounds,
            out,
        } => {
            let base = config(&cli.common)?;
            let spec = LayeredSpec::parse(from_n, &from_spec)?;
            let cfg = TransferConfig {
                n_target,
                q,
                delta,
                threshold,
                finetune_steps: steps,
                max_rounds,
                seed: base.seed,
                ..Default::default()
            };
            let outcome = transfer_tfim(&spec, &cfg)?;
            if let Some(p) = out {
                #[derive(Serialize)]
                struct Line<'a> {
                    round: usize,
                    rank: usize,
                    notation: String,
                    gates: usize,
                    fitness: f64,
                    lineage: &'a [(usize, qas::transfer::Action)],
                }
                let mut w = output(Some(&p))?;
                for r in &outcome.beam.rounds {
                    for (rank, s) in r.kept.iter().enumerate() {
                        emit(
                            &mut *w,
                            &Line {
                                round: r.round,
                                rank,
                                notation: s.spec.notation(),
                                gates: s.gate_count(),
                                fitness: s.fitness,
                                lineage: &s.lineage,
                            },
                        )?;
                    }
                }
            }
            println!(
                "root {} energy {:.6} threshold {:.6} exact {:.6}",
                outcome.root_notation, outcome.root_energy, outcome.threshold, outcome.e0
            );
            for f in &outcome.finals {
                println!(
                    "{}  gates {}  angles {}  energy {:.6}",
                    f.notation, f.gate_count, f.num_params, f.energy
                );
            }
        }
        Command::Report { dir } => {
            let cfg = config(&cli.common)?;
            let rep = recompute_report(&cfg, &dir)?;
            rep.write(&dir)?;
            print_json(&rep)?;
        }
    }
    Ok(())
}
