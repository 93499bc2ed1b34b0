use std::collections::HashSet;

use rayon::prelude::*;

use super::evaluator::Evaluator;
use super::store::{DatasetRecord, RecordStore};
use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::sampler::{self, SamplerConfig};
use crate::seed;

/// Evaluation seed of a circuit: a function of the master seed and the circuit's
/// canonical structure only, so a circuit scores the same wherever it is met.
pub fn evaluation_seed(master: u64, circuit: &Circuit) -> Result<u64> {
    Ok(seed::derive(master, &[seed::tag("eval"), circuit.structure_seed()?]))
}

pub(crate) fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if workers > 0 {
        b = b.num_threads(workers);
    }
    b.build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

#[derive(Clone, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct BuildSummary {
    /// Good records in the store after the run (capped at the requested count).
    pub records: usize,
    /// Sampler draws inspected, including earlier runs.
    pub drawn: u64,
    pub duplicates: u64,
    pub failed: u64,
    pub resumed: usize,
}

/// Samples and evaluates circuits until `count` unique, successfully evaluated circuits exist.
///
/// Candidates are taken from the sampler stream in index order, evaluated `chunk` at a time
/// on `workers` threads (0 = all cores), and appended to `store` in index order, so the
/// final set depends only on the configs and seeds. Rerunning with an existing store
/// resumes where it stopped.
pub fn build_dataset(
    sampler_cfg: &SamplerConfig,
    evaluator: &dyn Evaluator,
    count: usize,
    master_seed: u64,
    store: Option<&RecordStore>,
    workers: usize,
) -> Result<(Vec<DatasetRecord>, BuildSummary)> {
    sampler_cfg.validate()?;
    if sampler_cfg.n != evaluator.qubits() {
        return Err(Error::Config(format!(
            "sampler draws {}-qubit circuits, evaluator expects {}",
            sampler_cfg.n,
            evaluator.qubits()
        )));
    }
    let task = evaluator.task_id();
    let existing = match store {
        Some(s) => s.load()?,
        None => Vec::new(),
    };
    let mut seen: HashSet<String> = HashSet::new();
    let mut good = Vec::new();
    let mut summary = BuildSummary::default();
    let mut next = 0u64;
    for r in existing {
        if r.task != task || r.sample_index.is_none() || !seen.insert(r.hash.clone()) {
            continue;
        }
        next = next.max(r.sample_index.unwrap() + 1);
        if r.is_ok() {
            good.push(r);
        } else {
            summary.failed += 1;
        }
    }
    summary.resumed = good.len();
    summary.drawn = next;
    good.truncate(count);
    let pool = pool(workers)?;
    let chunk = pool.current_num_threads().max(1) * 2;
    while good.len() < count {
        let indices: Vec<u64> = (next..next + chunk as u64).collect();
        next += chunk as u64;
        let evaluated: Vec<Option<Result<DatasetRecord>>> = pool.install(|| {
            indices
                .par_iter()
                .map(|&i| candidate(sampler_cfg, evaluator, &task, master_seed, i))
                .collect()
        });
        let mut batch = Vec::new();
        for (i, rec) in indices.iter().zip(evaluated) {
            if good.len() >= count {
                break;
            }
            summary.drawn = i + 1;
            let Some(rec) = rec else { continue };
            let rec = rec?;
            if !seen.insert(rec.hash.clone()) {
                summary.duplicates += 1;
                continue;
            }
            if rec.is_ok() {
                good.push(rec.clone());
            } else {
                summary.failed += 1;
            }
            batch.push(rec);
        }
        if let Some(s) = store {
            s.append(&batch)?;
        }
        log::info!("dataset: {}/{count} records after {} draws", good.len(), summary.drawn);
    }
    summary.records = good.len();
    Ok((good, summary))
}

/// Samples draw `index` and evaluates it. `None` when the sampler gave up on this draw.
fn candidate(
    cfg: &SamplerConfig,
    evaluator: &dyn Evaluator,
    task: &str,
    master: u64,
    index: u64,
) -> Option<Result<DatasetRecord>> {
    let circuit = match sampler::sample(cfg, index) {
        Ok(s) => s.circuit,
        Err(e) => {
            log::warn!("draw {index} skipped: {e}");
            return None;
        }
    };
    Some(evaluate_record(&circuit, evaluator, task, master, Some(index)))
}

/// Evaluates one circuit into a record; evaluator errors become failed records.
pub fn evaluate_record(
    circuit: &Circuit,
    evaluator: &dyn Evaluator,
    task: &str,
    master: u64,
    sample_index: Option<u64>,
) -> Result<DatasetRecord> {
    let canon = circuit.canonicalize()?;
    let s = evaluation_seed(master, &canon)?;
    match evaluator.evaluate(&canon, s) {
        Ok(ev) => DatasetRecord::new(&canon, task.to_string(), sample_index, s, ev),
        Err(e) => {
            log::warn!("evaluation failed: {e}");
            DatasetRecord::failed(&canon, task.to_string(), sample_index, s, e.to_string())
        }
    }
}

/// Full evaluation of screening survivors, ranked best first (ties by hash).
/// Results already present in `store` are reused, new ones appended.
pub fn verify(
    survivors: &[Circuit],
    evaluator: &dyn Evaluator,
    master_seed: u64,
    store: Option<&RecordStore>,
    workers: usize,
) -> Result<Vec<DatasetRecord>> {
    let task = evaluator.task_id();
    let known: Vec<DatasetRecord> = match store {
        Some(s) => s.load()?.into_iter().filter(|r| r.task == task).collect(),
        None => Vec::new(),
    };
    let pool = pool(workers)?;
    let results: Vec<(bool, DatasetRecord)> = pool.install(|| {
        survivors
            .par_iter()
            .map(|c| {
                let hash = c.structure_hash()?;
                if let Some(r) = known.iter().find(|r| r.hash == hash) {
                    return Ok((false, r.clone()));
                }
                Ok((true, evaluate_record(c, evaluator, &task, master_seed, None)?))
            })
            .collect::<Result<_>>()
    })?;
    if let Some(s) = store {
        let fresh: Vec<DatasetRecord> = results.iter().filter(|(n, _)| *n).map(|(_, r)| r.clone()).collect();
        s.append(&fresh)?;
    }
    let mut ranked: Vec<DatasetRecord> = results.into_iter().map(|(_, r)| r).filter(|r| r.is_ok()).collect();
    rank(&mut ranked, evaluator.lower_is_better());
    Ok(ranked)
}

/// Sorts records best first by label, breaking ties by hash.
pub fn rank(records: &mut [DatasetRecord], lower_is_better: bool) {
    records.sort_by(|a, b| {
        let o = a.label.total_cmp(&b.label);
        let o = if lower_is_better { o } else { o.reverse() };
        o.then_with(|| a.hash.cmp(&b.hash))
    });
}
