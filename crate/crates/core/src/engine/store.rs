use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::evaluator::{Evaluation, Evaluator};
use crate::circuit::{Circuit, CircuitJson};
use crate::error::{Error, Result};

/// One evaluated circuit. Records carry no timestamps so reruns are byte-identical.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub hash: String,
    pub task: String,
    /// Position in the sampler stream, when the circuit came from one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_index: Option<u64>,
    pub seed: u64,
    pub circuit: CircuitJson,
    pub restart_metrics: Vec<f64>,
    #[serde(deserialize_with = "null_as_nan")]
    pub best: f64,
    #[serde(deserialize_with = "null_as_nan")]
    pub std: f64,
    #[serde(deserialize_with = "null_as_nan")]
    pub label: f64,
    /// Set when evaluation failed; failed records are kept only to avoid retrying them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl DatasetRecord {
    pub fn new(
        circuit: &Circuit,
        task: String,
        sample_index: Option<u64>,
        seed: u64,
        eval: Evaluation,
    ) -> Result<Self> {
        Ok(DatasetRecord {
            hash: circuit.structure_hash()?,
            task,
            sample_index,
            seed,
            circuit: circuit.to_json()?,
            restart_metrics: eval.restart_metrics,
            best: eval.best,
            std: eval.std,
            label: eval.label,
            failure: None,
        })
    }

    pub fn failed(
        circuit: &Circuit,
        task: String,
        sample_index: Option<u64>,
        seed: u64,
        reason: String,
    ) -> Result<Self> {
        Ok(DatasetRecord {
            hash: circuit.structure_hash()?,
            task,
            sample_index,
            seed,
            circuit: circuit.to_json()?,
            restart_metrics: Vec::new(),
            best: f64::NAN,
            std: f64::NAN,
            label: f64::NAN,
            failure: Some(reason),
        })
    }

    pub fn is_ok(&self) -> bool {
        self.failure.is_none()
    }

    pub fn circuit(&self) -> Result<Circuit> {
        Circuit::from_json(&self.circuit)
    }

    /// Checks that `best` is the extreme restart metric and that the label follows from it.
    pub fn check_consistency(&self, evaluator: &dyn Evaluator) -> Result<()> {
        if !self.is_ok() {
            return Ok(());
        }
        let extreme = if evaluator.lower_is_better() {
            self.restart_metrics.iter().copied().fold(f64::INFINITY, f64::min)
        } else {
            self.restart_metrics.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        };
        // accuracy-like metrics keep the best epoch, not the best restart
        let best_ok = self.restart_metrics.len() <= 1 || extreme == self.best;
        let label = evaluator.label_of(self.best);
        if !best_ok || (label - self.label).abs() > 1e-12 * label.abs().max(1.0) {
            return Err(Error::Dataset(format!(
                "record {} is inconsistent: best {}, label {}",
                self.hash, self.best, self.label
            )));
        }
        Ok(())
    }
}

// JSON has no NaN: serde_json writes it as null, which is read back here.
fn null_as_nan<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

/// Append-only JSONL file of [`DatasetRecord`]s with a single writer.
#[derive(Clone, Debug)]
pub struct RecordStore {
    path: PathBuf,
}

impl RecordStore {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        RecordStore { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Reads all records; a missing file is empty, and a torn final line
    /// (from an interrupted write) is dropped.
    pub fn load(&self) -> Result<Vec<DatasetRecord>> {
        load_jsonl(&self.path)
    }

    pub fn append(&self, records: &[DatasetRecord]) -> Result<()> {
        if records.is_empty() {
            return Ok(());
        }
        if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut buf = String::new();
        for r in records {
            buf.push_str(&serde_json::to_string(r)?);
            buf.push('\n');
        }
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::io(&self.path, e))?;
        self.heal_torn_tail()?;
        f.write_all(buf.as_bytes())
            .and_then(|_| f.sync_data())
            .map_err(|e| Error::io(&self.path, e))
    }

    /// Cuts an unterminated final line so appends start on a fresh line.
    fn heal_torn_tail(&self) -> Result<()> {
        let bytes = std::fs::read(&self.path).map_err(|e| Error::io(&self.path, e))?;
        if bytes.is_empty() || bytes.ends_with(b"\n") {
            return Ok(());
        }
        let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        let f = OpenOptions::new()
            .write(true)
            .open(&self.path)
            .map_err(|e| Error::io(&self.path, e))?;
        f.set_len(keep as u64).map_err(|e| Error::io(&self.path, e))
    }
}

/// Reads a JSONL file of records, tolerating a torn last line.
pub fn load_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let complete = text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => out.push(r),
            Err(_) if i + 1 == lines.len() && !complete => {
                log::warn!("{}: dropping torn final line", path.display());
            }
            Err(e) => {
                return Err(Error::Dataset(format!(
                    "{}:{}: {e}",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut buf = String::new();
    for it in items {
        buf.push_str(&serde_json::to_string(it)?);
        buf.push('\n');
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}
