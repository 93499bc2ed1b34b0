use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::screen::ScreenCounts;
use super::store::DatasetRecord;
use crate::circuit::CircuitJson;
use crate::error::{Error, Result};
use crate::stats::{self, MannWhitney};

/// Which raw metric values count as "optimal" circuits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimalRule {
    pub threshold: f64,
    /// `true`: optimal means `best < threshold` (energies); `false`: `best > threshold`.
    pub below: bool,
}

impl OptimalRule {
    /// Six-qubit Ising energies below -7.7.
    pub fn tfim_energy() -> Self {
        OptimalRule {
            threshold: -7.7,
            below: true,
        }
    }

    pub fn is_optimal(&self, best: f64) -> bool {
        if self.below {
            best < self.threshold
        } else {
            best > self.threshold
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetSummary {
    pub count: usize,
    pub median_label: Option<f64>,
    pub optimal: usize,
    pub optimal_rate: f64,
}

fn summarize(records: &[&DatasetRecord], rule: &OptimalRule) -> SetSummary {
    let labels: Vec<f64> = records.iter().map(|r| r.label).collect();
    let optimal = records.iter().filter(|r| rule.is_optimal(r.best)).count();
    SetSummary {
        count: records.len(),
        median_label: stats::median(&labels),
        optimal,
        optimal_rate: if records.is_empty() {
            0.0
        } else {
            optimal as f64 / records.len() as f64
        },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` edges over the pooled label range.
    pub edges: Vec<f64>,
    pub random: Vec<usize>,
    pub screened: Vec<usize>,
}

impl Histogram {
    pub fn new(random: &[f64], screened: &[f64], bins: usize) -> Self {
        let bins = bins.max(1);
        let all = random.iter().chain(screened);
        let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
        let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 1.0) };
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
        let count = |xs: &[f64]| {
            let mut c = vec![0; bins];
            for &x in xs {
                let b = (((x - lo) / width) as usize).min(bins - 1);
                c[b] += 1;
            }
            c
        };
        Histogram {
            edges,
            random: count(random),
            screened: count(screened),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_low,bin_high,random,screened\n");
        for i in 0..self.random.len() {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                self.edges[i],
                self.edges[i + 1],
                self.random[i],
                self.screened[i]
            );
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestCircuit {
    pub hash: String,
    pub best: f64,
    pub label: f64,
    pub circuit: CircuitJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub task: String,
    pub counts: ScreenCounts,
    pub verified: usize,
    pub optimal_rule: OptimalRule,
    pub random: SetSummary,
    pub screened: SetSummary,
    /// Optimal rate among screened circuits over the rate among random ones;
    /// `None` when the random set has no optimal circuit.
    pub efficiency_ratio: Option<f64>,
    /// One-sided test that screened circuits have better labels than random ones.
    pub mann_whitney: Option<MannWhitney>,
    pub best: Option<BestCircuit>,
    pub histogram: Histogram,
}

/// Compares verified screening survivors with a random-search set drawn from the same sampler.
pub fn report(
    task: &str,
    random: &[DatasetRecord],
    screened: &[DatasetRecord],
    counts: &ScreenCounts,
    rule: OptimalRule,
    lower_is_better: bool,
    bins: usize,
) -> Result<CampaignReport> {
    let random: Vec<&DatasetRecord> = random.iter().filter(|r| r.is_ok()).collect();
    let screened: Vec<&DatasetRecord> = screened.iter().filter(|r| r.is_ok()).collect();
    if random.is_empty() && screened.is_empty() {
        return Err(Error::Dataset("campaign has no evaluated records".into()));
    }
    let rs = summarize(&random, &rule);
    let ss = summarize(&screened, &rule);
    let efficiency_ratio = (rs.optimal_rate > 0.0).then(|| ss.optimal_rate / rs.optimal_rate);
    let rl: Vec<f64> = random.iter().map(|r| r.label).collect();
    let sl: Vec<f64> = screened.iter().map(|r| r.label).collect();
    let mann_whitney = if rl.is_empty() || sl.is_empty() {
        None
    } else if lower_is_better {
        Some(stats::mann_whitney_less(&sl, &rl)?)
    } else {
        Some(stats::mann_whitney_less(&rl, &sl)?)
    };
    let better = |a: &&&DatasetRecord, b: &&&DatasetRecord| {
        let o = a.label.total_cmp(&b.label);
        if lower_is_better {
            o
        } else {
            o.reverse()
        }
    };
    let best = screened
        .iter()
        .chain(random.iter())
        .min_by(better)
        .map(|r| BestCircuit {
            hash: r.hash.clone(),
            best: r.best,
            label: r.label,
            circuit: r.circuit.clone(),
        });
    Ok(CampaignReport {
        task: task.to_string(),
        counts: counts.clone(),
        verified: screened.len(),
        optimal_rule: rule,
        random: rs,
        screened: ss,
        efficiency_ratio,
        mann_whitney,
        best,
        histogram: Histogram::new(&rl, &sl, bins),
    })
}

impl CampaignReport {
    /// Writes `report.json` and `histogram.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let json = dir.join("report.json");
        std::fs::write(&json, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(&json, e))?;
        let csv = dir.join("histogram.csv");
        std::fs::write(&csv, self.histogram.to_csv()).map_err(|e| Error::io(&csv, e))
    }
}
