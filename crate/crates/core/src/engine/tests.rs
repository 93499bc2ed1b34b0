use std::sync::atomic::{AtomicUsize, Ordering};

use super::*;
use crate::circuit::{Circuit, GateKind};
use crate::error::{Error, Result};
use crate::nn::{
    classifier_network, regressor_network, ClassifierArch, Predictor, PredictorKind,
    RegressorArch, Target, CHECKPOINT_VERSION,
};
use crate::sampler::{Pipeline, SamplerConfig};
use crate::seed;

/// Cheap deterministic stand-in for a full evaluation. Fails on one seed in eleven.
struct Mock {
    n: usize,
    calls: AtomicUsize,
}

impl Mock {
    fn new(n: usize) -> Self {
        Mock {
            n,
            calls: AtomicUsize::new(0),
        }
    }
}

impl Evaluator for Mock {
    fn task_id(&self) -> String {
        format!("mock-{}", self.n)
    }
    fn qubits(&self) -> usize {
        self.n
    }
    fn lower_is_better(&self) -> bool {
        true
    }
    fn label_of(&self, best: f64) -> f64 {
        best + 10.0
    }
    fn evaluate(&self, circuit: &Circuit, seed: u64) -> Result<Evaluation> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        if seed % 11 == 0 {
            return Err(Error::Diverged("mock failure".into()));
        }
        let zz = circuit.gates.iter().filter(|g| g.kind == GateKind::ZZ).count() as f64;
        let jitter = (seed % 1000) as f64 * 1e-4;
        let runs = vec![-zz - jitter, -zz - jitter + 0.5];
        Ok(Evaluation {
            best: runs[0],
            std: 0.25,
            label: runs[0] + 10.0,
            restart_metrics: runs,
        })
    }
}

fn sampler_cfg(seed: u64) -> SamplerConfig {
    SamplerConfig {
        seed,
        ..SamplerConfig::vqe()
    }
}

/// A tiny search space where repeats are common.
fn crowded_sampler() -> SamplerConfig {
    SamplerConfig {
        n: 2,
        n_t: 1,
        pipeline: Pipeline::Gatewise,
        seed: 3,
        ..SamplerConfig::vqe()
    }
}

fn untrained(kind: PredictorKind, depth: usize, n: usize, salt: u64) -> Predictor {
    let mut rng = seed::rng(salt, &[]);
    let channels = crate::circuit::GateSet::vqe().len();
    let (network, target) = match kind {
        PredictorKind::Classifier => (
            classifier_network(depth, n, channels, &ClassifierArch::default(), &mut rng).unwrap(),
            Target::Metric,
        ),
        PredictorKind::Regressor => (
            regressor_network(depth, n, channels, &RegressorArch::default(), &mut rng).unwrap(),
            Target::Metric,
        ),
    };
    Predictor {
        version: CHECKPOINT_VERSION,
        kind,
        target,
        depth,
        qubits: n,
        gate_set: None,
        network,
        label_mean: 0.01,
        label_std: 0.01,
        labeling: None,
    }
}

fn two_stage() -> ScreenModels {
    ScreenModels::TwoStage {
        classifier: untrained(PredictorKind::Classifier, 10, 6, 1),
        regressor: untrained(PredictorKind::Regressor, 10, 6, 2),
    }
}

#[test]
fn build_is_deterministic_and_unique() {
    let ev = Mock::new(6);
    let (a, sa) = build_dataset(&sampler_cfg(1), &ev, 25, 9, None, 0).unwrap();
    let (b, _) = build_dataset(&sampler_cfg(1), &ev, 25, 9, None, 0).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 25);
    assert_eq!(sa.records, 25);
    let mut hashes: Vec<&str> = a.iter().map(|r| r.hash.as_str()).collect();
    hashes.sort();
    hashes.dedup();
    assert_eq!(hashes.len(), 25);
    for r in &a {
        assert!(r.is_ok());
        r.check_consistency(&ev).unwrap();
        assert_eq!(r.seed, evaluation_seed(9, &r.circuit().unwrap()).unwrap());
    }
}

#[test]
fn zero_count_is_empty() {
    let ev = Mock::new(6);
    let (recs, s) = build_dataset(&sampler_cfg(1), &ev, 0, 9, None, 0).unwrap();
    assert!(recs.is_empty());
    assert_eq!(s.drawn, 0);
    assert_eq!(ev.calls.load(Ordering::Relaxed), 0);
}

#[test]
fn qubit_mismatch_is_rejected() {
    let ev = Mock::new(4);
    assert!(matches!(
        build_dataset(&sampler_cfg(1), &ev, 3, 9, None, 0),
        Err(Error::Config(_))
    ));
}

#[test]
fn duplicates_are_skipped_and_counted() {
    let ev = Mock::new(2);
    let (recs, s) = build_dataset(&crowded_sampler(), &ev, 8, 0, None, 1).unwrap();
    assert_eq!(recs.len(), 8);
    assert!(s.duplicates > 0, "{s:?}");
    let mut hashes: Vec<&str> = recs.iter().map(|r| r.hash.as_str()).collect();
    hashes.sort();
    hashes.dedup();
    assert_eq!(hashes.len(), 8);
    assert_eq!(s.drawn, 8 + s.duplicates + s.failed);
}

#[test]
fn failures_are_recorded_not_returned() {
    let dir = tempfile::tempdir().unwrap();
    let store = RecordStore::new(dir.path().join("d.jsonl"));
    let ev = Mock::new(6);
    let (recs, s) = build_dataset(&sampler_cfg(2), &ev, 60, 4, Some(&store), 1).unwrap();
    assert!(recs.iter().all(|r| r.is_ok()));
    let stored = store.load().unwrap();
    let failed = stored.iter().filter(|r| !r.is_ok()).count() as u64;
    assert_eq!(failed, s.failed);
    assert!(failed > 0, "one in eleven seeds fails");
    assert!(stored.iter().filter(|r| !r.is_ok()).all(|r| r.best.is_nan()));
}

#[test]
fn resume_matches_a_fresh_build() {
    let dir = tempfile::tempdir().unwrap();
    let store = RecordStore::new(dir.path().join("d.jsonl"));
    let cfg = sampler_cfg(5);
    let (fresh, _) = build_dataset(&cfg, &Mock::new(6), 30, 7, None, 1).unwrap();

    build_dataset(&cfg, &Mock::new(6), 12, 7, Some(&store), 1).unwrap();
    // interrupted write
    let mut text = std::fs::read_to_string(store.path()).unwrap();
    text.push_str("{\"hash\":\"dead");
    std::fs::write(store.path(), text).unwrap();

    let ev = Mock::new(6);
    let (resumed, s) = build_dataset(&cfg, &ev, 30, 7, Some(&store), 1).unwrap();
    assert_eq!(s.resumed, 12);
    assert!(ev.calls.load(Ordering::Relaxed) < 30);
    assert_eq!(resumed, fresh);
    // every line parses after the torn tail was cut
    let text = std::fs::read_to_string(store.path()).unwrap();
    assert!(text.ends_with('\n'));
    for line in text.lines() {
        serde_json::from_str::<DatasetRecord>(line).unwrap();
    }

    // already complete: nothing is evaluated
    let ev = Mock::new(6);
    let (again, _) = build_dataset(&cfg, &ev, 30, 7, Some(&store), 1).unwrap();
    assert_eq!(again, fresh);
    assert_eq!(ev.calls.load(Ordering::Relaxed), 0);
}

#[test]
fn corrupt_middle_line_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    std::fs::write(&path, "not json\n{}\n").unwrap();
    assert!(matches!(RecordStore::new(&path).load(), Err(Error::Dataset(_))));
    assert!(RecordStore::new(dir.path().join("missing.jsonl")).load().unwrap().is_empty());
}

#[test]
fn screening_is_pure() {
    let models = two_stage();
    let cfg = ScreenConfig {
        stage1_threshold: 0.3,
        stage2_threshold: 0.02,
        candidates: 200,
        ..Default::default()
    };
    let a = screen(&models, &sampler_cfg(11), &cfg).unwrap();
    let b = screen(&models, &sampler_cfg(11), &cfg).unwrap();
    assert_eq!(a, b);
    let c = &a.counts;
    assert_eq!(c.sampled, 200);
    assert_eq!(c.sampled, c.sampler_failures + c.too_deep + c.duplicates + c.scored);
    assert!(c.passed_stage2 <= c.passed_stage1 && c.passed_stage1 <= c.scored);
    assert_eq!(a.decisions.len(), c.scored);
    assert_eq!(a.survivors.len(), c.passed_stage2);
    for w in a.survivors.windows(2) {
        assert!(w[0].stage2 <= w[1].stage2);
    }
    for s in &a.survivors {
        assert!(s.stage1.unwrap() > 0.3 && s.stage2 < 0.02);
        let circ = s.circuit().unwrap();
        assert_eq!(circ.structure_hash().unwrap(), s.hash);
    }
}

#[test]
fn unreachable_thresholds_pass_nothing() {
    let models = two_stage();
    let none1 = ScreenConfig {
        stage1_threshold: 1.0,
        candidates: 100,
        ..Default::default()
    };
    let out = screen(&models, &sampler_cfg(12), &none1).unwrap();
    assert_eq!(out.counts.passed_stage1, 0);
    assert!(out.survivors.is_empty());
    assert!(out.decisions.iter().all(|d| d.stage2.is_none()));

    let none2 = ScreenConfig {
        stage1_threshold: 0.0,
        stage2_threshold: f64::NEG_INFINITY,
        candidates: 100,
        ..Default::default()
    };
    let out = screen(&models, &sampler_cfg(12), &none2).unwrap();
    assert_eq!(out.counts.passed_stage1, out.counts.scored);
    assert_eq!(out.counts.passed_stage2, 0);
}

#[test]
fn screen_config_validation() {
    let bad = ScreenConfig {
        stage1_threshold: 1.5,
        ..Default::default()
    };
    assert!(screen(&two_stage(), &sampler_cfg(1), &bad).is_err());
}

#[test]
fn verify_reuses_and_ranks() {
    let dir = tempfile::tempdir().unwrap();
    let store = RecordStore::new(dir.path().join("v.jsonl"));
    let circuits: Vec<Circuit> = (0..12)
        .map(|i| crate::sampler::sample(&sampler_cfg(8), i).unwrap().circuit)
        .collect();
    let ev = Mock::new(6);
    let first = verify(&circuits[..6], &ev, 3, Some(&store), 1).unwrap();
    assert_eq!(ev.calls.load(Ordering::Relaxed), 6);
    let ev = Mock::new(6);
    let all = verify(&circuits, &ev, 3, Some(&store), 1).unwrap();
    assert_eq!(ev.calls.load(Ordering::Relaxed), 6);
    assert_eq!(store.load().unwrap().len(), 12);
    for w in all.windows(2) {
        assert!(w[0].label <= w[1].label);
    }
    for r in &first {
        assert!(all.contains(r));
    }
    // ranked output is a permutation of the successfully evaluated inputs
    let ok = store.load().unwrap().into_iter().filter(|r| r.is_ok()).count();
    assert_eq!(all.len(), ok);
}

fn record(label: f64, best: f64, tag: u64) -> DatasetRecord {
    let c = crate::sampler::sample(&sampler_cfg(21), tag).unwrap().circuit;
    let ev = Evaluation {
        restart_metrics: vec![best],
        best,
        std: 0.0,
        label,
    };
    DatasetRecord::new(&c, "mock-6".into(), Some(tag), tag, ev).unwrap()
}

#[test]
fn report_invariants() {
    let random: Vec<DatasetRecord> = (0..20)
        .map(|i| record(0.01 * i as f64, if i < 4 { -7.8 } else { -7.0 }, i))
        .collect();
    let counts = ScreenCounts {
        sampled: 50,
        scored: 50,
        passed_stage1: 10,
        passed_stage2: 5,
        ..Default::default()
    };
    // identical sets: ratio exactly one
    let same = report("mock-6", &random, &random, &counts, OptimalRule::tfim_energy(), true, 7).unwrap();
    assert_eq!(same.efficiency_ratio, Some(1.0));
    assert_eq!(same.random.optimal, 4);
    assert_eq!(same.histogram.random.iter().sum::<usize>(), 20);
    assert_eq!(same.histogram.screened.iter().sum::<usize>(), 20);
    assert_eq!(same.histogram.edges.len(), 8);
    assert!(same.counts.passed_stage2 <= same.counts.sampled);

    let screened: Vec<DatasetRecord> = (0..5).map(|i| record(0.001 * i as f64, -7.8, 100 + i)).collect();
    let r = report("mock-6", &random, &screened, &counts, OptimalRule::tfim_energy(), true, 7).unwrap();
    assert_eq!(r.verified, 5);
    assert!((r.efficiency_ratio.unwrap() - 1.0 / 0.2).abs() < 1e-12);
    assert!(r.mann_whitney.as_ref().unwrap().p_value < 0.05);
    assert_eq!(r.best.as_ref().unwrap().label, 0.0);
    assert_eq!(r.histogram.screened.iter().sum::<usize>(), 5);

    // no optimal random circuit: ratio undefined
    let plain: Vec<DatasetRecord> = (0..5).map(|i| record(0.1, -7.0, i)).collect();
    let r = report("mock-6", &plain, &screened, &counts, OptimalRule::tfim_energy(), true, 7).unwrap();
    assert_eq!(r.efficiency_ratio, None);

    assert!(report("mock-6", &[], &[], &counts, OptimalRule::tfim_energy(), true, 7).is_err());
}

#[test]
fn config_toml_round_trip() {
    for cfg in [CampaignConfig::tfim(), CampaignConfig::qml()] {
        let text = cfg.to_toml().unwrap();
        let back = CampaignConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }
    let partial = CampaignConfig::from_toml_str("seed = 4\n[screen]\ncandidates = 10\n").unwrap();
    assert_eq!(partial.seed, 4);
    assert_eq!(partial.screen.candidates, 10);
    assert_eq!(partial.sampler, SamplerConfig::vqe());
    assert!(CampaignConfig::from_toml_str("[screen]\nstage1_threshold = 2.0\n").is_err());
    assert_ne!(CampaignConfig::tfim().hash(), partial.hash());
}

#[test]
fn streams_are_independent() {
    let cfg = CampaignConfig::tfim();
    let a = crate::sampler::sample(&cfg.dataset_sampler(), 0).unwrap();
    let b = crate::sampler::sample(&cfg.screen_sampler(), 0).unwrap();
    let c = crate::sampler::sample(&cfg.random_sampler(), 0).unwrap();
    assert_ne!(a, b);
    assert_ne!(b, c);
}

#[test]
fn real_tfim_records_are_consistent() {
    let vqe = crate::tasks::VqeConfig {
        restarts: 2,
        max_steps: 40,
        ..Default::default()
    };
    let ev = TfimEvaluator::new(4, vqe).unwrap();
    let cfg = SamplerConfig {
        n: 4,
        n_t: 12,
        seed: 2,
        ..SamplerConfig::vqe()
    };
    let (recs, _) = build_dataset(&cfg, &ev, 3, 1, None, 1).unwrap();
    let e0 = ev.problem.e0;
    for r in &recs {
        r.check_consistency(&ev).unwrap();
        assert!(r.best >= e0 - 1e-9);
        assert!(r.label >= -1e-12);
        assert_eq!(r.task, "tfim-4");
    }
}
