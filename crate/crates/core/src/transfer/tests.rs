use std::collections::{HashMap, HashSet};
use std::sync::Mutex;

use proptest::prelude::*;

use super::*;
use crate::circuit::GateKind;
use crate::seed;

const FIG10: &str = "H, YY-odd, ZZ-even, YY-odd, ZZ-even, YY-odd, Rx-even, ZZ-even, Rx-odd";

/// Fitness is a fixed pseudo-random function of the structure; angles pass through.
struct Frozen {
    salt: u64,
}

impl Frozen {
    fn fitness(&self, spec: &LayeredSpec) -> f64 {
        let h = seed::derive(self.salt, &[seed::tag(&spec.notation())]);
        (h >> 11) as f64 / (1u64 << 53) as f64
    }
}

impl FineTune for Frozen {
    fn finetune(&self, spec: &LayeredSpec, init: &[f64], _steps: usize) -> Result<(f64, Vec<f64>)> {
        Ok((self.fitness(spec), init.to_vec()))
    }
}

/// Full VQE from a fixed seed, memoized by structure: path independent.
struct MemoVqe {
    problem: TfimProblem,
    cfg: VqeConfig,
    cache: Mutex<HashMap<String, f64>>,
}

impl MemoVqe {
    fn new(n: usize) -> Self {
        MemoVqe {
            problem: TfimProblem::new(n).unwrap(),
            cfg: VqeConfig {
                restarts: 3,
                max_steps: 300,
                ..Default::default()
            },
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn fitness(&self, spec: &LayeredSpec) -> f64 {
        let key = spec.notation();
        if let Some(&f) = self.cache.lock().unwrap().get(&key) {
            return f;
        }
        let f = if spec.is_empty() {
            self.problem.n as f64
        } else {
            let c = spec.expand(&GateSet::vqe(), Provenance::Layerwise).unwrap();
            evaluate_vqe(&c, &self.problem, &self.cfg, 5).unwrap().best
        };
        self.cache.lock().unwrap().insert(key, f);
        f
    }
}

impl FineTune for MemoVqe {
    fn finetune(&self, spec: &LayeredSpec, init: &[f64], _steps: usize) -> Result<(f64, Vec<f64>)> {
        Ok((self.fitness(spec), init.to_vec()))
    }
}

fn root_state(spec: LayeredSpec, fitness: f64) -> BeamState {
    let np = spec.num_params().unwrap();
    BeamState {
        origin: (0..spec.layers.len()).collect(),
        params: (0..np).map(|i| i as f64).collect(),
        spec,
        fitness,
        lineage: Vec::new(),
    }
}

#[test]
fn fill_in_promotes_every_half_layer() {
    let spec = LayeredSpec::parse(6, FIG10).unwrap();
    assert_eq!(spec.gate_count().unwrap(), 30);
    let filled = fill_in(&spec, 10).unwrap();
    assert_eq!(filled.n, 10);
    assert!(filled.layers.iter().all(|l| l.coverage == Coverage::All));
    assert_eq!(
        filled.layers.iter().map(|l| l.kind).collect::<Vec<_>>(),
        spec.layers.iter().map(|l| l.kind).collect::<Vec<_>>()
    );
    assert_eq!(filled.gate_count().unwrap(), 90);
    assert!(fill_in(&spec, 9).is_err());
    assert!(fill_in(&spec, 4).is_err());
}

#[test]
fn fill_in_needs_a_layerwise_circuit() {
    let gatewise = Circuit::with_gates(4, GateSet::vqe(), vec![crate::circuit::Gate::single(GateKind::H, 0)]);
    assert!(fill_in_circuit(&gatewise, 6).is_err());
    let layered = LayeredSpec::parse(4, "H, ZZ-odd").unwrap().expand(&GateSet::vqe(), Provenance::Layerwise).unwrap();
    assert_eq!(fill_in_circuit(&layered, 6).unwrap().notation(), "H, ZZ");
}

#[test]
fn reductions_remove_one_half_layer_each() {
    let spec = LayeredSpec::parse(6, FIG10).unwrap();
    let kids = enumerate_reductions(&spec);
    // one full layer (two children) plus eight half layers
    assert_eq!(kids.len(), 10);
    for (r, k) in &kids {
        assert_eq!(k.gate_count().unwrap(), 27, "{r:?}");
    }
    assert_eq!(kids[0].1.notation(), "H-even, YY-odd, ZZ-even, YY-odd, ZZ-even, YY-odd, Rx-even, ZZ-even, Rx-odd");
    assert_eq!(kids[1].1.notation(), "H-odd, YY-odd, ZZ-even, YY-odd, ZZ-even, YY-odd, Rx-even, ZZ-even, Rx-odd");
    assert_eq!(kids[2].1.layers.len(), 8);
    let notations: HashSet<String> = kids.iter().map(|(_, k)| k.notation()).collect();
    assert_eq!(notations.len(), 10);
}

#[test]
fn invalid_reductions_are_rejected() {
    let spec = LayeredSpec::parse(4, "H, ZZ-odd").unwrap();
    let bad = [
        Reduction { layer: 0, action: Action::Remove },
        Reduction { layer: 1, action: Action::KeepEven },
        Reduction { layer: 2, action: Action::Remove },
    ];
    for r in bad {
        assert!(r.apply(&spec).is_err(), "{r:?}");
    }
}

#[test]
fn inherited_angles_follow_surviving_gates() {
    let spec = fill_in(&LayeredSpec::parse(6, "H, ZZ-odd, Rx-even, YY-odd, Rz-odd").unwrap(), 6).unwrap();
    let parent = root_state(spec.clone(), 0.0);
    // parent angle of every parameterized gate, keyed by (root layer, qubits)
    let mut by_gate = HashMap::new();
    let mut k = 0;
    for (l, gates) in spec.gates_by_layer().unwrap().into_iter().enumerate() {
        for g in gates {
            if g.kind.is_parameterized() {
                by_gate.insert((l, g.qubits), parent.params[k]);
                k += 1;
            }
        }
    }
    let tuner = Frozen { salt: 1 };
    for (r, _) in enumerate_reductions(&spec) {
        let child = inherit_and_finetune(&parent, r, &tuner, 0).unwrap();
        let mut expect = Vec::new();
        for (gates, &o) in child.spec.gates_by_layer().unwrap().into_iter().zip(&child.origin) {
            for g in gates.into_iter().filter(|g| g.kind.is_parameterized()) {
                expect.push(by_gate[&(o, g.qubits)]);
            }
        }
        assert_eq!(child.params, expect, "{r:?}");
        assert_eq!(child.params.len(), child.spec.num_params().unwrap());
    }
}

#[test]
fn removing_a_zero_angle_half_layer_keeps_the_energy() {
    let problem = TfimProblem::new(4).unwrap();
    let gs = GateSet::vqe();
    let spec = fill_in(&LayeredSpec::parse(4, "H, ZZ, Rx, YY, Rx").unwrap(), 4).unwrap();
    let mut state = root_state(spec.clone(), 0.0);
    let mut rng = seed::rng(3, &[]);
    use rand::Rng;
    state.params = (0..state.params.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let tuner = TfimFineTune {
        problem: problem.clone(),
        gate_set: gs.clone(),
        lr: 0.02,
    };
    // zero the odd half of the YY layer (root layer 3), then drop it
    let gates = spec.gates_by_layer().unwrap();
    let offset: usize = gates[..3].iter().flatten().filter(|g| g.kind.is_parameterized()).count();
    let anchors = spec.layers[3].anchors(4).unwrap();
    let dropped = LayerEntry::new(GateKind::YY, Coverage::Odd).anchors(4).unwrap();
    for (i, a) in anchors.iter().enumerate() {
        if dropped.contains(a) {
            state.params[offset + i] = 0.0;
        }
    }
    let parent_e = problem.energy(&spec.expand(&gs, Provenance::Layerwise).unwrap(), &state.params).unwrap();
    let child = inherit_and_finetune(&state, Reduction { layer: 3, action: Action::KeepEven }, &tuner, 0).unwrap();
    assert!((child.fitness - parent_e).abs() < 1e-9, "{} vs {parent_e}", child.fitness);

    // and removing that half entirely after zeroing what is left
    let mut half = child.clone();
    let gates = half.spec.gates_by_layer().unwrap();
    let offset: usize = gates[..3].iter().flatten().filter(|g| g.kind.is_parameterized()).count();
    for i in 0..gates[3].len() {
        half.params[offset + i] = 0.0;
    }
    let e = problem.energy(&half.spec.expand(&gs, Provenance::Layerwise).unwrap(), &half.params).unwrap();
    let gone = inherit_and_finetune(&half, Reduction { layer: 3, action: Action::Remove }, &tuner, 0).unwrap();
    assert_eq!(gone.spec.layers.len(), 4);
    assert!((gone.fitness - e).abs() < 1e-9);
}

#[test]
fn finetune_does_not_worsen_the_inherited_angles() {
    let problem = TfimProblem::new(4).unwrap();
    let spec = fill_in(&LayeredSpec::parse(4, "H, ZZ, Rx, ZZ, Rx").unwrap(), 4).unwrap();
    let tuner = TfimFineTune {
        problem: problem.clone(),
        gate_set: GateSet::vqe(),
        lr: 0.02,
    };
    let init = vec![0.3; spec.num_params().unwrap()];
    let (e0, _) = tuner.finetune(&spec, &init, 0).unwrap();
    let (e, p) = tuner.finetune(&spec, &init, 100).unwrap();
    assert!(e <= e0);
    assert_eq!(p.len(), init.len());
}

/// Greedy search written directly on layer lists: the q = 1 reference.
fn greedy(root: &LayeredSpec, ev: &Frozen, threshold: f64) -> Vec<(String, f64)> {
    let mut layers: Vec<(usize, GateKind, Coverage)> =
        root.layers.iter().enumerate().map(|(i, l)| (i, l.kind, l.coverage)).collect();
    let mut lineage: Vec<(usize, Action)> = Vec::new();
    let mut trace = Vec::new();
    loop {
        let mut best: Option<(f64, usize, Vec<(usize, Action)>, Vec<(usize, GateKind, Coverage)>)> = None;
        for i in 0..layers.len() {
            let options: Vec<(Action, Option<Coverage>)> = match layers[i].2 {
                Coverage::All => vec![(Action::KeepEven, Some(Coverage::Even)), (Action::KeepOdd, Some(Coverage::Odd))],
                _ => vec![(Action::Remove, None)],
            };
            for (a, cov) in options {
                let mut next = layers.clone();
                match cov {
                    Some(c) => next[i].2 = c,
                    None => {
                        next.remove(i);
                    }
                }
                let spec = LayeredSpec::new(root.n, next.iter().map(|&(_, k, c)| LayerEntry::new(k, c)).collect());
                let f = ev.fitness(&spec);
                if f > threshold {
                    continue;
                }
                let gates = spec.gate_count().unwrap();
                let mut lin = lineage.clone();
                lin.push((layers[i].0, a));
                let better = match &best {
                    None => true,
                    Some((bf, bg, bl, _)) => (f, gates, &lin) < (*bf, *bg, bl),
                };
                if better {
                    best = Some((f, gates, lin, next));
                }
            }
        }
        match best {
            None => return trace,
            Some((f, _, lin, next)) => {
                layers = next;
                lineage = lin;
                let spec = LayeredSpec::new(root.n, layers.iter().map(|&(_, k, c)| LayerEntry::new(k, c)).collect());
                trace.push((spec.notation(), f));
            }
        }
    }
}

#[test]
fn width_one_beam_is_greedy() {
    for salt in 0..20 {
        let ev = Frozen { salt };
        let root_spec = fill_in(&LayeredSpec::parse(6, FIG10).unwrap(), 6).unwrap();
        let threshold = 0.8;
        let root = root_state(root_spec.clone(), 0.0);
        let res = beam_search(root, 1, threshold, &ev, 0, None).unwrap();
        let beam: Vec<(String, f64)> = res.rounds.iter().map(|r| (r.kept[0].spec.notation(), r.kept[0].fitness)).collect();
        assert_eq!(beam, greedy(&root_spec, &ev, threshold), "salt {salt}");
    }
}

#[test]
fn wide_beam_reaches_the_brute_force_optimum() {
    let ev = MemoVqe::new(4);
    let root_spec = fill_in(&LayeredSpec::parse(4, "H, ZZ, Rx, ZZ, Rx").unwrap(), 4).unwrap();
    let root_f = ev.fitness(&root_spec);
    for slack in [0.02, 0.08, 0.2] {
        let threshold = root_f + slack * root_f.abs();
        // every structure reachable through a chain of passing reductions
        let mut frontier = vec![root_spec.clone()];
        let mut seen: HashSet<String> = HashSet::new();
        let mut reachable = vec![root_spec.clone()];
        while let Some(s) = frontier.pop() {
            for (_, k) in enumerate_reductions(&s) {
                if seen.insert(k.notation()) && ev.fitness(&k) <= threshold {
                    reachable.push(k.clone());
                    frontier.push(k);
                }
            }
        }
        let fewest = reachable.iter().map(|s| s.gate_count().unwrap()).min().unwrap();
        let best = reachable
            .iter()
            .filter(|s| s.gate_count().unwrap() == fewest)
            .map(|s| ev.fitness(s))
            .fold(f64::INFINITY, f64::min);

        let res = beam_search(root_state(root_spec.clone(), root_f), 10_000, threshold, &ev, 0, None).unwrap();
        let top = &res.finals[0];
        assert_eq!(top.gate_count(), fewest, "slack {slack}");
        assert_eq!(top.fitness, best, "slack {slack}");
        assert!(res.finals.iter().all(|s| s.gate_count() == fewest));
    }
}

#[test]
fn always_passing_threshold_ends_empty() {
    let ev = Frozen { salt: 7 };
    let spec = fill_in(&LayeredSpec::parse(4, "H, ZZ-odd, Rx").unwrap(), 4).unwrap();
    let res = beam_search(root_state(spec, 0.0), 2, f64::INFINITY, &ev, 0, None).unwrap();
    assert!(res.finals[0].spec.is_empty());
    assert_eq!(res.rounds.len(), 6);
    assert_eq!(res.finals[0].lineage.len(), 6);
}

#[test]
fn root_must_pass_and_width_must_be_positive() {
    let ev = Frozen { salt: 0 };
    let spec = fill_in(&LayeredSpec::parse(4, "H, ZZ").unwrap(), 4).unwrap();
    let err = beam_search(root_state(spec.clone(), 1.0), 2, 0.5, &ev, 0, None).unwrap_err();
    assert!(err.to_string().contains("root fails threshold"), "{err}");
    assert!(beam_search(root_state(spec.clone(), 0.0), 0, 0.5, &ev, 0, None).is_err());
    let none = beam_search(root_state(spec, 0.0), 2, 0.5, &ev, 0, Some(0)).unwrap();
    assert!(none.rounds.is_empty());
    assert_eq!(none.finals[0].spec.notation(), "H, ZZ");
}

#[test]
fn real_tuner_beam_is_deterministic() {
    let problem = TfimProblem::new(4).unwrap();
    let tuner = TfimFineTune {
        problem: problem.clone(),
        gate_set: GateSet::vqe(),
        lr: 0.02,
    };
    let spec = fill_in(&LayeredSpec::parse(4, "H, ZZ, Rx, ZZ, Rx").unwrap(), 4).unwrap();
    let c = spec.expand(&GateSet::vqe(), Provenance::Layerwise).unwrap();
    let fit = evaluate_vqe(&c, &problem, &VqeConfig::default(), 1).unwrap();
    let root = BeamState {
        origin: (0..5).collect(),
        spec,
        params: fit.best_params,
        fitness: fit.best,
        lineage: vec![],
    };
    let thr = fit.best + 0.05 * fit.best.abs();
    let a = beam_search(root.clone(), 2, thr, &tuner, 50, None).unwrap();
    let b = beam_search(root, 2, thr, &tuner, 50, None).unwrap();
    assert_eq!(a, b);
    assert!(!a.rounds.is_empty());
}

fn arb_spec() -> impl Strategy<Value = LayeredSpec> {
    let kinds = [GateKind::H, GateKind::Rx, GateKind::Rz, GateKind::XX, GateKind::ZZ];
    let covs = [Coverage::All, Coverage::Even, Coverage::Odd];
    (
        prop_oneof![Just(4usize), Just(6usize)],
        prop::collection::vec((0..kinds.len(), 0..covs.len()), 1..6),
    )
        .prop_map(move |(n, ls)| {
            LayeredSpec::new(n, ls.into_iter().map(|(k, c)| LayerEntry::new(kinds[k], covs[c])).collect())
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn beam_outputs_pass_and_shrink(spec in arb_spec(), salt in 0u64..1000, thr in 0.2f64..1.0, q in 1usize..5) {
        let ev = Frozen { salt };
        let root = root_state(spec.clone(), 0.0);
        let half = spec.n / 2;
        let res = beam_search(root, q, thr, &ev, 0, None).unwrap();
        let mut prev = spec.gate_count().unwrap();
        for (i, r) in res.rounds.iter().enumerate() {
            prop_assert!(!r.kept.is_empty() && r.kept.len() <= q);
            prop_assert!(r.passed >= r.kept.len() && r.evaluated >= r.passed);
            for s in &r.kept {
                prop_assert!(s.fitness <= thr);
                prop_assert_eq!(s.gate_count(), prev - half);
                prop_assert_eq!(s.lineage.len(), i + 1);
                prop_assert_eq!(s.params.len(), s.spec.num_params().unwrap());
            }
            for w in r.kept.windows(2) {
                prop_assert!(w[0].rank_cmp(&w[1]).is_lt());
            }
            prev -= half;
        }
        prop_assert!(!res.finals.is_empty());
    }

    #[test]
    fn beam_ignores_enumeration_order(spec in arb_spec(), salt in 0u64..1000, thr in 0.3f64..1.0, q in 1usize..4) {
        let ev = Frozen { salt };
        let a = beam_search(root_state(spec.clone(), 0.0), q, thr, &ev, 0, None).unwrap();
        let b = beam_search_ordered(root_state(spec, 0.0), q, thr, &ev, 0, None, |jobs| jobs.reverse()).unwrap();
        prop_assert_eq!(a, b);
    }
}
