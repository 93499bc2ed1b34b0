//! Monte-Carlo checks of the circuit sampler's distributions.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use qas::circuit::{ring_pairs, Coverage, Gate, GateKind, GateSet, LayerEntry};
use qas::sampler::{self, draw_type_distribution, sample_gatewise_with, Pipeline, SamplerConfig};

const DRAWS: u64 = 10_000;

fn unbiased() -> SamplerConfig {
    SamplerConfig {
        n_t: 2,
        repeat_kind_boost: 0.0,
        proximity_boost: 0.0,
        pipeline: Pipeline::Gatewise,
        ..SamplerConfig::vqe()
    }
}

/// Every legal (kind, placement) cell with its probability under the product distribution.
fn product_cells(cfg: &SamplerConfig, probs: &[f64]) -> Vec<(Gate, f64)> {
    let mut cells = Vec::new();
    for (k, &p) in cfg.gate_set.kinds().iter().zip(probs) {
        if k.arity() == 1 {
            for q in 0..cfg.n {
                cells.push((Gate::single(*k, q), p / cfg.n as f64));
            }
        } else {
            let pairs = ring_pairs(cfg.n);
            for &(a, b) in &pairs {
                cells.push((Gate::pair(*k, a, b), p / pairs.len() as f64));
            }
        }
    }
    cells
}

/// Pearson statistic of the `slot`-th gate over `DRAWS` circuits, and its 0.999 critical value.
fn chi_square(cfg: &SamplerConfig, slot: usize) -> (f64, f64) {
    let probs = draw_type_distribution(&mut ChaCha8Rng::seed_from_u64(11), cfg);
    let cells = product_cells(cfg, &probs);
    let mut counts: HashMap<Gate, u64> = HashMap::new();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..DRAWS {
        let c = sample_gatewise_with(&mut rng, cfg, &probs).unwrap();
        *counts.entry(c.gates[slot]).or_default() += 1;
    }
    assert_eq!(counts.len(), cells.len(), "every cell is reachable and nothing else is");
    let stat: f64 = cells
        .iter()
        .map(|(g, p)| {
            let expected = p * DRAWS as f64;
            let seen = *counts.get(g).unwrap_or(&0) as f64;
            (seen - expected).powi(2) / expected
        })
        .sum();
    let crit = ChiSquared::new((cells.len() - 1) as f64).unwrap().inverse_cdf(0.999);
    (stat, crit)
}

#[test]
fn unbiased_gatewise_matches_the_product_distribution() {
    let cfg = unbiased();
    for slot in 0..2 {
        let (stat, crit) = chi_square(&cfg, slot);
        assert!(stat < crit, "gate {slot}: χ² {stat:.1} above {crit:.1}");
    }
}

#[test]
fn correlations_are_detected() {
    // the same test must reject the second gate once the boosts are on
    let cfg = SamplerConfig {
        repeat_kind_boost: 1.0,
        proximity_boost: 1.0,
        ..unbiased()
    };
    let (stat, crit) = chi_square(&cfg, 1);
    assert!(stat > crit, "χ² {stat:.1} should exceed {crit:.1}");
}

#[test]
fn single_qubit_kinds_carry_more_mass() {
    let cfg = SamplerConfig::vqe();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let kinds = cfg.gate_set.kinds().to_vec();
    let singles = kinds.iter().filter(|k| k.arity() == 1).count() as f64;
    let pairs = kinds.len() as f64 - singles;
    let (mut s, mut t) = (0.0, 0.0);
    for _ in 0..DRAWS {
        let p = draw_type_distribution(&mut rng, &cfg);
        for (k, v) in kinds.iter().zip(&p) {
            if k.arity() == 1 {
                s += v;
            } else {
                t += v;
            }
        }
    }
    // per kind, so the count of kinds in each class does not decide it
    let (s, t) = (s / (DRAWS as f64 * singles), t / (DRAWS as f64 * pairs));
    assert!(s > t, "single {s:.4} vs two-qubit {t:.4}");

    // and without the bias both classes are alike
    let flat = SamplerConfig {
        single_qubit_bias: 0.0,
        ..cfg.clone()
    };
    let (mut s, mut t) = (0.0, 0.0);
    for _ in 0..DRAWS {
        let p = draw_type_distribution(&mut rng, &flat);
        for (k, v) in kinds.iter().zip(&p) {
            if k.arity() == 1 {
                s += v / singles;
            } else {
                t += v / pairs;
            }
        }
    }
    assert!(((s - t) / DRAWS as f64).abs() < 0.01);
}

#[test]
fn depth_filter_accepts_some_draws() {
    let cfg = SamplerConfig {
        pipeline: Pipeline::Gatewise,
        seed: 8,
        ..SamplerConfig::vqe()
    };
    let draws = 2000;
    let attempts: usize = (0..draws)
        .map(|i| sampler::sample(&cfg, i).unwrap().attempts)
        .sum();
    let rate = draws as f64 / attempts as f64;
    println!("gatewise depth-filter acceptance {rate:.3} ({attempts} attempts for {draws} circuits)");
    assert!(rate > 0.0 && rate <= 1.0);
}

#[test]
fn hadamard_prefix_fraction() {
    let cfg = SamplerConfig {
        pipeline: Pipeline::Layerwise,
        seed: 21,
        ..SamplerConfig::vqe()
    };
    let full_h = LayerEntry::new(GateKind::H, Coverage::All);
    let prefixed = (0..DRAWS)
        .filter(|&i| {
            let c = sampler::sample(&cfg, i).unwrap().circuit;
            c.layered.unwrap().layers.first() == Some(&full_h)
        })
        .count();
    let f = prefixed as f64 / DRAWS as f64;
    assert!((f - 0.3).abs() < 0.02, "H-prefixed fraction {f}");

    // no H in the gate set, no prefix
    let qml = SamplerConfig {
        n: 6,
        n_t: 36,
        gate_set: GateSet::qml(),
        ..cfg
    };
    for i in 0..200 {
        let c = sampler::sample(&qml, i).unwrap().circuit;
        assert!(c.gates.iter().all(|g| g.kind != GateKind::H));
    }
}

#[test]
fn twelve_half_layers_at_six_qubits() {
    let cfg = SamplerConfig {
        pipeline: Pipeline::Layerwise,
        seed: 22,
        ..SamplerConfig::vqe()
    };
    let draws = 2000;
    let mut total = 0;
    for i in 0..draws {
        let spec = sampler::sample(&cfg, i).unwrap().circuit.layered.unwrap();
        for l in &spec.layers {
            let gates = l.gate_count(6).unwrap();
            // a full layer is two half-layers
            total += gates / 3;
            assert!(gates == 3 || (gates == 6 && l.coverage == Coverage::All));
        }
        assert_eq!(spec.gate_limit, None);
    }
    let mean = total as f64 / draws as f64;
    assert!((mean - 12.0).abs() < 1e-12, "{mean}");
}
