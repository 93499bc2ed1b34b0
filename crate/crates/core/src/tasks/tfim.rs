use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, GateSet, LayeredSpec, Provenance};
use crate::error::{Error, Result};
use crate::optim::{Adam, AdamConfig};
use crate::seed;
use crate::sim::{
    energy_and_gradient, exact_ground_energy, expectation, run_circuit, PauliObservable,
    PauliWord, StateVector,
};

/// Transverse-field Ising ring `Σ Z_i Z_{i+1} + Σ X_i`.
#[derive(Clone, Debug)]
pub struct TfimProblem {
    pub n: usize,
    pub hamiltonian: PauliObservable,
    pub e0: f64,
    pub normalizer: f64,
}

impl TfimProblem {
    /// Builds the Hamiltonian and diagonalizes it exactly (`n <= 12`).
    pub fn new(n: usize) -> Result<Self> {
        let hamiltonian = tfim_hamiltonian(n)?;
        let e0 = exact_ground_energy(&hamiltonian)?;
        Ok(TfimProblem {
            n,
            hamiltonian,
            e0,
            normalizer: default_normalizer(n),
        })
    }

    /// Uses a known ground energy instead of diagonalizing.
    pub fn with_reference(n: usize, e0: f64) -> Result<Self> {
        Ok(TfimProblem {
            n,
            hamiltonian: tfim_hamiltonian(n)?,
            e0,
            normalizer: default_normalizer(n),
        })
    }

    pub fn error_ratio(&self, energy: f64) -> f64 {
        error_ratio(energy, self.e0, self.normalizer)
    }

    pub fn energy(&self, circuit: &Circuit, params: &[f64]) -> Result<f64> {
        self.check(circuit)?;
        let psi = run_circuit(circuit, params, &StateVector::zero(self.n))?;
        expectation(&psi, &self.hamiltonian)
    }

    fn check(&self, circuit: &Circuit) -> Result<()> {
        if circuit.n != self.n {
            return Err(Error::Dimension(format!(
                "circuit on {} qubits, problem on {}",
                circuit.n, self.n
            )));
        }
        Ok(())
    }
}

/// 14 at six qubits, scaled linearly with the ring length elsewhere.
pub fn default_normalizer(n: usize) -> f64 {
    14.0 * n as f64 / 6.0
}

pub fn tfim_hamiltonian(n: usize) -> Result<PauliObservable> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("TFIM ring needs n >= 2, got {n}")));
    }
    let mut terms = Vec::with_capacity(2 * n);
    for i in 0..n {
        let j = (i + 1) % n;
        terms.push((1.0, PauliWord::from_factors(&[(i, 'Z'), (j, 'Z')])?));
    }
    for i in 0..n {
        terms.push((1.0, PauliWord::from_factors(&[(i, 'X')])?));
    }
    // n = 2 gives Z0Z1 twice, i.e. 2 Z0Z1, as the ring has two bonds
    PauliObservable::new(n, terms)
}

/// `(E - E0) / normalizer`.
pub fn error_ratio(energy: f64, e0: f64, normalizer: f64) -> f64 {
    (energy - e0) / normalizer
}

/// Full H layer, then `p` rounds of a ZZ ring layer and an Rx layer.
pub fn qaoa_baseline(n: usize, p: usize) -> Result<Circuit> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::InvalidArgument(format!("QAOA baseline needs even n, got {n}")));
    }
    if p == 0 {
        return Err(Error::InvalidArgument("QAOA baseline needs p >= 1".into()));
    }
    let mut notation = String::from("H");
    for _ in 0..p {
        notation.push_str(", ZZ, Rx");
    }
    LayeredSpec::parse(n, &notation)?.expand(&GateSet::vqe(), Provenance::Manual)
}

/// `Rx, Ry, ZZ, Rx, Ry, ZZ` layers over the QML gate set.
pub fn hardware_efficient_baseline(n: usize) -> Result<Circuit> {
    LayeredSpec::parse(n, "Rx, Ry, ZZ, Rx, Ry, ZZ")?.expand(&GateSet::qml(), Provenance::Manual)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VqeConfig {
    pub restarts: usize,
    pub lr: f64,
    pub max_steps: usize,
    /// Stop when the energy moved less than `plateau_tol` over this many steps.
    pub plateau_window: usize,
    pub plateau_tol: f64,
    /// Initial angles are uniform on `(-init_range, init_range)`.
    pub init_range: f64,
}

impl Default for VqeConfig {
    fn default() -> Self {
        VqeConfig {
            restarts: 10,
            lr: 0.02,
            max_steps: 600,
            plateau_window: 50,
            plateau_tol: 1e-6,
            init_range: 0.1,
        }
    }
}

impl VqeConfig {
    /// Longer budget for reference runs on fixed ansatzes, whose optima sit in shallow valleys.
    pub fn thorough() -> Self {
        VqeConfig {
            max_steps: 3000,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VqeResult {
    /// Lowest energy reached by each restart.
    pub energies: Vec<f64>,
    pub best: f64,
    pub std: f64,
    pub eps: f64,
    pub best_params: Vec<f64>,
}

/// Result of a single descent run.
#[derive(Clone, Debug, PartialEq)]
pub struct Descent {
    pub energy: f64,
    pub params: Vec<f64>,
    pub steps: usize,
}

/// Adam descent on `<H>` from `init`, returning the lowest energy seen.
pub fn descend(
    circuit: &Circuit,
    problem: &TfimProblem,
    init: Vec<f64>,
    lr: f64,
    max_steps: usize,
    plateau_window: usize,
    plateau_tol: f64,
) -> Result<Descent> {
    problem.check(circuit)?;
    let zero = StateVector::zero(problem.n);
    let mut params = init;
    let mut adam = Adam::new(AdamConfig::with_lr(lr), params.len());
    let mut history = Vec::with_capacity(max_steps + 1);
    let mut best = Descent {
        energy: f64::INFINITY,
        params: params.clone(),
        steps: 0,
    };
    for step in 0..=max_steps {
        let (e, g) = energy_and_gradient(circuit, &params, &zero, &problem.hamiltonian)?;
        if !e.is_finite() {
            return Err(Error::Diverged(format!("energy {e} at step {step}")));
        }
        if e < best.energy {
            best.energy = e;
            best.params.clone_from(&params);
        }
        best.steps = step;
        history.push(e);
        if params.is_empty() || step == max_steps {
            break;
        }
        if plateau_window > 0 && history.len() > plateau_window {
            let past = history[history.len() - 1 - plateau_window];
            if (past - e).abs() < plateau_tol {
                break;
            }
        }
        adam.step(&mut params, &g);
    }
    Ok(best)
}

/// Multi-restart VQE; restart `r` draws its initial angles from `seed::derive(seed, [r])`.
pub fn evaluate_vqe(
    circuit: &Circuit,
    problem: &TfimProblem,
    config: &VqeConfig,
    seed: u64,
) -> Result<VqeResult> {
    let seeds: Vec<u64> = (0..config.restarts as u64)
        .map(|r| seed::derive(seed, &[r]))
        .collect();
    evaluate_vqe_with_seeds(circuit, problem, config, &seeds)
}

/// Multi-restart VQE with explicit per-restart seeds.
pub fn evaluate_vqe_with_seeds(
    circuit: &Circuit,
    problem: &TfimProblem,
    config: &VqeConfig,
    seeds: &[u64],
) -> Result<VqeResult> {
    circuit.ensure_valid()?;
    problem.check(circuit)?;
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("VQE needs at least one restart".into()));
    }
    let np = circuit.num_params();
    let mut energies = Vec::with_capacity(seeds.len());
    let mut best: Option<Descent> = None;
    for &s in seeds {
        let init = random_angles(np, config.init_range, s);
        let run = descend(
            circuit,
            problem,
            init,
            config.lr,
            config.max_steps,
            config.plateau_window,
            config.plateau_tol,
        )?;
        energies.push(run.energy);
        if best.as_ref().is_none_or(|b| run.energy < b.energy) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");
    Ok(VqeResult {
        std: std_dev(&energies),
        eps: problem.error_ratio(best.energy),
        best: best.energy,
        best_params: best.params,
        energies,
    })
}

pub(crate) fn random_angles(len: usize, range: f64, seed: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed, &[]);
    (0..len)
        .map(|_| if range > 0.0 { rng.random_range(-range..range) } else { 0.0 })
        .collect()
}

pub(crate) fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hamiltonian_term_count() {
        for n in [2, 3, 6, 10] {
            assert_eq!(tfim_hamiltonian(n).unwrap().terms().len(), 2 * n);
        }
        assert!(tfim_hamiltonian(1).is_err());
    }

    #[test]
    fn two_site_ground_energy() {
        // 2 Z0Z1 + X0 + X1: the triplet-even block [[2, 2], [2, -2]] has eigenvalue -2√2
        let p = TfimProblem::new(2).unwrap();
        assert!((p.e0 + 2.0 * 2f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn product_state_energy() {
        let p = TfimProblem::new(6).unwrap();
        let e = p.energy(&Circuit::new(6, GateSet::vqe()), &[]).unwrap();
        assert!((e - 6.0).abs() < 1e-12);
    }

    #[test]
    fn error_ratio_examples() {
        assert_eq!(error_ratio(-7.7274066, -7.7274066, 14.0), 0.0);
        assert!((error_ratio(-7.61694, -7.7274066, 14.0) - 0.00789).abs() < 1e-5);
        assert!((error_ratio(6.2725934, -7.7274066, 14.0) - 1.0).abs() < 1e-12);
        assert_eq!(default_normalizer(6), 14.0);
    }

    #[test]
    fn baseline_sizes() {
        let c = qaoa_baseline(6, 3).unwrap();
        assert_eq!((c.len(), c.num_params()), (42, 36));
        let c = qaoa_baseline(6, 1).unwrap();
        assert_eq!((c.len(), c.num_params()), (18, 12));
        let c = qaoa_baseline(10, 3).unwrap();
        assert_eq!((c.len(), c.num_params()), (70, 60));
        assert!(qaoa_baseline(5, 1).is_err());
        assert!(qaoa_baseline(6, 0).is_err());
        let h = hardware_efficient_baseline(10).unwrap();
        assert_eq!(h.len(), 60);
        assert!(h.is_valid());
    }

    #[test]
    fn empty_circuit_vqe() {
        let p = TfimProblem::new(6).unwrap();
        let r = evaluate_vqe(&Circuit::new(6, GateSet::vqe()), &p, &VqeConfig::default(), 1).unwrap();
        assert_eq!(r.best, 6.0);
        assert_eq!(r.std, 0.0);
    }

    #[test]
    fn shared_seed_gives_zero_std() {
        let p = TfimProblem::new(4).unwrap();
        let c = qaoa_baseline(4, 1).unwrap();
        let cfg = VqeConfig {
            max_steps: 50,
            ..Default::default()
        };
        let r = evaluate_vqe_with_seeds(&c, &p, &cfg, &[9, 9, 9]).unwrap();
        assert_eq!(r.std, 0.0);
        assert_eq!(r.energies.len(), 3);
    }

    #[test]
    fn deterministic_given_seed() {
        let p = TfimProblem::new(4).unwrap();
        let c = qaoa_baseline(4, 1).unwrap();
        let cfg = VqeConfig {
            max_steps: 40,
            restarts: 3,
            ..Default::default()
        };
        let a = evaluate_vqe(&c, &p, &cfg, 5).unwrap();
        let b = evaluate_vqe(&c, &p, &cfg, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mismatched_width_rejected() {
        let p = TfimProblem::new(4).unwrap();
        let c = qaoa_baseline(6, 1).unwrap();
        assert!(matches!(
            evaluate_vqe(&c, &p, &VqeConfig::default(), 0),
            Err(Error::Dimension(_))
        ));
    }
}
