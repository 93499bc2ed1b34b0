//! Trains the QAOA-style ansatz on the six-site Ising ring for p = 1, 2, 3.

use qas::tasks::{evaluate_vqe, qaoa_baseline, TfimProblem, VqeConfig};

fn main() -> qas::Result<()> {
    let problem = TfimProblem::new(6)?;
    println!("exact ground energy: {:.7}", problem.e0);
    let config = VqeConfig::thorough();
    for p in 1..=3 {
        let circuit = qaoa_baseline(6, p)?;
        let result = evaluate_vqe(&circuit, &problem, &config, 2024)?;
        println!(
            "p={p}: {} gates, {} params, best {:.6}, eps {:.6}, restart std {:.2e}",
            circuit.len(),
            circuit.num_params(),
            result.best,
            result.eps,
            result.std
        );
    }
    Ok(())
}
