//! Exact ground energies of the Ising ring by dense diagonalization.

use qas::sim::exact_ground_energy;
use qas::tasks::{default_normalizer, tfim_hamiltonian};

fn main() -> qas::Result<()> {
    for n in [4, 6, 8, 10] {
        let h = tfim_hamiltonian(n)?;
        let e0 = exact_ground_energy(&h)?;
        println!(
            "n={n:2}: {} terms, E0 = {e0:.7}, per site {:.5}, eps normalizer {:.3}",
            h.terms().len(),
            e0 / n as f64,
            default_normalizer(n)
        );
    }
    Ok(())
}
