//! Moves the 30-gate six-qubit Ising ansatz to a ten-qubit ring: fill-in, beam-search
//! pruning with inherited angles, then full optimization of the survivors.
//!
//! `cargo run --release --example ansatz_transfer -- [q] [threshold]`

use qas::circuit::LayeredSpec;
use qas::tasks::{evaluate_vqe, qaoa_baseline, TfimProblem, VqeConfig};
use qas::transfer::{transfer_tfim, TransferConfig};

const SOURCE: &str = "H, YY-odd, ZZ-even, YY-odd, ZZ-even, YY-odd, Rx-even, ZZ-even, Rx-odd";

fn main() -> qas::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let mut cfg = TransferConfig::default();
    if let Some(q) = args.next() {
        cfg.q = q.parse().expect("q is an integer");
    }
    if let Some(t) = args.next() {
        cfg.threshold = Some(t.parse().expect("threshold is a number"));
    }
    let spec = LayeredSpec::parse(6, SOURCE)?;
    let out = transfer_tfim(&spec, &cfg)?;
    println!("fill-in   {}  energy {:.5}", out.root_notation, out.root_energy);
    println!("threshold {:.5}  exact {:.5}", out.threshold, out.e0);
    for r in &out.beam.rounds {
        let s = &r.kept[0];
        println!(
            "round {:2}: {:3} children, {:3} pass; best {:.5} with {} gates",
            r.round,
            r.evaluated,
            r.passed,
            s.fitness,
            s.gate_count()
        );
    }
    for f in &out.finals {
        println!(
            "final {}  ({} gates, {} angles)  energy {:.5}",
            f.notation, f.gate_count, f.num_params, f.energy
        );
    }
    let problem = TfimProblem::new(cfg.n_target)?;
    let qaoa = evaluate_vqe(&qaoa_baseline(cfg.n_target, 3)?, &problem, &VqeConfig::thorough(), cfg.seed)?;
    println!("p=3 QAOA baseline {:.5}", qaoa.best);
    Ok(())
}
