//! Encodes one circuit as the (depth, qubit, gate channel) image fed to the predictor.

use qas::tasks::qaoa_baseline;

fn main() -> qas::Result<()> {
    let c = qaoa_baseline(6, 1)?.canonicalize()?;
    let img = c.to_image(10)?;
    let [depth, qubits, channels] = img.shape();
    println!("{} gates -> image {depth}x{qubits}x{channels}, occupancy {}", c.len(), img.occupancy());
    // one row per time step, the active channel per qubit ('.' when idle)
    for d in 0..depth {
        let row: String = (0..qubits)
            .map(|q| match (0..channels).find(|&k| img.get(d, q, k) != 0.0) {
                Some(k) => char::from_digit(k as u32, 36).unwrap(),
                None => '.',
            })
            .collect();
        println!("  {d:2} {row}");
    }
    // relabeling the qubits moves cells, it does not change the count
    let shifted = img.permute_qubits(&[1, 2, 3, 4, 5, 0])?;
    println!("after a ring shift: occupancy {}", shifted.occupancy());
    Ok(())
}
