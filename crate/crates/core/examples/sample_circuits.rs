//! Draws circuits from both sampler pipelines and prints their shape.

use qas::sampler::{self, Pipeline, SamplerConfig};

fn main() -> qas::Result<()> {
    for pipeline in [Pipeline::Gatewise, Pipeline::Layerwise] {
        let cfg = SamplerConfig {
            pipeline,
            seed: 7,
            ..SamplerConfig::vqe()
        };
        println!("{pipeline:?}");
        let mut attempts = 0;
        for i in 0..5 {
            let s = sampler::sample(&cfg, i)?;
            attempts += s.attempts;
            let c = s.circuit.canonicalize()?;
            let shape = match &c.layered {
                Some(spec) => spec.notation(),
                None => format!("{} gates", c.len()),
            };
            println!("  #{i}: depth {} params {} hash {}  {shape}", c.depth()?, c.num_params(), &c.structure_hash()?[..12]);
        }
        println!("  {attempts} attempts for 5 circuits");
    }
    // one line of the JSONL exchange format
    println!("{}", sampler::sample(&SamplerConfig::vqe(), 0)?.circuit.to_json_line()?);
    Ok(())
}
