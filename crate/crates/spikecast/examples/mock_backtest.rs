//! The whole pipeline end to end, fully offline: synthetic data, hash
//! embeddings, a deterministic mock model, and a threshold backtest.
//!
//! Run it twice; every artifact except audit.jsonl is byte-identical.

use spikecast::config::{RunConfig, SynthConfig};
use spikecast::eval::render_table;
use spikecast::pipeline::Pipeline;

fn main() -> anyhow::Result<()> {
    let mut config = RunConfig::synth_defaults();
    config.data.synth = Some(SynthConfig { seed: 17, n_days: 150, spike_rate: 0.07 });
    config.windows.train = "2023-01-01..2023-04-15".parse().unwrap();
    config.windows.test = "2023-04-16..2023-05-30".parse().unwrap();
    config.embedding.dimension = 128;
    config.retrieval.k = 4;

    let out = std::env::temp_dir().join("spikecast-mock-backtest");
    let pipeline = Pipeline::new(config, &out)?.with_force(true);
    let summary = pipeline.run_all()?;

    println!("predicted {} days into {}", summary.predicted, out.display());
    println!();
    print!("{}", render_table(&summary.report));

    println!("\nartifacts:");
    let mut names: Vec<String> = std::fs::read_dir(&out)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    for name in names {
        println!("  {name}");
    }
    Ok(())
}
