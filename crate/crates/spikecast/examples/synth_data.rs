//! Generate a seeded synthetic year of market data and poke at it.
//!
//! The generator injects price spikes on known days, so downstream labeling
//! can be checked against ground truth. Same seed, same bytes.

use spikecast::ingest::{synth_dataset_with_truth, write_hourly_csv};

fn main() -> anyhow::Result<()> {
    let dataset = synth_dataset_with_truth(7, 365, 0.05)?;
    let table = &dataset.table;

    println!("days: {}", table.len());
    println!("hourly columns: {:?}", table.hourly_names().collect::<Vec<_>>());
    println!("injected spike days: {}", dataset.injected.len());
    for date in dataset.injected.iter().take(5) {
        println!("  {date}");
    }

    // a spike afternoon dwarfs a calm one
    let spike_day = *dataset.injected.iter().next().unwrap();
    let calm_day = table.dates()[10];
    let spike_rtp = table.hourly_day("rtp", spike_day).unwrap();
    let calm_rtp = table.hourly_day("rtp", calm_day).unwrap();
    println!("\nrtp hours 14-19 on {spike_day} (spike): {:?}", &spike_rtp[14..20].iter().map(|v| v.round()).collect::<Vec<_>>());
    println!("rtp hours 14-19 on {calm_day} (calm):  {:?}", &calm_rtp[14..20].iter().map(|v| v.round()).collect::<Vec<_>>());

    let out = std::env::temp_dir().join("spikecast-synth-rtp.csv");
    write_hourly_csv(&out, &table.to_hourly_series("rtp")?)?;
    println!("\nwrote {}", out.display());
    Ok(())
}
