//! Render feature vectors as the plain-text day descriptions the model
//! reads. Descriptions are deterministic, so they double as cache keys.

use spikecast::dates::DateRange;
use spikecast::features::{label_spikes, spike_thresholds, FeatureOptions};
use spikecast::ingest::synth_dataset_with_truth;
use spikecast::textualize::{render_description, render_example, DEFAULT_TEMPLATE};

fn main() -> anyhow::Result<()> {
    let dataset = synth_dataset_with_truth(21, 120, 0.07)?;
    let opts = FeatureOptions::default();
    let train: DateRange = "2023-01-01..2023-03-31".parse().unwrap();
    let thresholds = spike_thresholds(&dataset.table, Some(train), 0.95, &opts)?;
    let days = label_spikes(&dataset.table, &thresholds, &opts)?;

    let spike = days.iter().find(|d| d.is_spike).unwrap();
    println!("--- query form (what gets classified) ---");
    println!("{}", render_description(&spike.features, DEFAULT_TEMPLATE)?);

    println!("\n--- example form (what goes in the prompt, label attached) ---");
    println!("{}", render_example(&spike.features, spike.is_spike, DEFAULT_TEMPLATE)?);

    let calm = days.iter().find(|d| !d.is_spike).unwrap();
    println!("\n--- a calm day for contrast ---");
    println!("{}", render_example(&calm.features, calm.is_spike, DEFAULT_TEMPLATE)?);
    Ok(())
}
