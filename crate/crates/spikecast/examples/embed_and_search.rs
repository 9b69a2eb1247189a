//! Hash embeddings and exact cosine search over day descriptions.
//!
//! The hash embedder needs no network and no model weights: token n-grams
//! are hashed into a fixed number of buckets and the vector is unit-
//! normalized. Search is exact, so results are reproducible everywhere.

use spikecast::dates::DateRange;
use spikecast::embed::{build_index, EmbeddingProvider, HashEmbedder, IndexDoc};
use spikecast::features::{label_spikes, spike_thresholds, FeatureOptions};
use spikecast::ingest::synth_dataset_with_truth;
use spikecast::textualize::{render_description, DEFAULT_TEMPLATE};

fn main() -> anyhow::Result<()> {
    let embedder = HashEmbedder::new(64)?;

    // close wording embeds close, different wording far
    let a = embedder.embed("day-ahead price mean 42.00 $/MWh, std 6.00")?;
    let b = embedder.embed("day-ahead price mean 42.00 $/MWh, std 7.50")?;
    let c = embedder.embed("wind speed max 14.20 m/s, min 3.10")?;
    println!("sim(price A, price B) = {:.3}", a.cosine(&b)?);
    println!("sim(price A, wind)    = {:.3}", a.cosine(&c)?);

    // index a labeled synthetic history
    let dataset = synth_dataset_with_truth(9, 150, 0.06)?;
    let opts = FeatureOptions::default();
    let train: DateRange = "2023-01-01..2023-03-31".parse().unwrap();
    let thresholds = spike_thresholds(&dataset.table, Some(train), 0.95, &opts)?;
    let days = label_spikes(&dataset.table, &thresholds, &opts)?;

    let docs: Vec<IndexDoc> = days
        .iter()
        .map(|d| {
            Ok(IndexDoc {
                date: d.date(),
                is_spike: d.is_spike,
                text: render_description(&d.features, DEFAULT_TEMPLATE)?,
            })
        })
        .collect::<Result<_, spikecast::textualize::TextualizeError>>()?;
    let index = build_index(&docs, &embedder, DEFAULT_TEMPLATE, 4)?;
    println!("\nindexed {} days at dimension {}", index.entries().len(), index.dimension());

    // query with the last day, restricted to strictly earlier dates
    let query = days.last().unwrap();
    let query_vec = embedder.embed(&render_description(&query.features, DEFAULT_TEMPLATE)?)?;
    let query_date = query.date();
    let hits = index.search(&query_vec, 5, |entry| entry.date < query_date)?;
    println!("nearest prior days to {query_date}:");
    for hit in hits {
        println!(
            "  {}  sim {:.4}  spike: {}",
            hit.date,
            hit.similarity,
            if hit.is_spike { "yes" } else { "no" }
        );
    }
    Ok(())
}
