//! Diversified few-shot example selection.
//!
//! Pure nearest-neighbor retrieval tends to pick near-duplicates. Maximal
//! marginal relevance trades similarity to the query against similarity to
//! what is already selected; the most recent prior spike day is always
//! anchored into the set so the model sees at least one positive.

use spikecast::dates::DateRange;
use spikecast::embed::{build_index, EmbeddingProvider, HashEmbedder, IndexDoc};
use spikecast::features::{label_spikes, spike_thresholds, FeatureOptions};
use spikecast::ingest::synth_dataset_with_truth;
use spikecast::retrieval::{candidate_pool, mmr_select, nearest_prior_spike, retrieve_examples};
use spikecast::textualize::{render_description, DEFAULT_TEMPLATE};

fn main() -> anyhow::Result<()> {
    let dataset = synth_dataset_with_truth(5, 150, 0.08)?;
    let opts = FeatureOptions::default();
    let train: DateRange = "2023-01-01..2023-03-31".parse().unwrap();
    let thresholds = spike_thresholds(&dataset.table, Some(train), 0.95, &opts)?;
    let days = label_spikes(&dataset.table, &thresholds, &opts)?;

    let embedder = HashEmbedder::new(128)?;
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

    let query = days.last().unwrap();
    let query_date = query.date();
    let query_vec = embedder.embed(&render_description(&query.features, DEFAULT_TEMPLATE)?)?;

    let anchor = nearest_prior_spike(&index, query_date).map(|e| e.date);
    println!("query date: {query_date}");
    println!("anchor (most recent prior spike): {anchor:?}\n");

    let pool = candidate_pool(&index, &query_vec, query_date, 12)?;
    for (label, lambda) in [("pure similarity (lambda = 1.0)", 1.0), ("diversified (lambda = 0.25)", 0.25)] {
        let picks = mmr_select(&pool, 4, lambda, anchor)?;
        println!("{label}:");
        for c in &picks {
            println!(
                "  {}  sim {:.4}  spike: {}",
                c.date,
                c.similarity,
                if c.is_spike { "yes" } else { "no" }
            );
        }
        println!();
    }

    // the one-call form: pool, anchor, and clamping handled for you
    let picks = retrieve_examples(&index, &query_vec, query_date, 4, 0.5, 12)?;
    println!("retrieve_examples(k=4, lambda=0.5): {:?}", picks.iter().map(|c| c.date).collect::<Vec<_>>());
    Ok(())
}
