//! Few-shot spike-day classification for electricity prices.
//!
//! The crate turns hourly market series into daily feature vectors, renders
//! each day as a short plain-text description, retrieves similar past days
//! from an embedding index, asks a model "will tomorrow spike?", and scores
//! the answers against realized prices. Every stage is deterministic for a
//! fixed seed, and every artifact a run writes can be reproduced byte for
//! byte.
//!
//! The fastest way in is the `examples/` directory; each file is a small
//! runnable program around one capability.
//!
//! ## Data and features
//!
//! - **`synth_data`** - generate a seeded synthetic year of market data
//! - **`ingest_align`** - load hourly CSVs and align them into a daily table
//! - **`featurize_label`** - daily statistics, spike thresholds, labels
//!
//! ```bash
//! cargo run -p spikecast --example synth_data
//! cargo run -p spikecast --example ingest_align
//! cargo run -p spikecast --example featurize_label
//! ```
//!
//! ## Text, embeddings, retrieval
//!
//! - **`describe_days`** - render days as the text the model reads
//! - **`embed_and_search`** - hash embeddings and exact cosine search
//! - **`mmr_retrieval`** - diversified example selection with an anchor
//!
//! ```bash
//! cargo run -p spikecast --example describe_days
//! cargo run -p spikecast --example embed_and_search
//! cargo run -p spikecast --example mmr_retrieval
//! ```
//!
//! ## Prediction and evaluation
//!
//! - **`parse_replies`** - two-line verdict parsing on messy model output
//! - **`threshold_report`** - ROC/PR curves and threshold optimization
//! - **`mock_backtest`** - the whole pipeline end to end, offline
//!
//! ```bash
//! cargo run -p spikecast --example parse_replies
//! cargo run -p spikecast --example threshold_report
//! cargo run -p spikecast --example mock_backtest
//! ```
//!
//! The same pipeline is scriptable through the thin `spikecast` binary
//! (`synth`, `featurize`, `label`, `index`, `predict`, `backtest`,
//! `report`), which reads one TOML config and writes a self-describing run
//! directory.

pub mod config;
pub mod dates;
pub mod embed;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod llm;
pub mod pipeline;
pub mod retrieval;
pub mod textualize;

pub use config::RunConfig;
pub use dates::DateRange;
pub use pipeline::{Pipeline, PipelineError, RunSummary};
