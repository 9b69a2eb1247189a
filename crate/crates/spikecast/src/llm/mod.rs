//! Model querying, reply parsing, and the per-day prediction step.
//!
//! One prediction = retrieve examples, render the prompt, ask a model for
//! the two-line verdict, parse it, and map it onto a spike score in [0, 1].
//! The deterministic mock model makes the whole pipeline runnable offline.

mod audit;
mod mock;
mod parse;
mod remote;

pub use audit::{AuditLog, AuditRecord};
pub use mock::{mock_predict, MockModel};
pub use parse::{parse_response, ParsedReply};
pub use remote::RemoteLlm;

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{EmbedError, EmbeddingProvider, VectorIndex};
use crate::features::{FeatureVector, LabeledDay};
use crate::retrieval::{assemble_prompt, retrieve_examples, Candidate, Prompt, RetrievalError};
use crate::textualize::{render_description, render_example, TextualizeError};

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("could not parse model reply: {raw:?}")]
    Unparseable { raw: String },

    #[error("model unavailable after {attempts} attempts: {message}")]
    Unavailable { attempts: u32, message: String },

    #[error("model timed out after {attempts} attempts")]
    Timeout { attempts: u32 },

    #[error("model response malformed: {message}")]
    BadResponse { message: String },

    #[error("no labeled day on record for example date {date}")]
    MissingDay { date: NaiveDate },

    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {source}")]
    Serde {
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Retrieval(#[from] RetrievalError),

    #[error(transparent)]
    Textualize(#[from] TextualizeError),

    #[error(transparent)]
    Embed(#[from] EmbedError),
}

/// Anything that can answer a spike-day prompt.
///
/// `reply` returns the raw completion text. The mock model ignores the
/// prompt text and votes over the retrieved examples; remote models ignore
/// `examples` and send the prompt over the wire.
pub trait SpikeModel {
    fn id(&self) -> String;

    fn reply(&self, prompt: &Prompt, examples: &[Candidate]) -> Result<String, LlmError>;
}

/// Verdict plus confidence mapped onto one probability-like score:
/// the model's confidence that the day IS a spike day.
pub fn spike_score(spike_call: bool, confidence: f64) -> f64 {
    if spike_call {
        confidence
    } else {
        1.0 - confidence
    }
}

/// One finished prediction, as written to predictions output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub date: NaiveDate,
    pub spike_call: bool,
    pub confidence: f64,
    pub spike_score: f64,
    pub prompt_hash: String,
}

/// Which example days informed a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExampleRef {
    pub date: NaiveDate,
    pub similarity: f64,
    pub is_spike: bool,
}

/// A prediction plus everything needed to audit or inspect it.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionDetail {
    pub prediction: Prediction,
    pub raw_response: String,
    pub examples: Vec<ExampleRef>,
    pub prompt: Prompt,
}

/// Everything `predict_day` needs besides the query itself.
pub struct PredictContext<'a> {
    pub index: &'a VectorIndex,
    /// Labeled history; example descriptions are re-rendered from here.
    pub days: &'a BTreeMap<NaiveDate, LabeledDay>,
    pub embedder: &'a dyn EmbeddingProvider,
    pub template: &'a str,
    pub system_prompt: Option<&'a str>,
    pub k: usize,
    pub lambda: f64,
    pub pool_size: usize,
}

/// Run the full per-day prediction: describe, embed, retrieve causal
/// examples, prompt the model, parse. Examples are always strictly before
/// the query date.
pub fn predict_day(
    ctx: &PredictContext,
    model: &dyn SpikeModel,
    query: &FeatureVector,
) -> Result<PredictionDetail, LlmError> {
    let query_text = render_description(query, ctx.template)?;
    let query_vector = ctx.embedder.embed(&query_text)?;
    let examples =
        retrieve_examples(ctx.index, &query_vector, query.date, ctx.k, ctx.lambda, ctx.pool_size)?;

    let mut blocks = Vec::with_capacity(examples.len());
    for candidate in &examples {
        let day = ctx
            .days
            .get(&candidate.date)
            .ok_or(LlmError::MissingDay { date: candidate.date })?;
        blocks.push(render_example(&day.features, candidate.is_spike, ctx.template)?);
    }
    let prompt = assemble_prompt(ctx.system_prompt, &blocks, &query_text);

    let raw_response = model.reply(&prompt, &examples)?;
    let parsed = parse_response(&raw_response)?;

    let prediction = Prediction {
        date: query.date,
        spike_call: parsed.spike_call,
        confidence: parsed.confidence,
        spike_score: spike_score(parsed.spike_call, parsed.confidence),
        prompt_hash: prompt.hash(),
    };
    let example_refs = examples
        .iter()
        .map(|c| ExampleRef { date: c.date, similarity: c.similarity, is_spike: c.is_spike })
        .collect();
    Ok(PredictionDetail { prediction, raw_response, examples: example_refs, prompt })
}
