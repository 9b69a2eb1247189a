//! Deterministic offline stand-in for a real model.

use super::{LlmError, SpikeModel};
use crate::retrieval::{Candidate, Prompt};

/// Similarity-weighted vote over the retrieved examples, rendered as the
/// same two-line reply a real model is asked for.
///
/// With weights `w = sum(sim of spike examples) / sum(sim of all examples)`
/// (similarities clamped to [0, 1]), the reply is "Yes" when `w >= 0.5`
/// and the confidence is `max(w, 1 - w)` to two decimals. Zero total
/// weight (no examples, or all similarities <= 0) answers "No\n0.50".
pub fn mock_predict(examples: &[Candidate]) -> String {
    let mut spike_weight = 0.0f64;
    let mut total_weight = 0.0f64;
    for c in examples {
        let w = c.similarity.clamp(0.0, 1.0);
        total_weight += w;
        if c.is_spike {
            spike_weight += w;
        }
    }
    if total_weight == 0.0 {
        return "No\n0.50".to_string();
    }
    let w = spike_weight / total_weight;
    let spike_call = w >= 0.5;
    let confidence = if spike_call { w } else { 1.0 - w };
    format!("{}\n{confidence:.2}", if spike_call { "Yes" } else { "No" })
}

/// [`SpikeModel`] wrapper around [`mock_predict`]. Ignores the prompt text.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockModel;

impl SpikeModel for MockModel {
    fn id(&self) -> String {
        "mock".to_string()
    }

    fn reply(&self, _prompt: &Prompt, examples: &[Candidate]) -> Result<String, LlmError> {
        Ok(mock_predict(examples))
    }
}
