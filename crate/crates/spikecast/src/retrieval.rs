//! Few-shot example selection and prompt assembly.
//!
//! For a query day, only entries strictly before the query date are ever
//! considered. The most recent prior spike day is pinned as an anchor so
//! the prompt always contains at least one positive example when history
//! has one, and the remaining slots are filled by maximal marginal
//! relevance over the similarity pool.

use chrono::NaiveDate;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::embed::{EmbedError, EmbeddingVector, IndexEntry, VectorIndex};

/// System message used when the caller does not supply one.
pub const DEFAULT_SYSTEM_PROMPT: &str = "You are an electricity market analyst. \
Given summaries of past days labeled as spike or non-spike days, decide whether \
the day to classify will see an extreme real-time price spike.";

/// Trailing instruction that fixes the reply shape the parser expects.
pub const ANSWER_FORMAT: &str = "Answer with exactly two lines. Line 1: Yes or No. \
Line 2: your confidence as a number between 0 and 1.";

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("requested {requested} examples but only {available} candidates")]
    InsufficientCandidates { requested: usize, available: usize },

    #[error("lambda must be in [0, 1], got {lambda}")]
    InvalidLambda { lambda: f64 },

    #[error("anchor {date} is not in the candidate pool")]
    AnchorMissing { date: NaiveDate },

    #[error("no indexed days precede {date}")]
    NoPriorDays { date: NaiveDate },

    #[error(transparent)]
    Embed(#[from] EmbedError),
}

/// A pool member: similarity is to the query vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub date: NaiveDate,
    pub is_spike: bool,
    pub similarity: f64,
    pub vector: EmbeddingVector,
}

/// The most recent spike day strictly before `date`, if any.
pub fn nearest_prior_spike(index: &VectorIndex, date: NaiveDate) -> Option<&IndexEntry> {
    index
        .entries()
        .iter()
        .rev()
        .find(|e| e.date < date && e.is_spike)
}

/// Top `pool_size` prior days by similarity, with the nearest prior spike
/// injected if similarity alone did not surface it (so the pool can hold
/// `pool_size + 1` entries). Errors when nothing precedes the query date.
pub fn candidate_pool(
    index: &VectorIndex,
    query: &EmbeddingVector,
    query_date: NaiveDate,
    pool_size: usize,
) -> Result<Vec<Candidate>, RetrievalError> {
    let hits = index.search(query, pool_size, |e| e.date < query_date)?;
    if hits.is_empty() {
        return Err(RetrievalError::NoPriorDays { date: query_date });
    }
    let mut pool: Vec<Candidate> = hits
        .iter()
        .map(|h| Candidate {
            date: h.date,
            is_spike: h.is_spike,
            similarity: h.similarity,
            vector: index.get(h.date).expect("hit dates come from the index").vector.clone(),
        })
        .collect();
    if let Some(anchor) = nearest_prior_spike(index, query_date) {
        if !pool.iter().any(|c| c.date == anchor.date) {
            pool.push(Candidate {
                date: anchor.date,
                is_spike: true,
                similarity: query.cosine(&anchor.vector)?,
                vector: anchor.vector.clone(),
            });
        }
    }
    Ok(pool)
}

/// Greedy maximal marginal relevance.
///
/// Each step picks the unselected candidate maximizing
/// `lambda * sim(c, query) - (1 - lambda) * max over selected s of sim(c, s)`,
/// where the max over an empty selection is 0. Ties go to the higher query
/// similarity, then the earlier date. An anchor, when given, must be a pool
/// member; it is selected first and counts toward `k`. Requires
/// `k <= pool.len()`; the output preserves selection order.
pub fn mmr_select(
    pool: &[Candidate],
    k: usize,
    lambda: f64,
    anchor: Option<NaiveDate>,
) -> Result<Vec<Candidate>, RetrievalError> {
    if !(0.0..=1.0).contains(&lambda) || lambda.is_nan() {
        return Err(RetrievalError::InvalidLambda { lambda });
    }
    if k > pool.len() {
        return Err(RetrievalError::InsufficientCandidates {
            requested: k,
            available: pool.len(),
        });
    }
    if k == 0 {
        return Ok(Vec::new());
    }

    let mut remaining: Vec<&Candidate> = pool.iter().collect();
    let mut selected: Vec<Candidate> = Vec::with_capacity(k);

    if let Some(anchor_date) = anchor {
        let pos = remaining
            .iter()
            .position(|c| c.date == anchor_date)
            .ok_or(RetrievalError::AnchorMissing { date: anchor_date })?;
        selected.push(remaining.remove(pos).clone());
    }

    while selected.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in remaining.iter().enumerate() {
            let mut diversity = 0.0f64;
            for s in &selected {
                diversity = diversity.max(c.vector.cosine(&s.vector)?);
            }
            let score = lambda * c.similarity - (1.0 - lambda) * diversity;
            let better = match best {
                None => true,
                Some((j, best_score)) => {
                    let b = remaining[j];
                    match score.total_cmp(&best_score) {
                        std::cmp::Ordering::Greater => true,
                        std::cmp::Ordering::Less => false,
                        std::cmp::Ordering::Equal => match c.similarity.total_cmp(&b.similarity) {
                            std::cmp::Ordering::Greater => true,
                            std::cmp::Ordering::Less => false,
                            std::cmp::Ordering::Equal => c.date < b.date,
                        },
                    }
                }
            };
            if better {
                best = Some((i, score));
            }
        }
        let (i, _) = best.expect("remaining is non-empty while selected.len() < k <= pool.len()");
        selected.push(remaining.remove(i).clone());
    }
    Ok(selected)
}

/// Full example-selection pipeline for one query day: causal pool, anchor,
/// MMR, with `k` clamped to what history offers.
pub fn retrieve_examples(
    index: &VectorIndex,
    query: &EmbeddingVector,
    query_date: NaiveDate,
    k: usize,
    lambda: f64,
    pool_size: usize,
) -> Result<Vec<Candidate>, RetrievalError> {
    let pool = candidate_pool(index, query, query_date, pool_size)?;
    let anchor = nearest_prior_spike(index, query_date).map(|e| e.date);
    let k_eff = k.min(pool.len());
    mmr_select(&pool, k_eff, lambda, anchor)
}

/// A prompt ready to send: system message, rendered example blocks in
/// selection order, and the rendered query description.
#[derive(Debug, Clone, PartialEq)]
pub struct Prompt {
    pub system: String,
    pub examples: Vec<String>,
    pub query_text: String,
}

/// Bundle rendered pieces into a [`Prompt`]. `system` defaults to
/// [`DEFAULT_SYSTEM_PROMPT`].
pub fn assemble_prompt(system: Option<&str>, examples: &[String], query_text: &str) -> Prompt {
    Prompt {
        system: system.unwrap_or(DEFAULT_SYSTEM_PROMPT).to_string(),
        examples: examples.to_vec(),
        query_text: query_text.to_string(),
    }
}

impl Prompt {
    /// Everything below the system message: example blocks, the query, and
    /// the answer-format instruction. This is the chat user message.
    pub fn user_text(&self) -> String {
        let mut out = String::new();
        for (i, example) in self.examples.iter().enumerate() {
            out.push_str(&format!("Example {}:\n{}\n\n", i + 1, example));
        }
        out.push_str("Day to classify:\n");
        out.push_str(&self.query_text);
        out.push_str("\n\n");
        out.push_str(ANSWER_FORMAT);
        out
    }

    /// The exact full text of the prompt. Stable across runs and platforms.
    pub fn render(&self) -> String {
        format!("{}\n\n{}", self.system, self.user_text())
    }

    /// Lowercase hex SHA-256 of the rendered text.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.render().as_bytes());
        hex::encode(hasher.finalize())
    }
}
