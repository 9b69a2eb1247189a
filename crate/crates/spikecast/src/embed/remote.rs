//! Embeddings over HTTP, for services exposing the common
//! `POST /embeddings` JSON shape.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{EmbedError, EmbeddingProvider, EmbeddingVector};

/// Client for a remote embedding endpoint.
///
/// Sends `{"model": ..., "input": [text]}` and expects
/// `{"data": [{"embedding": [...]}]}` back. Transport failures and 429/5xx
/// responses are retried with exponential backoff; other statuses fail
/// immediately.
pub struct RemoteEmbedder {
    url: String,
    model: String,
    api_key: Option<String>,
    dimension: usize,
    retries: u32,
    backoff: Duration,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f32>,
}

impl RemoteEmbedder {
    /// `url` is the full endpoint (e.g. `https://host/v1/embeddings`).
    pub fn new(
        url: impl Into<String>,
        model: impl Into<String>,
        dimension: usize,
        timeout: Duration,
    ) -> Result<Self, EmbedError> {
        if dimension == 0 {
            return Err(EmbedError::BadDimension { got: 0, min: 1 });
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| EmbedError::Unavailable { attempts: 0, message: e.to_string() })?;
        Ok(Self {
            url: url.into(),
            model: model.into(),
            api_key: None,
            dimension,
            retries: 3,
            backoff: Duration::from_millis(250),
            client,
        })
    }

    pub fn with_api_key(mut self, key: impl Into<String>) -> Self {
        self.api_key = Some(key.into());
        self
    }

    /// Extra attempts after the first (0 = fail on first error).
    pub fn with_retries(mut self, retries: u32) -> Self {
        self.retries = retries;
        self
    }

    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    fn attempt(&self, text: &str) -> Result<Result<EmbeddingVector, EmbedError>, String> {
        // Outer Err: retryable. Inner Err: permanent.
        let body = json!({ "model": self.model, "input": [text] });
        let mut req = self.client.post(&self.url).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        let status = resp.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(format!("status {status}"));
        }
        if !status.is_success() {
            return Ok(Err(EmbedError::BadResponse { message: format!("status {status}") }));
        }
        let parsed: EmbeddingResponse = match resp.json() {
            Ok(p) => p,
            Err(e) => return Ok(Err(EmbedError::BadResponse { message: e.to_string() })),
        };
        let Some(datum) = parsed.data.into_iter().next() else {
            return Ok(Err(EmbedError::BadResponse { message: "empty data array".to_string() }));
        };
        if datum.embedding.len() != self.dimension {
            return Ok(Err(EmbedError::DimensionMismatch {
                expected: self.dimension,
                got: datum.embedding.len(),
            }));
        }
        Ok(EmbeddingVector::new(datum.embedding))
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn id(&self) -> String {
        format!("remote-{}-{}", self.model, self.dimension)
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        if text.trim().is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let attempts = self.retries + 1;
        let mut last = String::new();
        for i in 0..attempts {
            match self.attempt(text) {
                Ok(outcome) => return outcome,
                Err(retryable) => {
                    log::warn!("embedding attempt {} of {attempts} failed: {retryable}", i + 1);
                    last = retryable;
                }
            }
            if i + 1 < attempts {
                std::thread::sleep(self.backoff * 2u32.pow(i));
            }
        }
        Err(EmbedError::Unavailable { attempts, message: last })
    }
}
