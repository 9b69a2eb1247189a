//! Chat-completion client for services exposing the common
//! `POST /chat/completions` JSON shape.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{LlmError, SpikeModel};
use crate::retrieval::{Candidate, Prompt};

/// Remote chat model. The prompt's system message and user text are sent
/// as separate chat messages. Transport failures and 429/5xx responses are
/// retried with exponential backoff; timeouts exhausting the budget
/// surface as [`LlmError::Timeout`].
pub struct RemoteLlm {
    url: String,
    model: String,
    api_key: Option<String>,
    temperature: f64,
    retries: u32,
    backoff: Duration,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

enum Transient {
    Timeout,
    Other(String),
}

impl RemoteLlm {
    /// `url` is the full endpoint (e.g. `https://host/v1/chat/completions`).
    pub fn new(
        url: impl Into<String>,
        model: impl Into<String>,
        timeout: Duration,
    ) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| LlmError::Unavailable { attempts: 0, message: e.to_string() })?;
        Ok(Self {
            url: url.into(),
            model: model.into(),
            api_key: None,
            temperature: 0.0,
            retries: 3,
            backoff: Duration::from_millis(250),
            client,
        })
    }

    pub fn with_api_key(mut self, key: impl Into<String>) -> Self {
        self.api_key = Some(key.into());
        self
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
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

    pub fn model(&self) -> &str {
        &self.model
    }

    fn attempt(&self, prompt: &Prompt) -> Result<Result<String, LlmError>, Transient> {
        // Outer Err: retryable. Inner Err: permanent.
        let body = json!({
            "model": self.model,
            "temperature": self.temperature,
            "messages": [
                { "role": "system", "content": prompt.system },
                { "role": "user", "content": prompt.user_text() },
            ],
        });
        let mut req = self.client.post(&self.url).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                Transient::Timeout
            } else {
                Transient::Other(e.to_string())
            }
        })?;
        let status = resp.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(Transient::Other(format!("status {status}")));
        }
        if !status.is_success() {
            return Ok(Err(LlmError::BadResponse { message: format!("status {status}") }));
        }
        let parsed: ChatResponse = match resp.json() {
            Ok(p) => p,
            Err(e) => return Ok(Err(LlmError::BadResponse { message: e.to_string() })),
        };
        match parsed.choices.into_iter().next() {
            Some(choice) => Ok(Ok(choice.message.content)),
            None => Ok(Err(LlmError::BadResponse { message: "empty choices array".to_string() })),
        }
    }
}

impl SpikeModel for RemoteLlm {
    fn id(&self) -> String {
        format!("remote-{}", self.model)
    }

    fn reply(&self, prompt: &Prompt, _examples: &[Candidate]) -> Result<String, LlmError> {
        let attempts = self.retries + 1;
        let mut last_timeout = false;
        let mut last_message = String::new();
        for i in 0..attempts {
            match self.attempt(prompt) {
                Ok(outcome) => return outcome,
                Err(Transient::Timeout) => {
                    log::warn!("model attempt {} of {attempts} timed out", i + 1);
                    last_timeout = true;
                    last_message = "timeout".to_string();
                }
                Err(Transient::Other(message)) => {
                    log::warn!("model attempt {} of {attempts} failed: {message}", i + 1);
                    last_timeout = false;
                    last_message = message;
                }
            }
            if i + 1 < attempts {
                std::thread::sleep(self.backoff * 2u32.pow(i));
            }
        }
        if last_timeout {
            Err(LlmError::Timeout { attempts })
        } else {
            Err(LlmError::Unavailable { attempts, message: last_message })
        }
    }
}
