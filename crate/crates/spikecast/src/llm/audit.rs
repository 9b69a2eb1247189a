//! Append-only JSONL audit trail of model interactions.
//!
//! This is the only pipeline output that carries wall-clock timestamps;
//! everything else is kept timestamp-free so reruns are byte-identical.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::NaiveDate;
use serde::Serialize;

use super::{ExampleRef, LlmError, PredictionDetail};

/// One audit line.
#[derive(Debug, Clone, Serialize)]
pub struct AuditRecord {
    pub date: NaiveDate,
    pub prompt_hash: String,
    pub raw_response: String,
    pub spike_call: bool,
    pub confidence: f64,
    pub spike_score: f64,
    pub examples: Vec<ExampleRef>,
    /// RFC 3339 UTC wall-clock time of the append.
    pub timestamp: String,
}

impl AuditRecord {
    /// Stamp a finished prediction with the current time.
    pub fn from_detail(detail: &PredictionDetail) -> Self {
        let p = &detail.prediction;
        Self {
            date: p.date,
            prompt_hash: p.prompt_hash.clone(),
            raw_response: detail.raw_response.clone(),
            spike_call: p.spike_call,
            confidence: p.confidence,
            spike_score: p.spike_score,
            examples: detail.examples.clone(),
            timestamp: chrono::Utc::now().to_rfc3339(),
        }
    }
}

/// Append-only JSONL writer, safe to share across threads.
pub struct AuditLog {
    path: PathBuf,
    file: Mutex<BufWriter<File>>,
}

impl AuditLog {
    /// Open for appending, creating the file if needed.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(|source| {
            LlmError::Io { path: path.display().to_string(), source }
        })?;
        Ok(Self { path, file: Mutex::new(BufWriter::new(file)) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Write one record as a JSON line and flush.
    pub fn append(&self, record: &AuditRecord) -> Result<(), LlmError> {
        let line = serde_json::to_string(record).map_err(|source| LlmError::Serde { source })?;
        let mut file = self.file.lock().expect("audit lock poisoned");
        let io_err =
            |source: std::io::Error| LlmError::Io { path: self.path.display().to_string(), source };
        file.write_all(line.as_bytes()).map_err(io_err)?;
        file.write_all(b"\n").map_err(io_err)?;
        file.flush().map_err(io_err)?;
        Ok(())
    }
}
