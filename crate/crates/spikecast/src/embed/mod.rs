//! Text embeddings and the exact-search vector index.
//!
//! Providers turn day descriptions into unit-norm vectors. The index does
//! flat cosine search: no approximation, no quantization, so results are
//! reproducible bit for bit on any machine.

mod cache;
mod hash;
mod index;
mod remote;

pub use cache::{CachedProvider, EmbeddingCache};
pub use hash::{HashEmbedder, MIN_DIMENSION};
pub use index::{build_index, IndexDoc, IndexEntry, SearchHit, VectorIndex};
pub use remote::RemoteEmbedder;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("cannot embed empty text")]
    EmptyText,

    #[error("dimension {got} is below the minimum {min}")]
    BadDimension { got: usize, min: usize },

    #[error("expected dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("vector has zero norm")]
    ZeroVector,

    #[error("vector contains a non-finite component")]
    NonFinite,

    #[error("index already contains {date}")]
    DuplicateDate { date: NaiveDate },

    #[error("index is empty")]
    EmptyIndex,

    #[error("index metadata mismatch: {message}")]
    IndexMismatch { message: String },

    #[error("embedding service unavailable after {attempts} attempts: {message}")]
    Unavailable { attempts: u32, message: String },

    #[error("embedding response malformed: {message}")]
    BadResponse { message: String },

    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error at {path}: {source}")]
    Serde {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// A unit-norm embedding. `values` are the normalized components; `norm`
/// is the pre-normalization L2 length (useful for diagnostics).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f32>,
    norm: f64,
}

impl EmbeddingVector {
    /// Normalize a raw vector. Rejects empty input, non-finite components,
    /// and the zero vector.
    pub fn new(raw: Vec<f32>) -> Result<Self, EmbedError> {
        if raw.is_empty() {
            return Err(EmbedError::BadDimension { got: 0, min: 1 });
        }
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        let norm = raw.iter().map(|v| (*v as f64) * (*v as f64)).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(EmbedError::ZeroVector);
        }
        let values = raw.iter().map(|v| (*v as f64 / norm) as f32).collect();
        Ok(Self { values, norm })
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// L2 length of the vector before normalization.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    /// Cosine similarity: a plain sequential dot product accumulated in
    /// f64. Both vectors are already unit norm, so no renormalization.
    pub fn cosine(&self, other: &EmbeddingVector) -> Result<f64, EmbedError> {
        if self.dimension() != other.dimension() {
            return Err(EmbedError::DimensionMismatch {
                expected: self.dimension(),
                got: other.dimension(),
            });
        }
        let mut acc = 0.0f64;
        for (a, b) in self.values.iter().zip(&other.values) {
            acc += (*a as f64) * (*b as f64);
        }
        Ok(acc)
    }

    /// Rebuild from already-normalized parts (deserialization path).
    fn from_parts(values: Vec<f32>, norm: f64) -> Result<Self, EmbedError> {
        if values.is_empty() {
            return Err(EmbedError::BadDimension { got: 0, min: 1 });
        }
        if values.iter().any(|v| !v.is_finite()) || !norm.is_finite() {
            return Err(EmbedError::NonFinite);
        }
        Ok(Self { values, norm })
    }
}

/// Anything that can turn text into a unit-norm vector.
pub trait EmbeddingProvider {
    /// Stable identifier, used to key cache directories and index metadata.
    fn id(&self) -> String;

    fn dimension(&self) -> usize;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError>;
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Box<P> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn dimension(&self) -> usize {
        (**self).dimension()
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        (**self).embed(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_normalizes_to_unit_length() {
        let v = EmbeddingVector::new(vec![3.0, 4.0]).unwrap();
        assert_eq!(v.norm(), 5.0);
        assert!((v.values()[0] - 0.6).abs() < 1e-7);
        assert!((v.cosine(&v).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_and_nan_vectors_are_rejected() {
        assert!(matches!(EmbeddingVector::new(vec![0.0, 0.0]), Err(EmbedError::ZeroVector)));
        assert!(matches!(EmbeddingVector::new(vec![1.0, f32::NAN]), Err(EmbedError::NonFinite)));
        assert!(matches!(EmbeddingVector::new(vec![]), Err(EmbedError::BadDimension { .. })));
    }

    #[test]
    fn cosine_checks_dimensions() {
        let a = EmbeddingVector::new(vec![1.0, 0.0]).unwrap();
        let b = EmbeddingVector::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(a.cosine(&b), Err(EmbedError::DimensionMismatch { .. })));
    }

    #[test]
    fn orthogonal_vectors_have_zero_similarity() {
        let a = EmbeddingVector::new(vec![1.0, 0.0]).unwrap();
        let b = EmbeddingVector::new(vec![0.0, 2.0]).unwrap();
        assert_eq!(a.cosine(&b).unwrap(), 0.0);
        let c = EmbeddingVector::new(vec![-1.0, 0.0]).unwrap();
        assert_eq!(a.cosine(&c).unwrap(), -1.0);
    }
}
