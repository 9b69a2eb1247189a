//! Dependency-free local embedder: hashed bag of word n-grams.

use super::{EmbedError, EmbeddingProvider, EmbeddingVector};

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

/// Smallest allowed bucket count.
pub const MIN_DIMENSION: usize = 16;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for b in bytes {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Feature-hashing embedder over lowercase word unigrams and bigrams.
///
/// Each n-gram is FNV-1a hashed; the low bits pick a bucket and, in signed
/// mode, one high bit picks +1/-1 so collisions tend to cancel. Unsigned
/// mode always adds +1, which keeps every similarity in [0, 1]. Output is
/// L2-normalized. Deterministic across platforms.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dimension: usize,
    signed: bool,
}

impl HashEmbedder {
    /// Signed-mode embedder with `dimension` buckets (at least 16).
    pub fn new(dimension: usize) -> Result<Self, EmbedError> {
        if dimension < MIN_DIMENSION {
            return Err(EmbedError::BadDimension { got: dimension, min: MIN_DIMENSION });
        }
        Ok(Self { dimension, signed: true })
    }

    /// Unsigned mode: all bucket updates are +1.
    pub fn unsigned(dimension: usize) -> Result<Self, EmbedError> {
        let mut e = Self::new(dimension)?;
        e.signed = false;
        Ok(e)
    }

    pub fn is_signed(&self) -> bool {
        self.signed
    }

    fn bump(&self, buckets: &mut [f64], token: &str) {
        let hash = fnv1a(token.as_bytes());
        let bucket = (hash % self.dimension as u64) as usize;
        let sign = if self.signed && (hash >> 63) & 1 == 1 { -1.0 } else { 1.0 };
        buckets[bucket] += sign;
    }
}

/// Lowercased runs of alphanumerics and '.', stripped of edge dots.
fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        let c = c.to_ascii_lowercase();
        if c.is_alphanumeric() || c == '.' {
            current.push(c);
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
        .into_iter()
        .map(|t| t.trim_matches('.').to_string())
        .filter(|t| !t.is_empty())
        .collect()
}

impl EmbeddingProvider for HashEmbedder {
    fn id(&self) -> String {
        let mode = if self.signed { "signed" } else { "unsigned" };
        format!("hash-{mode}-{}", self.dimension)
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let mut buckets = vec![0.0f64; self.dimension];
        for token in &tokens {
            self.bump(&mut buckets, token);
        }
        for pair in tokens.windows(2) {
            self.bump(&mut buckets, &format!("{} {}", pair[0], pair[1]));
        }
        let raw: Vec<f32> = buckets.iter().map(|v| *v as f32).collect();
        // signed collisions can cancel to an all-zero vector on tiny inputs,
        // which surfaces as ZeroVector
        EmbeddingVector::new(raw)
    }
}
