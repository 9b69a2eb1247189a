//! Content-addressed on-disk cache for embeddings.
//!
//! Layout: `<root>/<provider-id>/<template>/<sha256(text)>.vec` holding the
//! normalized components as little-endian f32 bytes, plus a `.json` sidecar
//! with the metadata needed to validate and rebuild the vector. A cache hit
//! never touches the wrapped provider, so re-runs cost no remote calls.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EmbedError, EmbeddingProvider, EmbeddingVector};

#[derive(Debug, Clone)]
pub struct EmbeddingCache {
    root: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    provider: String,
    template: String,
    text_sha256: String,
    dimension: usize,
    norm: f64,
}

impl EmbeddingCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn entry_path(&self, provider: &str, template: &str, text: &str) -> PathBuf {
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        let digest = hex::encode(hasher.finalize());
        self.root.join(provider).join(template).join(digest)
    }

    /// Fetch a cached vector; `None` on miss. A corrupt or mismatched entry
    /// also reads as a miss so it gets recomputed and overwritten.
    pub fn get(
        &self,
        provider: &str,
        template: &str,
        text: &str,
        dimension: usize,
    ) -> Option<EmbeddingVector> {
        let base = self.entry_path(provider, template, text);
        let sidecar_raw = fs::read_to_string(base.with_extension("json")).ok()?;
        let sidecar: Sidecar = serde_json::from_str(&sidecar_raw).ok()?;
        if sidecar.dimension != dimension || sidecar.provider != provider {
            return None;
        }
        let bytes = fs::read(base.with_extension("vec")).ok()?;
        if bytes.len() != dimension * 4 {
            return None;
        }
        let values: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        EmbeddingVector::from_parts(values, sidecar.norm).ok()
    }

    pub fn put(
        &self,
        provider: &str,
        template: &str,
        text: &str,
        vector: &EmbeddingVector,
    ) -> Result<(), EmbedError> {
        let base = self.entry_path(provider, template, text);
        let dir = base.parent().expect("entry path has a parent");
        let io_err = |path: &Path| {
            let path = path.display().to_string();
            move |source: std::io::Error| EmbedError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io_err(dir))?;

        let mut bytes = Vec::with_capacity(vector.dimension() * 4);
        for v in vector.values() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let vec_path = base.with_extension("vec");
        fs::write(&vec_path, bytes).map_err(io_err(&vec_path))?;

        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        let sidecar = Sidecar {
            provider: provider.to_string(),
            template: template.to_string(),
            text_sha256: hex::encode(hasher.finalize()),
            dimension: vector.dimension(),
            norm: vector.norm(),
        };
        let json_path = base.with_extension("json");
        let body = serde_json::to_string_pretty(&sidecar).map_err(|source| EmbedError::Serde {
            path: json_path.display().to_string(),
            source,
        })?;
        fs::write(&json_path, body).map_err(io_err(&json_path))?;
        Ok(())
    }
}

/// Provider wrapper that consults the cache before delegating.
pub struct CachedProvider<P> {
    inner: P,
    cache: EmbeddingCache,
    template: String,
}

impl<P: EmbeddingProvider> CachedProvider<P> {
    pub fn new(inner: P, cache: EmbeddingCache, template: impl Into<String>) -> Self {
        Self { inner, cache, template: template.into() }
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for CachedProvider<P> {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let id = self.inner.id();
        if let Some(hit) = self.cache.get(&id, &self.template, text, self.inner.dimension()) {
            return Ok(hit);
        }
        let vector = self.inner.embed(text)?;
        self.cache.put(&id, &self.template, text, &vector)?;
        Ok(vector)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::HashEmbedder;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct CountingProvider {
        inner: HashEmbedder,
        calls: AtomicUsize,
    }

    impl EmbeddingProvider for &CountingProvider {
        fn id(&self) -> String {
            self.inner.id()
        }

        fn dimension(&self) -> usize {
            self.inner.dimension()
        }

        fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.inner.embed(text)
        }
    }

    #[test]
    fn second_embed_is_a_cache_hit() {
        let dir = tempfile::tempdir().unwrap();
        let counting =
            CountingProvider { inner: HashEmbedder::new(32).unwrap(), calls: AtomicUsize::new(0) };
        let cached =
            CachedProvider::new(&counting, EmbeddingCache::new(dir.path()), "v1");
        let a = cached.embed("breezy march evening").unwrap();
        let b = cached.embed("breezy march evening").unwrap();
        assert_eq!(a, b);
        assert_eq!(counting.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn cache_round_trip_preserves_bits() {
        let dir = tempfile::tempdir().unwrap();
        let cache = EmbeddingCache::new(dir.path());
        let e = HashEmbedder::new(64).unwrap();
        let v = e.embed("tight reserves and a cold snap").unwrap();
        cache.put(&e.id(), "v1", "tight reserves and a cold snap", &v).unwrap();
        let restored = cache.get(&e.id(), "v1", "tight reserves and a cold snap", 64).unwrap();
        assert_eq!(v, restored);
    }

    #[test]
    fn corrupt_entry_reads_as_miss() {
        let dir = tempfile::tempdir().unwrap();
        let cache = EmbeddingCache::new(dir.path());
        let e = HashEmbedder::new(32).unwrap();
        let v = e.embed("calm day").unwrap();
        cache.put(&e.id(), "v1", "calm day", &v).unwrap();
        // truncate the vector file
        let base = cache.entry_path(&e.id(), "v1", "calm day");
        std::fs::write(base.with_extension("vec"), b"short").unwrap();
        assert!(cache.get(&e.id(), "v1", "calm day", 32).is_none());
    }

    #[test]
    fn different_templates_do_not_collide() {
        let dir = tempfile::tempdir().unwrap();
        let cache = EmbeddingCache::new(dir.path());
        let e = HashEmbedder::new(32).unwrap();
        let v = e.embed("some text").unwrap();
        cache.put(&e.id(), "v1", "some text", &v).unwrap();
        assert!(cache.get(&e.id(), "v2", "some text", 32).is_none());
    }
}
