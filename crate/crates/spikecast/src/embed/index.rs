//! Flat, exact cosine index over per-day embeddings.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{EmbedError, EmbeddingProvider, EmbeddingVector};

/// One document to be embedded into an index.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexDoc {
    pub date: NaiveDate,
    pub is_spike: bool,
    pub text: String,
}

/// One indexed day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub date: NaiveDate,
    pub is_spike: bool,
    pub vector: EmbeddingVector,
}

/// One search result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchHit {
    pub date: NaiveDate,
    pub similarity: f64,
    pub is_spike: bool,
}

/// Exact cosine index: entries sorted by date, one per date.
///
/// Search scans every entry (flat search), so results are exact and
/// reproducible; with at most a few years of days there is nothing to
/// gain from approximate structures.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    provider: String,
    template: String,
    dimension: usize,
    entries: Vec<IndexEntry>,
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    provider: String,
    template: String,
    dimension: usize,
    entries: Vec<IndexEntry>,
}

impl VectorIndex {
    pub fn new(
        provider: impl Into<String>,
        template: impl Into<String>,
        dimension: usize,
    ) -> Result<Self, EmbedError> {
        if dimension == 0 {
            return Err(EmbedError::BadDimension { got: 0, min: 1 });
        }
        Ok(Self {
            provider: provider.into(),
            template: template.into(),
            dimension,
            entries: Vec::new(),
        })
    }

    pub fn from_entries(
        provider: impl Into<String>,
        template: impl Into<String>,
        dimension: usize,
        entries: Vec<IndexEntry>,
    ) -> Result<Self, EmbedError> {
        let mut index = Self::new(provider, template, dimension)?;
        for entry in entries {
            index.insert(entry)?;
        }
        Ok(index)
    }

    pub fn insert(&mut self, entry: IndexEntry) -> Result<(), EmbedError> {
        if entry.vector.dimension() != self.dimension {
            return Err(EmbedError::DimensionMismatch {
                expected: self.dimension,
                got: entry.vector.dimension(),
            });
        }
        match self.entries.binary_search_by_key(&entry.date, |e| e.date) {
            Ok(_) => Err(EmbedError::DuplicateDate { date: entry.date }),
            Err(pos) => {
                self.entries.insert(pos, entry);
                Ok(())
            }
        }
    }

    pub fn provider(&self) -> &str {
        &self.provider
    }

    pub fn template(&self) -> &str {
        &self.template
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in date order.
    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn get(&self, date: NaiveDate) -> Option<&IndexEntry> {
        self.entries
            .binary_search_by_key(&date, |e| e.date)
            .ok()
            .map(|i| &self.entries[i])
    }

    /// Top-`k` entries passing `filter`, by cosine similarity descending;
    /// exact ties resolve to the earlier date. Fewer than `k` matches
    /// return all of them.
    pub fn search(
        &self,
        query: &EmbeddingVector,
        k: usize,
        filter: impl Fn(&IndexEntry) -> bool,
    ) -> Result<Vec<SearchHit>, EmbedError> {
        if self.entries.is_empty() {
            return Err(EmbedError::EmptyIndex);
        }
        if query.dimension() != self.dimension {
            return Err(EmbedError::DimensionMismatch {
                expected: self.dimension,
                got: query.dimension(),
            });
        }
        let mut hits = Vec::new();
        for entry in &self.entries {
            if !filter(entry) {
                continue;
            }
            let similarity = query.cosine(&entry.vector)?;
            hits.push(SearchHit { date: entry.date, similarity, is_spike: entry.is_spike });
        }
        // entries are date-sorted, so a stable sort leaves exact similarity
        // ties in earlier-date-first order
        hits.sort_by(|a, b| b.similarity.total_cmp(&a.similarity));
        hits.truncate(k);
        Ok(hits)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EmbedError> {
        let path = path.as_ref();
        let path_str = path.display().to_string();
        let file = File::create(path)
            .map_err(|source| EmbedError::Io { path: path_str.clone(), source })?;
        let raw = IndexFile {
            provider: self.provider.clone(),
            template: self.template.clone(),
            dimension: self.dimension,
            entries: self.entries.clone(),
        };
        serde_json::to_writer_pretty(BufWriter::new(file), &raw)
            .map_err(|source| EmbedError::Serde { path: path_str, source })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EmbedError> {
        let path = path.as_ref();
        let path_str = path.display().to_string();
        let file = File::open(path)
            .map_err(|source| EmbedError::Io { path: path_str.clone(), source })?;
        let raw: IndexFile = serde_json::from_reader(BufReader::new(file))
            .map_err(|source| EmbedError::Serde { path: path_str, source })?;
        Self::from_entries(raw.provider, raw.template, raw.dimension, raw.entries)
    }
}

/// Embed every doc and build an index, with at most `max_in_flight`
/// provider calls running concurrently. Output is independent of worker
/// scheduling; the first provider error aborts the build.
pub fn build_index<P>(
    docs: &[IndexDoc],
    provider: &P,
    template: &str,
    max_in_flight: usize,
) -> Result<VectorIndex, EmbedError>
where
    P: EmbeddingProvider + Sync,
{
    if docs.is_empty() {
        return Err(EmbedError::EmptyIndex);
    }
    let workers = max_in_flight.max(1).min(docs.len());
    let cursor = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<EmbeddingVector>>> = Mutex::new(vec![None; docs.len()]);
    let failure: Mutex<Option<EmbedError>> = Mutex::new(None);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::SeqCst);
                if i >= docs.len() || failure.lock().unwrap().is_some() {
                    return;
                }
                match provider.embed(&docs[i].text) {
                    Ok(vector) => {
                        results.lock().unwrap()[i] = Some(vector);
                    }
                    Err(e) => {
                        let mut slot = failure.lock().unwrap();
                        if slot.is_none() {
                            *slot = Some(e);
                        }
                        return;
                    }
                }
            });
        }
    });

    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    let vectors = results.into_inner().unwrap();
    let entries: Vec<IndexEntry> = docs
        .iter()
        .zip(vectors)
        .map(|(doc, vector)| IndexEntry {
            date: doc.date,
            is_spike: doc.is_spike,
            vector: vector.expect("no failure recorded, so every slot is filled"),
        })
        .collect();
    VectorIndex::from_entries(provider.id(), template, provider.dimension(), entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::HashEmbedder;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn date(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2023, 6, d).unwrap()
    }

    fn entry(d: u32, spike: bool, raw: Vec<f32>) -> IndexEntry {
        IndexEntry { date: date(d), is_spike: spike, vector: EmbeddingVector::new(raw).unwrap() }
    }

    fn unit_query(raw: Vec<f32>) -> EmbeddingVector {
        EmbeddingVector::new(raw).unwrap()
    }

    #[test]
    fn search_orders_by_similarity_then_date() {
        let index = VectorIndex::from_entries(
            "test",
            "v1",
            2,
            vec![
                entry(3, false, vec![1.0, 0.0]),
                entry(1, false, vec![0.0, 1.0]),
                entry(2, true, vec![1.0, 1.0]),
                entry(4, true, vec![1.0, 0.0]), // exact tie with day 3
            ],
        )
        .unwrap();
        let hits = index.search(&unit_query(vec![1.0, 0.0]), 3, |_| true).unwrap();
        let dates: Vec<NaiveDate> = hits.iter().map(|h| h.date).collect();
        assert_eq!(dates, vec![date(3), date(4), date(2)]);
        assert_eq!(hits[0].similarity, hits[1].similarity);
        assert!(hits[1].similarity > hits[2].similarity);
        assert!(hits[2].is_spike);
    }

    #[test]
    fn filter_and_k_limit_results() {
        let index = VectorIndex::from_entries(
            "test",
            "v1",
            2,
            vec![
                entry(1, false, vec![1.0, 0.0]),
                entry(2, true, vec![1.0, 0.1]),
                entry(3, false, vec![1.0, 0.2]),
            ],
        )
        .unwrap();
        let q = unit_query(vec![1.0, 0.0]);
        let only_early = index.search(&q, 10, |e| e.date < date(3)).unwrap();
        assert_eq!(only_early.len(), 2);
        let top_zero = index.search(&q, 0, |_| true).unwrap();
        assert!(top_zero.is_empty());
        let none = index.search(&q, 5, |_| false).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn duplicate_dates_are_rejected() {
        let mut index = VectorIndex::new("test", "v1", 2).unwrap();
        index.insert(entry(1, false, vec![1.0, 0.0])).unwrap();
        let err = index.insert(entry(1, true, vec![0.0, 1.0])).unwrap_err();
        assert!(matches!(err, EmbedError::DuplicateDate { .. }));
    }

    #[test]
    fn dimension_mismatches_are_rejected() {
        let mut index = VectorIndex::new("test", "v1", 2).unwrap();
        let err = index.insert(entry(1, false, vec![1.0, 0.0, 0.0])).unwrap_err();
        assert!(matches!(err, EmbedError::DimensionMismatch { expected: 2, got: 3 }));
        index.insert(entry(1, false, vec![1.0, 0.0])).unwrap();
        let err = index.search(&unit_query(vec![1.0, 0.0, 0.0]), 1, |_| true).unwrap_err();
        assert!(matches!(err, EmbedError::DimensionMismatch { .. }));
    }

    #[test]
    fn empty_index_search_errors() {
        let index = VectorIndex::new("test", "v1", 2).unwrap();
        let err = index.search(&unit_query(vec![1.0, 0.0]), 1, |_| true).unwrap_err();
        assert!(matches!(err, EmbedError::EmptyIndex));
    }

    #[test]
    fn save_load_round_trip_preserves_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut entries = Vec::new();
        for d in 1..=20u32 {
            let raw: Vec<f32> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
            entries.push(entry(d, d % 5 == 0, raw));
        }
        let index = VectorIndex::from_entries("test", "v1", 16, entries).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.json");
        index.save(&path).unwrap();
        let loaded = VectorIndex::load(&path).unwrap();
        assert_eq!(loaded, index);
        let q_raw: Vec<f32> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let q = unit_query(q_raw);
        let before = index.search(&q, 7, |_| true).unwrap();
        let after = loaded.search(&q, 7, |_| true).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn search_matches_brute_force_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.gen_range(1..=24);
            let mut entries = Vec::new();
            for d in 0..n {
                let raw: Vec<f32> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
                entries.push(entry(d + 1, false, raw));
            }
            let index = VectorIndex::from_entries("test", "v1", 16, entries.clone()).unwrap();
            let q = unit_query((0..16).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let k = rng.gen_range(0..=(n as usize + 2));
            let hits = index.search(&q, k, |_| true).unwrap();

            // oracle: sequential f64 dot in date order, stable sort
            let mut expected: Vec<(NaiveDate, f64)> = entries
                .iter()
                .map(|e| {
                    let mut acc = 0.0f64;
                    for (a, b) in q.values().iter().zip(e.vector.values()) {
                        acc += (*a as f64) * (*b as f64);
                    }
                    (e.date, acc)
                })
                .collect();
            expected.sort_by(|a, b| b.1.total_cmp(&a.1));
            expected.truncate(k);
            let got: Vec<(NaiveDate, f64)> =
                hits.iter().map(|h| (h.date, h.similarity)).collect();
            assert_eq!(got, expected);
        }
    }

    #[test]
    fn build_is_independent_of_worker_count() {
        let provider = HashEmbedder::new(32).unwrap();
        let docs: Vec<IndexDoc> = (1..=9u32)
            .map(|d| IndexDoc {
                date: date(d),
                is_spike: d % 4 == 0,
                text: format!("day {d} with demand {} and wind {}", d * 100, 30 - d),
            })
            .collect();
        let serial = build_index(&docs, &provider, "v1", 1).unwrap();
        let parallel = build_index(&docs, &provider, "v1", 4).unwrap();
        assert_eq!(serial, parallel);
        assert_eq!(serial.len(), 9);
        assert_eq!(serial.provider(), "hash-signed-32");
    }

    #[test]
    fn build_propagates_provider_errors() {
        let provider = HashEmbedder::new(32).unwrap();
        let docs = vec![
            IndexDoc { date: date(1), is_spike: false, text: "fine".to_string() },
            IndexDoc { date: date(2), is_spike: false, text: "   ".to_string() },
        ];
        let err = build_index(&docs, &provider, "v1", 2).unwrap_err();
        assert!(matches!(err, EmbedError::EmptyText));
    }

    #[test]
    fn build_rejects_duplicate_dates() {
        let provider = HashEmbedder::new(32).unwrap();
        let docs = vec![
            IndexDoc { date: date(1), is_spike: false, text: "a b".to_string() },
            IndexDoc { date: date(1), is_spike: true, text: "c d".to_string() },
        ];
        let err = build_index(&docs, &provider, "v1", 1).unwrap_err();
        assert!(matches!(err, EmbedError::DuplicateDate { .. }));
    }
}
