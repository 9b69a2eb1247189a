//! End-to-end orchestration: data to features to index to predictions to
//! backtest, with every artifact written under one run directory.
//!
//! Layout of a run directory:
//!
//! ```text
//! out/
//!   manifest.json      config snapshot, input hashes, crate version
//!   exclusions.json    days dropped during alignment
//!   features.csv       feature vector and label per eligible day
//!   labels.csv         intraday sigmas and spike flags per day
//!   index.json         embedding index over all labeled days
//!   prompts/DATE.txt   full prompt sent for each predicted day
//!   predictions.jsonl  one prediction per line, date-sorted
//!   audit.jsonl        append-only trail with raw responses
//!   report.json        backtest result
//!   table.txt          human-readable backtest table
//!   scores.csv         date, score, truth
//!   roc.csv, pr.csv    curve points
//! ```
//!
//! Prediction is resumable: days already present in `predictions.jsonl`
//! are skipped unless `force` is set. Everything except `audit.jsonl` is
//! byte-deterministic for a given config and seed.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{EmbeddingProviderKind, LlmProviderKind, RunConfig};
use crate::dates::DateRange;
use crate::embed::{
    build_index, CachedProvider, EmbedError, EmbeddingCache, EmbeddingProvider, HashEmbedder,
    IndexDoc, RemoteEmbedder, VectorIndex,
};
use crate::eval::{self, EvalError, EvalReport, ScoredPoint, ScoredSeries};
use crate::features::{
    label_spikes, spike_thresholds, write_features_csv, write_labels_csv, day_labels,
    FeatureError, FeatureOptions, LabeledDay, SpikeThresholds,
};
use crate::ingest::{
    align_daily, load_series_csv, synth_dataset, AlignOptions, DailyTable, ExclusionReport,
    IngestError,
};
use crate::llm::{
    predict_day, AuditLog, AuditRecord, LlmError, MockModel, PredictContext, Prediction,
    RemoteLlm, SpikeModel,
};
use crate::retrieval::RetrievalError;
use crate::textualize::{render_description, TextualizeError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),

    #[error(transparent)]
    Ingest(#[from] IngestError),

    #[error(transparent)]
    Feature(#[from] FeatureError),

    #[error(transparent)]
    Textualize(#[from] TextualizeError),

    #[error(transparent)]
    Embed(#[from] EmbedError),

    #[error(transparent)]
    Retrieval(#[from] RetrievalError),

    #[error(transparent)]
    Llm(#[from] LlmError),

    #[error(transparent)]
    Eval(#[from] EvalError),

    #[error("no labeled days inside the {window} window {range}")]
    EmptyWindow { window: &'static str, range: DateRange },

    #[error("prediction for {date} has no label to evaluate against")]
    MissingLabel { date: NaiveDate },

    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("bad record on line {line} of {path}: {source}")]
    Jsonl {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// Labeled feature rows plus the frozen spike thresholds they came from.
#[derive(Debug, Clone)]
pub struct LabeledData {
    pub days: Vec<LabeledDay>,
    pub thresholds: SpikeThresholds,
}

/// What `predict` did: final date-sorted predictions plus run counters.
#[derive(Debug, Clone)]
pub struct PredictOutcome {
    pub predictions: Vec<Prediction>,
    pub predicted: usize,
    pub skipped: usize,
}

/// Result of a full run, for display.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub labeled_days: usize,
    pub predicted: usize,
    pub skipped: usize,
    pub report: EvalReport,
}

#[derive(Serialize)]
struct Manifest<'a> {
    crate_version: &'static str,
    config: &'a RunConfig,
    /// sha256 of each input file's bytes, keyed by path.
    inputs: BTreeMap<String, String>,
}

/// Orchestrates one configured run against one output directory.
pub struct Pipeline {
    config: RunConfig,
    out_dir: PathBuf,
    force: bool,
}

impl Pipeline {
    pub fn new(config: RunConfig, out_dir: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        config.validate()?;
        let out_dir = out_dir.into();
        std::fs::create_dir_all(&out_dir).map_err(io_at(&out_dir))?;
        Ok(Self { config, out_dir, force: false })
    }

    /// Recompute days already present in `predictions.jsonl`.
    pub fn with_force(mut self, force: bool) -> Self {
        self.force = force;
        self
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Snapshot the config, input hashes, and crate version. Contains no
    /// timestamps, so reruns of the same setup produce identical bytes.
    pub fn write_manifest(&self) -> Result<(), PipelineError> {
        let mut inputs = BTreeMap::new();
        let mut paths: Vec<&PathBuf> = self.config.data.series.iter().map(|s| &s.path).collect();
        if let Some(p) = &self.config.retrieval.system_prompt_path {
            paths.push(p);
        }
        for path in paths {
            let bytes = std::fs::read(path).map_err(io_at(path))?;
            inputs.insert(path.display().to_string(), hex::encode(Sha256::digest(&bytes)));
        }
        let manifest = Manifest {
            crate_version: env!("CARGO_PKG_VERSION"),
            config: &self.config,
            inputs,
        };
        let path = self.path("manifest.json");
        let file = File::create(&path).map_err(io_at(&path))?;
        serde_json::to_writer_pretty(file, &manifest)
            .map_err(|source| PipelineError::Jsonl { path: display(&path), line: 0, source })
    }

    /// Produce the aligned daily table from the configured source and
    /// record any excluded days.
    pub fn load_table(&self) -> Result<DailyTable, PipelineError> {
        let (table, exclusions) = if let Some(synth) = &self.config.data.synth {
            let table = synth_dataset(synth.seed, synth.n_days, synth.spike_rate)?;
            (table, ExclusionReport::default())
        } else {
            let mut series = Vec::with_capacity(self.config.data.series.len());
            for spec in &self.config.data.series {
                series.push(load_series_csv(&spec.path, &spec.schema)?);
            }
            let options = AlignOptions {
                fill_single_gap: self.config.data.align.fill_single_gap,
            };
            align_daily(&series, options)?
        };
        let path = self.path("exclusions.json");
        let file = File::create(&path).map_err(io_at(&path))?;
        serde_json::to_writer_pretty(file, &exclusions)
            .map_err(|source| PipelineError::Jsonl { path: display(&path), line: 0, source })?;
        if !exclusions.is_empty() {
            log::warn!("excluded {} incomplete days; see exclusions.json", exclusions.excluded.len());
        }
        Ok(table)
    }

    /// Compute features and labels. Spike thresholds are fit on the train
    /// window only and then applied to every day.
    pub fn featurize(&self, table: &DailyTable) -> Result<LabeledData, PipelineError> {
        let opts = FeatureOptions { std_divisor: self.config.features.std_divisor };
        let thresholds = spike_thresholds(
            table,
            Some(self.config.windows.train),
            self.config.labeling.quantile_p,
            &opts,
        )?;
        let days = label_spikes(table, &thresholds, &opts)?;
        if days.is_empty() {
            return Err(PipelineError::EmptyWindow {
                window: "data",
                range: self.config.windows.train,
            });
        }
        write_features_csv(self.path("features.csv"), &days)?;
        let labels = day_labels(table, &thresholds, &opts)?;
        write_labels_csv(self.path("labels.csv"), &labels)?;
        Ok(LabeledData { days, thresholds })
    }

    /// Label every day without computing feature rows: intraday sigmas and
    /// spike flags, with thresholds fit on the train window.
    pub fn label(&self, table: &DailyTable) -> Result<Vec<crate::features::DayLabel>, PipelineError> {
        let opts = FeatureOptions { std_divisor: self.config.features.std_divisor };
        let thresholds = spike_thresholds(
            table,
            Some(self.config.windows.train),
            self.config.labeling.quantile_p,
            &opts,
        )?;
        let labels = day_labels(table, &thresholds, &opts)?;
        write_labels_csv(self.path("labels.csv"), &labels)?;
        Ok(labels)
    }

    /// Construct the configured embedding provider.
    pub fn build_provider(
        &self,
    ) -> Result<Box<dyn EmbeddingProvider + Send + Sync>, PipelineError> {
        let e = &self.config.embedding;
        let base: Box<dyn EmbeddingProvider + Send + Sync> = match e.provider {
            EmbeddingProviderKind::Hash => {
                let embedder = if e.signed {
                    HashEmbedder::new(e.dimension)?
                } else {
                    HashEmbedder::unsigned(e.dimension)?
                };
                Box::new(embedder)
            }
            EmbeddingProviderKind::Remote => {
                let url = e.url.as_deref().expect("validated");
                let model = e.model.as_deref().expect("validated");
                let mut remote = RemoteEmbedder::new(url, model, e.dimension, e.timeout())?
                    .with_retries(e.retries)
                    .with_backoff(e.backoff());
                if let Some(key) = read_api_key(e.api_key_env.as_deref()) {
                    remote = remote.with_api_key(key);
                }
                Box::new(remote)
            }
        };
        Ok(match &e.cache_dir {
            Some(dir) => Box::new(CachedProvider::new(
                base,
                EmbeddingCache::new(dir.clone()),
                self.config.textualize.template.clone(),
            )),
            None => base,
        })
    }

    /// Construct the configured model client.
    pub fn build_model(&self) -> Result<Box<dyn SpikeModel>, PipelineError> {
        let l = &self.config.llm;
        Ok(match l.provider {
            LlmProviderKind::Mock => Box::new(MockModel),
            LlmProviderKind::Remote => {
                let url = l.url.as_deref().expect("validated");
                let mut remote = RemoteLlm::new(url, &l.model, l.timeout())?
                    .with_temperature(l.temperature)
                    .with_retries(l.retries)
                    .with_backoff(l.backoff());
                if let Some(key) = read_api_key(l.api_key_env.as_deref()) {
                    remote = remote.with_api_key(key);
                }
                Box::new(remote)
            }
        })
    }

    /// Describe and embed every labeled day into a searchable index.
    /// Causality is enforced at query time, so indexing all days is safe.
    pub fn build_index(&self, data: &LabeledData) -> Result<VectorIndex, PipelineError> {
        let template = &self.config.textualize.template;
        let mut docs = Vec::with_capacity(data.days.len());
        for day in &data.days {
            docs.push(IndexDoc {
                date: day.date(),
                is_spike: day.is_spike,
                text: render_description(&day.features, template)?,
            });
        }
        let provider = self.build_provider()?;
        let index = build_index(&docs, &provider, template, self.config.embedding.max_in_flight)?;
        index.save(self.path("index.json"))?;
        Ok(index)
    }

    /// Predict every test-window day, skipping ones already on disk unless
    /// forced. Appends as it goes (a crash loses nothing), then rewrites
    /// `predictions.jsonl` date-sorted.
    pub fn predict(
        &self,
        index: &VectorIndex,
        data: &LabeledData,
    ) -> Result<PredictOutcome, PipelineError> {
        let test = self.config.windows.test;
        let queries: Vec<&LabeledDay> =
            data.days.iter().filter(|d| test.contains(d.date())).collect();
        if queries.is_empty() {
            return Err(PipelineError::EmptyWindow { window: "test", range: test });
        }

        let pred_path = self.path("predictions.jsonl");
        let mut done: BTreeMap<NaiveDate, Prediction> = if self.force || !pred_path.exists() {
            BTreeMap::new()
        } else {
            read_predictions(&pred_path)?.into_iter().map(|p| (p.date, p)).collect()
        };

        let system_prompt = match &self.config.retrieval.system_prompt_path {
            Some(path) => Some(std::fs::read_to_string(path).map_err(io_at(path))?),
            None => None,
        };
        let days_by_date: BTreeMap<NaiveDate, LabeledDay> =
            data.days.iter().map(|d| (d.date(), d.clone())).collect();
        let provider = self.build_provider()?;
        let model = self.build_model()?;
        let ctx = PredictContext {
            index,
            days: &days_by_date,
            embedder: &provider,
            template: &self.config.textualize.template,
            system_prompt: system_prompt.as_deref(),
            k: self.config.retrieval.k,
            lambda: self.config.retrieval.lambda,
            pool_size: self.config.retrieval.pool_size,
        };

        let prompts_dir = self.path("prompts");
        std::fs::create_dir_all(&prompts_dir).map_err(io_at(&prompts_dir))?;
        let audit = AuditLog::open(self.path("audit.jsonl"))?;
        let mut appender = jsonl_appender(&pred_path, self.force)?;

        let mut predicted = 0usize;
        let mut skipped = 0usize;
        for day in queries {
            let date = day.date();
            if done.contains_key(&date) {
                skipped += 1;
                continue;
            }
            let detail = predict_day(&ctx, &*model, &day.features)?;
            let prompt_path = prompts_dir.join(format!("{date}.txt"));
            std::fs::write(&prompt_path, detail.prompt.render()).map_err(io_at(&prompt_path))?;
            audit.append(&AuditRecord::from_detail(&detail))?;
            append_json_line(&mut appender, &pred_path, &detail.prediction)?;
            done.insert(date, detail.prediction);
            predicted += 1;
        }
        drop(appender);

        let predictions: Vec<Prediction> = done.into_values().collect();
        write_predictions(&pred_path, &predictions)?;
        Ok(PredictOutcome { predictions, predicted, skipped })
    }

    /// Score predictions against the labels and write every report
    /// artifact. Curves are skipped (with a warning) when the evaluated
    /// window has only one class.
    pub fn backtest(
        &self,
        predictions: &[Prediction],
        data: &LabeledData,
    ) -> Result<EvalReport, PipelineError> {
        let truth: BTreeMap<NaiveDate, bool> =
            data.days.iter().map(|d| (d.date(), d.is_spike)).collect();
        let mut points = Vec::with_capacity(predictions.len());
        for p in predictions {
            let is_spike =
                *truth.get(&p.date).ok_or(PipelineError::MissingLabel { date: p.date })?;
            points.push(ScoredPoint { date: p.date, score: p.spike_score, is_spike });
        }
        let series = ScoredSeries::new(points)?;
        let report = eval::backtest(
            &series,
            &self.config.eval.thresholds,
            self.config.eval.calibration_split,
            &self.config.eval.model_name,
        )?;
        eval::write_report_json(self.path("report.json"), &report)?;
        eval::write_table_txt(self.path("table.txt"), &report)?;
        eval::write_scores_csv(self.path("scores.csv"), &series)?;
        match eval::roc_curve(&series) {
            Ok(curve) => eval::write_roc_csv(self.path("roc.csv"), &curve)?,
            Err(EvalError::DegenerateLabels { .. }) => {
                log::warn!("single-class evaluation window; skipping roc.csv and pr.csv");
                return Ok(report);
            }
            Err(e) => return Err(e.into()),
        }
        eval::write_pr_csv(self.path("pr.csv"), &eval::pr_curve(&series)?)?;
        Ok(report)
    }

    /// Run every stage in order.
    pub fn run_all(&self) -> Result<RunSummary, PipelineError> {
        self.write_manifest()?;
        let table = self.load_table()?;
        let data = self.featurize(&table)?;
        let index = self.build_index(&data)?;
        let outcome = self.predict(&index, &data)?;
        let report = self.backtest(&outcome.predictions, &data)?;
        Ok(RunSummary {
            out_dir: self.out_dir.clone(),
            labeled_days: data.days.len(),
            predicted: outcome.predicted,
            skipped: outcome.skipped,
            report,
        })
    }
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn io_at(path: &Path) -> impl Fn(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: display(path), source }
}

fn read_api_key(env_name: Option<&str>) -> Option<String> {
    let name = env_name?;
    match std::env::var(name) {
        Ok(key) if !key.is_empty() => Some(key),
        _ => {
            log::warn!("api key variable {name} is unset; sending unauthenticated requests");
            None
        }
    }
}

/// Read a predictions file, one JSON object per line.
pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<Prediction>, PipelineError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_at(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_at(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let p: Prediction = serde_json::from_str(&line).map_err(|source| {
            PipelineError::Jsonl { path: display(path), line: i + 1, source }
        })?;
        out.push(p);
    }
    Ok(out)
}

fn write_predictions(path: &Path, predictions: &[Prediction]) -> Result<(), PipelineError> {
    let file = File::create(path).map_err(io_at(path))?;
    let mut w = std::io::BufWriter::new(file);
    for p in predictions {
        let line = serde_json::to_string(p)
            .map_err(|source| PipelineError::Jsonl { path: display(path), line: 0, source })?;
        writeln!(w, "{line}").map_err(io_at(path))?;
    }
    w.flush().map_err(io_at(path))
}

fn jsonl_appender(path: &Path, truncate: bool) -> Result<File, PipelineError> {
    let mut options = std::fs::OpenOptions::new();
    options.create(true);
    if truncate {
        options.write(true).truncate(true);
    } else {
        options.append(true);
    }
    options.open(path).map_err(io_at(path))
}

fn append_json_line(
    file: &mut File,
    path: &Path,
    prediction: &Prediction,
) -> Result<(), PipelineError> {
    let line = serde_json::to_string(prediction)
        .map_err(|source| PipelineError::Jsonl { path: display(path), line: 0, source })?;
    writeln!(file, "{line}").map_err(io_at(path))?;
    file.flush().map_err(io_at(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SynthConfig;

    fn test_config() -> RunConfig {
        let mut config = RunConfig::synth_defaults();
        config.data.synth = Some(SynthConfig { seed: 11, n_days: 120, spike_rate: 0.08 });
        config.windows.train = "2023-01-01..2023-03-31".parse().unwrap();
        config.windows.test = "2023-04-01..2023-04-30".parse().unwrap();
        config.embedding.dimension = 64;
        config.retrieval.k = 3;
        config.retrieval.pool_size = 8;
        config
    }

    #[test]
    fn run_all_produces_every_artifact() {
        let dir = tempfile::tempdir().unwrap();
        let pipeline = Pipeline::new(test_config(), dir.path().join("out")).unwrap();
        let summary = pipeline.run_all().unwrap();
        assert_eq!(summary.predicted, 30);
        assert_eq!(summary.skipped, 0);
        assert_eq!(summary.report.days, 30);
        for name in [
            "manifest.json",
            "exclusions.json",
            "features.csv",
            "labels.csv",
            "index.json",
            "predictions.jsonl",
            "audit.jsonl",
            "report.json",
            "table.txt",
            "scores.csv",
        ] {
            assert!(pipeline.path(name).is_file(), "{name} missing");
        }
        let predictions = read_predictions(pipeline.path("predictions.jsonl")).unwrap();
        assert_eq!(predictions.len(), 30);
        assert!(predictions.windows(2).all(|w| w[0].date < w[1].date));
        assert!(pipeline.path("prompts").join("2023-04-01.txt").is_file());
    }

    #[test]
    fn manifest_has_no_timestamp_and_stable_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let pipeline = Pipeline::new(test_config(), dir.path().join("out")).unwrap();
        pipeline.write_manifest().unwrap();
        let first = std::fs::read(pipeline.path("manifest.json")).unwrap();
        pipeline.write_manifest().unwrap();
        assert_eq!(first, std::fs::read(pipeline.path("manifest.json")).unwrap());
        let text = String::from_utf8(first).unwrap();
        assert!(text.contains("crate_version"));
        assert!(!text.to_lowercase().contains("timestamp"));
    }

    #[test]
    fn rerun_skips_existing_predictions_and_force_redoes_them() {
        let dir = tempfile::tempdir().unwrap();
        let pipeline = Pipeline::new(test_config(), dir.path().join("out")).unwrap();
        let table = pipeline.load_table().unwrap();
        let data = pipeline.featurize(&table).unwrap();
        let index = pipeline.build_index(&data).unwrap();

        let first = pipeline.predict(&index, &data).unwrap();
        assert_eq!(first.predicted, 30);
        let again = pipeline.predict(&index, &data).unwrap();
        assert_eq!(again.predicted, 0);
        assert_eq!(again.skipped, 30);
        assert_eq!(again.predictions, first.predictions);

        let forced = Pipeline::new(test_config(), dir.path().join("out"))
            .unwrap()
            .with_force(true);
        let redo = forced.predict(&index, &data).unwrap();
        assert_eq!(redo.predicted, 30);
        assert_eq!(redo.predictions, first.predictions);
    }

    #[test]
    fn resume_completes_a_partial_run_identically() {
        let dir = tempfile::tempdir().unwrap();
        let full_dir = dir.path().join("full");
        let partial_dir = dir.path().join("partial");

        let full = Pipeline::new(test_config(), &full_dir).unwrap();
        let table = full.load_table().unwrap();
        let data = full.featurize(&table).unwrap();
        let index = full.build_index(&data).unwrap();
        let complete = full.predict(&index, &data).unwrap();

        // seed the partial run with the first 10 lines, as if it crashed
        std::fs::create_dir_all(&partial_dir).unwrap();
        let all_lines = std::fs::read_to_string(full.path("predictions.jsonl")).unwrap();
        let head: String =
            all_lines.lines().take(10).map(|l| format!("{l}\n")).collect();
        std::fs::write(partial_dir.join("predictions.jsonl"), head).unwrap();

        let partial = Pipeline::new(test_config(), &partial_dir).unwrap();
        let resumed = partial.predict(&index, &data).unwrap();
        assert_eq!(resumed.skipped, 10);
        assert_eq!(resumed.predicted, 20);
        assert_eq!(resumed.predictions, complete.predictions);
        assert_eq!(
            std::fs::read(partial.path("predictions.jsonl")).unwrap(),
            std::fs::read(full.path("predictions.jsonl")).unwrap()
        );
    }

    #[test]
    fn two_fresh_runs_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let run = |name: &str| {
            let pipeline = Pipeline::new(test_config(), dir.path().join(name)).unwrap();
            pipeline.run_all().unwrap();
            (
                std::fs::read(pipeline.path("predictions.jsonl")).unwrap(),
                std::fs::read(pipeline.path("report.json")).unwrap(),
            )
        };
        let (pred_a, report_a) = run("a");
        let (pred_b, report_b) = run("b");
        assert_eq!(pred_a, pred_b);
        assert_eq!(report_a, report_b);
    }

    #[test]
    fn thresholds_freeze_on_the_train_window() {
        let dir = tempfile::tempdir().unwrap();
        let pipeline = Pipeline::new(test_config(), dir.path().join("out")).unwrap();
        let table = pipeline.load_table().unwrap();
        let data = pipeline.featurize(&table).unwrap();

        // the fit must ignore test-window sigmas entirely
        let opts = FeatureOptions::default();
        let train_only = spike_thresholds(
            &table,
            Some("2023-01-01..2023-03-31".parse().unwrap()),
            0.95,
            &opts,
        )
        .unwrap();
        assert_eq!(data.thresholds, train_only);
    }
}
