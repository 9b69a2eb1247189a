//! Run configuration: a single TOML file describing data source, windows,
//! feature and labeling options, embedding, retrieval, model, and
//! evaluation settings.
//!
//! Every section except `[data]` and `[windows]` has usable defaults.
//! Relative paths in the file resolve against the directory containing it.

use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dates::DateRange;
use crate::eval::ThresholdSpec;
use crate::features::StdDivisor;
use crate::ingest::CsvSchema;
use crate::textualize;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot parse config {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: Box<toml::de::Error>,
    },

    #[error("invalid config: {message}")]
    Invalid { message: String },

    #[error("referenced file does not exist: {path}")]
    MissingFile { path: String },
}

fn invalid(message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { message: message.into() }
}

/// Synthetic dataset parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_days: usize,
    pub spike_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { seed: 7, n_days: 365, spike_rate: 0.05 }
    }
}

/// One CSV input: where it lives plus its column layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesFileConfig {
    pub path: PathBuf,
    #[serde(flatten)]
    pub schema: CsvSchema,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct AlignConfig {
    /// Interpolate a single missing hour per day instead of dropping the day.
    pub fill_single_gap: bool,
}

/// Where the daily table comes from: generated or loaded from CSV files.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct DataConfig {
    pub synth: Option<SynthConfig>,
    pub series: Vec<SeriesFileConfig>,
    pub align: AlignConfig,
}

/// Train and test windows. Thresholds are fit inside `train`; predictions
/// and the backtest run over `test`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowsConfig {
    pub train: DateRange,
    pub test: DateRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct FeaturesConfig {
    pub std_divisor: StdDivisor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelingConfig {
    /// Quantile of train-window intraday sigmas that sets the spike bar.
    pub quantile_p: f64,
}

impl Default for LabelingConfig {
    fn default() -> Self {
        Self { quantile_p: 0.95 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TextualizeConfig {
    pub template: String,
}

impl Default for TextualizeConfig {
    fn default() -> Self {
        Self { template: textualize::DEFAULT_TEMPLATE.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingProviderKind {
    Hash,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingConfig {
    pub provider: EmbeddingProviderKind,
    pub dimension: usize,
    /// Hash provider only: use signed buckets (dot products may be negative).
    pub signed: bool,
    /// Directory for the on-disk embedding cache; unset disables caching.
    pub cache_dir: Option<PathBuf>,
    /// Remote provider endpoint; required when `provider = "remote"`.
    pub url: Option<String>,
    pub model: Option<String>,
    /// Environment variable holding the API key, read at run time.
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
    pub retries: u32,
    pub backoff_ms: u64,
    /// Concurrent embedding requests while building the index.
    pub max_in_flight: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            provider: EmbeddingProviderKind::Hash,
            dimension: 256,
            signed: true,
            cache_dir: None,
            url: None,
            model: None,
            api_key_env: None,
            timeout_secs: 30,
            retries: 3,
            backoff_ms: 250,
            max_in_flight: 4,
        }
    }
}

impl EmbeddingConfig {
    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }

    pub fn backoff(&self) -> Duration {
        Duration::from_millis(self.backoff_ms)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    /// Examples per prompt.
    pub k: usize,
    /// Relevance-diversity balance; 1.0 is pure similarity.
    pub lambda: f64,
    /// Nearest neighbors considered before diversification.
    pub pool_size: usize,
    /// Optional file overriding the built-in system prompt.
    pub system_prompt_path: Option<PathBuf>,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self { k: 5, lambda: 0.5, pool_size: 20, system_prompt_path: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LlmProviderKind {
    Mock,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    pub provider: LlmProviderKind,
    pub model: String,
    pub temperature: f64,
    pub retries: u32,
    pub timeout_secs: u64,
    pub backoff_ms: u64,
    /// Chat completions endpoint; required when `provider = "remote"`.
    pub url: Option<String>,
    pub api_key_env: Option<String>,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            provider: LlmProviderKind::Mock,
            model: "gpt-4.1".to_string(),
            temperature: 0.0,
            retries: 3,
            timeout_secs: 60,
            backoff_ms: 250,
            url: None,
            api_key_env: None,
        }
    }
}

impl LlmConfig {
    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }

    pub fn backoff(&self) -> Duration {
        Duration::from_millis(self.backoff_ms)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub thresholds: Vec<ThresholdSpec>,
    /// Label for the model column in reports.
    pub model_name: String,
    /// Fit optimized thresholds on test days at or before this date and
    /// evaluate strictly after it; unset fits and evaluates on the full
    /// test window.
    pub calibration_split: Option<NaiveDate>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            thresholds: vec![
                ThresholdSpec::Fixed(0.5),
                ThresholdSpec::RocOptimal,
                ThresholdSpec::PrOptimal,
            ],
            model_name: "llm".to_string(),
            calibration_split: None,
        }
    }
}

/// The whole run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub data: DataConfig,
    pub windows: WindowsConfig,
    #[serde(default)]
    pub features: FeaturesConfig,
    #[serde(default)]
    pub labeling: LabelingConfig,
    #[serde(default)]
    pub textualize: TextualizeConfig,
    #[serde(default)]
    pub embedding: EmbeddingConfig,
    #[serde(default)]
    pub retrieval: RetrievalConfig,
    #[serde(default)]
    pub llm: LlmConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

impl RunConfig {
    /// Defaults for a synthetic run: one generated year, trained on the
    /// first eight months and tested on the rest.
    pub fn synth_defaults() -> Self {
        Self {
            data: DataConfig {
                synth: Some(SynthConfig::default()),
                series: Vec::new(),
                align: AlignConfig::default(),
            },
            windows: WindowsConfig {
                train: "2023-01-01..2023-08-31".parse().expect("valid literal"),
                test: "2023-09-01..2023-12-31".parse().expect("valid literal"),
            },
            features: FeaturesConfig::default(),
            labeling: LabelingConfig::default(),
            textualize: TextualizeConfig::default(),
            embedding: EmbeddingConfig::default(),
            retrieval: RetrievalConfig::default(),
            llm: LlmConfig::default(),
            eval: EvalConfig::default(),
        }
    }

    /// Parse without touching the filesystem beyond the file itself.
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: origin.to_string(),
            source: Box::new(source),
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Read, parse, resolve relative paths against the file's directory,
    /// validate, and check that referenced files exist.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut config = Self::from_toml_str(&text, &path.display().to_string())?;
        if let Some(base) = path.parent() {
            config.resolve_paths(base);
        }
        config.check_files()?;
        Ok(config)
    }

    /// Rebase relative file references onto `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for series in &mut self.data.series {
            rebase(&mut series.path);
        }
        if let Some(p) = &mut self.retrieval.system_prompt_path {
            rebase(p);
        }
        if let Some(p) = &mut self.embedding.cache_dir {
            rebase(p);
        }
    }

    /// Structural and cross-field checks; no filesystem access.
    pub fn validate(&self) -> Result<(), ConfigError> {
        match (&self.data.synth, self.data.series.is_empty()) {
            (Some(_), false) => {
                return Err(invalid("choose one data source: [data.synth] or [[data.series]]"))
            }
            (None, true) => {
                return Err(invalid("no data source: set [data.synth] or add [[data.series]]"))
            }
            _ => {}
        }
        if let Some(synth) = &self.data.synth {
            if synth.n_days < 30 {
                return Err(invalid(format!(
                    "data.synth.n_days = {} is below the 30-day minimum",
                    synth.n_days
                )));
            }
            if !(synth.spike_rate > 0.0 && synth.spike_rate < 0.5) {
                return Err(invalid(format!(
                    "data.synth.spike_rate = {} must be in (0, 0.5)",
                    synth.spike_rate
                )));
            }
        }
        if self.windows.train.end >= self.windows.test.start {
            return Err(invalid(format!(
                "train window {} must end before test window {} starts",
                self.windows.train, self.windows.test
            )));
        }
        if !(self.labeling.quantile_p > 0.0 && self.labeling.quantile_p < 1.0) {
            return Err(invalid(format!(
                "labeling.quantile_p = {} must be in (0, 1)",
                self.labeling.quantile_p
            )));
        }
        if !textualize::is_known_template(&self.textualize.template) {
            return Err(invalid(format!(
                "textualize.template = {:?} is not a built-in template",
                self.textualize.template
            )));
        }
        if self.embedding.dimension < crate::embed::MIN_DIMENSION {
            return Err(invalid(format!(
                "embedding.dimension = {} is below the minimum {}",
                self.embedding.dimension,
                crate::embed::MIN_DIMENSION
            )));
        }
        if self.embedding.provider == EmbeddingProviderKind::Remote {
            if self.embedding.url.is_none() {
                return Err(invalid("embedding.url is required for the remote provider"));
            }
            if self.embedding.model.is_none() {
                return Err(invalid("embedding.model is required for the remote provider"));
            }
        }
        if self.retrieval.k == 0 {
            return Err(invalid("retrieval.k must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.retrieval.lambda) {
            return Err(invalid(format!(
                "retrieval.lambda = {} must be in [0, 1]",
                self.retrieval.lambda
            )));
        }
        if self.retrieval.pool_size < self.retrieval.k {
            return Err(invalid(format!(
                "retrieval.pool_size = {} is smaller than retrieval.k = {}",
                self.retrieval.pool_size, self.retrieval.k
            )));
        }
        if self.llm.provider == LlmProviderKind::Remote && self.llm.url.is_none() {
            return Err(invalid("llm.url is required for the remote provider"));
        }
        if !self.llm.temperature.is_finite() || self.llm.temperature < 0.0 {
            return Err(invalid(format!(
                "llm.temperature = {} must be a non-negative number",
                self.llm.temperature
            )));
        }
        if self.eval.thresholds.is_empty() {
            return Err(invalid("eval.thresholds must list at least one policy"));
        }
        for spec in &self.eval.thresholds {
            if let ThresholdSpec::Fixed(v) = spec {
                if !v.is_finite() {
                    return Err(invalid(format!("eval threshold fixed({v}) is not finite")));
                }
            }
        }
        Ok(())
    }

    /// Verify that every referenced input file exists.
    pub fn check_files(&self) -> Result<(), ConfigError> {
        let mut paths: Vec<&PathBuf> = self.data.series.iter().map(|s| &s.path).collect();
        if let Some(p) = &self.retrieval.system_prompt_path {
            paths.push(p);
        }
        for path in paths {
            if !path.is_file() {
                return Err(ConfigError::MissingFile { path: path.display().to_string() });
            }
        }
        Ok(())
    }
}
