//! Backtest evaluation: confusion counts, threshold selection, curves,
//! and report writers.
//!
//! A day is classified positive when `score >= threshold`. Metric
//! conventions for degenerate counts: precision is 0 when tp + fp = 0,
//! recall is 0 when tp + fn = 0, and F1 is 0 when precision + recall = 0.
//! Metrics are stored as fractions; the text table prints percentages.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("scored series is empty")]
    EmptySeries,

    #[error("duplicate date {date} in scored series")]
    DuplicateDate { date: NaiveDate },

    #[error("score {score} on {date} is outside [0, 1]")]
    OutOfRangeScore { date: NaiveDate, score: f64 },

    #[error("threshold {threshold} is not a finite number")]
    InvalidThreshold { threshold: f64 },

    #[error("labels are degenerate: {positives} positives, {negatives} negatives")]
    DegenerateLabels { positives: usize, negatives: usize },

    #[error("calibration window contains no days")]
    EmptyCalibration,

    #[error("evaluation window contains no days")]
    EmptyEvaluation,

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

/// One day: the model's spike score and the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredPoint {
    pub date: NaiveDate,
    pub score: f64,
    pub is_spike: bool,
}

/// Validated backtest input: dates sorted and unique, scores in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSeries {
    points: Vec<ScoredPoint>,
}

impl ScoredSeries {
    pub fn new(mut points: Vec<ScoredPoint>) -> Result<Self, EvalError> {
        if points.is_empty() {
            return Err(EvalError::EmptySeries);
        }
        for p in &points {
            if !p.score.is_finite() || !(0.0..=1.0).contains(&p.score) {
                return Err(EvalError::OutOfRangeScore { date: p.date, score: p.score });
            }
        }
        points.sort_by_key(|p| p.date);
        for w in points.windows(2) {
            if w[0].date == w[1].date {
                return Err(EvalError::DuplicateDate { date: w[0].date });
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[ScoredPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.points.iter().filter(|p| p.is_spike).count()
    }

    pub fn negatives(&self) -> usize {
        self.len() - self.positives()
    }

    /// Sub-series with dates satisfying `keep`; errors when empty.
    fn filtered(&self, keep: impl Fn(NaiveDate) -> bool) -> Option<ScoredSeries> {
        let points: Vec<ScoredPoint> =
            self.points.iter().copied().filter(|p| keep(p.date)).collect();
        if points.is_empty() {
            None
        } else {
            Some(ScoredSeries { points })
        }
    }

    fn require_both_classes(&self) -> Result<(), EvalError> {
        let positives = self.positives();
        let negatives = self.negatives();
        if positives == 0 || negatives == 0 {
            return Err(EvalError::DegenerateLabels { positives, negatives });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Fractions in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub f1: f64,
}

/// Count outcomes of the rule `score >= threshold`. Any finite threshold
/// is valid, including values above every score (classifies nothing
/// positive) or below (classifies everything positive).
pub fn confusion(series: &ScoredSeries, threshold: f64) -> Result<ConfusionMatrix, EvalError> {
    if !threshold.is_finite() {
        return Err(EvalError::InvalidThreshold { threshold });
    }
    let mut cm = ConfusionMatrix { tp: 0, fp: 0, fn_: 0, tn: 0 };
    for p in series.points() {
        let predicted = p.score >= threshold;
        match (predicted, p.is_spike) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, true) => cm.fn_ += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

pub fn metrics(cm: &ConfusionMatrix) -> MetricSet {
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let accuracy = ratio(cm.tp + cm.tn, cm.total());
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    MetricSet { precision, recall, accuracy, f1 }
}

/// Thresholds worth scanning, descending: a sentinel above every score
/// (classifies nothing positive), each distinct score, and 0.0
/// (classifies everything positive), deduplicated.
pub fn candidate_thresholds(series: &ScoredSeries) -> Vec<f64> {
    let mut scores: Vec<f64> = series.points().iter().map(|p| p.score).collect();
    scores.sort_by(|a, b| b.total_cmp(a));
    scores.dedup();
    let mut out = Vec::with_capacity(scores.len() + 2);
    out.push(scores[0] + 1.0);
    out.extend(scores);
    if *out.last().unwrap() != 0.0 {
        out.push(0.0);
    }
    out
}

/// One curve point, tagged with the threshold that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

/// ROC points over the candidate thresholds, descending, starting at
/// (0, 0) and ending at (1, 1). Runs of identical (fpr, tpr) collapse to
/// their first (highest-threshold) point. Requires both classes.
pub fn roc_curve(series: &ScoredSeries) -> Result<Vec<RocPoint>, EvalError> {
    series.require_both_classes()?;
    let positives = series.positives() as f64;
    let negatives = series.negatives() as f64;
    let mut out: Vec<RocPoint> = Vec::new();
    for threshold in candidate_thresholds(series) {
        let cm = confusion(series, threshold)?;
        let point = RocPoint {
            threshold,
            fpr: cm.fp as f64 / negatives,
            tpr: cm.tp as f64 / positives,
        };
        if let Some(last) = out.last() {
            if last.fpr == point.fpr && last.tpr == point.tpr {
                continue;
            }
        }
        out.push(point);
    }
    Ok(out)
}

/// Precision-recall points over the candidate thresholds, descending.
/// The sentinel threshold yields (0, 0) under the zero-prediction
/// precision convention. Duplicate (recall, precision) runs collapse to
/// their first point. Requires both classes.
pub fn pr_curve(series: &ScoredSeries) -> Result<Vec<PrPoint>, EvalError> {
    series.require_both_classes()?;
    let mut out: Vec<PrPoint> = Vec::new();
    for threshold in candidate_thresholds(series) {
        let cm = confusion(series, threshold)?;
        let m = metrics(&cm);
        let point = PrPoint { threshold, recall: m.recall, precision: m.precision };
        if let Some(last) = out.last() {
            if last.recall == point.recall && last.precision == point.precision {
                continue;
            }
        }
        out.push(point);
    }
    Ok(out)
}

/// Scan candidates for the best value of `objective`; exact ties keep the
/// higher threshold (candidates are scanned descending).
fn best_threshold(
    series: &ScoredSeries,
    objective: impl Fn(&ConfusionMatrix) -> f64,
) -> Result<f64, EvalError> {
    series.require_both_classes()?;
    let mut best: Option<(f64, f64)> = None;
    for threshold in candidate_thresholds(series) {
        let cm = confusion(series, threshold)?;
        let value = objective(&cm);
        match best {
            Some((_, best_value)) if value <= best_value => {}
            _ => best = Some((threshold, value)),
        }
    }
    Ok(best.expect("candidate list is never empty").0)
}

/// Threshold maximizing Youden's J (tpr - fpr).
pub fn roc_optimal(series: &ScoredSeries) -> Result<f64, EvalError> {
    let positives = series.positives() as f64;
    let negatives = series.negatives() as f64;
    best_threshold(series, |cm| cm.tp as f64 / positives - cm.fp as f64 / negatives)
}

/// Threshold maximizing F1.
pub fn pr_optimal(series: &ScoredSeries) -> Result<f64, EvalError> {
    best_threshold(series, |cm| metrics(cm).f1)
}

/// Area under the ROC curve by trapezoid rule.
pub fn auc_roc(series: &ScoredSeries) -> Result<f64, EvalError> {
    let curve = roc_curve(series)?;
    let mut auc = 0.0;
    for w in curve.windows(2) {
        auc += (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0;
    }
    Ok(auc)
}

/// How the decision threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum ThresholdSpec {
    Fixed(f64),
    RocOptimal,
    PrOptimal,
}

impl ThresholdSpec {
    pub fn label(&self) -> String {
        match self {
            ThresholdSpec::Fixed(v) => format!("fixed({v})"),
            ThresholdSpec::RocOptimal => "roc-optimal".to_string(),
            ThresholdSpec::PrOptimal => "pr-optimal".to_string(),
        }
    }
}

/// One evaluated threshold policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub label: String,
    pub threshold: f64,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricSet,
}

/// Full backtest result. Serializes deterministically (no timestamps).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model_name: String,
    pub days: usize,
    pub spikes: usize,
    /// Optimized thresholds were fit on dates <= this split when set.
    pub calibration_split: Option<NaiveDate>,
    pub auc_roc: Option<f64>,
    pub rows: Vec<EvalRow>,
}

/// Evaluate each threshold policy over `series`.
///
/// Without a split, optimal thresholds are fit on the same series they are
/// evaluated on. With `calibration_split`, optimizers fit on dates at or
/// before the split and every policy is evaluated strictly after it.
pub fn backtest(
    series: &ScoredSeries,
    specs: &[ThresholdSpec],
    calibration_split: Option<NaiveDate>,
    model_name: &str,
) -> Result<EvalReport, EvalError> {
    let (fit, eval) = match calibration_split {
        None => (series.clone(), series.clone()),
        Some(split) => {
            let fit = series.filtered(|d| d <= split).ok_or(EvalError::EmptyCalibration)?;
            let eval = series.filtered(|d| d > split).ok_or(EvalError::EmptyEvaluation)?;
            (fit, eval)
        }
    };

    let mut rows = Vec::with_capacity(specs.len());
    for spec in specs {
        let threshold = match spec {
            ThresholdSpec::Fixed(v) => {
                if !v.is_finite() {
                    return Err(EvalError::InvalidThreshold { threshold: *v });
                }
                *v
            }
            ThresholdSpec::RocOptimal => roc_optimal(&fit)?,
            ThresholdSpec::PrOptimal => pr_optimal(&fit)?,
        };
        let cm = confusion(&eval, threshold)?;
        rows.push(EvalRow { label: spec.label(), threshold, confusion: cm, metrics: metrics(&cm) });
    }

    let auc = auc_roc(&eval).ok();
    Ok(EvalReport {
        model_name: model_name.to_string(),
        days: eval.len(),
        spikes: eval.positives(),
        calibration_split,
        auc_roc: auc,
        rows,
    })
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> EvalError + '_ {
    move |source| EvalError::Io { path: path.display().to_string(), source }
}

pub fn write_report_json(path: impl AsRef<Path>, report: &EvalReport) -> Result<(), EvalError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    serde_json::to_writer_pretty(BufWriter::new(file), report).map_err(|source| {
        EvalError::Serde { path: path.display().to_string(), source }
    })
}

/// Human-readable summary table. Counts are integers; metrics print as
/// percentages with two decimals.
pub fn render_table(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Model: {}", report.model_name);
    let _ = writeln!(out, "Days evaluated: {}  Spike days: {}", report.days, report.spikes);
    if let Some(split) = report.calibration_split {
        let _ = writeln!(out, "Thresholds calibrated on dates <= {split}");
    }
    if let Some(auc) = report.auc_roc {
        let _ = writeln!(out, "ROC AUC: {auc:.4}");
    }
    for row in &report.rows {
        let _ = writeln!(out);
        let heading = match row.label.as_str() {
            "roc-optimal" => "ROC-optimal".to_string(),
            "pr-optimal" => "PR-optimal".to_string(),
            other => {
                if let Some(v) = other.strip_prefix("fixed(").and_then(|s| s.strip_suffix(')')) {
                    format!("Fixed ({v})")
                } else {
                    other.to_string()
                }
            }
        };
        let _ = writeln!(out, "{heading}");
        let _ = writeln!(out, "  Threshold: {:.2}", row.threshold);
        let c = &row.confusion;
        let _ = writeln!(out, "  TP: {}  FP: {}  FN: {}  TN: {}", c.tp, c.fp, c.fn_, c.tn);
        let m = &row.metrics;
        let _ = writeln!(
            out,
            "  Precision: {:.2}  Recall: {:.2}  Accuracy: {:.2}  F1: {:.2}",
            m.precision * 100.0,
            m.recall * 100.0,
            m.accuracy * 100.0,
            m.f1 * 100.0
        );
    }
    out
}

pub fn write_table_txt(path: impl AsRef<Path>, report: &EvalReport) -> Result<(), EvalError> {
    let path = path.as_ref();
    std::fs::write(path, render_table(report)).map_err(io_err(path))
}

pub fn write_scores_csv(path: impl AsRef<Path>, series: &ScoredSeries) -> Result<(), EvalError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "date,score,is_spike").map_err(io_err(path))?;
    for p in series.points() {
        writeln!(w, "{},{},{}", p.date, p.score, p.is_spike as u8).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_roc_csv(path: impl AsRef<Path>, curve: &[RocPoint]) -> Result<(), EvalError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "threshold,fpr,tpr").map_err(io_err(path))?;
    for p in curve {
        writeln!(w, "{},{},{}", p.threshold, p.fpr, p.tpr).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_pr_csv(path: impl AsRef<Path>, curve: &[PrPoint]) -> Result<(), EvalError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "threshold,recall,precision").map_err(io_err(path))?;
    for p in curve {
        writeln!(w, "{},{},{}", p.threshold, p.recall, p.precision).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}
