//! Per-day feature engineering and spike labeling.
//!
//! Each eligible day becomes one [`FeatureVector`] built only from values
//! knowable before that day's real-time market runs: the day's own
//! day-ahead quantities plus lagged actuals. Real-time prices appear only
//! as lag-1 aggregates and in the labels.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dates::DateRange;
use crate::ingest::DailyTable;

/// Divisor used for variance: the full population (n) or the sample
/// correction (n - 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdDivisor {
    #[default]
    Population,
    Sample,
}

/// Options shared by feature and label computation.
#[derive(Debug, Clone, Copy, Default)]
pub struct FeatureOptions {
    pub std_divisor: StdDivisor,
}

/// Aggregates of one day's 24 hourly values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DayStats {
    pub mean: f64,
    pub std: f64,
    pub max: f64,
    pub min: f64,
}

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("expected {expected} values, got {got}")]
    WrongLength { expected: usize, got: usize },

    #[error("input is empty")]
    EmptyInput,

    #[error("no dates fall inside the window")]
    EmptyWindow,

    #[error("quantile level must be in [0, 1], got {p}")]
    InvalidQuantile { p: f64 },

    #[error("table is missing column {column:?}")]
    MissingColumn { column: String },

    #[error("{date} lacks history; missing prior dates: {}", format_dates(.missing))]
    InsufficientHistory { date: NaiveDate, missing: Vec<NaiveDate> },

    #[error("date {date} not present in table")]
    UnknownDate { date: NaiveDate },

    #[error("failed to write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn format_dates(dates: &[NaiveDate]) -> String {
    let mut out = String::new();
    for (i, d) in dates.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{d}");
    }
    out
}

/// Mean/std/max/min of exactly 24 hourly values.
pub fn daily_stats(values: &[f64], divisor: StdDivisor) -> Result<DayStats, FeatureError> {
    if values.len() != 24 {
        return Err(FeatureError::WrongLength { expected: 24, got: values.len() });
    }
    Ok(stats_of(values, divisor))
}

fn stats_of(values: &[f64], divisor: StdDivisor) -> DayStats {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let denom = match divisor {
        StdDivisor::Population => n,
        StdDivisor::Sample => n - 1.0,
    };
    let std = if denom > 0.0 { (ss / denom).sqrt() } else { 0.0 };
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    DayStats { mean, std, max, min }
}

/// Quantile by linear interpolation between order statistics: the value at
/// fractional rank `p * (n - 1)` of the sorted input.
pub fn quantile(values: &[f64], p: f64) -> Result<f64, FeatureError> {
    if values.is_empty() {
        return Err(FeatureError::EmptyWindow);
    }
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(FeatureError::InvalidQuantile { p });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = p * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

/// One day's model inputs. Field order matches [`FeatureVector::COLUMNS`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub date: NaiveDate,
    pub dap_mean: f64,
    pub dap_std: f64,
    pub dap_max: f64,
    pub dap_min: f64,
    pub dap_momentum: f64,
    pub dap_mean_3d: f64,
    pub dap_std_3d: f64,
    pub rtp_mean_lag1: f64,
    pub rtp_std_lag1: f64,
    pub net_demand_forecast_mean: f64,
    pub net_demand_forecast_min: f64,
    pub net_demand_forecast_max: f64,
    pub net_demand_forecast_std: f64,
    pub net_demand_diff: f64,
    pub net_demand_actual_mean_lag1: f64,
    pub net_demand_actual_std_lag1: f64,
    pub reserve_mean: f64,
    pub reserve_std: f64,
    pub reserve_max: f64,
    pub reserve_min: f64,
    pub temp_max: f64,
    pub temp_min: f64,
    pub temp_diff: f64,
    pub wind_speed_max: f64,
    pub wind_speed_min: f64,
    pub pct_renewable_forecast: f64,
    pub day: u32,
    pub month: u32,
}

impl FeatureVector {
    /// CSV column names, in output order (date is written separately).
    pub const COLUMNS: [&'static str; 28] = [
        "dap_mean",
        "dap_std",
        "dap_max",
        "dap_min",
        "dap_momentum",
        "dap_mean_3d",
        "dap_std_3d",
        "rtp_mean_lag1",
        "rtp_std_lag1",
        "net_demand_forecast_mean",
        "net_demand_forecast_min",
        "net_demand_forecast_max",
        "net_demand_forecast_std",
        "net_demand_diff",
        "net_demand_actual_mean_lag1",
        "net_demand_actual_std_lag1",
        "reserve_mean",
        "reserve_std",
        "reserve_max",
        "reserve_min",
        "temp_max",
        "temp_min",
        "temp_diff",
        "wind_speed_max",
        "wind_speed_min",
        "pct_renewable_forecast",
        "day",
        "month",
    ];

    /// Values in [`FeatureVector::COLUMNS`] order.
    pub fn values(&self) -> [f64; 28] {
        [
            self.dap_mean,
            self.dap_std,
            self.dap_max,
            self.dap_min,
            self.dap_momentum,
            self.dap_mean_3d,
            self.dap_std_3d,
            self.rtp_mean_lag1,
            self.rtp_std_lag1,
            self.net_demand_forecast_mean,
            self.net_demand_forecast_min,
            self.net_demand_forecast_max,
            self.net_demand_forecast_std,
            self.net_demand_diff,
            self.net_demand_actual_mean_lag1,
            self.net_demand_actual_std_lag1,
            self.reserve_mean,
            self.reserve_std,
            self.reserve_max,
            self.reserve_min,
            self.temp_max,
            self.temp_min,
            self.temp_diff,
            self.wind_speed_max,
            self.wind_speed_min,
            self.pct_renewable_forecast,
            self.day as f64,
            self.month as f64,
        ]
    }
}

/// Table columns features and labels are read from.
pub const REQUIRED_COLUMNS: [&str; 9] = [
    "dap",
    "rtp",
    "net_demand_forecast",
    "net_demand_actual",
    "reserve_forecast",
    "temperature",
    "wind_speed",
    "renewable_forecast",
    "demand_forecast",
];

/// Days of immediately preceding data a feature row needs.
pub const HISTORY_DAYS: usize = 3;

fn check_columns(table: &DailyTable) -> Result<(), FeatureError> {
    for column in REQUIRED_COLUMNS {
        if !table.has_column(column) {
            return Err(FeatureError::MissingColumn { column: column.to_string() });
        }
    }
    Ok(())
}

fn missing_history(table: &DailyTable, date: NaiveDate) -> Vec<NaiveDate> {
    (1..=HISTORY_DAYS as i64)
        .map(|back| date - Duration::days(back))
        .filter(|prior| table.index_of(*prior).is_none())
        .collect()
}

/// Build the feature row for one date. The three immediately preceding
/// calendar dates must be present in the table.
pub fn feature_row(
    table: &DailyTable,
    date: NaiveDate,
    opts: &FeatureOptions,
) -> Result<FeatureVector, FeatureError> {
    check_columns(table)?;
    if table.index_of(date).is_none() {
        return Err(FeatureError::UnknownDate { date });
    }
    let missing = missing_history(table, date);
    if !missing.is_empty() {
        return Err(FeatureError::InsufficientHistory { date, missing });
    }
    let div = opts.std_divisor;
    let prev = date - Duration::days(1);

    let day_of = |name: &str, d: NaiveDate| -> &[f64; 24] { table.hourly_day(name, d).unwrap() };

    let dap = stats_of(day_of("dap", date), div);
    let dap_prev = stats_of(day_of("dap", prev), div);
    let mut dap_3d: Vec<f64> = Vec::with_capacity(72);
    for back in (1..=HISTORY_DAYS as i64).rev() {
        dap_3d.extend_from_slice(day_of("dap", date - Duration::days(back)));
    }
    let dap_3d = stats_of(&dap_3d, div);
    let rtp_prev = stats_of(day_of("rtp", prev), div);
    let net_forecast = stats_of(day_of("net_demand_forecast", date), div);
    let net_actual_prev = stats_of(day_of("net_demand_actual", prev), div);
    let reserve = stats_of(day_of("reserve_forecast", date), div);
    let temp = stats_of(day_of("temperature", date), div);
    let wind = stats_of(day_of("wind_speed", date), div);

    let renewable_sum: f64 = day_of("renewable_forecast", date).iter().sum();
    let demand_sum: f64 = day_of("demand_forecast", date).iter().sum();
    let pct_renewable = if demand_sum > 0.0 {
        (renewable_sum / demand_sum).clamp(0.0, 1.0)
    } else {
        0.0
    };

    Ok(FeatureVector {
        date,
        dap_mean: dap.mean,
        dap_std: dap.std,
        dap_max: dap.max,
        dap_min: dap.min,
        dap_momentum: dap.mean - dap_prev.mean,
        dap_mean_3d: dap_3d.mean,
        dap_std_3d: dap_3d.std,
        rtp_mean_lag1: rtp_prev.mean,
        rtp_std_lag1: rtp_prev.std,
        net_demand_forecast_mean: net_forecast.mean,
        net_demand_forecast_min: net_forecast.min,
        net_demand_forecast_max: net_forecast.max,
        net_demand_forecast_std: net_forecast.std,
        net_demand_diff: net_forecast.mean - net_actual_prev.mean,
        net_demand_actual_mean_lag1: net_actual_prev.mean,
        net_demand_actual_std_lag1: net_actual_prev.std,
        reserve_mean: reserve.mean,
        reserve_std: reserve.std,
        reserve_max: reserve.max,
        reserve_min: reserve.min,
        temp_max: temp.max,
        temp_min: temp.min,
        temp_diff: temp.max - temp.min,
        wind_speed_max: wind.max,
        wind_speed_min: wind.min,
        pct_renewable_forecast: pct_renewable,
        day: date.day(),
        month: date.month(),
    })
}

/// Feature rows for every table date whose three prior calendar dates are
/// present. Dates lacking history are silently skipped.
pub fn compute_features(
    table: &DailyTable,
    opts: &FeatureOptions,
) -> Result<Vec<FeatureVector>, FeatureError> {
    check_columns(table)?;
    if table.is_empty() {
        return Err(FeatureError::EmptyInput);
    }
    let mut out = Vec::new();
    for date in table.dates() {
        if missing_history(table, *date).is_empty() {
            out.push(feature_row(table, *date, opts)?);
        }
    }
    Ok(out)
}

/// Feature rows for exactly the requested dates; any date lacking history
/// is an error naming the missing prior dates.
pub fn compute_features_for(
    table: &DailyTable,
    dates: &[NaiveDate],
    opts: &FeatureOptions,
) -> Result<Vec<FeatureVector>, FeatureError> {
    if dates.is_empty() {
        return Err(FeatureError::EmptyInput);
    }
    dates.iter().map(|date| feature_row(table, *date, opts)).collect()
}

/// Sigma thresholds above which a day counts as a spike, frozen from one
/// reference window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeThresholds {
    pub rtp_sigma: f64,
    pub dap_sigma: f64,
    pub quantile_p: f64,
}

/// Compute spike thresholds as the `p`-quantile of intraday standard
/// deviations over `window` (whole table when `None`).
pub fn spike_thresholds(
    table: &DailyTable,
    window: Option<DateRange>,
    p: f64,
    opts: &FeatureOptions,
) -> Result<SpikeThresholds, FeatureError> {
    check_columns(table)?;
    let in_window = |d: &NaiveDate| window.map_or(true, |w| w.contains(*d));
    let mut rtp_sigmas = Vec::new();
    let mut dap_sigmas = Vec::new();
    for date in table.dates().iter().filter(|d| in_window(d)) {
        rtp_sigmas.push(stats_of(table.hourly_day("rtp", *date).unwrap(), opts.std_divisor).std);
        dap_sigmas.push(stats_of(table.hourly_day("dap", *date).unwrap(), opts.std_divisor).std);
    }
    if rtp_sigmas.is_empty() {
        return Err(FeatureError::EmptyWindow);
    }
    Ok(SpikeThresholds {
        rtp_sigma: quantile(&rtp_sigmas, p)?,
        dap_sigma: quantile(&dap_sigmas, p)?,
        quantile_p: p,
    })
}

/// One day's spike verdicts, computable for every table date.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayLabel {
    pub date: NaiveDate,
    pub sigma_rtp_intraday: f64,
    pub sigma_dap_intraday: f64,
    /// Strictly above the real-time sigma threshold.
    pub is_spike: bool,
    /// Strictly above the day-ahead sigma threshold.
    pub is_dap_spike: bool,
}

/// Label every table date against frozen thresholds (strict `>`).
pub fn day_labels(
    table: &DailyTable,
    thresholds: &SpikeThresholds,
    opts: &FeatureOptions,
) -> Result<Vec<DayLabel>, FeatureError> {
    check_columns(table)?;
    if table.is_empty() {
        return Err(FeatureError::EmptyInput);
    }
    Ok(table
        .dates()
        .iter()
        .map(|date| {
            let sigma_rtp = stats_of(table.hourly_day("rtp", *date).unwrap(), opts.std_divisor).std;
            let sigma_dap = stats_of(table.hourly_day("dap", *date).unwrap(), opts.std_divisor).std;
            DayLabel {
                date: *date,
                sigma_rtp_intraday: sigma_rtp,
                sigma_dap_intraday: sigma_dap,
                is_spike: sigma_rtp > thresholds.rtp_sigma,
                is_dap_spike: sigma_dap > thresholds.dap_sigma,
            }
        })
        .collect())
}

/// A feature row joined with its labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDay {
    pub features: FeatureVector,
    pub sigma_rtp_intraday: f64,
    pub sigma_dap_intraday: f64,
    pub is_spike: bool,
    pub is_dap_spike: bool,
}

impl LabeledDay {
    pub fn date(&self) -> NaiveDate {
        self.features.date
    }
}

/// Join features with labels: one [`LabeledDay`] per date that has enough
/// history for features. Labels still consider every table date.
pub fn label_spikes(
    table: &DailyTable,
    thresholds: &SpikeThresholds,
    opts: &FeatureOptions,
) -> Result<Vec<LabeledDay>, FeatureError> {
    let features = compute_features(table, opts)?;
    let labels = day_labels(table, thresholds, opts)?;
    Ok(features
        .into_iter()
        .map(|fv| {
            let label = labels
                .iter()
                .find(|l| l.date == fv.date)
                .expect("every feature date is a table date");
            LabeledDay {
                features: fv,
                sigma_rtp_intraday: label.sigma_rtp_intraday,
                sigma_dap_intraday: label.sigma_dap_intraday,
                is_spike: label.is_spike,
                is_dap_spike: label.is_dap_spike,
            }
        })
        .collect())
}

/// Write labeled feature rows as CSV: date, the feature columns in
/// [`FeatureVector::COLUMNS`] order, then sigma and label columns.
/// Booleans are written as 1/0.
pub fn write_features_csv(path: impl AsRef<Path>, rows: &[LabeledDay]) -> Result<(), FeatureError> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let io_err = |source: std::io::Error| FeatureError::Io { path: path_str.clone(), source };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    write!(w, "date").map_err(io_err)?;
    for col in FeatureVector::COLUMNS {
        write!(w, ",{col}").map_err(io_err)?;
    }
    writeln!(w, ",sigma_rtp_intraday,is_spike,is_dap_spike").map_err(io_err)?;
    for row in rows {
        write!(w, "{}", row.features.date).map_err(io_err)?;
        for value in row.features.values() {
            write!(w, ",{value}").map_err(io_err)?;
        }
        writeln!(
            w,
            ",{},{},{}",
            row.sigma_rtp_intraday,
            row.is_spike as u8,
            row.is_dap_spike as u8
        )
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

/// Write per-day labels as CSV (booleans as 1/0).
pub fn write_labels_csv(path: impl AsRef<Path>, labels: &[DayLabel]) -> Result<(), FeatureError> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let io_err = |source: std::io::Error| FeatureError::Io { path: path_str.clone(), source };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "date,sigma_rtp_intraday,sigma_dap_intraday,is_spike,is_dap_spike").map_err(io_err)?;
    for l in labels {
        writeln!(
            w,
            "{},{},{},{},{}",
            l.date,
            l.sigma_rtp_intraday,
            l.sigma_dap_intraday,
            l.is_spike as u8,
            l.is_dap_spike as u8
        )
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(())
}
