//! Hourly CSV ingestion, validation, and per-day alignment.
//!
//! Raw sources arrive as hourly (or daily) CSV files with varying layouts.
//! This module validates them into [`HourlySeries`] / [`DailySeries`] values
//! and aligns them into an immutable [`DailyTable`] keyed by calendar date.
//! A deterministic synthetic generator provides desk-scale test data.

mod align;
mod csv_io;
mod synth;

pub use align::{align_daily, AlignOptions, DailyTable, ExcludedDay, ExclusionReport};
pub use csv_io::{load_hourly_csv, load_series_csv, write_hourly_csv, CsvSchema, DstPolicy, SeriesKind};
pub use synth::{synth_dataset, synth_dataset_with_truth, SynthDataset, SYNTH_START_DATE};

use chrono::NaiveDate;
use thiserror::Error;

/// One validated hourly observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HourlyPoint {
    pub date: NaiveDate,
    /// Hour of day, 0–23.
    pub hour: u8,
    pub value: f64,
}

/// A named, validated hourly value stream.
///
/// Invariants (enforced by [`HourlySeries::new`]):
/// - points sorted by (date, hour) with no duplicates
/// - every value finite
#[derive(Debug, Clone, PartialEq)]
pub struct HourlySeries {
    name: String,
    unit: String,
    points: Vec<HourlyPoint>,
}

impl HourlySeries {
    /// Validate and construct a series. Points are sorted; duplicate
    /// (date, hour) pairs and non-finite values are rejected.
    pub fn new(
        name: impl Into<String>,
        unit: impl Into<String>,
        mut points: Vec<HourlyPoint>,
    ) -> Result<Self, IngestError> {
        let name = name.into();
        if points.is_empty() {
            return Err(IngestError::EmptySeries { series: name });
        }
        for p in &points {
            if p.hour > 23 {
                return Err(IngestError::InvalidHour { series: name, date: p.date, hour: p.hour });
            }
            if !p.value.is_finite() {
                return Err(IngestError::NonFiniteValue { series: name, date: p.date, hour: p.hour });
            }
        }
        points.sort_by_key(|p| (p.date, p.hour));
        for w in points.windows(2) {
            if w[0].date == w[1].date && w[0].hour == w[1].hour {
                return Err(IngestError::DuplicateTimestamp {
                    series: name,
                    date: w[0].date,
                    hour: w[0].hour,
                });
            }
        }
        Ok(Self { name, unit: unit.into(), points })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn unit(&self) -> &str {
        &self.unit
    }

    pub fn points(&self) -> &[HourlyPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// A named per-day scalar stream (one value per calendar date).
#[derive(Debug, Clone, PartialEq)]
pub struct DailySeries {
    name: String,
    unit: String,
    points: Vec<(NaiveDate, f64)>,
}

impl DailySeries {
    pub fn new(
        name: impl Into<String>,
        unit: impl Into<String>,
        mut points: Vec<(NaiveDate, f64)>,
    ) -> Result<Self, IngestError> {
        let name = name.into();
        if points.is_empty() {
            return Err(IngestError::EmptySeries { series: name });
        }
        for (date, value) in &points {
            if !value.is_finite() {
                return Err(IngestError::NonFiniteValue { series: name, date: *date, hour: 0 });
            }
        }
        points.sort_by_key(|(date, _)| *date);
        for w in points.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(IngestError::DuplicateTimestamp { series: name, date: w[0].0, hour: 0 });
            }
        }
        Ok(Self { name, unit: unit.into(), points })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn unit(&self) -> &str {
        &self.unit
    }

    pub fn points(&self) -> &[(NaiveDate, f64)] {
        &self.points
    }
}

/// Either flavor of validated input series.
#[derive(Debug, Clone, PartialEq)]
pub enum SeriesData {
    Hourly(HourlySeries),
    Daily(DailySeries),
}

impl SeriesData {
    pub fn name(&self) -> &str {
        match self {
            SeriesData::Hourly(s) => s.name(),
            SeriesData::Daily(s) => s.name(),
        }
    }

    pub fn unit(&self) -> &str {
        match self {
            SeriesData::Hourly(s) => s.unit(),
            SeriesData::Daily(s) => s.unit(),
        }
    }
}

impl From<HourlySeries> for SeriesData {
    fn from(s: HourlySeries) -> Self {
        SeriesData::Hourly(s)
    }
}

impl From<DailySeries> for SeriesData {
    fn from(s: DailySeries) -> Self {
        SeriesData::Daily(s)
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("column {column:?} not found in {path}")]
    MissingColumn { column: String, path: String },

    #[error("unparseable row {row} in {path}: {message}")]
    UnparseableRow { row: usize, path: String, message: String },

    #[error("duplicate timestamp in series {series:?}: {date} hour {hour}")]
    DuplicateTimestamp { series: String, date: NaiveDate, hour: u8 },

    #[error("series {series:?} has hour {hour} out of range 0-23 on {date}")]
    InvalidHour { series: String, date: NaiveDate, hour: u8 },

    #[error("series {series:?} has a non-finite value at {date} hour {hour}")]
    NonFiniteValue { series: String, date: NaiveDate, hour: u8 },

    #[error("series {series:?} contains no data")]
    EmptySeries { series: String },

    #[error("no day in the window is complete across all series")]
    NoCompleteDays,

    #[error("at least one input series is required")]
    NoSeries,

    #[error("duplicate series name {name:?}")]
    DuplicateSeriesName { name: String },

    #[error("unknown column {name:?} in table")]
    UnknownColumn { name: String },

    #[error("date {date} not present in table")]
    UnknownDate { date: NaiveDate },

    #[error("invalid schema for {name:?}: {message}")]
    InvalidSchema { name: String, message: String },

    #[error("invalid parameters: {message}")]
    InvalidParams { message: String },

    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}
