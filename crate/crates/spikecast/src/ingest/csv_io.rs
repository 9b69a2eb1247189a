//! CSV readers and writers for hourly and daily series.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use super::{DailySeries, HourlyPoint, HourlySeries, IngestError, SeriesData};

/// Whether a file carries one row per hour or one row per day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    #[default]
    Hourly,
    Daily,
}

/// How duplicate or missing hours within a day are handled at load time.
///
/// `Strict` rejects any duplicate (date, hour). `Normalize` accepts a day
/// where one hour appears exactly twice (values averaged) and tolerates a
/// single missing hour; anything messier is still an error. Normalization
/// happens before series validation so the resulting series is clean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DstPolicy {
    #[default]
    Strict,
    Normalize,
}

/// Column layout for one CSV file.
///
/// Either `timestamp_column` (a combined datetime) or the pair
/// `date_column` + `hour_column` must be set for hourly files; daily files
/// use `date_column` alone. `hour_base` says whether hours are written
/// 0-23 or 1-24.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvSchema {
    pub name: String,
    #[serde(default)]
    pub unit: String,
    pub value_column: String,
    #[serde(default)]
    pub date_column: Option<String>,
    #[serde(default)]
    pub hour_column: Option<String>,
    #[serde(default)]
    pub timestamp_column: Option<String>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default)]
    pub hour_base: HourBase,
    #[serde(default)]
    pub dst: DstPolicy,
    #[serde(default)]
    pub kind: SeriesKind,
}

fn default_delimiter() -> char {
    ','
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum HourBase {
    #[default]
    #[serde(rename = "zero")]
    Zero,
    #[serde(rename = "one")]
    One,
}

impl CsvSchema {
    /// Hourly layout with separate date and hour columns, 0-based hours.
    pub fn hourly(
        name: impl Into<String>,
        unit: impl Into<String>,
        date_column: impl Into<String>,
        hour_column: impl Into<String>,
        value_column: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            unit: unit.into(),
            value_column: value_column.into(),
            date_column: Some(date_column.into()),
            hour_column: Some(hour_column.into()),
            timestamp_column: None,
            delimiter: ',',
            hour_base: HourBase::Zero,
            dst: DstPolicy::Strict,
            kind: SeriesKind::Hourly,
        }
    }

    /// Hourly layout with one combined `YYYY-MM-DDTHH:MM:SS` column.
    pub fn hourly_timestamp(
        name: impl Into<String>,
        unit: impl Into<String>,
        timestamp_column: impl Into<String>,
        value_column: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            unit: unit.into(),
            value_column: value_column.into(),
            date_column: None,
            hour_column: None,
            timestamp_column: Some(timestamp_column.into()),
            delimiter: ',',
            hour_base: HourBase::Zero,
            dst: DstPolicy::Strict,
            kind: SeriesKind::Hourly,
        }
    }

    /// Daily layout: one row per date.
    pub fn daily(
        name: impl Into<String>,
        unit: impl Into<String>,
        date_column: impl Into<String>,
        value_column: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            unit: unit.into(),
            value_column: value_column.into(),
            date_column: Some(date_column.into()),
            hour_column: None,
            timestamp_column: None,
            delimiter: ',',
            hour_base: HourBase::Zero,
            dst: DstPolicy::Strict,
            kind: SeriesKind::Daily,
        }
    }

    pub fn with_delimiter(mut self, delimiter: char) -> Self {
        self.delimiter = delimiter;
        self
    }

    pub fn with_hour_base(mut self, hour_base: HourBase) -> Self {
        self.hour_base = hour_base;
        self
    }

    pub fn with_dst(mut self, dst: DstPolicy) -> Self {
        self.dst = dst;
        self
    }

    fn validate(&self) -> Result<(), IngestError> {
        let err = |message: &str| IngestError::InvalidSchema {
            name: self.name.clone(),
            message: message.to_string(),
        };
        match self.kind {
            SeriesKind::Hourly => {
                let split = self.date_column.is_some() && self.hour_column.is_some();
                let combined = self.timestamp_column.is_some();
                if split == combined {
                    return Err(err(
                        "hourly files need either date_column+hour_column or timestamp_column",
                    ));
                }
            }
            SeriesKind::Daily => {
                if self.date_column.is_none() {
                    return Err(err("daily files need date_column"));
                }
                if self.hour_column.is_some() || self.timestamp_column.is_some() {
                    return Err(err("daily files take only date_column and value_column"));
                }
            }
        }
        Ok(())
    }
}

fn find_column(
    headers: &csv::StringRecord,
    column: &str,
    path: &str,
) -> Result<usize, IngestError> {
    headers
        .iter()
        .position(|h| h.trim() == column)
        .ok_or_else(|| IngestError::MissingColumn { column: column.to_string(), path: path.to_string() })
}

fn parse_date(raw: &str) -> Option<NaiveDate> {
    let raw = raw.trim();
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(raw, "%Y/%m/%d"))
        .or_else(|_| NaiveDate::parse_from_str(raw, "%m/%d/%Y"))
        .ok()
}

fn parse_timestamp(raw: &str) -> Option<(NaiveDate, u8)> {
    let raw = raw.trim();
    let dt = NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S")
        .or_else(|_| NaiveDateTime::parse_from_str(raw, "%Y-%m-%d %H:%M:%S"))
        .or_else(|_| NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M"))
        .or_else(|_| NaiveDateTime::parse_from_str(raw, "%Y-%m-%d %H:%M"))
        .ok()?;
    Some((dt.date(), dt.time().hour() as u8))
}

/// Load one CSV file into a validated series according to `schema`.
///
/// Row numbers in errors are 1-based over data rows (the header is row 0).
pub fn load_series_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<SeriesData, IngestError> {
    schema.validate()?;
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let file = File::open(path).map_err(|source| IngestError::Io { path: path_str.clone(), source })?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));

    let headers = reader
        .headers()
        .map_err(|source| IngestError::Csv { path: path_str.clone(), source })?
        .clone();
    let value_idx = find_column(&headers, &schema.value_column, &path_str)?;

    let bad_row = |row: usize, message: String| IngestError::UnparseableRow {
        row,
        path: path_str.clone(),
        message,
    };

    match schema.kind {
        SeriesKind::Daily => {
            let date_idx = find_column(&headers, schema.date_column.as_ref().unwrap(), &path_str)?;
            let mut points = Vec::new();
            for (i, record) in reader.records().enumerate() {
                let row = i + 1;
                let record = record.map_err(|e| bad_row(row, e.to_string()))?;
                let date_raw = record
                    .get(date_idx)
                    .ok_or_else(|| bad_row(row, "row too short".to_string()))?;
                let date = parse_date(date_raw)
                    .ok_or_else(|| bad_row(row, format!("bad date {date_raw:?}")))?;
                let value = parse_value(record.get(value_idx), row, &bad_row)?;
                points.push((date, value));
            }
            let series = DailySeries::new(&schema.name, &schema.unit, points)?;
            Ok(SeriesData::Daily(series))
        }
        SeriesKind::Hourly => {
            let mut points = Vec::new();
            if let Some(ts_col) = &schema.timestamp_column {
                let ts_idx = find_column(&headers, ts_col, &path_str)?;
                for (i, record) in reader.records().enumerate() {
                    let row = i + 1;
                    let record = record.map_err(|e| bad_row(row, e.to_string()))?;
                    let ts_raw = record
                        .get(ts_idx)
                        .ok_or_else(|| bad_row(row, "row too short".to_string()))?;
                    let (date, hour) = parse_timestamp(ts_raw)
                        .ok_or_else(|| bad_row(row, format!("bad timestamp {ts_raw:?}")))?;
                    let value = parse_value(record.get(value_idx), row, &bad_row)?;
                    points.push(HourlyPoint { date, hour, value });
                }
            } else {
                let date_idx = find_column(&headers, schema.date_column.as_ref().unwrap(), &path_str)?;
                let hour_idx = find_column(&headers, schema.hour_column.as_ref().unwrap(), &path_str)?;
                for (i, record) in reader.records().enumerate() {
                    let row = i + 1;
                    let record = record.map_err(|e| bad_row(row, e.to_string()))?;
                    let date_raw = record
                        .get(date_idx)
                        .ok_or_else(|| bad_row(row, "row too short".to_string()))?;
                    let date = parse_date(date_raw)
                        .ok_or_else(|| bad_row(row, format!("bad date {date_raw:?}")))?;
                    let hour_raw = record
                        .get(hour_idx)
                        .ok_or_else(|| bad_row(row, "row too short".to_string()))?;
                    let mut hour: i32 = hour_raw
                        .trim()
                        .parse()
                        .map_err(|_| bad_row(row, format!("bad hour {hour_raw:?}")))?;
                    if schema.hour_base == HourBase::One {
                        hour -= 1;
                    }
                    if !(0..=23).contains(&hour) {
                        return Err(bad_row(row, format!("hour {hour_raw:?} out of range")));
                    }
                    let value = parse_value(record.get(value_idx), row, &bad_row)?;
                    points.push(HourlyPoint { date, hour: hour as u8, value });
                }
            }
            if schema.dst == DstPolicy::Normalize {
                points = normalize_dst(points);
            }
            let series = HourlySeries::new(&schema.name, &schema.unit, points)?;
            Ok(SeriesData::Hourly(series))
        }
    }
}

/// Load an hourly CSV file; errors if the schema describes a daily file.
pub fn load_hourly_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<HourlySeries, IngestError> {
    match load_series_csv(path, schema)? {
        SeriesData::Hourly(s) => Ok(s),
        SeriesData::Daily(_) => Err(IngestError::InvalidSchema {
            name: schema.name.clone(),
            message: "schema describes a daily file".to_string(),
        }),
    }
}

fn parse_value(
    raw: Option<&str>,
    row: usize,
    bad_row: &impl Fn(usize, String) -> IngestError,
) -> Result<f64, IngestError> {
    let raw = raw.ok_or_else(|| bad_row(row, "row too short".to_string()))?;
    let value: f64 = raw
        .trim()
        .parse()
        .map_err(|_| bad_row(row, format!("bad value {raw:?}")))?;
    if !value.is_finite() {
        return Err(bad_row(row, format!("non-finite value {raw:?}")));
    }
    Ok(value)
}

/// Average exact duplicates (an hour appearing twice within a day, the
/// fall-back transition) so validation later sees one point per hour.
/// Missing hours (spring-forward) are left absent here; alignment decides
/// whether a 23-hour day is acceptable.
fn normalize_dst(mut points: Vec<HourlyPoint>) -> Vec<HourlyPoint> {
    points.sort_by_key(|p| (p.date, p.hour));
    let mut out: Vec<HourlyPoint> = Vec::with_capacity(points.len());
    for p in points {
        match out.last_mut() {
            Some(last) if last.date == p.date && last.hour == p.hour => {
                last.value = (last.value + p.value) / 2.0;
            }
            _ => out.push(p),
        }
    }
    out
}

/// Write an hourly series as `date,hour,value` with full float precision.
pub fn write_hourly_csv(path: impl AsRef<Path>, series: &HourlySeries) -> Result<(), IngestError> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let file = File::create(path).map_err(|source| IngestError::Io { path: path_str.clone(), source })?;
    let mut w = BufWriter::new(file);
    let write_err = |source: std::io::Error| IngestError::Io { path: path_str.clone(), source };
    writeln!(w, "date,hour,value").map_err(write_err)?;
    for p in series.points() {
        writeln!(w, "{},{},{}", p.date, p.hour, p.value).map_err(write_err)?;
    }
    w.flush().map_err(write_err)?;
    Ok(())
}
