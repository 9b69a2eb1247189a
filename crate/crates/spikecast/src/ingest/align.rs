//! Alignment of validated series into one table keyed by calendar date.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::Serialize;

use super::{HourlyPoint, HourlySeries, IngestError, SeriesData};

/// Options controlling how strictly days are filtered during alignment.
#[derive(Debug, Clone, Copy, Default)]
pub struct AlignOptions {
    /// When set, a day missing exactly one hour in an hourly series is kept
    /// and the gap filled by linear interpolation within the day (edges copy
    /// the nearest present hour). Days missing two or more hours are always
    /// excluded.
    pub fill_single_gap: bool,
}

/// One excluded day and the first reason it failed completeness.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExcludedDay {
    pub date: NaiveDate,
    pub reason: String,
}

/// Days dropped during alignment, in date order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ExclusionReport {
    pub excluded: Vec<ExcludedDay>,
}

impl ExclusionReport {
    pub fn is_empty(&self) -> bool {
        self.excluded.is_empty()
    }

    pub fn len(&self) -> usize {
        self.excluded.len()
    }
}

/// Immutable per-day view over every input series.
///
/// Dates are sorted and unique. Hourly columns hold one `[f64; 24]` per
/// date; daily columns hold one scalar per date. Every column covers every
/// date (alignment guarantees completeness).
#[derive(Debug, Clone, PartialEq)]
pub struct DailyTable {
    dates: Vec<NaiveDate>,
    hourly: BTreeMap<String, Vec<[f64; 24]>>,
    daily: BTreeMap<String, Vec<f64>>,
    units: BTreeMap<String, String>,
}

impl DailyTable {
    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    pub fn hourly_names(&self) -> impl Iterator<Item = &str> {
        self.hourly.keys().map(String::as_str)
    }

    pub fn daily_names(&self) -> impl Iterator<Item = &str> {
        self.daily.keys().map(String::as_str)
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.hourly.contains_key(name) || self.daily.contains_key(name)
    }

    pub fn unit(&self, name: &str) -> Option<&str> {
        self.units.get(name).map(String::as_str)
    }

    /// The 24 hourly values of `name` on `date`.
    pub fn hourly_day(&self, name: &str, date: NaiveDate) -> Option<&[f64; 24]> {
        let idx = self.index_of(date)?;
        self.hourly.get(name).map(|col| &col[idx])
    }

    /// All days of an hourly column, aligned with [`DailyTable::dates`].
    pub fn hourly_column(&self, name: &str) -> Option<&[[f64; 24]]> {
        self.hourly.get(name).map(Vec::as_slice)
    }

    /// The scalar value of daily column `name` on `date`.
    pub fn daily_value(&self, name: &str, date: NaiveDate) -> Option<f64> {
        let idx = self.index_of(date)?;
        self.daily.get(name).map(|col| col[idx])
    }

    pub fn daily_column(&self, name: &str) -> Option<&[f64]> {
        self.daily.get(name).map(Vec::as_slice)
    }

    /// Copy of the table with one hourly cell replaced.
    pub fn with_hourly_value(
        &self,
        name: &str,
        date: NaiveDate,
        hour: u8,
        value: f64,
    ) -> Result<DailyTable, IngestError> {
        if hour > 23 {
            return Err(IngestError::InvalidHour { series: name.to_string(), date, hour });
        }
        if !value.is_finite() {
            return Err(IngestError::NonFiniteValue { series: name.to_string(), date, hour });
        }
        let idx = self.index_of(date).ok_or(IngestError::UnknownDate { date })?;
        let mut out = self.clone();
        let col = out
            .hourly
            .get_mut(name)
            .ok_or_else(|| IngestError::UnknownColumn { name: name.to_string() })?;
        col[idx][hour as usize] = value;
        Ok(out)
    }

    /// Restrict the table to dates inside `[start, end]` (inclusive).
    pub fn slice_dates(&self, start: NaiveDate, end: NaiveDate) -> DailyTable {
        let keep: Vec<usize> = self
            .dates
            .iter()
            .enumerate()
            .filter(|(_, d)| **d >= start && **d <= end)
            .map(|(i, _)| i)
            .collect();
        let dates = keep.iter().map(|&i| self.dates[i]).collect();
        let hourly = self
            .hourly
            .iter()
            .map(|(name, col)| (name.clone(), keep.iter().map(|&i| col[i]).collect()))
            .collect();
        let daily = self
            .daily
            .iter()
            .map(|(name, col)| (name.clone(), keep.iter().map(|&i| col[i]).collect()))
            .collect();
        DailyTable { dates, hourly, daily, units: self.units.clone() }
    }

    /// Flatten one hourly column back into a validated series.
    pub fn to_hourly_series(&self, name: &str) -> Result<HourlySeries, IngestError> {
        let col = self
            .hourly
            .get(name)
            .ok_or_else(|| IngestError::UnknownColumn { name: name.to_string() })?;
        let mut points = Vec::with_capacity(self.dates.len() * 24);
        for (date, day) in self.dates.iter().zip(col) {
            for (hour, value) in day.iter().enumerate() {
                points.push(HourlyPoint { date: *date, hour: hour as u8, value: *value });
            }
        }
        let unit = self.units.get(name).cloned().unwrap_or_default();
        HourlySeries::new(name, unit, points)
    }
}

/// Align validated series into a [`DailyTable`].
///
/// The coverage window is the union of dates observed in any series. A day
/// is kept only when every hourly series has all 24 hours (or exactly 23
/// with `fill_single_gap`) and every daily series has a value for it.
/// Excluded days are reported in date order with the first failing series.
pub fn align_daily(
    series: &[SeriesData],
    options: AlignOptions,
) -> Result<(DailyTable, ExclusionReport), IngestError> {
    if series.is_empty() {
        return Err(IngestError::NoSeries);
    }
    let mut seen = BTreeSet::new();
    for s in series {
        if !seen.insert(s.name().to_string()) {
            return Err(IngestError::DuplicateSeriesName { name: s.name().to_string() });
        }
    }

    // Per-series map date -> hour -> value (daily series use hour 0 only).
    struct Indexed<'a> {
        data: &'a SeriesData,
        by_date: BTreeMap<NaiveDate, Vec<(u8, f64)>>,
    }
    let mut indexed = Vec::with_capacity(series.len());
    let mut coverage: BTreeSet<NaiveDate> = BTreeSet::new();
    for s in series {
        let mut by_date: BTreeMap<NaiveDate, Vec<(u8, f64)>> = BTreeMap::new();
        match s {
            SeriesData::Hourly(h) => {
                for p in h.points() {
                    by_date.entry(p.date).or_default().push((p.hour, p.value));
                }
            }
            SeriesData::Daily(d) => {
                for (date, value) in d.points() {
                    by_date.entry(*date).or_default().push((0, *value));
                }
            }
        }
        coverage.extend(by_date.keys().copied());
        indexed.push(Indexed { data: s, by_date });
    }

    let mut dates = Vec::new();
    let mut excluded = Vec::new();
    let mut hourly: BTreeMap<String, Vec<[f64; 24]>> = BTreeMap::new();
    let mut daily: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut units = BTreeMap::new();
    for s in series {
        units.insert(s.name().to_string(), s.unit().to_string());
        match s {
            SeriesData::Hourly(_) => {
                hourly.insert(s.name().to_string(), Vec::new());
            }
            SeriesData::Daily(_) => {
                daily.insert(s.name().to_string(), Vec::new());
            }
        }
    }

    'days: for date in coverage {
        // First pass: completeness check across every series.
        let mut day_values: Vec<(String, DayColumn)> = Vec::with_capacity(indexed.len());
        for ix in &indexed {
            let name = ix.data.name();
            match ix.data {
                SeriesData::Hourly(_) => {
                    let hours = ix.by_date.get(&date);
                    let hours = match hours {
                        Some(h) => h,
                        None => {
                            excluded.push(ExcludedDay {
                                date,
                                reason: format!("{name} missing day"),
                            });
                            continue 'days;
                        }
                    };
                    match fill_day(hours, options.fill_single_gap) {
                        Ok(day) => day_values.push((name.to_string(), DayColumn::Hourly(day))),
                        Err(missing) => {
                            let reason = match missing.len() {
                                1 => format!("{name} missing hour {}", missing[0]),
                                n => format!("{name} missing {n} hours"),
                            };
                            excluded.push(ExcludedDay { date, reason });
                            continue 'days;
                        }
                    }
                }
                SeriesData::Daily(_) => match ix.by_date.get(&date) {
                    Some(v) => day_values.push((name.to_string(), DayColumn::Daily(v[0].1))),
                    None => {
                        excluded.push(ExcludedDay {
                            date,
                            reason: format!("{name} missing value"),
                        });
                        continue 'days;
                    }
                },
            }
        }
        dates.push(date);
        for (name, col) in day_values {
            match col {
                DayColumn::Hourly(day) => hourly.get_mut(&name).unwrap().push(day),
                DayColumn::Daily(v) => daily.get_mut(&name).unwrap().push(v),
            }
        }
    }

    if dates.is_empty() {
        return Err(IngestError::NoCompleteDays);
    }
    Ok((DailyTable { dates, hourly, daily, units }, ExclusionReport { excluded }))
}

enum DayColumn {
    Hourly([f64; 24]),
    Daily(f64),
}

/// Assemble 24 hourly slots; on failure return the sorted missing hours.
fn fill_day(hours: &[(u8, f64)], fill_single_gap: bool) -> Result<[f64; 24], Vec<u8>> {
    let mut slots = [None; 24];
    for (hour, value) in hours {
        slots[*hour as usize] = Some(*value);
    }
    let missing: Vec<u8> = (0u8..24).filter(|h| slots[*h as usize].is_none()).collect();
    match missing.len() {
        0 => {}
        1 if fill_single_gap => {
            let gap = missing[0] as usize;
            let prev = (0..gap).rev().find_map(|h| slots[h]);
            let next = ((gap + 1)..24).find_map(|h| slots[h]);
            slots[gap] = match (prev, next) {
                (Some(a), Some(b)) => Some((a + b) / 2.0),
                (Some(a), None) => Some(a),
                (None, Some(b)) => Some(b),
                (None, None) => unreachable!("23 of 24 hours present"),
            };
        }
        _ => return Err(missing),
    }
    let mut day = [0.0; 24];
    for (i, slot) in slots.iter().enumerate() {
        day[i] = slot.unwrap();
    }
    Ok(day)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::DailySeries;

    fn date(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2024, 1, d).unwrap()
    }

    fn full_day(d: u32, base: f64) -> Vec<HourlyPoint> {
        (0..24)
            .map(|h| HourlyPoint { date: date(d), hour: h, value: base + h as f64 })
            .collect()
    }

    fn hourly(name: &str, points: Vec<HourlyPoint>) -> SeriesData {
        SeriesData::Hourly(HourlySeries::new(name, "u", points).unwrap())
    }

    #[test]
    fn complete_days_align() {
        let mut a = full_day(1, 0.0);
        a.extend(full_day(2, 100.0));
        let mut b = full_day(1, 50.0);
        b.extend(full_day(2, 70.0));
        let (table, report) =
            align_daily(&[hourly("A", a), hourly("B", b)], AlignOptions::default()).unwrap();
        assert_eq!(table.dates(), &[date(1), date(2)]);
        assert!(report.is_empty());
        assert_eq!(table.hourly_day("A", date(2)).unwrap()[0], 100.0);
        assert_eq!(table.hourly_day("B", date(1)).unwrap()[23], 73.0);
    }

    #[test]
    fn missing_hour_excludes_day_with_reason() {
        let mut a = full_day(1, 0.0);
        a.extend(full_day(2, 0.0).into_iter().filter(|p| p.hour != 13));
        let mut b = full_day(1, 0.0);
        b.extend(full_day(2, 0.0));
        let (table, report) =
            align_daily(&[hourly("A", a), hourly("B", b)], AlignOptions::default()).unwrap();
        assert_eq!(table.dates(), &[date(1)]);
        assert_eq!(report.len(), 1);
        assert_eq!(report.excluded[0].date, date(2));
        assert_eq!(report.excluded[0].reason, "A missing hour 13");
    }

    #[test]
    fn nothing_complete_is_an_error() {
        let a: Vec<HourlyPoint> = full_day(1, 0.0).into_iter().take(5).collect();
        let err = align_daily(&[hourly("A", a)], AlignOptions::default()).unwrap_err();
        assert!(matches!(err, IngestError::NoCompleteDays));
    }

    #[test]
    fn single_gap_fill_interpolates() {
        let a: Vec<HourlyPoint> =
            full_day(1, 0.0).into_iter().filter(|p| p.hour != 12).collect();
        let (table, report) =
            align_daily(&[hourly("A", a)], AlignOptions { fill_single_gap: true }).unwrap();
        assert!(report.is_empty());
        // neighbors are 11.0 and 13.0
        assert_eq!(table.hourly_day("A", date(1)).unwrap()[12], 12.0);
    }

    #[test]
    fn daily_series_join_and_gate_completeness() {
        let a = [full_day(1, 0.0), full_day(2, 0.0)].concat();
        let t = SeriesData::Daily(
            DailySeries::new("temp_max", "C", vec![(date(1), 9.5)]).unwrap(),
        );
        let (table, report) =
            align_daily(&[hourly("A", a), t], AlignOptions::default()).unwrap();
        assert_eq!(table.dates(), &[date(1)]);
        assert_eq!(table.daily_value("temp_max", date(1)), Some(9.5));
        assert_eq!(report.excluded[0].reason, "temp_max missing value");
    }

    #[test]
    fn with_hourly_value_replaces_one_cell() {
        let a = full_day(1, 0.0);
        let (table, _) = align_daily(&[hourly("A", a)], AlignOptions::default()).unwrap();
        let bumped = table.with_hourly_value("A", date(1), 7, 999.0).unwrap();
        assert_eq!(bumped.hourly_day("A", date(1)).unwrap()[7], 999.0);
        assert_eq!(table.hourly_day("A", date(1)).unwrap()[7], 7.0);
        assert!(matches!(
            table.with_hourly_value("Z", date(1), 0, 1.0),
            Err(IngestError::UnknownColumn { .. })
        ));
    }

    #[test]
    fn hourly_series_round_trips() {
        let a = [full_day(1, 1.0), full_day(2, 2.0)].concat();
        let original = HourlySeries::new("A", "u", a.clone()).unwrap();
        let (table, _) = align_daily(&[hourly("A", a)], AlignOptions::default()).unwrap();
        assert_eq!(table.to_hourly_series("A").unwrap(), original);
    }

    #[test]
    fn slice_keeps_inclusive_window() {
        let a = [full_day(1, 0.0), full_day(2, 0.0), full_day(3, 0.0)].concat();
        let (table, _) = align_daily(&[hourly("A", a)], AlignOptions::default()).unwrap();
        let sliced = table.slice_dates(date(2), date(3));
        assert_eq!(sliced.dates(), &[date(2), date(3)]);
    }
}
