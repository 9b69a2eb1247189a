//! Inclusive calendar date ranges used for coverage windows.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// An inclusive range of calendar dates.
///
/// Serializes as the string `"START..END"` so config files and reports
/// carry one readable token per window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl Serialize for DateRange {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DateRange {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}

impl DateRange {
    /// Build a range, normalizing a reversed pair.
    pub fn new(start: NaiveDate, end: NaiveDate) -> Self {
        if start <= end {
            Self { start, end }
        } else {
            Self { start: end, end: start }
        }
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }

    /// Number of days in the range (inclusive).
    pub fn len_days(&self) -> u64 {
        (self.end - self.start).num_days() as u64 + 1
    }

    /// All dates in the range, ascending.
    pub fn iter_days(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.start.iter_days().take(self.len_days() as usize)
    }
}

impl fmt::Display for DateRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

impl FromStr for DateRange {
    type Err = String;

    /// Parses `"YYYY-MM-DD..YYYY-MM-DD"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once("..")
            .ok_or_else(|| format!("expected START..END, got {s:?}"))?;
        let start = a
            .trim()
            .parse::<NaiveDate>()
            .map_err(|e| format!("bad start date {a:?}: {e}"))?;
        let end = b
            .trim()
            .parse::<NaiveDate>()
            .map_err(|e| format!("bad end date {b:?}: {e}"))?;
        Ok(Self::new(start, end))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    #[test]
    fn parse_and_iterate() {
        let r: DateRange = "2024-01-01..2024-01-03".parse().unwrap();
        let days: Vec<_> = r.iter_days().collect();
        assert_eq!(days, vec![d("2024-01-01"), d("2024-01-02"), d("2024-01-03")]);
        assert_eq!(r.len_days(), 3);
        assert!(r.contains(d("2024-01-02")));
        assert!(!r.contains(d("2024-01-04")));
    }

    #[test]
    fn reversed_pair_is_normalized() {
        let r = DateRange::new(d("2024-02-01"), d("2024-01-01"));
        assert_eq!(r.start, d("2024-01-01"));
        assert_eq!(r.end, d("2024-02-01"));
    }

    #[test]
    fn serde_round_trips_through_the_string_form() {
        let r: DateRange = "2024-01-01..2024-01-03".parse().unwrap();
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(json, "\"2024-01-01..2024-01-03\"");
        let back: DateRange = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        assert!(serde_json::from_str::<DateRange>("\"2024-01-01\"").is_err());
    }
}
