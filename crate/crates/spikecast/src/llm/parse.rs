//! Parsing of model replies into a verdict and confidence.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::LlmError;

/// A successfully parsed reply. `confidence` is always in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParsedReply {
    pub spike_call: bool,
    pub confidence: f64,
}

fn number_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"([-+]?\d+(?:\.\d+)?)(\s*%)?").expect("valid regex"))
}

fn verdict_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(yes|no)\b").expect("valid regex"))
}

/// All numbers in `text`, percent signs applied.
fn numbers_in(text: &str) -> Vec<f64> {
    number_re()
        .captures_iter(text)
        .filter_map(|cap| {
            let value: f64 = cap[1].parse().ok()?;
            Some(if cap.get(2).is_some() { value / 100.0 } else { value })
        })
        .collect()
}

fn clamp_confidence(value: f64, context: &str) -> f64 {
    if !(0.0..=1.0).contains(&value) {
        log::warn!("confidence {value} out of [0, 1] in {context}; clamping");
    }
    value.clamp(0.0, 1.0)
}

/// Verdict from a line that contains "yes" or "no" but not both,
/// punctuation and markdown ignored.
fn line_verdict(line: &str) -> Option<bool> {
    let mut has_yes = false;
    let mut has_no = false;
    for word in line.split(|c: char| !c.is_alphanumeric()) {
        if word.eq_ignore_ascii_case("yes") {
            has_yes = true;
        } else if word.eq_ignore_ascii_case("no") {
            has_no = true;
        }
    }
    match (has_yes, has_no) {
        (true, false) => Some(true),
        (false, true) => Some(false),
        _ => None,
    }
}

/// Parse a model reply.
///
/// Preferred shape: first non-empty line carries an unambiguous Yes/No,
/// second non-empty line carries the confidence (the first number on it;
/// `%` divides by 100; out-of-range values clamp with a warning).
///
/// Anything else falls back to scanning the whole text for the first
/// standalone yes/no word and a confidence number, preferring the first
/// number already in [0, 1] and otherwise clamping the first number found.
/// Replies with no verdict or no number at all are `Unparseable`.
pub fn parse_response(raw: &str) -> Result<ParsedReply, LlmError> {
    let lines: Vec<&str> = raw.lines().map(str::trim).filter(|l| !l.is_empty()).collect();

    if lines.len() >= 2 {
        if let Some(spike_call) = line_verdict(lines[0]) {
            if let Some(first) = numbers_in(lines[1]).first() {
                return Ok(ParsedReply {
                    spike_call,
                    confidence: clamp_confidence(*first, "reply line 2"),
                });
            }
        }
    }

    let verdict = verdict_re()
        .find(raw)
        .map(|m| m.as_str().eq_ignore_ascii_case("yes"))
        .ok_or_else(|| LlmError::Unparseable { raw: raw.to_string() })?;
    let numbers = numbers_in(raw);
    let confidence = numbers
        .iter()
        .copied()
        .find(|n| (0.0..=1.0).contains(n))
        .or_else(|| numbers.first().map(|n| clamp_confidence(*n, "reply text")))
        .ok_or_else(|| LlmError::Unparseable { raw: raw.to_string() })?;
    Ok(ParsedReply { spike_call: verdict, confidence })
}
