//! Parse model replies into a verdict and confidence.
//!
//! The asked-for format is two lines: Yes/No, then a number in [0, 1].
//! Models improvise anyway, so the parser first tries the strict format and
//! then falls back to scanning the whole reply. Nothing parseable is an
//! error, never a guess.

use spikecast::llm::{parse_response, spike_score};

fn main() {
    let replies = [
        "Yes\n0.85",
        "No\n0.70",
        "**Yes**\nConfidence: 0.9",
        "Answer: No\nMy confidence is 80%",
        "Based on the elevated day-ahead prices, yes, I believe this day
will spike. Confidence: 0.75",
        "yes\n1.7",
        "The pattern resembles known spikes.\nYes. 0.6 confidence.",
        "I cannot determine this.",
        "Maybe\n0.5",
    ];

    for raw in replies {
        let shown = raw.replace('\n', " / ");
        match parse_response(raw) {
            Ok(parsed) => {
                let score = spike_score(parsed.spike_call, parsed.confidence);
                println!(
                    "{:60} -> call={:<3} conf={:.2} score={:.2}",
                    format!("{shown:.57}"),
                    if parsed.spike_call { "yes" } else { "no" },
                    parsed.confidence,
                    score
                );
            }
            Err(e) => println!("{shown:60} -> unparseable ({e})"),
        }
    }
}
