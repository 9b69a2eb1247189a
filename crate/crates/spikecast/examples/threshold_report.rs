//! Turn per-day spike scores into confusion counts, curves, and optimized
//! decision thresholds.
//!
//! A fixed 0.5 cut is rarely right for rare events. The ROC-optimal
//! threshold maximizes Youden's J (catch spikes without flooding false
//! alarms); the PR-optimal threshold maximizes F1 (precision-weighted).

use chrono::NaiveDate;
use spikecast::eval::{
    backtest, pr_curve, pr_optimal, render_table, roc_curve, roc_optimal, ScoredPoint,
    ScoredSeries, ThresholdSpec,
};

fn main() -> anyhow::Result<()> {
    // twenty scored days, three true spikes, imperfect scores
    let scores = [
        (0.92, true),
        (0.85, false),
        (0.81, true),
        (0.60, false),
        (0.55, false),
        (0.52, true),
        (0.48, false),
        (0.45, false),
        (0.40, false),
        (0.38, false),
        (0.33, false),
        (0.30, false),
        (0.28, false),
        (0.25, false),
        (0.22, false),
        (0.18, false),
        (0.15, false),
        (0.12, false),
        (0.08, false),
        (0.05, false),
    ];
    let start = NaiveDate::from_ymd_opt(2023, 9, 1).unwrap();
    let points: Vec<ScoredPoint> = scores
        .iter()
        .enumerate()
        .map(|(i, (score, is_spike))| ScoredPoint {
            date: start + chrono::Duration::days(i as i64),
            score: *score,
            is_spike: *is_spike,
        })
        .collect();
    let series = ScoredSeries::new(points)?;

    println!("roc-optimal threshold: {:.2}", roc_optimal(&series)?);
    println!("pr-optimal threshold:  {:.2}", pr_optimal(&series)?);

    println!("\nroc curve ({} points):", roc_curve(&series)?.len());
    for p in roc_curve(&series)?.iter().take(6) {
        println!("  thr {:>5.2}  fpr {:.3}  tpr {:.3}", p.threshold, p.fpr, p.tpr);
    }
    println!("pr curve ({} points)", pr_curve(&series)?.len());

    let report = backtest(
        &series,
        &[ThresholdSpec::Fixed(0.5), ThresholdSpec::RocOptimal, ThresholdSpec::PrOptimal],
        None,
        "example",
    )?;
    println!("\n{}", render_table(&report));
    Ok(())
}
