//! Acceptance gate: one test per claim the crate stands behind, each with
//! an explicit time budget. Oracles here are written independently of the
//! library internals so agreement means something.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use spikecast::config::{RunConfig, SynthConfig};
use spikecast::embed::{EmbeddingVector, HashEmbedder, IndexEntry, VectorIndex};
use spikecast::eval::{
    confusion, metrics, pr_optimal, roc_optimal, ConfusionMatrix, ScoredPoint, ScoredSeries,
};
use spikecast::features::{day_labels, label_spikes, spike_thresholds, FeatureOptions};
use spikecast::ingest::synth_dataset_with_truth;
use spikecast::llm::{mock_predict, parse_response, predict_day, MockModel, PredictContext};
use spikecast::pipeline::Pipeline;
use spikecast::retrieval::{mmr_select, Candidate};
use spikecast::textualize::{render_description, DEFAULT_TEMPLATE};

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

fn finish(name: &str, started: Instant, budget: Duration) {
    let elapsed = started.elapsed();
    assert!(
        elapsed <= budget,
        "{name}: took {elapsed:?}, budget {budget:?}"
    );
    println!("{name}: pass in {} ms", elapsed.as_millis());
}

// --- criterion 1: metric arithmetic reproduces the reference result rows ---

#[test]
fn c1_reference_metric_rows() {
    let started = Instant::now();
    // (tp, fp, fn, tn) -> expected precision/recall/accuracy/f1, percent, 2dp
    #[rustfmt::skip]
    let rows: [(u64, u64, u64, u64, f64, f64, f64, f64); 18] = [
        // full-year training, fixed 0.5 cut
        (0, 3, 9, 354, 0.00, 0.00, 96.72, 0.00),
        (1, 0, 8, 357, 100.00, 11.11, 97.81, 20.00),
        (2, 3, 7, 354, 40.00, 22.22, 97.27, 28.57),
        // full-year training, roc-optimal cut
        (6, 43, 3, 314, 12.24, 66.67, 87.43, 20.69),
        (9, 140, 0, 217, 6.04, 100.00, 61.75, 11.39),
        (6, 37, 3, 320, 13.95, 66.67, 89.07, 23.08),
        // full-year training, pr-optimal cut
        (4, 11, 5, 346, 26.67, 44.44, 95.63, 33.33),
        (3, 5, 6, 352, 37.50, 33.33, 96.99, 35.29),
        (2, 2, 7, 355, 50.00, 22.22, 97.54, 30.77),
        // two-month training, fixed 0.5 cut
        (1, 74, 8, 283, 1.33, 11.11, 77.60, 2.38),
        (0, 0, 9, 357, 0.00, 0.00, 97.54, 0.00),
        (3, 7, 6, 350, 30.00, 33.33, 96.45, 31.58),
        // two-month training, roc-optimal cut
        (0, 0, 9, 357, 0.00, 0.00, 97.54, 0.00),
        (2, 75, 7, 282, 2.60, 22.22, 77.60, 4.65),
        (3, 5, 6, 352, 37.50, 33.33, 96.99, 35.29),
        // two-month training, pr-optimal cut
        (9, 357, 0, 0, 2.46, 100.00, 2.46, 4.80),
        (2, 75, 7, 282, 2.60, 22.22, 77.60, 4.65),
        (3, 5, 6, 352, 37.50, 33.33, 96.99, 35.29),
    ];
    for (i, (tp, fp, fn_, tn, precision, recall, accuracy, f1)) in rows.iter().enumerate() {
        let m = metrics(&ConfusionMatrix { tp: *tp, fp: *fp, fn_: *fn_, tn: *tn });
        let close = |got: f64, want: f64, what: &str| {
            assert!(
                (got * 100.0 - want).abs() < 0.005,
                "row {i} {what}: got {:.4}, want {want}",
                got * 100.0
            );
        };
        close(m.precision, *precision, "precision");
        close(m.recall, *recall, "recall");
        close(m.accuracy, *accuracy, "accuracy");
        close(m.f1, *f1, "f1");
    }
    finish("criterion 1 (reference metric rows)", started, Duration::from_secs(1));
}

// --- criterion 2: synthetic labels recover exactly the injected days ---

#[test]
fn c2_synthetic_labels_match_injection() {
    let started = Instant::now();
    let dataset = synth_dataset_with_truth(7, 365, 0.05).unwrap();
    let opts = FeatureOptions::default();
    let thresholds = spike_thresholds(&dataset.table, None, 0.95, &opts).unwrap();
    let labels = day_labels(&dataset.table, &thresholds, &opts).unwrap();
    let labeled: BTreeSet<NaiveDate> =
        labels.iter().filter(|l| l.is_spike).map(|l| l.date).collect();
    assert!(labeled.len() <= 19, "labeled {} spike days, expected at most 19", labeled.len());
    assert_eq!(labeled, dataset.injected, "labeled days differ from injected days");

    // the feature-joined view agrees on every day it covers
    let joined = label_spikes(&dataset.table, &thresholds, &opts).unwrap();
    let joined_spikes: BTreeSet<NaiveDate> =
        joined.iter().filter(|d| d.is_spike).map(|d| d.date()).collect();
    assert_eq!(joined_spikes, dataset.injected);
    finish("criterion 2 (synthetic label recovery)", started, Duration::from_secs(1));
}

// --- criterion 3: diversified selection agrees with a plain greedy oracle ---

fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> EmbeddingVector {
    loop {
        let raw: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if let Ok(v) = EmbeddingVector::new(raw) {
            return v;
        }
    }
}

/// Greedy selection written straight from the scoring rule, no shortcuts:
/// score = lambda * sim(query) - (1 - lambda) * max cosine to selected,
/// ties by higher query similarity, then earlier date.
fn oracle_mmr(pool: &[Candidate], k: usize, lambda: f64, anchor: Option<NaiveDate>) -> Vec<NaiveDate> {
    let mut selected: Vec<usize> = Vec::new();
    let mut remaining: Vec<usize> = (0..pool.len()).collect();
    if let Some(a) = anchor {
        let idx = pool.iter().position(|c| c.date == a).unwrap();
        selected.push(idx);
        remaining.retain(|&i| i != idx);
    }
    while selected.len() < k && !remaining.is_empty() {
        let mut best: Option<(usize, f64)> = None;
        for &i in &remaining {
            let diversity = selected
                .iter()
                .map(|&s| pool[i].vector.cosine(&pool[s].vector).unwrap())
                .fold(f64::NEG_INFINITY, f64::max)
                .max(0.0);
            let diversity = if selected.is_empty() { 0.0 } else { diversity };
            let score = lambda * pool[i].similarity - (1.0 - lambda) * diversity;
            let better = match best {
                None => true,
                Some((j, s)) => {
                    score > s
                        || (score == s && pool[i].similarity > pool[j].similarity)
                        || (score == s
                            && pool[i].similarity == pool[j].similarity
                            && pool[i].date < pool[j].date)
                }
            };
            if better {
                best = Some((i, score));
            }
        }
        let (winner, _) = best.unwrap();
        selected.push(winner);
        remaining.retain(|&i| i != winner);
    }
    selected.truncate(k);
    selected.into_iter().map(|i| pool[i].date).collect()
}

#[test]
fn c3_mmr_matches_greedy_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let lambdas = [0.0, 0.25, 0.5, 0.75, 1.0];
    for trial in 0..1000 {
        let pool_len = rng.gen_range(1..=8);
        let pool: Vec<Candidate> = (0..pool_len)
            .map(|i| Candidate {
                date: date(2023, 1, 1) + chrono::Duration::days(i as i64),
                is_spike: rng.gen_bool(0.3),
                similarity: (rng.gen_range(-100..=100) as f64) / 100.0,
                vector: random_vector(&mut rng, 8),
            })
            .collect();
        let k = rng.gen_range(0..=3).min(pool_len);
        let lambda = lambdas[rng.gen_range(0..lambdas.len())];
        let anchor = if k > 0 && rng.gen_bool(0.5) {
            Some(pool[rng.gen_range(0..pool_len)].date)
        } else {
            None
        };
        let got: Vec<NaiveDate> = mmr_select(&pool, k, lambda, anchor)
            .unwrap()
            .into_iter()
            .map(|c| c.date)
            .collect();
        let want = oracle_mmr(&pool, k, lambda, anchor);
        assert_eq!(got, want, "trial {trial}: k={k} lambda={lambda} anchor={anchor:?}");
    }
    finish("criterion 3 (mmr greedy oracle, 1000 pools)", started, Duration::from_secs(10));
}

// --- criterion 4: index search agrees with brute force ---

#[test]
fn c4_search_matches_brute_force() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for trial in 0..500 {
        let n = rng.gen_range(1..=64);
        let entries: Vec<IndexEntry> = (0..n)
            .map(|i| IndexEntry {
                date: date(2023, 1, 1) + chrono::Duration::days(i as i64),
                is_spike: rng.gen_bool(0.2),
                vector: random_vector(&mut rng, 32),
            })
            .collect();
        let index =
            VectorIndex::from_entries("test", "v1", 32, entries.clone()).unwrap();
        let query = random_vector(&mut rng, 32);
        let k = rng.gen_range(1..=10);
        let cutoff = if rng.gen_bool(0.5) {
            Some(date(2023, 1, 1) + chrono::Duration::days(rng.gen_range(0..=n) as i64))
        } else {
            None
        };
        let filter = |e: &IndexEntry| cutoff.map_or(true, |c| e.date < c);

        // brute force: same similarity, stable-sorted descending
        let mut expected: Vec<(NaiveDate, f64)> = entries
            .iter()
            .filter(|e| filter(e))
            .map(|e| (e.date, query.cosine(&e.vector).unwrap()))
            .collect();
        expected.sort_by(|a, b| b.1.total_cmp(&a.1));
        expected.truncate(k);

        let hits = index.search(&query, k, filter).unwrap();
        let got: Vec<(NaiveDate, f64)> = hits.iter().map(|h| (h.date, h.similarity)).collect();
        assert_eq!(got, expected, "trial {trial}: k={k} cutoff={cutoff:?}");
    }
    finish("criterion 4 (search brute-force oracle, 500 indices)", started, Duration::from_secs(10));
}

// --- criterion 5: threshold optimizers agree with exhaustive scanning ---

/// Independent scan: every distinct score plus a cut above all of them and
/// 0.0, objective evaluated by direct counting, ties to the highest cut.
fn oracle_best(points: &[(f64, bool)], f1_not_j: bool) -> f64 {
    let mut cuts: Vec<f64> = points.iter().map(|p| p.0).collect();
    cuts.sort_by(|a, b| b.total_cmp(a));
    cuts.dedup();
    let mut all = vec![cuts[0] + 1.0];
    all.extend(cuts);
    if *all.last().unwrap() != 0.0 {
        all.push(0.0);
    }
    let positives = points.iter().filter(|p| p.1).count() as f64;
    let negatives = points.len() as f64 - positives;
    let mut best: Option<(f64, f64)> = None;
    for &cut in &all {
        let tp = points.iter().filter(|p| p.0 >= cut && p.1).count() as f64;
        let fp = points.iter().filter(|p| p.0 >= cut && !p.1).count() as f64;
        let fn_ = positives - tp;
        let value = if f1_not_j {
            let precision = if tp + fp == 0.0 { 0.0 } else { tp / (tp + fp) };
            let recall = if positives == 0.0 { 0.0 } else { tp / (tp + fn_) };
            if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) }
        } else {
            tp / positives - fp / negatives
        };
        match best {
            Some((_, v)) if value <= v => {}
            _ => best = Some((cut, value)),
        }
    }
    best.unwrap().0
}

#[test]
fn c5_threshold_optimizers_match_exhaustive_scan() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut trials = 0;
    while trials < 500 {
        let n = rng.gen_range(2..=60);
        let points: Vec<(f64, bool)> = (0..n)
            .map(|_| ((rng.gen_range(0..=100) as f64) / 100.0, rng.gen_bool(0.25)))
            .collect();
        if !points.iter().any(|p| p.1) || points.iter().all(|p| p.1) {
            continue;
        }
        trials += 1;
        let series = ScoredSeries::new(
            points
                .iter()
                .enumerate()
                .map(|(i, (score, is_spike))| ScoredPoint {
                    date: date(2023, 1, 1) + chrono::Duration::days(i as i64),
                    score: *score,
                    is_spike: *is_spike,
                })
                .collect(),
        )
        .unwrap();

        let roc = roc_optimal(&series).unwrap();
        assert_eq!(roc, oracle_best(&points, false), "trial {trials}: roc cut");
        let pr = pr_optimal(&series).unwrap();
        assert_eq!(pr, oracle_best(&points, true), "trial {trials}: pr cut");

        // strictly increasing relabeling must not change the decision
        // partition the optimizer picks
        let mapped: Vec<(f64, bool)> =
            points.iter().map(|(s, l)| (s / 2.0 + 0.25, *l)).collect();
        let mapped_series = ScoredSeries::new(
            mapped
                .iter()
                .enumerate()
                .map(|(i, (score, is_spike))| ScoredPoint {
                    date: date(2023, 1, 1) + chrono::Duration::days(i as i64),
                    score: *score,
                    is_spike: *is_spike,
                })
                .collect(),
        )
        .unwrap();
        let mapped_roc = roc_optimal(&mapped_series).unwrap();
        assert_eq!(
            confusion(&mapped_series, mapped_roc).unwrap(),
            confusion(&series, roc).unwrap(),
            "trial {trials}: relabeled roc partition"
        );
        let mapped_pr = pr_optimal(&mapped_series).unwrap();
        assert_eq!(
            confusion(&mapped_series, mapped_pr).unwrap(),
            confusion(&series, pr).unwrap(),
            "trial {trials}: relabeled pr partition"
        );
    }
    finish("criterion 5 (threshold optimizer oracle, 500 series)", started, Duration::from_secs(10));
}

// --- criterion 6: predictions cannot see the future ---

#[test]
fn c6_causality() {
    let started = Instant::now();
    let dataset = synth_dataset_with_truth(31, 140, 0.07).unwrap();
    let opts = FeatureOptions::default();
    let train: spikecast::DateRange = "2023-01-01..2023-03-31".parse().unwrap();

    let build = |table: &spikecast::ingest::DailyTable| {
        let thresholds = spike_thresholds(table, Some(train), 0.95, &opts).unwrap();
        let days = label_spikes(table, &thresholds, &opts).unwrap();
        let embedder = HashEmbedder::new(64).unwrap();
        let docs: Vec<spikecast::embed::IndexDoc> = days
            .iter()
            .map(|d| spikecast::embed::IndexDoc {
                date: d.date(),
                is_spike: d.is_spike,
                text: render_description(&d.features, DEFAULT_TEMPLATE).unwrap(),
            })
            .collect();
        let index = spikecast::embed::build_index(&docs, &embedder, DEFAULT_TEMPLATE, 2).unwrap();
        let by_date: std::collections::BTreeMap<NaiveDate, _> =
            days.iter().map(|d| (d.date(), d.clone())).collect();
        (days, index, by_date)
    };

    let (days, index, by_date) = build(&dataset.table);
    let embedder = HashEmbedder::new(64).unwrap();
    let model = MockModel;

    // every example in every prompt is strictly before its query date
    let queries: Vec<_> = days.iter().filter(|d| d.date() > date(2023, 4, 15)).collect();
    assert!(queries.len() >= 20);
    for query in &queries {
        let ctx = PredictContext {
            index: &index,
            days: &by_date,
            embedder: &embedder,
            template: DEFAULT_TEMPLATE,
            system_prompt: None,
            k: 4,
            lambda: 0.5,
            pool_size: 10,
        };
        let detail = predict_day(&ctx, &model, &query.features).unwrap();
        for example in &detail.examples {
            assert!(
                example.date < query.date(),
                "query {} saw example {}",
                query.date(),
                example.date
            );
        }
    }

    // wrecking prices after the query date changes nothing about its
    // prediction: features, retrieval, prompt, and verdict all match
    let query = queries[0];
    let later = query.date() + chrono::Duration::days(7);
    assert!(dataset.table.index_of(later).is_some());
    let perturbed = dataset
        .table
        .with_hourly_value("rtp", later, 16, 99_999.0)
        .unwrap();
    let (_, index_b, by_date_b) = build(&perturbed);
    let ctx_a = PredictContext {
        index: &index,
        days: &by_date,
        embedder: &embedder,
        template: DEFAULT_TEMPLATE,
        system_prompt: None,
        k: 4,
        lambda: 0.5,
        pool_size: 10,
    };
    let ctx_b = PredictContext { index: &index_b, days: &by_date_b, ..ctx_a };
    let before = predict_day(&ctx_a, &model, &query.features).unwrap();
    let after = predict_day(&ctx_b, &model, &query.features).unwrap();
    assert_eq!(before.prompt.render(), after.prompt.render());
    assert_eq!(before.prediction, after.prediction);
    finish("criterion 6 (causality)", started, Duration::from_secs(10));
}

// --- criterion 7: two fresh end-to-end runs are byte-identical ---

#[test]
fn c7_end_to_end_determinism() {
    let started = Instant::now();
    let mut config = RunConfig::synth_defaults();
    config.data.synth = Some(SynthConfig { seed: 7, n_days: 200, spike_rate: 0.05 });
    config.windows.train = "2023-01-01..2023-04-30".parse().unwrap();
    config.windows.test = "2023-05-01..2023-07-19".parse().unwrap();

    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let pipeline = Pipeline::new(config.clone(), dir.path().join(name)).unwrap();
        let summary = pipeline.run_all().unwrap();
        assert!(summary.predicted + summary.skipped == 80);
        (
            std::fs::read(pipeline.path("predictions.jsonl")).unwrap(),
            std::fs::read(pipeline.path("report.json")).unwrap(),
        )
    };
    let (pred_a, report_a) = run("a");
    let (pred_b, report_b) = run("b");
    assert!(!pred_a.is_empty() && !report_a.is_empty());
    assert_eq!(pred_a, pred_b, "predictions.jsonl differs between fresh runs");
    assert_eq!(report_a, report_b, "report.json differs between fresh runs");
    finish("criterion 7 (end-to-end determinism, 200 days)", started, Duration::from_secs(30));
}

// --- criterion 8: reply parsing never panics and never guesses ---

#[test]
fn c8_parser_robustness() {
    let started = Instant::now();
    let long_ramble = format!("{} yes {}", "word ".repeat(2000), "0.5");
    let malformed: Vec<String> = vec![
        "".into(),
        "   \n\n\t  ".into(),
        "Maybe".into(),
        "Yes".into(),
        "0.75".into(),
        "Yes No\n0.5".into(),
        "yes no maybe so".into(),
        "Confidence: 0.9".into(),
        "**Yes**".into(),
        "- yes\n- 0.8".into(),
        "YES!!!\nconfidence: 85%".into(),
        "Answer:\nYes\n\n\n0.62".into(),
        "no\n-0.3".into(),
        "no\n250%".into(),
        "Yes\n1.00000001".into(),
        "Yes\nNaN".into(),
        "yes\ninf".into(),
        "Yes\n.75".into(),
        "Yes\n0,75".into(),
        "sí\n0.9".into(),
        "да\n0.9".into(),
        "know\n0.4".into(),
        "eyes\n0.4".into(),
        "the answer is unknowable".into(),
        "```\nYes\n0.8\n```".into(),
        "{\"answer\": \"yes\", \"confidence\": 0.7}".into(),
        "<answer>No</answer><confidence>0.6</confidence>".into(),
        "Yes\r\n0.9\r\n".into(),
        "\u{feff}Yes\n0.8".into(),
        "Yes 0.8".into(),
        "0.8\nYes".into(),
        "first line\nsecond line\nthird".into(),
        "yes\n\u{0}0.5".into(),
        long_ramble,
    ];
    assert!(malformed.len() >= 30);
    let mut parsed = 0;
    let mut rejected = 0;
    for raw in &malformed {
        match parse_response(raw) {
            Ok(reply) => {
                parsed += 1;
                assert!(
                    (0.0..=1.0).contains(&reply.confidence),
                    "confidence {} out of range for {raw:?}",
                    reply.confidence
                );
            }
            Err(_) => rejected += 1,
        }
    }
    assert!(parsed > 0 && rejected > 0, "expected a mix, got {parsed} parsed / {rejected} rejected");

    // the offline model's replies always parse, whatever the examples
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    for _ in 0..1000 {
        let n = rng.gen_range(0..=8);
        let examples: Vec<Candidate> = (0..n)
            .map(|i| Candidate {
                date: date(2023, 1, 1) + chrono::Duration::days(i as i64),
                is_spike: rng.gen_bool(0.4),
                similarity: rng.gen_range(-1.0..=1.0),
                vector: random_vector(&mut rng, 8),
            })
            .collect();
        let reply = mock_predict(&examples);
        let parsed = parse_response(&reply).expect("mock reply must parse");
        assert!((0.0..=1.0).contains(&parsed.confidence));
        let score = spikecast::llm::spike_score(parsed.spike_call, parsed.confidence);
        assert!((0.0..=1.0).contains(&score));
    }
    finish("criterion 8 (parser robustness)", started, Duration::from_secs(10));
}

// --- criterion 9: a two-month training window still yields a full report ---

#[test]
fn c9_limited_training_window_report() {
    let started = Instant::now();
    let out = tempfile::tempdir().unwrap();
    let exe = env!("CARGO_BIN_EXE_spikecast");
    let run = std::process::Command::new(exe)
        .args(["backtest", "--limited-data", "--seed", "7", "--out"])
        .arg(out.path())
        .output()
        .unwrap();
    assert!(
        run.status.success(),
        "backtest run failed: {}",
        String::from_utf8_lossy(&run.stderr)
    );

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("report.json")).unwrap())
            .unwrap();
    let rows = report["rows"].as_array().unwrap();
    let labels: Vec<&str> = rows.iter().map(|r| r["label"].as_str().unwrap()).collect();
    assert_eq!(labels, ["fixed(0.5)", "roc-optimal", "pr-optimal"]);
    let days = report["days"].as_u64().unwrap();
    assert_eq!(days, 122);
    for row in rows {
        let c = &row["confusion"];
        let total = c["tp"].as_u64().unwrap()
            + c["fp"].as_u64().unwrap()
            + c["fn"].as_u64().unwrap()
            + c["tn"].as_u64().unwrap();
        assert_eq!(total, days, "confusion counts must cover every evaluated day");
        for metric in ["precision", "recall", "accuracy", "f1"] {
            let v = row["metrics"][metric].as_f64().unwrap();
            assert!((0.0..=1.0).contains(&v), "{metric} out of range");
        }
    }

    // the manifest proves the shortened window was actually used
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["config"]["windows"]["train"], "2023-07-01..2023-08-31");

    let table = std::fs::read_to_string(out.path().join("table.txt")).unwrap();
    for heading in ["Fixed (0.5)", "ROC-optimal", "PR-optimal"] {
        assert!(table.contains(heading), "table.txt missing {heading}");
    }
    finish("criterion 9 (two-month training report)", started, Duration::from_secs(30));
}
