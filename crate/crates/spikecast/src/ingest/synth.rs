//! Deterministic synthetic market data for tests and demos.

use std::collections::BTreeSet;
use std::f64::consts::TAU;

use chrono::{Duration, NaiveDate};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{align_daily, AlignOptions, DailyTable, HourlyPoint, HourlySeries, IngestError, SeriesData};

/// First calendar date of every synthetic table.
pub const SYNTH_START_DATE: NaiveDate = match NaiveDate::from_ymd_opt(2023, 1, 1) {
    Some(d) => d,
    None => unreachable!(),
};

/// Earliest day index eligible for spike injection. The first few days are
/// kept quiet so rolling history windows exist for every injected day.
const WARMUP_DAYS: usize = 3;

/// Hours receiving the injected price excursion.
const SPIKE_HOURS: std::ops::RangeInclusive<usize> = 14..=19;

/// A synthetic table plus the ground-truth set of injected spike dates.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub table: DailyTable,
    pub injected: BTreeSet<NaiveDate>,
}

/// Generate a synthetic hourly dataset with `ceil(spike_rate * n_days)`
/// injected real-time price spikes.
///
/// Same arguments always produce byte-identical data. Requires
/// `n_days >= 30` and `0 < spike_rate < 0.5`. Injected days add
/// 400–900 $/MWh to real-time prices during the evening ramp, which pushes
/// their intraday standard deviation far above (at least five times) the
/// calm-day maximum.
pub fn synth_dataset(seed: u64, n_days: usize, spike_rate: f64) -> Result<DailyTable, IngestError> {
    Ok(synth_dataset_with_truth(seed, n_days, spike_rate)?.table)
}

/// [`synth_dataset`] plus the injected spike dates.
pub fn synth_dataset_with_truth(
    seed: u64,
    n_days: usize,
    spike_rate: f64,
) -> Result<SynthDataset, IngestError> {
    if n_days < 30 {
        return Err(IngestError::InvalidParams {
            message: format!("n_days must be at least 30, got {n_days}"),
        });
    }
    if !(spike_rate > 0.0 && spike_rate < 0.5) {
        return Err(IngestError::InvalidParams {
            message: format!("spike_rate must be in (0, 0.5), got {spike_rate}"),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_inject = (spike_rate * n_days as f64).ceil() as usize;
    let injected_idx: BTreeSet<usize> = rand::seq::index::sample(&mut rng, n_days - WARMUP_DAYS, n_inject)
        .into_iter()
        .map(|i| i + WARMUP_DAYS)
        .collect();

    let mut cols: [Vec<HourlyPoint>; 9] = Default::default();
    let names_units = [
        ("dap", "$/MWh"),
        ("rtp", "$/MWh"),
        ("demand_forecast", "MW"),
        ("renewable_forecast", "MW"),
        ("net_demand_forecast", "MW"),
        ("net_demand_actual", "MW"),
        ("reserve_forecast", "MW"),
        ("temperature", "C"),
        ("wind_speed", "m/s"),
    ];

    let mut injected = BTreeSet::new();
    for i in 0..n_days {
        let date = SYNTH_START_DATE + Duration::days(i as i64);
        let is_spike = injected_idx.contains(&i);
        if is_spike {
            injected.insert(date);
        }
        let annual = TAU * (i % 365) as f64 / 365.0;
        let m_temp = 12.0 + 10.0 * (annual - TAU / 4.0).sin() + rng.gen_range(-1.5..1.5);
        let m_wind = (7.0 + 2.5 * (annual + 1.0).sin() + rng.gen_range(-1.2..1.2)).max(0.3);
        let m_demand = 900.0 + 120.0 * (annual + TAU / 4.0).sin() + rng.gen_range(-25.0..25.0);

        let mut day = [[0.0f64; 24]; 9];
        for h in 0..24 {
            let hf = h as f64;
            let temp = m_temp + 4.0 * (TAU * (hf - 8.0) / 24.0).sin() + rng.gen_range(-0.6..0.6);
            let wind =
                (m_wind + 1.2 * (TAU * (hf - 3.0) / 24.0).sin() + rng.gen_range(-0.5..0.5)).max(0.1);
            let demand =
                m_demand + 140.0 * (TAU * (hf - 12.0) / 24.0).sin() + rng.gen_range(-12.0..12.0);
            let renewable = (0.25 * demand + 18.0 * (wind - 7.0) + rng.gen_range(-10.0..10.0))
                .clamp(5.0, 0.8 * demand);
            let net_forecast = demand - renewable;
            let net_actual = net_forecast + rng.gen_range(-15.0..15.0);
            let reserve =
                (130.0 + 20.0 * (TAU * (hf - 14.0) / 24.0).sin() + rng.gen_range(-8.0..8.0)).max(10.0);
            let dap = 18.0 + 0.025 * net_forecast + rng.gen_range(-1.5..1.5);
            let rtp = dap + rng.gen_range(-2.5..2.5);
            day[0][h] = dap;
            day[1][h] = rtp;
            day[2][h] = demand;
            day[3][h] = renewable;
            day[4][h] = net_forecast;
            day[5][h] = net_actual;
            day[6][h] = reserve;
            day[7][h] = temp;
            day[8][h] = wind;
        }
        if is_spike {
            for h in SPIKE_HOURS {
                day[0][h] += rng.gen_range(30.0..80.0);
            }
            for h in SPIKE_HOURS {
                day[1][h] += rng.gen_range(400.0..900.0);
            }
        }
        for (c, col) in cols.iter_mut().enumerate() {
            for h in 0..24 {
                col.push(HourlyPoint { date, hour: h as u8, value: day[c][h] });
            }
        }
    }

    let series: Vec<SeriesData> = names_units
        .iter()
        .zip(cols)
        .map(|((name, unit), points)| {
            HourlySeries::new(*name, *unit, points).map(SeriesData::Hourly)
        })
        .collect::<Result<_, _>>()?;
    let (table, report) = align_daily(&series, AlignOptions::default())?;
    debug_assert!(report.is_empty());
    Ok(SynthDataset { table, injected })
}
