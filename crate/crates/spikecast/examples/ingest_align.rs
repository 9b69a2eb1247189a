//! Load hourly and daily CSVs with different layouts and align them into
//! one daily table, dropping incomplete days with reasons.

use std::io::Write;

use spikecast::ingest::{align_daily, load_series_csv, AlignOptions, CsvSchema};

fn main() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;

    // hourly prices, but 2024-01-02 is missing hour 7
    let price_path = dir.path().join("prices.csv");
    let mut f = std::fs::File::create(&price_path)?;
    writeln!(f, "date,hour,price")?;
    for day in ["2024-01-01", "2024-01-02", "2024-01-03"] {
        for hour in 0..24 {
            if day == "2024-01-02" && hour == 7 {
                continue;
            }
            writeln!(f, "{day},{hour},{}", 20.0 + hour as f64)?;
        }
    }

    // daily temperature with a different date format
    let temp_path = dir.path().join("temp.csv");
    let mut f = std::fs::File::create(&temp_path)?;
    writeln!(f, "day,celsius")?;
    for (day, t) in [("01/01/2024", 3.5), ("01/02/2024", 4.0), ("01/03/2024", 2.0)] {
        writeln!(f, "{day},{t}")?;
    }

    let prices = load_series_csv(
        &price_path,
        &CsvSchema::hourly("rtp", "$/MWh", "date", "hour", "price"),
    )?;
    let temperature =
        load_series_csv(&temp_path, &CsvSchema::daily("temperature", "C", "day", "celsius"))?;

    let (table, exclusions) =
        align_daily(&[prices, temperature], AlignOptions { fill_single_gap: false })?;

    println!("aligned days: {:?}", table.dates());
    println!("hourly columns: {:?}", table.hourly_names().collect::<Vec<_>>());
    println!("daily columns: {:?}", table.daily_names().collect::<Vec<_>>());
    for excluded in &exclusions.excluded {
        println!("dropped {}: {}", excluded.date, excluded.reason);
    }

    // the lone gap can be interpolated instead
    let prices = load_series_csv(
        &price_path,
        &CsvSchema::hourly("rtp", "$/MWh", "date", "hour", "price"),
    )?;
    let temperature =
        load_series_csv(&temp_path, &CsvSchema::daily("temperature", "C", "day", "celsius"))?;
    let (filled, _) = align_daily(&[prices, temperature], AlignOptions { fill_single_gap: true })?;
    println!("\nwith fill_single_gap: {} days survive", filled.len());
    Ok(())
}
