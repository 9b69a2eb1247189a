use std::path::PathBuf;

use anyhow::{bail, Context};
use chrono::{Months, NaiveDate};
use clap::{Parser, Subcommand};

use spikecast::config::RunConfig;
use spikecast::dates::DateRange;
use spikecast::eval::render_table;
use spikecast::ingest::write_hourly_csv;
use spikecast::pipeline::{read_predictions, Pipeline};

#[derive(Parser)]
#[command(name = "spikecast", version, about = "Few-shot spike-day classification for electricity prices")]
struct Cli {
    /// Run configuration TOML; defaults to a built-in synthetic setup
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for run artifacts
    #[arg(long, global = true, default_value = "out/run")]
    out: PathBuf,

    /// Override the synthetic data seed
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Recompute predictions already present in predictions.jsonl
    #[arg(long, global = true)]
    force: bool,

    /// Override the training window
    #[arg(long, global = true, value_name = "START..END")]
    train_window: Option<DateRange>,

    /// Shrink the training window to its final two months
    #[arg(long, global = true)]
    limited_data: bool,

    /// Fit optimized thresholds on test days at or before this date and
    /// evaluate strictly after it
    #[arg(long, global = true, value_name = "DATE")]
    calibration_split: Option<NaiveDate>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset and write its hourly CSVs
    Synth,
    /// Compute daily feature rows and labels
    Featurize,
    /// Write per-day spike labels
    Label,
    /// Build the embedding index over all labeled days
    Index,
    /// Predict every test-window day
    Predict,
    /// Predict anything missing, then score and write all reports
    Backtest,
    /// Rebuild reports from predictions already on disk
    Report,
}

fn effective_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)
            .with_context(|| format!("loading config {}", path.display()))?,
        None => RunConfig::synth_defaults(),
    };
    if let Some(seed) = cli.seed {
        match &mut config.data.synth {
            Some(synth) => synth.seed = seed,
            None => bail!("--seed applies only to synthetic data"),
        }
    }
    if let Some(window) = cli.train_window {
        config.windows.train = window;
    }
    if cli.limited_data {
        let train = &mut config.windows.train;
        let floor = (train.end + chrono::Duration::days(1))
            .checked_sub_months(Months::new(2))
            .context("train window end underflows the calendar")?;
        if floor > train.start {
            train.start = floor;
        }
    }
    if let Some(split) = cli.calibration_split {
        config.eval.calibration_split = Some(split);
    }
    config.validate()?;
    Ok(config)
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let config = effective_config(&cli)?;
    let pipeline = Pipeline::new(config, &cli.out)?.with_force(cli.force);
    pipeline.write_manifest()?;

    match cli.command {
        Command::Synth => {
            let table = pipeline.load_table()?;
            let data_dir = pipeline.path("data");
            std::fs::create_dir_all(&data_dir)?;
            let names: Vec<String> = table.hourly_names().map(str::to_string).collect();
            for name in &names {
                let series = table.to_hourly_series(name)?;
                write_hourly_csv(data_dir.join(format!("{name}.csv")), &series)?;
            }
            println!("wrote {} days x {} series under {}", table.len(), names.len(), data_dir.display());
        }
        Command::Featurize => {
            let table = pipeline.load_table()?;
            let data = pipeline.featurize(&table)?;
            let spikes = data.days.iter().filter(|d| d.is_spike).count();
            println!(
                "{} feature rows, {} spike days (sigma threshold {:.3}) -> {}",
                data.days.len(),
                spikes,
                data.thresholds.rtp_sigma,
                pipeline.path("features.csv").display()
            );
        }
        Command::Label => {
            let table = pipeline.load_table()?;
            let labels = pipeline.label(&table)?;
            let spikes = labels.iter().filter(|l| l.is_spike).count();
            let dap = labels.iter().filter(|l| l.is_dap_spike).count();
            println!(
                "{} days labeled: {} real-time spikes, {} day-ahead spikes -> {}",
                labels.len(),
                spikes,
                dap,
                pipeline.path("labels.csv").display()
            );
        }
        Command::Index => {
            let table = pipeline.load_table()?;
            let data = pipeline.featurize(&table)?;
            let index = pipeline.build_index(&data)?;
            println!(
                "indexed {} days ({} dim, provider {}) -> {}",
                index.entries().len(),
                index.dimension(),
                index.provider(),
                pipeline.path("index.json").display()
            );
        }
        Command::Predict => {
            let table = pipeline.load_table()?;
            let data = pipeline.featurize(&table)?;
            let index = pipeline.build_index(&data)?;
            let outcome = pipeline.predict(&index, &data)?;
            println!(
                "predicted {} days, skipped {} already done -> {}",
                outcome.predicted,
                outcome.skipped,
                pipeline.path("predictions.jsonl").display()
            );
        }
        Command::Backtest => {
            let summary = pipeline.run_all()?;
            println!(
                "predicted {} days, skipped {}; artifacts under {}",
                summary.predicted,
                summary.skipped,
                summary.out_dir.display()
            );
            println!();
            print!("{}", render_table(&summary.report));
        }
        Command::Report => {
            let pred_path = pipeline.path("predictions.jsonl");
            let predictions = read_predictions(&pred_path).with_context(|| {
                format!("reading {}; run `spikecast predict` first", pred_path.display())
            })?;
            let table = pipeline.load_table()?;
            let data = pipeline.featurize(&table)?;
            let report = pipeline.backtest(&predictions, &data)?;
            print!("{}", render_table(&report));
        }
    }
    Ok(())
}
