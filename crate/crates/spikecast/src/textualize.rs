//! Rendering feature vectors into short plain-text day descriptions.
//!
//! Descriptions are what gets embedded and what the model reads, so the
//! wording is part of the contract: template `v1` is frozen and new
//! phrasings must be added as new template ids.

use thiserror::Error;

use crate::features::FeatureVector;

/// Identifier of the built-in description template.
pub const DEFAULT_TEMPLATE: &str = "v1";

/// True when `name` is a template this crate can render.
pub fn is_known_template(name: &str) -> bool {
    name == DEFAULT_TEMPLATE
}

/// Hard cap on rendered description length, in characters.
pub const MAX_DESCRIPTION_CHARS: usize = 2000;

#[derive(Debug, Error)]
pub enum TextualizeError {
    #[error("unknown template {name:?} (built-in: v1)")]
    UnknownTemplate { name: String },

    #[error("description is {len} chars, over the {max} limit")]
    TooLong { len: usize, max: usize },
}

const MONTH_NAMES: [&str; 12] = [
    "January",
    "February",
    "March",
    "April",
    "May",
    "June",
    "July",
    "August",
    "September",
    "October",
    "November",
    "December",
];

/// Render one day's description: eight lines, one per feature group, every
/// number with two decimals. Deterministic in the input.
pub fn render_description(
    features: &FeatureVector,
    template: &str,
) -> Result<String, TextualizeError> {
    if !is_known_template(template) {
        return Err(TextualizeError::UnknownTemplate { name: template.to_string() });
    }
    let f = features;
    let month = MONTH_NAMES[(f.month - 1) as usize];
    let lines = [
        format!(
            "day-ahead price mean {:.2} $/MWh, std {:.2}, max {:.2}, min {:.2}, momentum {:.2}, 3-day mean {:.2}, 3-day std {:.2}",
            f.dap_mean, f.dap_std, f.dap_max, f.dap_min, f.dap_momentum, f.dap_mean_3d, f.dap_std_3d
        ),
        format!(
            "previous-day real-time price mean {:.2} $/MWh, std {:.2}",
            f.rtp_mean_lag1, f.rtp_std_lag1
        ),
        format!(
            "net demand forecast mean {:.2} MW, min {:.2}, max {:.2}, std {:.2}, change vs previous actual {:.2}",
            f.net_demand_forecast_mean,
            f.net_demand_forecast_min,
            f.net_demand_forecast_max,
            f.net_demand_forecast_std,
            f.net_demand_diff
        ),
        format!(
            "previous-day net demand actual mean {:.2} MW, std {:.2}",
            f.net_demand_actual_mean_lag1, f.net_demand_actual_std_lag1
        ),
        format!(
            "reserve forecast mean {:.2} MW, std {:.2}, max {:.2}, min {:.2}",
            f.reserve_mean, f.reserve_std, f.reserve_max, f.reserve_min
        ),
        format!(
            "temperature max {:.2} C, min {:.2}, spread {:.2}; wind speed max {:.2} m/s, min {:.2}",
            f.temp_max, f.temp_min, f.temp_diff, f.wind_speed_max, f.wind_speed_min
        ),
        format!("renewable share of demand forecast {:.2}", f.pct_renewable_forecast),
        format!("calendar date {} {}", month, f.day),
    ];
    let text = lines.join("\n");
    if text.chars().count() > MAX_DESCRIPTION_CHARS {
        return Err(TextualizeError::TooLong {
            len: text.chars().count(),
            max: MAX_DESCRIPTION_CHARS,
        });
    }
    Ok(text)
}

/// Description plus the resolved label line, for few-shot example blocks.
pub fn render_example(
    features: &FeatureVector,
    is_spike: bool,
    template: &str,
) -> Result<String, TextualizeError> {
    let description = render_description(features, template)?;
    let verdict = if is_spike { "Yes" } else { "No" };
    Ok(format!("{description}\nSpike day: {verdict}"))
}
