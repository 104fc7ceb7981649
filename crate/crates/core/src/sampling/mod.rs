//! Probe scan plans: which pixels are visited, in what order, and for how
//! long.

mod dose;
mod generators;
mod metrics;
mod plan;

pub use dose::{constrained_dwell, DoseBudget};
pub use generators::{
    auto_hop_amplitude, line_base_rows, linehop_plan, raster_plan, uds_plan, LineHopConfig, LineHopParams,
};
pub use metrics::{plan_metrics, PlanMetrics};
pub use plan::{Scheme, SamplingPlan};

use crate::error::{Error, Result};

pub(crate) use plan::parse_position;

/// Validates a sampling ratio, accepting `0 < ratio <= 1`.
pub fn check_ratio(ratio: f64) -> Result<f64> {
    if ratio.is_finite() && ratio > 0.0 && ratio <= 1.0 {
        Ok(ratio)
    } else {
        Err(Error::RatioOutOfRange(ratio))
    }
}

/// Parses a ratio written as a fraction (`0.25`) or a percentage (`25%`).
pub fn parse_ratio(text: &str) -> Result<f64> {
    let t = text.trim();
    let value = match t.strip_suffix('%') {
        Some(p) => p.trim().parse::<f64>().map(|v| v / 100.0),
        None => t.parse::<f64>(),
    }
    .map_err(|_| Error::InvalidParameter(format!("cannot parse ratio {text:?}")))?;
    check_ratio(value)
}
