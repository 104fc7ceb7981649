use std::collections::HashSet;

use crate::error::{Error, Result};

use super::SamplingPlan;

/// Hardware-feasibility summary of a plan.
///
/// Jumps are Chebyshev distances between consecutive probe positions, the
/// larger of the two coil deflections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanMetrics {
    pub max_jump: usize,
    pub mean_jump: f64,
    /// Positions visited more than once (each repeat counts).
    pub overlap_count: usize,
}

pub fn plan_metrics(plan: &SamplingPlan) -> Result<PlanMetrics> {
    if plan.positions.len() < 2 {
        return Err(Error::EmptyPlan);
    }
    let jumps: Vec<usize> = plan
        .positions
        .windows(2)
        .map(|w| w[0].0.abs_diff(w[1].0).max(w[0].1.abs_diff(w[1].1)))
        .collect();
    let mut seen = HashSet::with_capacity(plan.positions.len());
    let overlap_count = plan.positions.iter().filter(|p| !seen.insert(**p)).count();
    Ok(PlanMetrics {
        max_jump: jumps.iter().copied().max().unwrap_or(0),
        mean_jump: jumps.iter().sum::<usize>() as f64 / jumps.len() as f64,
        overlap_count,
    })
}
