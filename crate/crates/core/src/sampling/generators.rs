use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{derived_rng, rng_from_seed};

use super::{check_ratio, SamplingPlan, Scheme};

/// Full row-major raster over every pixel.
pub fn raster_plan(height: usize, width: usize, dwell: f64) -> SamplingPlan {
    let positions = (0..height)
        .flat_map(|r| (0..width).map(move |c| (r, c)))
        .collect();
    SamplingPlan {
        height,
        width,
        positions,
        dwell,
        scheme: Scheme::Raster,
        seed: 0,
    }
}

/// Uniform density sampling: `round(ratio * N)` distinct pixels drawn
/// uniformly without replacement, visited in row-major order.
pub fn uds_plan(height: usize, width: usize, ratio: f64, dwell: f64, seed: u64) -> Result<SamplingPlan> {
    check_ratio(ratio)?;
    let n = height * width;
    let m = (ratio * n as f64).round() as usize;
    if m == 0 {
        return Err(Error::InvalidParameter(format!(
            "ratio {ratio} selects no pixels of a {height}x{width} image"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut picked = index::sample(&mut rng, n, m).into_vec();
    picked.sort_unstable();
    Ok(SamplingPlan {
        height,
        width,
        positions: picked.into_iter().map(|i| (i / width, i % width)).collect(),
        dwell,
        scheme: Scheme::Uds,
        seed,
    })
}

/// Parameters of the line-hop scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineHopParams {
    /// Largest perpendicular deviation `h` from a base line, in pixels.
    pub hop_amplitude: usize,
    /// Probability, per column step, that the row offset moves by one.
    pub hop_prob: f64,
    pub seed: u64,
    /// Alternate the column direction on successive lines.
    pub serpentine: bool,
}

impl LineHopParams {
    pub fn new(hop_amplitude: usize, hop_prob: f64, seed: u64) -> Self {
        Self {
            hop_amplitude,
            hop_prob,
            seed,
            serpentine: true,
        }
    }
}

/// Line-hop settings that adapt to the sampling ratio.
///
/// With `amplitude: None` the hop amplitude follows the line spacing at the
/// requested ratio (see [`auto_hop_amplitude`]). By default every column
/// step hops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineHopConfig {
    pub amplitude: Option<usize>,
    pub hop_prob: f64,
    pub serpentine: bool,
}

impl Default for LineHopConfig {
    fn default() -> Self {
        Self {
            amplitude: None,
            hop_prob: 1.0,
            serpentine: true,
        }
    }
}

impl LineHopConfig {
    pub fn params_for(&self, height: usize, ratio: f64, seed: u64) -> LineHopParams {
        let lines = (ratio * height as f64).round() as usize;
        LineHopParams {
            hop_amplitude: self
                .amplitude
                .unwrap_or_else(|| auto_hop_amplitude(height, lines)),
            hop_prob: self.hop_prob,
            seed,
            serpentine: self.serpentine,
        }
    }

    pub fn plan(&self, height: usize, width: usize, ratio: f64, dwell: f64, seed: u64) -> Result<SamplingPlan> {
        check_ratio(ratio)?;
        linehop_plan(height, width, ratio, &self.params_for(height, ratio, seed), dwell)
    }
}

/// `lines` base rows spread evenly over `[0, height)`, each centred in its
/// share of the image.
pub fn line_base_rows(height: usize, lines: usize) -> Vec<usize> {
    let spacing = height as f64 / lines as f64;
    (0..lines)
        .map(|i| (((i as f64 + 0.5) * spacing).floor() as usize).min(height - 1))
        .collect()
}

/// Default hop amplitude for `lines` evenly spaced lines: the largest one
/// that keeps neighbouring bands disjoint, and at least one whenever
/// neighbouring base rows are two or more rows apart.
pub fn auto_hop_amplitude(height: usize, lines: usize) -> usize {
    if lines == 0 || height == 0 {
        return 0;
    }
    let bases = line_base_rows(height, lines);
    let edge = bases[0].min(height - 1 - bases[bases.len() - 1]);
    match bases.windows(2).map(|w| w[1] - w[0]).min() {
        Some(g) if g < 2 => 0,
        Some(g) => ((g - 1) / 2).max(1),
        None => edge,
    }
}

/// Line-hop plan: `L = round(ratio * H)` evenly spaced scan lines, each
/// crossing every column once while its row wanders as a bounded +-1 random
/// walk within `[base - h, base + h]`.
///
/// Neighbouring bands may share rows when `2h` reaches the line spacing. A
/// line then never enters a pixel already taken by the line above it: a hop
/// into a taken pixel falls back to staying, then to the opposite step.
pub fn linehop_plan(
    height: usize,
    width: usize,
    ratio: f64,
    params: &LineHopParams,
    dwell: f64,
) -> Result<SamplingPlan> {
    check_ratio(ratio)?;
    if !(0.0..=1.0).contains(&params.hop_prob) {
        return Err(Error::InvalidParameter(format!(
            "hop probability {} outside [0, 1]",
            params.hop_prob
        )));
    }
    let lines = (ratio * height as f64).round() as usize;
    if lines < 1 || width == 0 {
        return Err(Error::InvalidParameter(format!(
            "ratio {ratio} gives no scan lines on {height} rows"
        )));
    }
    let h = params.hop_amplitude;
    let bases = line_base_rows(height, lines);
    for pair in bases.windows(2) {
        if pair[1] - pair[0] <= h {
            return Err(Error::BandOverlap {
                upper: pair[0],
                lower: pair[1],
                amplitude: h,
            });
        }
    }

    let mut positions = Vec::with_capacity(lines * width);
    // Row of the previous line at each column.
    let mut above: Vec<Option<usize>> = vec![None; width];
    for (line, &base) in bases.iter().enumerate() {
        let lo = base.saturating_sub(h);
        let hi = (base + h).min(height - 1);
        let mut rng = derived_rng(params.seed, &[line as u64]);
        let mut row = base;
        let reverse = params.serpentine && line % 2 == 1;
        let mut rows = vec![0; width];
        for step in 0..width {
            let col = if reverse { width - 1 - step } else { step };
            let taken = above[col];
            let free = |r: usize| Some(r) != taken;
            let mut wanted = row;
            if step > 0 && h > 0 && rng.random_bool(params.hop_prob) {
                wanted = if rng.random_bool(0.5) {
                    (row + 1).min(hi)
                } else {
                    row.saturating_sub(1).max(lo)
                };
            }
            if !free(wanted) {
                let opposite = if wanted > row {
                    row.checked_sub(1).filter(|&r| r >= lo)
                } else {
                    Some(row + 1).filter(|&r| r <= hi)
                };
                wanted = [Some(row), opposite, Some(row + 1).filter(|&r| r <= hi)]
                    .into_iter()
                    .flatten()
                    .find(|&r| free(r))
                    .ok_or_else(|| {
                        Error::InvalidParameter(format!("line {line} has no free row at column {col}"))
                    })?;
            }
            row = wanted;
            rows[col] = row;
            positions.push((row, col));
        }
        above = rows.into_iter().map(Some).collect();
    }
    Ok(SamplingPlan {
        height,
        width,
        positions,
        dwell,
        scheme: Scheme::LineHop,
        seed: params.seed,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;
    use crate::sampling::plan_metrics;

    #[test]
    fn raster_enumerates_row_major() {
        let p = raster_plan(2, 2, 4.0);
        assert_eq!(p.positions, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
        assert_eq!(raster_plan(1, 3, 4.0).len(), 3);
        assert_eq!(raster_plan(5, 7, 1.0).mask().unwrap().count(), 35);
    }

    #[test]
    fn uds_full_ratio_matches_raster() {
        let uds = uds_plan(6, 5, 1.0, 4.0, 9).unwrap();
        assert_eq!(uds.positions, raster_plan(6, 5, 4.0).positions);
    }

    #[test]
    fn uds_count_and_uniqueness() {
        let p = uds_plan(64, 64, 0.25, 4.0, 3).unwrap();
        assert_eq!(p.len(), 1024);
        let set: HashSet<_> = p.positions.iter().collect();
        assert_eq!(set.len(), 1024);
        assert!(matches!(uds_plan(8, 8, 1.5, 1.0, 0), Err(Error::RatioOutOfRange(_))));
        assert!(matches!(uds_plan(8, 8, 0.0, 1.0, 0), Err(Error::RatioOutOfRange(_))));
    }

    #[test]
    fn uds_inclusion_is_uniform() {
        // Monte-Carlo estimate of per-pixel inclusion probability.
        let (h, w, ratio, trials) = (8, 8, 0.3, 10_000);
        let m = (ratio * 64.0_f64).round();
        let mut hits = vec![0u32; h * w];
        for seed in 0..trials {
            for (r, c) in uds_plan(h, w, ratio, 1.0, seed).unwrap().positions {
                hits[r * w + c] += 1;
            }
        }
        let expected = m / 64.0;
        for &k in &hits {
            let f = k as f64 / trials as f64;
            assert!((f - expected).abs() < 0.02, "{f} vs {expected}");
            assert!((f - 0.3).abs() < 0.02 + (expected - 0.3).abs());
        }
    }

    #[test]
    fn zero_amplitude_gives_straight_lines() {
        let p = linehop_plan(64, 32, 0.25, &LineHopParams::new(0, 0.7, 5), 1.0).unwrap();
        let bases = line_base_rows(64, 16);
        assert_eq!(p.len(), 16 * 32);
        for (line, chunk) in p.positions.chunks(32).enumerate() {
            assert!(chunk.iter().all(|&(r, _)| r == bases[line]));
        }
    }

    #[test]
    fn linehop_count_and_uniqueness() {
        let p = linehop_plan(64, 64, 0.25, &LineHopParams::new(1, 0.5, 11), 1.0).unwrap();
        assert_eq!(p.len(), 1024);
        let set: HashSet<_> = p.positions.iter().collect();
        assert_eq!(set.len(), 1024);
    }

    #[test]
    fn linehop_walk_is_bounded() {
        for seed in 0..200 {
            let params = LineHopParams::new(2, 0.6, seed);
            let p = linehop_plan(48, 40, 0.125, &params, 1.0).unwrap();
            let bases = line_base_rows(48, 6);
            for (line, chunk) in p.positions.chunks(40).enumerate() {
                for pair in chunk.windows(2) {
                    assert!(pair[0].0.abs_diff(pair[1].0) <= 1);
                    assert_eq!(pair[0].1.abs_diff(pair[1].1), 1);
                }
                assert!(chunk.iter().all(|&(r, _)| r.abs_diff(bases[line]) <= 2));
            }
        }
    }

    #[test]
    fn linehop_errors() {
        // 32 lines on 64 rows are two rows apart: h >= 2 reaches the next line.
        assert!(matches!(
            linehop_plan(64, 8, 0.5, &LineHopParams::new(2, 0.5, 0), 1.0),
            Err(Error::BandOverlap { .. })
        ));
        assert!(linehop_plan(64, 8, 0.5, &LineHopParams::new(1, 0.5, 0), 1.0).is_ok());
        assert!(linehop_plan(10, 8, 0.01, &LineHopParams::new(0, 0.5, 0), 1.0).is_err());
        assert!(linehop_plan(10, 8, 0.5, &LineHopParams::new(0, 1.5, 0), 1.0).is_err());
    }

    #[test]
    fn auto_amplitude_values() {
        assert_eq!(auto_hop_amplitude(128, 13), 4);
        assert_eq!(auto_hop_amplitude(128, 26), 1);
        assert_eq!(auto_hop_amplitude(128, 64), 1);
        assert_eq!(auto_hop_amplitude(128, 128), 0);
        for (h, ratio) in [(128usize, 0.1), (128, 0.2), (128, 0.3), (128, 0.4), (128, 0.5), (64, 0.25), (7, 1.0)] {
            let lines = (ratio * h as f64).round() as usize;
            let amp = auto_hop_amplitude(h, lines);
            assert!(linehop_plan(h, 16, ratio, &LineHopParams::new(amp, 1.0, 1), 1.0).is_ok());
        }
    }

    #[test]
    fn shared_rows_never_collide() {
        for seed in 0..50 {
            for ratio in [0.4, 0.5] {
                let p = linehop_plan(128, 128, ratio, &LineHopParams::new(1, 1.0, seed), 1.0).unwrap();
                let set: HashSet<_> = p.positions.iter().collect();
                assert_eq!(set.len(), p.len());
            }
        }
    }

    #[test]
    fn same_seed_same_plan() {
        let params = LineHopParams::new(3, 0.5, 77);
        let a = linehop_plan(100, 50, 0.1, &params, 2.0).unwrap();
        let b = linehop_plan(100, 50, 0.1, &params, 2.0).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        assert_eq!(uds_plan(30, 30, 0.2, 1.0, 8).unwrap(), uds_plan(30, 30, 0.2, 1.0, 8).unwrap());
    }

    #[test]
    fn uds_jumps_exceed_linehop_jumps() {
        let lines = 16;
        let amp = auto_hop_amplitude(64, lines);
        for seed in 0..20 {
            let uds = plan_metrics(&uds_plan(64, 64, 0.25, 1.0, seed).unwrap()).unwrap();
            let lh = plan_metrics(&linehop_plan(64, 64, 0.25, &LineHopParams::new(amp, 0.5, seed), 1.0).unwrap())
                .unwrap();
            assert!(uds.mean_jump > lh.mean_jump, "{} <= {}", uds.mean_jump, lh.mean_jump);
            assert_eq!(uds.overlap_count, 0);
            assert_eq!(lh.overlap_count, 0);
        }
    }
}
