//! Compressive acquisition: applying a scan plan to a ground-truth image.
//!
//! Sampled pixels carry the truth plus an optional noise realisation;
//! unsampled pixels are exactly zero.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::{Image, Mask};
use crate::rng::{derive_seed, derived_rng, rng_from_seed};
use crate::sampling::{check_ratio, constrained_dwell, DoseBudget, LineHopConfig, SamplingPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    None,
    /// Additive Gaussian noise with std `base_sigma * sqrt(reference_dwell / dwell)`.
    Gaussian,
    /// Shot noise: counts with mean `truth * dwell * gain`, rescaled back to
    /// intensity units.
    Poisson,
}

impl std::fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NoiseKind::None => "none",
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Poisson => "poisson",
        })
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(NoiseKind::None),
            "gaussian" => Ok(NoiseKind::Gaussian),
            "poisson" => Ok(NoiseKind::Poisson),
            other => Err(Error::InvalidParameter(format!("unknown noise model {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// Gaussian std at the reference dwell time, in normalised intensity.
    pub base_sigma: f64,
    /// Dwell time (us) at which `base_sigma` applies.
    pub reference_dwell: f64,
    /// Counts per unit intensity per microsecond (Poisson only).
    pub gain: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            kind: NoiseKind::None,
            base_sigma: 0.0,
            reference_dwell: 1.0,
            gain: 1.0,
            seed: 0,
        }
    }

    pub fn gaussian(base_sigma: f64, reference_dwell: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::Gaussian,
            base_sigma,
            reference_dwell,
            gain: 1.0,
            seed,
        }
    }

    pub fn poisson(gain: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::Poisson,
            base_sigma: 0.0,
            reference_dwell: 1.0,
            gain,
            seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Per-pixel Gaussian std at dwell time `dwell`.
    pub fn sigma_at(&self, dwell: f64) -> f64 {
        self.base_sigma * (self.reference_dwell / dwell).sqrt()
    }

    fn validate(&self, dwell: f64) -> Result<()> {
        match self.kind {
            NoiseKind::None => Ok(()),
            NoiseKind::Gaussian => {
                if !(self.base_sigma >= 0.0) || !(self.reference_dwell > 0.0) || !(dwell > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "gaussian noise needs sigma >= 0 and positive dwell times (sigma={}, ref={}, dwell={dwell})",
                        self.base_sigma, self.reference_dwell
                    )));
                }
                Ok(())
            }
            NoiseKind::Poisson => {
                if !(self.gain > 0.0) || !(dwell > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "poisson noise needs positive gain and dwell (gain={}, dwell={dwell})",
                        self.gain
                    )));
                }
                Ok(())
            }
        }
    }
}

/// A simulated compressive measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// Zero-filled outside the mask.
    pub image: Image,
    pub mask: Mask,
    pub plan: SamplingPlan,
    pub noise: NoiseSpec,
}

/// Samples `truth` at the plan's probe positions.
pub fn acquire(truth: &Image, plan: &SamplingPlan, noise: &NoiseSpec) -> Result<Observation> {
    if truth.shape() != (plan.height, plan.width) {
        return Err(Error::ShapeMismatch {
            expected: (plan.height, plan.width),
            actual: truth.shape(),
        });
    }
    noise.validate(plan.dwell)?;
    if noise.kind == NoiseKind::Poisson {
        if let Some(v) = truth.data().iter().find(|&&v| v < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "poisson noise needs non-negative truth, found {v}"
            )));
        }
    }
    let mask = plan.mask()?;
    let mut image = mask.apply(truth)?;
    let width = truth.width();
    let mut rng = rng_from_seed(noise.seed);
    let mut visited = vec![false; truth.len()];
    for &(r, c) in &plan.positions {
        let idx = r * width + c;
        // A revisited pixel keeps its first reading.
        if std::mem::replace(&mut visited[idx], true) {
            continue;
        }
        let x = truth.data()[idx];
        image.data_mut()[idx] = match noise.kind {
            NoiseKind::None => x,
            NoiseKind::Gaussian => {
                let z: f64 = StandardNormal.sample(&mut rng);
                x + noise.sigma_at(plan.dwell) * z
            }
            NoiseKind::Poisson => {
                let scale = plan.dwell * noise.gain;
                let mean = x * scale;
                let counts = if mean > 0.0 {
                    Poisson::new(mean)
                        .map_err(|e| Error::InvalidParameter(e.to_string()))?
                        .sample(&mut rng)
                } else {
                    0.0
                };
                counts / scale
            }
        };
    }
    Ok(Observation {
        image,
        mask,
        plan: plan.clone(),
        noise: *noise,
    })
}

/// One acquisition of a constrained-dose series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesElement {
    pub ratio: f64,
    pub dwell: f64,
    /// Rigid shift applied to the truth before sampling, `(dy, dx)`.
    pub drift: (isize, isize),
    pub observation: Observation,
}

/// Options for [`constrained_dose_series`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesConfig {
    pub linehop: LineHopConfig,
    pub noise: NoiseSpec,
    /// Largest simulated sample drift per axis, in pixels. Zero disables drift.
    pub max_drift: usize,
    pub seed: u64,
}

/// Line-hop acquisitions at each ratio with the dwell time set so that every
/// element spends the same total dose.
pub fn constrained_dose_series(
    truth: &Image,
    ratios: &[f64],
    budget: &DoseBudget,
    config: &SeriesConfig,
) -> Result<Vec<SeriesElement>> {
    if ratios.is_empty() {
        return Err(Error::InvalidParameter("dose series needs at least one ratio".into()));
    }
    for &r in ratios {
        check_ratio(r)?;
    }
    let (h, w) = truth.shape();
    ratios
        .par_iter()
        .enumerate()
        .map(|(i, &ratio)| {
            let idx = i as u64;
            let plan = config
                .linehop
                .plan(h, w, ratio, 1.0, derive_seed(config.seed, &[idx, 0]))?;
            let dwell = constrained_dwell(budget, plan.len() as f64)?;
            let plan = plan.with_dwell(dwell);
            let drift = if config.max_drift > 0 {
                let mut rng = derived_rng(config.seed, &[idx, 2]);
                let d = config.max_drift as i64;
                (rng.random_range(-d..=d) as isize, rng.random_range(-d..=d) as isize)
            } else {
                (0, 0)
            };
            let shifted;
            let source = if drift == (0, 0) {
                truth
            } else {
                shifted = truth.shifted(drift.0, drift.1);
                &shifted
            };
            let noise = config.noise.with_seed(derive_seed(config.noise.seed, &[idx, 1]));
            Ok(SeriesElement {
                ratio,
                dwell,
                drift,
                observation: acquire(source, &plan, &noise)?,
            })
        })
        .collect()
}
