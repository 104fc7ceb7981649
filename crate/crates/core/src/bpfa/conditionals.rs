//! Conjugate conditional posteriors of the BPFA model.
//!
//! These are the closed forms shared by both inference modes; the batch
//! routines in `state` call into them.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPosterior {
    pub mean: f64,
    pub precision: f64,
}

impl GaussianPosterior {
    pub fn variance(&self) -> f64 {
        1.0 / self.precision
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.mean + z / self.precision.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaPosterior {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaPosterior {
    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn variance(&self) -> f64 {
        let s = self.alpha + self.beta;
        self.alpha * self.beta / (s * s * (s + 1.0))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let draw = Beta::new(self.alpha, self.beta)
            .expect("beta parameters are positive")
            .sample(rng);
        // Keep the draw strictly inside (0, 1) so log-odds stay finite.
        draw.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)
    }
}

/// Gamma distribution in shape/rate form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaPosterior {
    pub shape: f64,
    pub rate: f64,
}

impl GammaPosterior {
    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn variance(&self) -> f64 {
        self.shape / (self.rate * self.rate)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Gamma::new(self.shape, 1.0 / self.rate)
            .expect("gamma parameters are positive")
            .sample(rng)
            .max(f64::MIN_POSITIVE)
    }
}

/// Posterior of an active weight `w_ik` given the masked atom `d` and the
/// residual `r` that excludes atom k.
pub fn weight_posterior(atom: &[f64], residual: &[f64], gamma_n: f64, gamma_w: f64) -> GaussianPosterior {
    let (dd, proj) = atom
        .iter()
        .zip(residual)
        .fold((0.0, 0.0), |(dd, pr), (d, r)| (dd + d * d, pr + d * r));
    weight_posterior_from_stats(dd, proj, gamma_n, gamma_w)
}

#[inline]
pub(crate) fn weight_posterior_from_stats(dd: f64, proj: f64, gamma_n: f64, gamma_w: f64) -> GaussianPosterior {
    let precision = gamma_w + gamma_n * dd;
    GaussianPosterior {
        mean: gamma_n * proj / precision,
        precision,
    }
}

/// Log posterior odds of `z_ik = 1` against `z_ik = 0` with the weight
/// integrated out. `dd = |d|^2` and `proj = <d, r>` are over observed pixels
/// of the patch, `r` excluding atom k.
#[inline]
pub fn support_log_odds(pi: f64, gamma_n: f64, gamma_w: f64, dd: f64, proj: f64) -> f64 {
    let precision = gamma_w + gamma_n * dd;
    let g = gamma_n * proj;
    (pi / (1.0 - pi)).ln() + 0.5 * (gamma_w / precision).ln() + g * g / (2.0 * precision)
}

/// Posterior of one dictionary pixel `d_kp`.
///
/// `terms` yields, for every patch in the batch that uses atom k and
/// observes pixel p, the triple `(E[w], E[w^2], r_excl)` where `r_excl` is
/// the residual at p with atom k's contribution added back. `scale` is the
/// mini-batch factor N_p / N_b and `prior_precision` is B².
pub fn atom_pixel_posterior(
    terms: impl IntoIterator<Item = (f64, f64, f64)>,
    prior_precision: f64,
    gamma_n: f64,
    scale: f64,
) -> GaussianPosterior {
    let (num, den) = terms
        .into_iter()
        .fold((0.0, 0.0), |(n, d), (m, m2, r)| (n + m * r, d + m2));
    atom_pixel_posterior_from_stats(num, den, prior_precision, gamma_n, scale)
}

#[inline]
pub(crate) fn atom_pixel_posterior_from_stats(
    num: f64,
    den: f64,
    prior_precision: f64,
    gamma_n: f64,
    scale: f64,
) -> GaussianPosterior {
    let precision = prior_precision + gamma_n * scale * den;
    GaussianPosterior {
        mean: gamma_n * scale * num / precision,
        precision,
    }
}

/// Posterior of `pi_k` after `usage` of `patches` patches used atom k
/// (`usage` already multiplied by the mini-batch factor).
pub fn pi_posterior(a: f64, b: f64, k: usize, usage: f64, patches: usize) -> BetaPosterior {
    let kf = k as f64;
    BetaPosterior {
        alpha: a / kf + usage,
        beta: b * (kf - 1.0) / kf + (patches as f64 - usage).max(0.0),
    }
}

/// Posterior of the noise precision from `count` observed entries with
/// squared residual mass `sse` (both already scaled).
pub fn noise_precision_posterior(c: f64, d: f64, count: f64, sse: f64) -> GammaPosterior {
    GammaPosterior {
        shape: c + 0.5 * count,
        rate: d + 0.5 * sse,
    }
}

/// Posterior of the weight precision from `active` active weights with
/// second-moment mass `sum_sq` (both already scaled).
pub fn weight_precision_posterior(e: f64, f: f64, active: f64, sum_sq: f64) -> GammaPosterior {
    GammaPosterior {
        shape: e + 0.5 * active,
        rate: f + 0.5 * sum_sq,
    }
}
