//! Brute-force reference for the BPFA conditionals: the unnormalised joint
//! density of a tiny instance and grid integration over one coordinate.

#![allow(dead_code)]

use cs_scan_core::bpfa::conditionals::{
    atom_pixel_posterior, noise_precision_posterior, pi_posterior, weight_posterior, weight_precision_posterior,
};

/// Small BPFA instance. Weights use the spike-and-slab form: an inactive
/// weight is exactly zero.
#[derive(Clone)]
pub struct Instance {
    pub p: usize,
    pub dict: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub observed: Vec<Vec<bool>>,
    pub z: Vec<Vec<bool>>,
    pub w: Vec<Vec<f64>>,
    pub pi: Vec<f64>,
    pub gamma_n: f64,
    pub gamma_w: f64,
    pub hyper: [f64; 6],
}

impl Instance {
    pub fn k(&self) -> usize {
        self.dict.len()
    }

    pub fn log_joint(&self) -> f64 {
        let [a, b, c, d, e, f] = self.hyper;
        let k = self.k() as f64;
        let mut lp = 0.0;
        for i in 0..self.y.len() {
            for px in 0..self.p {
                if !self.observed[i][px] {
                    continue;
                }
                let fit: f64 = (0..self.k())
                    .filter(|&j| self.z[i][j])
                    .map(|j| self.dict[j][px] * self.w[i][j])
                    .sum();
                let r = self.y[i][px] - fit;
                lp += 0.5 * self.gamma_n.ln() - 0.5 * self.gamma_n * r * r;
            }
            for j in 0..self.k() {
                if self.z[i][j] {
                    lp += self.pi[j].ln() + 0.5 * (self.gamma_w / std::f64::consts::TAU).ln()
                        - 0.5 * self.gamma_w * self.w[i][j].powi(2);
                } else {
                    lp += (1.0 - self.pi[j]).ln();
                }
            }
        }
        let prec = self.p as f64;
        for atom in &self.dict {
            lp -= 0.5 * prec * atom.iter().map(|v| v * v).sum::<f64>();
        }
        for &pi in &self.pi {
            lp += (a / k - 1.0) * pi.ln() + (b * (k - 1.0) / k - 1.0) * (1.0 - pi).ln();
        }
        lp += (c - 1.0) * self.gamma_n.ln() - d * self.gamma_n;
        lp += (e - 1.0) * self.gamma_w.ln() - f * self.gamma_w;
        lp
    }

    pub fn masked_atom(&self, i: usize, k: usize) -> Vec<f64> {
        (0..self.p).filter(|&px| self.observed[i][px]).map(|px| self.dict[k][px]).collect()
    }

    /// Residual of patch i over observed pixels, excluding atom k.
    pub fn residual_without(&self, i: usize, k: usize) -> Vec<f64> {
        (0..self.p)
            .filter(|&px| self.observed[i][px])
            .map(|px| {
                let fit: f64 = (0..self.k())
                    .filter(|&j| j != k && self.z[i][j])
                    .map(|j| self.dict[j][px] * self.w[i][j])
                    .sum();
                self.y[i][px] - fit
            })
            .collect()
    }
}

pub fn base_instance() -> Instance {
    Instance {
        p: 4,
        dict: vec![vec![0.3, -0.2, 0.5, 0.1], vec![-0.4, 0.6, 0.2, -0.3]],
        y: vec![vec![0.2, 0.5, -0.1, 0.4], vec![0.7, -0.3, 0.2, 0.1]],
        observed: vec![vec![true, true, false, true], vec![true; 4]],
        z: vec![vec![true, true], vec![true, false]],
        w: vec![vec![0.8, -0.5], vec![1.2, 0.0]],
        pi: vec![0.6, 0.3],
        gamma_n: 25.0,
        gamma_w: 2.0,
        hyper: [1.0, 1.0, 1e-6, 1e-6, 1e-6, 1e-6],
    }
}

/// Mean and variance of the density proportional to `exp(logpdf)` on
/// `[lo, hi]`: a coarse scan locates the mass, a fine midpoint grid over the
/// region within 60 nats of the peak integrates it.
pub fn grid_moments(logpdf: impl Fn(f64) -> f64, lo: f64, hi: f64, log_scan: bool) -> (f64, f64) {
    let coarse = 200_000;
    let at = |t: f64| if log_scan { (lo.ln() + t * (hi.ln() - lo.ln())).exp() } else { lo + t * (hi - lo) };
    let pts: Vec<(f64, f64)> = (0..=coarse)
        .map(|j| {
            let x = at(j as f64 / coarse as f64);
            (x, logpdf(x))
        })
        .filter(|(_, l)| l.is_finite())
        .collect();
    let peak = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let inside: Vec<f64> = pts.iter().filter(|p| p.1 > peak - 60.0).map(|p| p.0).collect();
    let step = |x: f64| if log_scan { x * ((hi / lo).ln() / coarse as f64).exp() } else { x + (hi - lo) / coarse as f64 };
    let a = inside.iter().cloned().fold(f64::INFINITY, f64::min);
    let b = step(inside.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    let (a, b) = (a.max(lo), b.min(hi));
    let a = if log_scan { a } else { (a - (b - a) / coarse as f64).max(lo) };

    let fine = 400_000;
    let h = (b - a) / fine as f64;
    let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for j in 0..fine {
        let x = a + (j as f64 + 0.5) * h;
        let wgt = (logpdf(x) - peak).exp();
        z += wgt;
        m1 += wgt * x;
        m2 += wgt * x * x;
    }
    let mean = m1 / z;
    (mean, m2 / z - mean * mean)
}

/// Closed-form `(mean, variance)` next to its grid estimate.
pub struct Comparison {
    pub name: String,
    pub closed: (f64, f64),
    pub grid: (f64, f64),
}

impl Comparison {
    /// Mean error relative to the mean's magnitude, or to the posterior std
    /// when the mean is smaller than that, and relative variance error.
    pub fn errors(&self) -> (f64, f64) {
        let scale = self.grid.0.abs().max(self.grid.1.sqrt());
        (
            (self.closed.0 - self.grid.0).abs() / scale,
            (self.closed.1 - self.grid.1).abs() / self.grid.1.abs(),
        )
    }
}

fn along<'a>(inst: &'a Instance, set: impl Fn(&mut Instance, f64) + 'a) -> impl Fn(f64) -> f64 + 'a {
    move |x| {
        let mut t = inst.clone();
        set(&mut t, x);
        t.log_joint()
    }
}

pub fn weight(inst: &Instance, i: usize, k: usize) -> Comparison {
    let post = weight_posterior(&inst.masked_atom(i, k), &inst.residual_without(i, k), inst.gamma_n, inst.gamma_w);
    Comparison {
        name: format!("w[{i}][{k}]"),
        closed: (post.mean, post.variance()),
        grid: grid_moments(along(inst, |t, x| t.w[i][k] = x), -100.0, 100.0, false),
    }
}

pub fn atom_pixel(inst: &Instance, k: usize, px: usize) -> Comparison {
    let terms: Vec<(f64, f64, f64)> = (0..inst.y.len())
        .filter(|&i| inst.z[i][k] && inst.observed[i][px])
        .map(|i| {
            let others: f64 = (0..inst.k())
                .filter(|&j| j != k && inst.z[i][j])
                .map(|j| inst.dict[j][px] * inst.w[i][j])
                .sum();
            let w = inst.w[i][k];
            (w, w * w, inst.y[i][px] - others)
        })
        .collect();
    let post = atom_pixel_posterior(terms, inst.p as f64, inst.gamma_n, 1.0);
    Comparison {
        name: format!("d[{k}][{px}]"),
        closed: (post.mean, post.variance()),
        grid: grid_moments(along(inst, |t, x| t.dict[k][px] = x), -100.0, 100.0, false),
    }
}

pub fn pi(inst: &Instance, k: usize) -> Comparison {
    let [a, b, ..] = inst.hyper;
    let usage = inst.z.iter().filter(|z| z[k]).count() as f64;
    let post = pi_posterior(a, b, inst.k(), usage, inst.y.len());
    Comparison {
        name: format!("pi[{k}]"),
        closed: (post.mean(), post.variance()),
        grid: grid_moments(along(inst, |t, x| t.pi[k] = x), 0.0, 1.0, false),
    }
}

pub fn noise_precision(inst: &Instance) -> Comparison {
    let [_, _, c, d, ..] = inst.hyper;
    let mut count = 0.0;
    let mut sse = 0.0;
    for i in 0..inst.y.len() {
        let r = inst.residual_without(i, usize::MAX);
        count += r.len() as f64;
        sse += r.iter().map(|v| v * v).sum::<f64>();
    }
    let post = noise_precision_posterior(c, d, count, sse);
    Comparison {
        name: "gamma_n".into(),
        closed: (post.mean(), post.variance()),
        grid: grid_moments(along(inst, |t, x| t.gamma_n = x), 1e-6, 1e6, true),
    }
}

pub fn weight_precision(inst: &Instance) -> Comparison {
    let [.., e, f] = inst.hyper;
    let (mut active, mut sum_sq) = (0.0, 0.0);
    for i in 0..inst.y.len() {
        for k in 0..inst.k() {
            if inst.z[i][k] {
                active += 1.0;
                sum_sq += inst.w[i][k].powi(2);
            }
        }
    }
    let post = weight_precision_posterior(e, f, active, sum_sq);
    Comparison {
        name: "gamma_w".into(),
        closed: (post.mean(), post.variance()),
        grid: grid_moments(along(inst, |t, x| t.gamma_w = x), 1e-6, 1e6, true),
    }
}

/// Every conditional of the base instance: all weights, every atom pixel
/// (including prior-only ones), both π and both precisions.
pub fn all(inst: &Instance) -> Vec<Comparison> {
    let mut out = vec![weight(inst, 0, 0), weight(inst, 0, 1), weight(inst, 1, 0)];
    for k in 0..inst.k() {
        for px in 0..inst.p {
            out.push(atom_pixel(inst, k, px));
        }
        out.push(pi(inst, k));
    }
    out.push(noise_precision(inst));
    out.push(weight_precision(inst));
    out
}
