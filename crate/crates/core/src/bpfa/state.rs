use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::{Image, PatchGrid};
use crate::rng::derived_rng;

use super::conditionals::{
    atom_pixel_posterior_from_stats, noise_precision_posterior, pi_posterior, weight_precision_posterior,
};
use super::data::PatchData;
use super::estep::{collapsed_patch, greedy_patch, single_site, single_site_patch, Params};
use super::inference::{Mode, SupportUpdate};

/// Upper bound on both precisions; keeps noise-free fits finite.
pub const MAX_PRECISION: f64 = 1e12;

const TAG_INIT: u64 = 0x1;
const TAG_ESTEP: u64 = 0x2;
const TAG_DICT: u64 = 0x3;
const TAG_PI: u64 = 0x4;
const TAG_PREC: u64 = 0x5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpfaHyperparams {
    /// Number of dictionary atoms K.
    pub atoms: usize,
    /// Beta-process parameters.
    pub a: f64,
    pub b: f64,
    /// Gamma shape/rate of the noise-precision prior.
    pub c: f64,
    pub d: f64,
    /// Gamma shape/rate of the weight-precision prior.
    pub e: f64,
    pub f: f64,
}

impl Default for BpfaHyperparams {
    fn default() -> Self {
        Self {
            atoms: 64,
            a: 1.0,
            b: 1.0,
            c: 1e-6,
            d: 1e-6,
            e: 1e-6,
            f: 1e-6,
        }
    }
}

impl BpfaHyperparams {
    pub fn with_atoms(atoms: usize) -> Self {
        Self {
            atoms,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.atoms < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 atoms (Beta(a/K, b(K-1)/K) is improper at K={})",
                self.atoms
            )));
        }
        let positive = [
            ("a", self.a),
            ("b", self.b),
            ("c", self.c),
            ("d", self.d),
            ("e", self.e),
            ("f", self.f),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("hyper-parameter {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Prior mean of every pi_k, `a / (a + b(K-1))`.
    pub fn prior_pi(&self) -> f64 {
        self.a / (self.a + self.b * (self.atoms as f64 - 1.0))
    }
}

/// A weight whose support bit is on. `variance` is its posterior variance
/// kept by EM mode (zero for Gibbs samples).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActiveWeight {
    pub atom: usize,
    pub weight: f64,
    pub variance: f64,
}

/// Active weights of one patch, sorted by atom, with their covariance.
#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct PatchCode {
    pub active: Vec<ActiveWeight>,
    /// Full symmetric covariance in `active` order; empty means diagonal.
    pub cov: Vec<f64>,
    /// Log-determinant of the covariance when every variance is positive.
    pub log_det: f64,
}

impl PatchCode {
    pub fn diagonal(active: Vec<ActiveWeight>) -> Self {
        let log_det = if active.iter().all(|a| a.variance > 0.0) {
            active.iter().map(|a| a.variance.ln()).sum()
        } else {
            0.0
        };
        Self {
            active,
            cov: Vec::new(),
            log_det,
        }
    }

    pub fn full(active: Vec<ActiveWeight>, cov: Vec<f64>, log_det: f64) -> Self {
        debug_assert_eq!(cov.len(), active.len() * active.len());
        Self { active, cov, log_det }
    }

    fn cov_at(&self, a: usize, b: usize) -> f64 {
        if !self.cov.is_empty() {
            self.cov[a * self.active.len() + b]
        } else if a == b {
            self.active[a].variance
        } else {
            0.0
        }
    }

    /// Entropy of the weight factor, up to the constants shared with the
    /// weight prior.
    fn entropy(&self) -> f64 {
        let s = self.active.len() as f64;
        if self.active.is_empty() {
            0.0
        } else if self.active.iter().all(|a| a.variance > 0.0) {
            0.5 * s + 0.5 * self.log_det
        } else {
            -0.5 * s * (2.0 * std::f64::consts::PI).ln()
        }
    }
}

/// Full model state.
///
/// Supports and weights are stored sparsely: only entries with `z_ik = 1` are
/// kept, so `alpha_i = z_i * w_i` is exactly the stored weights. Inactive
/// weights sit at their prior and never enter a conditional.
#[derive(Debug, Clone)]
pub struct BpfaState {
    hyper: BpfaHyperparams,
    patch_len: usize,
    dictionary: Vec<f64>,
    pi: Vec<f64>,
    gamma_n: f64,
    gamma_w: f64,
    codes: Vec<PatchCode>,
    residuals: Vec<Vec<f64>>,
    atom_ids: Vec<u64>,
    seed: u64,
    step: u64,
}

/// Draws the initial state: atoms from `N(0, B^-2 I)`, all supports off,
/// `pi_k` at its prior mean and both precisions at their prior means.
pub fn init_state(data: &PatchData, hyper: &BpfaHyperparams, seed: u64) -> Result<BpfaState> {
    hyper.validate()?;
    let p = data.patch_len();
    if p == 0 {
        return Err(Error::InvalidParameter("patches must have at least one pixel".into()));
    }
    let k = hyper.atoms;
    let std = 1.0 / (p as f64).sqrt();
    let mut dictionary = Vec::with_capacity(k * p);
    for atom in 0..k {
        let mut rng = derived_rng(seed, &[TAG_INIT, atom as u64]);
        dictionary.extend((0..p).map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * std
        }));
    }
    Ok(BpfaState {
        hyper: *hyper,
        patch_len: p,
        dictionary,
        pi: vec![hyper.prior_pi(); k],
        gamma_n: hyper.c / hyper.d,
        gamma_w: hyper.e / hyper.f,
        codes: vec![PatchCode::default(); data.len()],
        residuals: (0..data.len()).map(|i| data.values(i).to_vec()).collect(),
        atom_ids: (0..k as u64).collect(),
        seed,
        step: 0,
    })
}

impl BpfaState {
    pub fn hyper(&self) -> &BpfaHyperparams {
        &self.hyper
    }

    pub fn atoms(&self) -> usize {
        self.hyper.atoms
    }

    pub fn patch_len(&self) -> usize {
        self.patch_len
    }

    pub fn patch_count(&self) -> usize {
        self.codes.len()
    }

    /// Atom-major dictionary, `K x B²`.
    pub fn dictionary(&self) -> &[f64] {
        &self.dictionary
    }

    pub fn atom(&self, k: usize) -> &[f64] {
        &self.dictionary[k * self.patch_len..(k + 1) * self.patch_len]
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn gamma_n(&self) -> f64 {
        self.gamma_n
    }

    pub fn gamma_w(&self) -> f64 {
        self.gamma_w
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Stable labels that follow atoms through [`BpfaState::permute_atoms`].
    pub fn atom_ids(&self) -> &[u64] {
        &self.atom_ids
    }

    pub fn active(&self, i: usize) -> &[ActiveWeight] {
        &self.codes[i].active
    }

    /// Posterior covariance of active weights `a` and `b` of patch `i`
    /// (indices into [`BpfaState::active`]).
    pub fn weight_covariance(&self, i: usize, a: usize, b: usize) -> f64 {
        self.codes[i].cov_at(a, b)
    }

    pub fn z(&self, i: usize, k: usize) -> bool {
        self.active(i).iter().any(|a| a.atom == k)
    }

    /// `w_ik` for active entries, zero otherwise.
    pub fn w(&self, i: usize, k: usize) -> f64 {
        self.active(i).iter().find(|a| a.atom == k).map_or(0.0, |a| a.weight)
    }

    /// Dense coefficient vector `alpha_i = z_i * w_i`.
    pub fn coefficients(&self, i: usize) -> Vec<f64> {
        let mut alpha = vec![0.0; self.atoms()];
        for a in self.active(i) {
            alpha[a.atom] = a.weight;
        }
        alpha
    }

    /// Number of patches using each atom.
    pub fn usage(&self) -> Vec<usize> {
        let mut usage = vec![0; self.atoms()];
        for code in &self.codes {
            for a in &code.active {
                usage[a.atom] += 1;
            }
        }
        usage
    }

    /// Atoms used by at least one patch.
    pub fn active_atom_count(&self) -> usize {
        self.usage().iter().filter(|&&u| u > 0).count()
    }

    pub fn set_precisions(&mut self, gamma_n: f64, gamma_w: f64) -> Result<()> {
        if !(gamma_n > 0.0 && gamma_w > 0.0) || !gamma_n.is_finite() || !gamma_w.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "precisions must be positive and finite ({gamma_n}, {gamma_w})"
            )));
        }
        self.gamma_n = gamma_n.min(MAX_PRECISION);
        self.gamma_w = gamma_w.min(MAX_PRECISION);
        Ok(())
    }

    pub fn set_pi(&mut self, pi: &[f64]) -> Result<()> {
        if pi.len() != self.atoms() || pi.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::InvalidParameter("pi must hold K values in (0, 1)".into()));
        }
        self.pi.copy_from_slice(pi);
        Ok(())
    }

    pub fn set_dictionary(&mut self, dictionary: &[f64]) -> Result<()> {
        if dictionary.len() != self.dictionary.len() || dictionary.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("dictionary must hold K x B² finite values".into()));
        }
        self.dictionary.copy_from_slice(dictionary);
        Ok(())
    }

    /// Replaces the code of patch `i` by point weights and recomputes its
    /// residual.
    pub fn set_code(&mut self, data: &PatchData, i: usize, code: &[(usize, f64)]) -> Result<()> {
        let mut active: Vec<ActiveWeight> = code
            .iter()
            .map(|&(atom, weight)| ActiveWeight {
                atom,
                weight,
                variance: 0.0,
            })
            .collect();
        if active.iter().any(|a| a.atom >= self.atoms()) {
            return Err(Error::InvalidParameter("atom index out of range".into()));
        }
        active.sort_by_key(|a| a.atom);
        active.dedup_by_key(|a| a.atom);
        self.codes[i] = PatchCode::diagonal(active);
        self.refresh_residual(data, i);
        Ok(())
    }

    /// Atom visiting order: by label, so relabelling atoms does not change
    /// which atom is updated first.
    pub(crate) fn sweep_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.atoms()).collect();
        order.sort_by_key(|&k| self.atom_ids[k]);
        order
    }

    fn compute_residual(&self, data: &PatchData, i: usize) -> Vec<f64> {
        residual_of(&self.dictionary, self.patch_len, data, i, &self.codes[i].active)
    }

    /// Recomputes `r_i = y_i - P_i D alpha_i` from scratch.
    pub fn refresh_residual(&mut self, data: &PatchData, i: usize) {
        self.residuals[i] = self.compute_residual(data, i);
    }

    pub fn refresh_all_residuals(&mut self, data: &PatchData) {
        let residuals: Vec<Vec<f64>> = (0..data.len())
            .into_par_iter()
            .map(|i| self.compute_residual(data, i))
            .collect();
        self.residuals = residuals;
    }

    pub fn residual(&self, i: usize) -> &[f64] {
        &self.residuals[i]
    }

    fn params(&self, mode: Mode) -> Params<'_> {
        Params {
            dictionary: &self.dictionary,
            patch_len: self.patch_len,
            pi: &self.pi,
            logit: self.pi.iter().map(|&p| p.ln() - (-p).ln_1p()).collect(),
            gamma_n: self.gamma_n,
            gamma_w: self.gamma_w,
            mode,
        }
    }

    /// Updates `(z_ik, w_ik)` from its conditional posterior given every
    /// other weight of the patch. The stored residual of patch `i` must be
    /// current.
    pub fn update_support_weight<R: Rng>(
        &mut self,
        data: &PatchData,
        i: usize,
        k: usize,
        mode: Mode,
        rng: &mut R,
    ) -> Result<()> {
        let p = self.patch_len;
        let mut active = self.codes[i].active.clone();
        let pos = active.iter().position(|a| a.atom == k);
        let (mut on, mut weight, mut variance) = match pos {
            Some(j) => (true, active[j].weight, active[j].variance),
            None => (false, 0.0, 0.0),
        };
        single_site(
            &self.dictionary[k * p..(k + 1) * p],
            data.pixels(i),
            &mut self.residuals[i],
            &mut on,
            &mut weight,
            &mut variance,
            self.pi[k],
            self.gamma_n,
            self.gamma_w,
            mode,
            rng,
        )?;
        let entry = ActiveWeight {
            atom: k,
            weight,
            variance,
        };
        match (pos, on) {
            (Some(j), true) => active[j] = entry,
            (Some(j), false) => {
                active.remove(j);
            }
            (None, true) => {
                let q = active.partition_point(|a| a.atom < k);
                active.insert(q, entry);
            }
            (None, false) => {}
        }
        self.codes[i] = PatchCode::diagonal(active);
        Ok(())
    }

    /// E-step over `batch`: every patch is updated against the current
    /// dictionary, sweeping all atoms once. Patches are independent and
    /// processed in parallel; each draws from its own random stream.
    pub fn e_step(
        &mut self,
        data: &PatchData,
        batch: &[usize],
        mode: Mode,
        support: SupportUpdate,
        epoch: u64,
    ) -> Result<()> {
        let order = self.sweep_order();
        let params = self.params(mode);
        let seed = self.seed;
        let results: Vec<Result<(PatchCode, Vec<f64>)>> = batch
            .par_iter()
            .map(|&i| {
                let mut rng = derived_rng(seed, &[TAG_ESTEP, epoch, i as u64]);
                let code = &self.codes[i];
                match support {
                    SupportUpdate::Greedy if mode == Mode::Em => {
                        greedy_patch(&params, data.pixels(i), data.values(i), code, &order)
                    }
                    SupportUpdate::Collapsed | SupportUpdate::Greedy => {
                        collapsed_patch(&params, data.pixels(i), data.values(i), code, &order, &mut rng)
                    }
                    SupportUpdate::SingleSite => {
                        let residual =
                            residual_of(params.dictionary, params.patch_len, data, i, &code.active);
                        single_site_patch(&params, data.pixels(i), residual, code, &order, &mut rng)
                    }
                }
            })
            .collect();
        for (&i, result) in batch.iter().zip(results) {
            let (code, residual) = result?;
            self.codes[i] = code;
            self.residuals[i] = residual;
        }
        Ok(())
    }

    /// Updates every atom from the patches in `batch`. `scale` is N_p / N_b
    /// and `rho` the step size (1 for plain stochastic EM).
    pub fn update_dictionary(
        &mut self,
        data: &PatchData,
        batch: &[usize],
        mode: Mode,
        scale: f64,
        rho: f64,
    ) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::InvalidParameter("empty batch".into()));
        }
        let k = self.atoms();
        let p = self.patch_len;
        let prior_precision = p as f64;
        // (patch, position in its code) per atom, in batch order.
        let mut users: Vec<Vec<(usize, usize)>> = vec![Vec::new(); k];
        for &i in batch {
            for (a, w) in self.codes[i].active.iter().enumerate() {
                users[w.atom].push((i, a));
            }
        }
        let mut num = vec![0.0; p];
        let mut den = vec![0.0; p];
        let mut old = vec![0.0; p];
        for atom in self.sweep_order() {
            num.iter_mut().for_each(|v| *v = 0.0);
            den.iter_mut().for_each(|v| *v = 0.0);
            let range = atom * p..(atom + 1) * p;
            old.copy_from_slice(&self.dictionary[range.clone()]);
            for &(i, a) in &users[atom] {
                let code = &self.codes[i];
                let m = code.active[a].weight;
                let m2 = m * m + code.cov_at(a, a);
                let coupled: Vec<(usize, f64)> = if code.cov.is_empty() {
                    Vec::new()
                } else {
                    (0..code.active.len())
                        .filter(|&b| b != a)
                        .map(|b| (code.active[b].atom, code.cov_at(a, b)))
                        .collect()
                };
                for (&px, &r) in data.pixels(i).iter().zip(&self.residuals[i]) {
                    let px = px as usize;
                    let cross: f64 = coupled
                        .iter()
                        .map(|&(j, c)| c * self.dictionary[j * p + px])
                        .sum();
                    num[px] += m * (r + old[px] * m) - cross;
                    den[px] += m2;
                }
            }
            let mut rng = derived_rng(self.seed, &[TAG_DICT, self.step, self.atom_ids[atom]]);
            let row = &mut self.dictionary[range];
            for px in 0..p {
                let post = atom_pixel_posterior_from_stats(num[px], den[px], prior_precision, self.gamma_n, scale);
                let target = match mode {
                    Mode::Em => post.mean,
                    Mode::Gibbs => post.sample(&mut rng),
                };
                row[px] = (1.0 - rho) * old[px] + rho * target;
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("atom {atom}")));
            }
            for &(i, a) in &users[atom] {
                let m = self.codes[i].active[a].weight;
                for (&px, r) in data.pixels(i).iter().zip(self.residuals[i].iter_mut()) {
                    let px = px as usize;
                    *r -= (row[px] - old[px]) * m;
                }
            }
        }
        Ok(())
    }

    /// Updates the atom probabilities from support counts in `batch`.
    pub fn update_pi(&mut self, batch: &[usize], mode: Mode, scale: f64, rho: f64) {
        let k = self.atoms();
        let mut usage = vec![0usize; k];
        for &i in batch {
            for a in &self.codes[i].active {
                usage[a.atom] += 1;
            }
        }
        let n = self.patch_count();
        for atom in self.sweep_order() {
            let post = pi_posterior(self.hyper.a, self.hyper.b, k, scale * usage[atom] as f64, n);
            let target = match mode {
                Mode::Em => post.mean(),
                Mode::Gibbs => {
                    let mut rng = derived_rng(self.seed, &[TAG_PI, self.step, self.atom_ids[atom]]);
                    post.sample(&mut rng)
                }
            };
            self.pi[atom] = (1.0 - rho) * self.pi[atom] + rho * target;
        }
    }

    /// Expected squared residual of patch `i` under the weight posterior,
    /// plus its active-weight count and second-moment mass.
    fn patch_stats(&self, data: &PatchData, i: usize, residual: &[f64]) -> (f64, f64, f64) {
        let p = self.patch_len;
        let code = &self.codes[i];
        let mut sse: f64 = residual.iter().map(|r| r * r).sum();
        let s = code.active.len();
        for a in 0..s {
            for b in 0..s {
                let c = code.cov_at(a, b);
                if c != 0.0 {
                    let da = &self.dictionary[code.active[a].atom * p..];
                    let db = &self.dictionary[code.active[b].atom * p..];
                    let g: f64 = data
                        .pixels(i)
                        .iter()
                        .map(|&px| da[px as usize] * db[px as usize])
                        .sum();
                    sse += c * g;
                }
            }
        }
        let second = code
            .active
            .iter()
            .map(|w| w.weight * w.weight + w.variance)
            .sum();
        (sse, s as f64, second)
    }

    /// Updates `gamma_n` and `gamma_w` from the residuals and weights of
    /// `batch`. Residuals must be current.
    pub fn update_precisions(&mut self, data: &PatchData, batch: &[usize], mode: Mode, scale: f64, rho: f64) {
        let (mut count, mut sse, mut active, mut second) = (0.0, 0.0, 0.0, 0.0);
        for &i in batch {
            let (s, a, w2) = self.patch_stats(data, i, &self.residuals[i]);
            count += data.observed_count(i) as f64;
            sse += s;
            active += a;
            second += w2;
        }
        let h = self.hyper;
        let noise = noise_precision_posterior(h.c, h.d, scale * count, scale * sse);
        let weight = weight_precision_posterior(h.e, h.f, scale * active, scale * second);
        let (gn, gw) = match mode {
            Mode::Em => (noise.mean(), weight.mean()),
            Mode::Gibbs => {
                let mut rng = derived_rng(self.seed, &[TAG_PREC, self.step]);
                (noise.sample(&mut rng), weight.sample(&mut rng))
            }
        };
        self.gamma_n = ((1.0 - rho) * self.gamma_n + rho * gn).min(MAX_PRECISION);
        self.gamma_w = ((1.0 - rho) * self.gamma_w + rho * gw).min(MAX_PRECISION);
    }

    pub(crate) fn advance_step(&mut self) {
        self.step += 1;
    }

    /// Log-posterior surrogate over all patches.
    ///
    /// For EM states this is the evidence lower bound in which the weights of
    /// every patch carry a Gaussian factor; precisions and `pi` enter through
    /// their log-scale and logit-scale densities, whose maximisers are the
    /// posterior means used by the M-step. At full batch every EM update is
    /// a coordinate ascent step on this function.
    pub fn objective(&self, data: &PatchData) -> f64 {
        let h = &self.hyper;
        let k = self.atoms() as f64;
        let np = self.patch_count() as f64;
        let (gn, gw) = (self.gamma_n, self.gamma_w);
        let per_patch: Vec<(f64, f64)> = (0..data.len())
            .into_par_iter()
            .map(|i| {
                let residual = self.compute_residual(data, i);
                let (sse, active, second) = self.patch_stats(data, i, &residual);
                let weights = 0.5 * active * gw.ln() - 0.5 * gw * second + self.codes[i].entropy();
                (sse, weights)
            })
            .collect();
        let sse: f64 = per_patch.iter().map(|t| t.0).sum();
        let weights: f64 = per_patch.iter().map(|t| t.1).sum();
        let n = data.total_observed() as f64;
        let mut f = 0.5 * n * gn.ln() - 0.5 * gn * sse + weights;
        for (u, &pi) in self.usage().into_iter().zip(&self.pi) {
            let u = u as f64;
            f += (h.a / k + u) * pi.ln() + (h.b * (k - 1.0) / k + np - u) * (1.0 - pi).ln();
        }
        f -= 0.5 * self.patch_len as f64 * self.dictionary.iter().map(|d| d * d).sum::<f64>();
        f += h.c * gn.ln() - h.d * gn + h.e * gw.ln() - h.f * gw;
        f
    }

    /// Reconstructed patch `D alpha_i` (plus the removed mean, if any).
    pub fn reconstruct_patch(&self, data: &PatchData, i: usize) -> Vec<f64> {
        let p = self.patch_len;
        let mut out = vec![data.mean(i); p];
        for a in self.active(i) {
            let atom = &self.dictionary[a.atom * p..(a.atom + 1) * p];
            for (o, d) in out.iter_mut().zip(atom) {
                *o += d * a.weight;
            }
        }
        out
    }

    /// Reassembles `D alpha_i` over the grid by uniform averaging and clamps
    /// the result to `[0, 1]`.
    pub fn reconstruct(&self, data: &PatchData, grid: &PatchGrid) -> Result<Image> {
        if grid.patch_count() != self.patch_count() || grid.patch_len() != self.patch_len {
            return Err(Error::InvalidParameter(format!(
                "grid of {} patches of {} pixels does not match state ({}, {})",
                grid.patch_count(),
                grid.patch_len(),
                self.patch_count(),
                self.patch_len
            )));
        }
        let mut sum = vec![0.0; grid.height() * grid.width()];
        for i in 0..self.patch_count() {
            for (px, v) in self.reconstruct_patch(data, i).into_iter().enumerate() {
                sum[grid.pixel_index(i, px)] += v;
            }
        }
        let mean = crate::imaging::average_coverage(sum, &grid.coverage(), grid.width())?;
        Ok(Image::new(grid.height(), grid.width(), mean)?.clamped(0.0, 1.0))
    }

    /// Relabels atoms so that new atom `j` is old atom `perm[j]`.
    pub fn permute_atoms(&mut self, perm: &[usize]) -> Result<()> {
        let k = self.atoms();
        let mut seen = vec![false; k];
        if perm.len() != k || perm.iter().any(|&j| j >= k || std::mem::replace(&mut seen[j], true)) {
            return Err(Error::InvalidParameter("not a permutation of the atoms".into()));
        }
        let p = self.patch_len;
        let mut inverse = vec![0; k];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        self.dictionary = perm
            .iter()
            .flat_map(|&old| self.dictionary[old * p..(old + 1) * p].to_vec())
            .collect();
        self.pi = perm.iter().map(|&old| self.pi[old]).collect();
        self.atom_ids = perm.iter().map(|&old| self.atom_ids[old]).collect();
        for code in &mut self.codes {
            let s = code.active.len();
            let mut idx: Vec<usize> = (0..s).collect();
            idx.sort_by_key(|&a| inverse[code.active[a].atom]);
            let active = idx
                .iter()
                .map(|&a| ActiveWeight {
                    atom: inverse[code.active[a].atom],
                    ..code.active[a]
                })
                .collect();
            let cov = if code.cov.is_empty() {
                Vec::new()
            } else {
                let mut cov = Vec::with_capacity(s * s);
                for &a in &idx {
                    for &b in &idx {
                        cov.push(code.cov[a * s + b]);
                    }
                }
                cov
            };
            code.active = active;
            code.cov = cov;
        }
        Ok(())
    }
}

fn residual_of(dictionary: &[f64], p: usize, data: &PatchData, i: usize, code: &[ActiveWeight]) -> Vec<f64> {
    let mut r = data.values(i).to_vec();
    let pixels = data.pixels(i);
    for a in code {
        let atom = &dictionary[a.atom * p..(a.atom + 1) * p];
        for (v, &px) in r.iter_mut().zip(pixels) {
            *v -= atom[px as usize] * a.weight;
        }
    }
    r
}
