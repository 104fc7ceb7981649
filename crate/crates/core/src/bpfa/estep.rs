//! Per-patch support and weight updates.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

use super::conditionals::{support_log_odds, weight_posterior_from_stats};
use super::inference::Mode;
use super::state::{ActiveWeight, PatchCode};

/// Read-only parameters shared by all patches of a batch.
pub(crate) struct Params<'a> {
    pub dictionary: &'a [f64],
    pub patch_len: usize,
    pub pi: &'a [f64],
    /// `ln(pi / (1 - pi))` per atom.
    pub logit: Vec<f64>,
    pub gamma_n: f64,
    pub gamma_w: f64,
    pub mode: Mode,
}

impl Params<'_> {
    fn atom(&self, k: usize) -> &[f64] {
        &self.dictionary[k * self.patch_len..(k + 1) * self.patch_len]
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn decide<R: Rng>(log_odds: f64, mode: Mode, rng: &mut R) -> bool {
    match mode {
        Mode::Em => log_odds > 0.0,
        Mode::Gibbs => rng.random::<f64>() < sigmoid(log_odds),
    }
}

/// One (z_ik, w_ik) update against the residual of the patch, with every
/// other weight held fixed. The residual is kept in sync.
#[allow(clippy::too_many_arguments)]
#[inline]
pub(crate) fn single_site<R: Rng>(
    atom: &[f64],
    pixels: &[u32],
    residual: &mut [f64],
    on: &mut bool,
    weight: &mut f64,
    variance: &mut f64,
    pi: f64,
    gamma_n: f64,
    gamma_w: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<()> {
    let (mut dd, mut dr) = (0.0, 0.0);
    for (&p, &r) in pixels.iter().zip(residual.iter()) {
        let d = atom[p as usize];
        dd += d * d;
        dr += d * r;
    }
    let old = if *on { *weight } else { 0.0 };
    let proj = dr + old * dd;
    if !proj.is_finite() {
        return Err(Error::NonFinite("patch residual".into()));
    }
    let post = weight_posterior_from_stats(dd, proj, gamma_n, gamma_w);
    let active = decide(support_log_odds(pi, gamma_n, gamma_w, dd, proj), mode, rng);
    let (new, var) = match (active, mode) {
        (false, _) => (0.0, 0.0),
        (true, Mode::Em) => (post.mean, post.variance()),
        (true, Mode::Gibbs) => (post.sample(rng), 0.0),
    };
    let delta = new - old;
    if delta != 0.0 {
        for (&p, r) in pixels.iter().zip(residual.iter_mut()) {
            *r -= atom[p as usize] * delta;
        }
    }
    *on = active;
    *weight = new;
    *variance = var;
    Ok(())
}

/// Sweeps all atoms of one patch with single-site updates.
pub(crate) fn single_site_patch<R: Rng>(
    params: &Params,
    pixels: &[u32],
    mut residual: Vec<f64>,
    code: &PatchCode,
    order: &[usize],
    rng: &mut R,
) -> Result<(PatchCode, Vec<f64>)> {
    let k = params.pi.len();
    let mut on = vec![false; k];
    let mut weight = vec![0.0; k];
    let mut variance = vec![0.0; k];
    for a in &code.active {
        on[a.atom] = true;
        weight[a.atom] = a.weight;
        variance[a.atom] = a.variance;
    }
    for &atom in order {
        single_site(
            params.atom(atom),
            pixels,
            &mut residual,
            &mut on[atom],
            &mut weight[atom],
            &mut variance[atom],
            params.pi[atom],
            params.gamma_n,
            params.gamma_w,
            params.mode,
            rng,
        )?;
    }
    let active = (0..k)
        .filter(|&j| on[j])
        .map(|j| ActiveWeight {
            atom: j,
            weight: weight[j],
            variance: variance[j],
        })
        .collect();
    Ok((PatchCode::diagonal(active), residual))
}

/// Gaussian posterior of the weights on a fixed support.
struct Factor {
    set: Vec<usize>,
    gram: DMatrix<f64>,
    lower: DMatrix<f64>,
    mean: DVector<f64>,
}

/// Sweeps all atoms of one patch, deciding each support bit with the whole
/// weight vector of the patch integrated out, then draws (Gibbs) or keeps the
/// Gaussian posterior (EM) of the weights on the final support.
pub(crate) fn collapsed_patch<R: Rng>(
    params: &Params,
    pixels: &[u32],
    values: &[f64],
    code: &PatchCode,
    order: &[usize],
    rng: &mut R,
) -> Result<(PatchCode, Vec<f64>)> {
    let n = pixels.len();
    let k_all = params.pi.len();
    let (gn, gw) = (params.gamma_n, params.gamma_w);
    let mut masked = vec![0.0; k_all * n];
    for k in 0..k_all {
        let atom = params.atom(k);
        for (m, &px) in masked[k * n..(k + 1) * n].iter_mut().zip(pixels) {
            *m = atom[px as usize];
        }
    }
    let row = |k: usize| &masked[k * n..(k + 1) * n];
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let dd: Vec<f64> = (0..k_all).map(|k| dot(row(k), row(k))).collect();
    let dy: Vec<f64> = (0..k_all).map(|k| dot(row(k), values)).collect();
    if dy.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("patch values".into()));
    }

    let factor = |set: Vec<usize>, gram: DMatrix<f64>| -> Result<Factor> {
        let s = set.len();
        let a = &gram * gn + DMatrix::identity(s, s) * gw;
        let chol = Cholesky::new(a).ok_or_else(|| Error::NonFinite("weight precision".into()))?;
        let b = DVector::from_iterator(s, set.iter().map(|&j| gn * dy[j]));
        let mean = chol.solve(&b);
        Ok(Factor {
            set,
            gram,
            lower: chol.unpack(),
            mean,
        })
    };

    let mut set: Vec<usize> = code.active.iter().map(|a| a.atom).collect();
    set.sort_unstable();
    let gram = DMatrix::from_fn(set.len(), set.len(), |a, b| dot(row(set[a]), row(set[b])));
    let mut cur = factor(set, gram)?;

    for &k in order {
        let pos = cur.set.iter().position(|&j| j == k);
        let removed = match pos {
            Some(pos) => {
                let mut set = cur.set.clone();
                set.remove(pos);
                let gram = cur.gram.clone().remove_row(pos).remove_column(pos);
                Some(factor(set, gram)?)
            }
            None => None,
        };
        let base = removed.as_ref().unwrap_or(&cur);
        let c = DVector::from_iterator(base.set.len(), base.set.iter().map(|&j| dot(row(k), row(j))));
        let explained = if base.set.is_empty() {
            0.0
        } else {
            base.lower
                .solve_lower_triangular(&(&c * gn))
                .map_or(f64::INFINITY, |v| v.norm_squared())
        };
        let precision = (gw + gn * dd[k] - explained).max(gw);
        let proj = dy[k] - c.dot(&base.mean);
        let log_odds = params.logit[k]
            + 0.5 * (gw / precision).ln()
            + (gn * proj) * (gn * proj) / (2.0 * precision);
        if !log_odds.is_finite() {
            return Err(Error::NonFinite(format!("support odds of atom {k}")));
        }
        let on = decide(log_odds, params.mode, rng);
        cur = match (on, pos.is_some()) {
            (true, true) => cur,
            (false, true) => removed.expect("factor without k"),
            (false, false) => cur,
            (true, false) => {
                let q = cur.set.partition_point(|&j| j < k);
                let mut set = cur.set.clone();
                set.insert(q, k);
                let s = set.len();
                let gram = DMatrix::from_fn(s, s, |a, b| {
                    let ia = if a < q { Some(a) } else if a > q { Some(a - 1) } else { None };
                    let ib = if b < q { Some(b) } else if b > q { Some(b - 1) } else { None };
                    match (ia, ib) {
                        (Some(x), Some(y)) => cur.gram[(x, y)],
                        (Some(x), None) | (None, Some(x)) => c[x],
                        (None, None) => dd[k],
                    }
                });
                factor(set, gram)?
            }
        };
    }

    let s = cur.set.len();
    let (weights, cov, log_det) = match params.mode {
        Mode::Em => {
            let linv = cur
                .lower
                .solve_lower_triangular(&DMatrix::identity(s, s))
                .ok_or_else(|| Error::NonFinite("weight covariance".into()))?;
            let cov = linv.transpose() * &linv;
            let log_det = -2.0 * cur.lower.diagonal().iter().map(|v| v.ln()).sum::<f64>();
            (cur.mean.clone(), cov, log_det)
        }
        Mode::Gibbs => {
            let xi = DVector::from_fn(s, |_, _| rng.sample::<f64, _>(StandardNormal));
            let offset = cur
                .lower
                .tr_solve_lower_triangular(&xi)
                .ok_or_else(|| Error::NonFinite("weight sample".into()))?;
            (&cur.mean + offset, DMatrix::zeros(0, 0), 0.0)
        }
    };
    let mut residual = values.to_vec();
    for (a, &j) in cur.set.iter().enumerate() {
        for (r, d) in residual.iter_mut().zip(row(j)) {
            *r -= d * weights[a];
        }
    }
    let active: Vec<ActiveWeight> = cur
        .set
        .iter()
        .enumerate()
        .map(|(a, &j)| ActiveWeight {
            atom: j,
            weight: weights[a],
            variance: if cov.nrows() == s { cov[(a, a)] } else { 0.0 },
        })
        .collect();
    let code = if params.mode == Mode::Em {
        // nalgebra storage is column-major; the matrix is symmetric.
        PatchCode::full(active, cov.as_slice().to_vec(), log_det)
    } else {
        PatchCode::diagonal(active)
    };
    Ok((code, residual))
}

/// EM variant of [`collapsed_patch`] that flips, at every step, the support
/// bit with the largest gain in the objective, until no flip improves it.
pub(crate) fn greedy_patch(
    params: &Params,
    pixels: &[u32],
    values: &[f64],
    code: &PatchCode,
    order: &[usize],
) -> Result<(PatchCode, Vec<f64>)> {
    let n = pixels.len();
    let k_all = params.pi.len();
    let (gn, gw) = (params.gamma_n, params.gamma_w);
    // Observed rows of every atom, one column per atom.
    let masked = DMatrix::from_fn(n, k_all, |j, k| params.atom(k)[pixels[j] as usize]);
    let y = DVector::from_column_slice(values);
    let dy = masked.tr_mul(&y);
    if dy.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("patch values".into()));
    }
    let dd: Vec<f64> = masked.column_iter().map(|c| c.norm_squared()).collect();
    let logit = &params.logit;

    let mut set: Vec<usize> = code.active.iter().map(|a| a.atom).collect();
    set.sort_unstable();
    // cross[(a, k)] = <d_set[a], d_k> over observed pixels
    let mut cross = DMatrix::from_fn(set.len(), k_all, |a, k| masked.column(set[a]).dot(&masked.column(k)));
    let max_rounds = 4 * k_all + 4;
    let mut rounds = 0;
    let (chol, mean) = loop {
        let s = set.len();
        let a = DMatrix::from_fn(s, s, |x, z| gn * cross[(x, set[z])] + if x == z { gw } else { 0.0 });
        let chol = Cholesky::new(a).ok_or_else(|| Error::NonFinite("weight precision".into()))?;
        let mean = chol.solve(&DVector::from_iterator(s, set.iter().map(|&j| gn * dy[j])));
        rounds += 1;
        if rounds > max_rounds {
            break (chol, mean);
        }
        let solved = chol.solve(&cross);
        let fitted = cross.tr_mul(&mean);
        let ainv_diag: Vec<f64> = (0..s)
            .map(|x| {
                let mut e = DVector::zeros(s);
                e[x] = 1.0;
                chol.solve(&e)[x]
            })
            .collect();
        let mut position = vec![usize::MAX; k_all];
        for (x, &j) in set.iter().enumerate() {
            position[j] = x;
        }
        let mut best: Option<(f64, usize)> = None;
        for &k in order {
            let gain = if position[k] != usize::MAX {
                let x = position[k];
                let v = ainv_diag[x];
                -(logit[k] + 0.5 * (gw * v).ln() + mean[x] * mean[x] / (2.0 * v))
            } else {
                let explained = gn * gn * cross.column(k).dot(&solved.column(k));
                let precision = (gw + gn * dd[k] - explained).max(gw);
                let g = gn * (dy[k] - fitted[k]);
                logit[k] + 0.5 * (gw / precision).ln() + g * g / (2.0 * precision)
            };
            if !gain.is_finite() {
                return Err(Error::NonFinite(format!("support odds of atom {k}")));
            }
            if best.is_none_or(|(b, _)| gain > b) {
                best = Some((gain, k));
            }
        }
        match best {
            Some((gain, k)) if gain > 0.0 => {
                if position[k] != usize::MAX {
                    let x = position[k];
                    set.remove(x);
                    cross = cross.remove_row(x);
                } else {
                    let q = set.partition_point(|&j| j < k);
                    set.insert(q, k);
                    let row = masked.tr_mul(&masked.column(k));
                    cross = cross.insert_row(q, 0.0);
                    cross.row_mut(q).copy_from(&row.transpose());
                }
            }
            _ => break (chol, mean),
        }
    };

    let s = set.len();
    let cov = chol.inverse();
    let log_det = -2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let mut residual = y;
    for (x, &j) in set.iter().enumerate() {
        residual.axpy(-mean[x], &masked.column(j), 1.0);
    }
    let active = set
        .iter()
        .enumerate()
        .map(|(x, &j)| ActiveWeight {
            atom: j,
            weight: mean[x],
            variance: cov[(x, x)],
        })
        .collect();
    debug_assert_eq!(cov.nrows(), s);
    Ok((
        PatchCode::full(active, cov.as_slice().to_vec(), log_det),
        residual.as_slice().to_vec(),
    ))
}
