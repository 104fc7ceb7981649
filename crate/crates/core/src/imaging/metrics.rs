use rayon::prelude::*;

use crate::error::{Error, Result};

use super::Image;

/// Mean squared pixel difference.
pub fn mse(reference: &Image, test: &Image) -> Result<f64> {
    reference.check_same_shape(test)?;
    if reference.is_empty() {
        return Err(Error::InvalidParameter("empty image".into()));
    }
    let sum: f64 = reference
        .data()
        .iter()
        .zip(test.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / reference.len() as f64)
}

/// Peak signal-to-noise ratio in decibels, `10 log10(peak^2 / MSE)`.
///
/// Identical images give `f64::INFINITY`.
pub fn psnr(reference: &Image, test: &Image, peak: f64) -> Result<f64> {
    if !(peak > 0.0) {
        return Err(Error::InvalidParameter(format!("peak must be positive, got {peak}")));
    }
    Ok(psnr_from_mse(mse(reference, test)?, peak))
}

pub(crate) fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / mse).log10()
    }
}

/// Best window found by [`drift_matched_psnr`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftMatch {
    pub psnr: f64,
    /// Top-left corner `(row, col)` of the matched window in the candidate.
    pub offset: (usize, usize),
}

/// Compares `reference_crop` against every `crop_size x crop_size` window of
/// `candidate` and returns the window with the highest PSNR.
///
/// This compensates for rigid sample drift between acquisitions. Ties go to
/// the smallest row, then the smallest column.
pub fn drift_matched_psnr(
    reference_crop: &Image,
    candidate: &Image,
    crop_size: usize,
    peak: f64,
) -> Result<DriftMatch> {
    if reference_crop.shape() != (crop_size, crop_size) {
        return Err(Error::ShapeMismatch {
            expected: (crop_size, crop_size),
            actual: reference_crop.shape(),
        });
    }
    if crop_size == 0 || crop_size > candidate.height() || crop_size > candidate.width() {
        return Err(Error::InvalidParameter(format!(
            "crop {crop_size} larger than {}x{} candidate",
            candidate.height(),
            candidate.width()
        )));
    }
    if !(peak > 0.0) {
        return Err(Error::InvalidParameter(format!("peak must be positive, got {peak}")));
    }
    let rows = candidate.height() - crop_size + 1;
    let cols = candidate.width() - crop_size + 1;
    let width = candidate.width();
    let cand = candidate.data();
    let refd = reference_crop.data();

    // Minimum SSE per offset row; rows are scanned in parallel and reduced in
    // order, so the tie-break does not depend on scheduling.
    let per_row: Vec<(f64, usize)> = (0..rows)
        .into_par_iter()
        .map(|r0| {
            let mut best = (f64::INFINITY, 0);
            for c0 in 0..cols {
                let mut sse = 0.0;
                for r in 0..crop_size {
                    let a = &refd[r * crop_size..(r + 1) * crop_size];
                    let start = (r0 + r) * width + c0;
                    let b = &cand[start..start + crop_size];
                    sse += a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
                }
                if sse < best.0 {
                    best = (sse, c0);
                }
            }
            best
        })
        .collect();
    let (row, &(sse, col)) = per_row
        .iter()
        .enumerate()
        .fold(None::<(usize, &(f64, usize))>, |acc, (r, cur)| match acc {
            Some((_, b)) if b.0 <= cur.0 => acc,
            _ => Some((r, cur)),
        })
        .expect("at least one offset");
    let mse = sse / (crop_size * crop_size) as f64;
    Ok(DriftMatch {
        psnr: psnr_from_mse(mse, peak),
        offset: (row, col),
    })
}
