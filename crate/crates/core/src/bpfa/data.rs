use crate::error::{Error, Result};
use crate::imaging::{Image, Mask, Patch, PatchGrid};

/// Observed entries of every patch, stored compactly.
///
/// Only sampled pixels are kept, so whatever sits at unsampled positions in
/// the source can never reach the model.
#[derive(Debug, Clone)]
pub struct PatchData {
    patch_len: usize,
    offsets: Vec<usize>,
    pixels: Vec<u32>,
    values: Vec<f64>,
    /// Per-patch mean removed from `values` (all zero unless centring).
    means: Vec<f64>,
}

impl PatchData {
    /// Builds the model input from extracted patches. With `centre` set, each
    /// patch's observed mean is subtracted and added back on reconstruction;
    /// patches without observations fall back to the global observed mean.
    pub fn from_patches(patches: &[Patch], patch_len: usize, centre: bool) -> Result<Self> {
        let mut data = Self::with_capacity(patches.len(), patch_len);
        for (i, p) in patches.iter().enumerate() {
            if p.values.len() != patch_len || p.observed.len() != patch_len {
                return Err(Error::InvalidParameter(format!(
                    "patch {i} has {} values, expected {patch_len}",
                    p.values.len()
                )));
            }
            data.push_patch(
                p.observed
                    .iter()
                    .zip(&p.values)
                    .enumerate()
                    .filter(|(_, (&o, _))| o)
                    .map(|(j, (_, &v))| (j, v)),
            )?;
        }
        data.finish(centre);
        Ok(data)
    }

    /// Same as [`PatchData::from_patches`] but reads the windows straight from
    /// an observation without materialising [`Patch`] values.
    pub fn from_observation(image: &Image, mask: &Mask, grid: &PatchGrid, centre: bool) -> Result<Self> {
        if image.shape() != mask.shape() {
            return Err(Error::ShapeMismatch {
                expected: image.shape(),
                actual: mask.shape(),
            });
        }
        if image.shape() != (grid.height(), grid.width()) {
            return Err(Error::ShapeMismatch {
                expected: (grid.height(), grid.width()),
                actual: image.shape(),
            });
        }
        let len = grid.patch_len();
        let mut data = Self::with_capacity(grid.patch_count(), len);
        for i in 0..grid.patch_count() {
            data.push_patch((0..len).filter_map(|p| {
                let idx = grid.pixel_index(i, p);
                mask.sampled()[idx].then(|| (p, image.data()[idx]))
            }))?;
        }
        data.finish(centre);
        Ok(data)
    }

    fn with_capacity(n: usize, patch_len: usize) -> Self {
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        Self {
            patch_len,
            offsets,
            pixels: Vec::new(),
            values: Vec::new(),
            means: Vec::with_capacity(n),
        }
    }

    fn push_patch(&mut self, entries: impl Iterator<Item = (usize, f64)>) -> Result<()> {
        for (p, v) in entries {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!(
                    "observed value in patch {}",
                    self.offsets.len() - 1
                )));
            }
            self.pixels.push(p as u32);
            self.values.push(v);
        }
        self.offsets.push(self.pixels.len());
        self.means.push(0.0);
        Ok(())
    }

    fn finish(&mut self, centre: bool) {
        if !centre {
            return;
        }
        let global = if self.values.is_empty() {
            0.0
        } else {
            self.values.iter().sum::<f64>() / self.values.len() as f64
        };
        for i in 0..self.len() {
            let range = self.offsets[i]..self.offsets[i + 1];
            let mean = if range.is_empty() {
                global
            } else {
                self.values[range.clone()].iter().sum::<f64>() / range.len() as f64
            };
            for v in &mut self.values[range] {
                *v -= mean;
            }
            self.means[i] = mean;
        }
    }

    /// Number of patches N_p.
    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Pixels per patch, B².
    pub fn patch_len(&self) -> usize {
        self.patch_len
    }

    /// In-patch indices of the observed pixels of patch `i`.
    #[inline]
    pub fn pixels(&self, i: usize) -> &[u32] {
        &self.pixels[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Observed (possibly centred) values of patch `i`, aligned with
    /// [`PatchData::pixels`].
    #[inline]
    pub fn values(&self, i: usize) -> &[f64] {
        &self.values[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.means[i]
    }

    /// |Omega_i|.
    #[inline]
    pub fn observed_count(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn total_observed(&self) -> usize {
        self.pixels.len()
    }

    pub fn mean_square(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::extract_patches;

    #[test]
    fn both_constructors_agree() {
        let img = Image::from_fn(6, 5, |r, c| (r * 5 + c) as f64 / 30.0);
        let mask = Mask::new(6, 5, (0..30).map(|i| i % 3 != 1).collect()).unwrap();
        let (grid, patches) = extract_patches(&img, &mask, 3, 1).unwrap();
        let a = PatchData::from_patches(&patches, 9, false).unwrap();
        let b = PatchData::from_observation(&img, &mask, &grid, false).unwrap();
        assert_eq!(a.len(), grid.patch_count());
        for i in 0..a.len() {
            assert_eq!(a.pixels(i), b.pixels(i));
            assert_eq!(a.values(i), b.values(i));
        }
    }

    #[test]
    fn garbage_at_unobserved_positions_is_ignored() {
        let mut p = Patch {
            origin: (0, 0),
            values: vec![0.5, 0.0, 0.25, 0.0],
            observed: vec![true, false, true, false],
        };
        let clean = PatchData::from_patches(std::slice::from_ref(&p), 4, false).unwrap();
        p.values[1] = 1e6;
        p.values[3] = f64::NAN;
        let dirty = PatchData::from_patches(std::slice::from_ref(&p), 4, false).unwrap();
        assert_eq!(clean.values(0), dirty.values(0));
        assert_eq!(clean.pixels(0), &[0, 2]);
    }

    #[test]
    fn centring_removes_patch_means() {
        let img = Image::from_fn(4, 4, |r, _| r as f64 / 4.0);
        let mut sampled = vec![true; 16];
        sampled[..8].iter_mut().for_each(|s| *s = false);
        let mask = Mask::new(4, 4, sampled).unwrap();
        let grid = PatchGrid::new(4, 4, 2, 2).unwrap();
        let d = PatchData::from_observation(&img, &mask, &grid, true).unwrap();
        // Top patches see nothing and take the global observed mean.
        assert_eq!(d.observed_count(0), 0);
        assert!((d.mean(0) - 0.625).abs() < 1e-12);
        assert!((d.mean(2) - 0.625).abs() < 1e-12);
        assert!(d.values(2).iter().sum::<f64>().abs() < 1e-12);
    }
}
