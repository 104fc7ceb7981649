use crate::error::{Error, Result};

/// A dense single-channel image stored row-major.
///
/// Intensities are normalised so that `1.0` corresponds to the full scale of
/// the source; `peak` keeps the source full-scale value (e.g. 255 or 65535)
/// for reporting. Simulated noise may push values outside `[0, 1]`, so only
/// finiteness is enforced here.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f64>,
    peak: f64,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::InvalidParameter(format!(
                "image data length {} does not match {height}x{width}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "pixel ({}, {})",
                i / width.max(1),
                i % width.max(1)
            )));
        }
        Ok(Self {
            height,
            width,
            data,
            peak: 1.0,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0.0; height * width],
            peak: 1.0,
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self {
            height,
            width,
            data,
            peak: 1.0,
        }
    }

    pub fn with_peak(mut self, peak: f64) -> Self {
        self.peak = peak;
        self
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Full-scale value of the source this image was normalised from.
    pub fn peak(&self) -> f64 {
        self.peak
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    /// Copies the `height` x `width` window whose top-left corner is at
    /// `(row, col)`.
    pub fn crop(&self, row: usize, col: usize, height: usize, width: usize) -> Result<Image> {
        if row + height > self.height || col + width > self.width {
            return Err(Error::InvalidParameter(format!(
                "crop {height}x{width} at ({row}, {col}) exceeds {}x{} image",
                self.height, self.width
            )));
        }
        Ok(Image::from_fn(height, width, |r, c| self.get(row + r, col + c)).with_peak(self.peak))
    }

    /// Translates the image content by `(dy, dx)` pixels, replicating edge
    /// pixels into the uncovered border.
    pub fn shifted(&self, dy: isize, dx: isize) -> Image {
        let (h, w) = (self.height as isize, self.width as isize);
        Image::from_fn(self.height, self.width, |r, c| {
            let sr = (r as isize - dy).clamp(0, h - 1) as usize;
            let sc = (c as isize - dx).clamp(0, w - 1) as usize;
            self.get(sr, sc)
        })
        .with_peak(self.peak)
    }

    pub fn clamped(&self, lo: f64, hi: f64) -> Image {
        Image {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| v.clamp(lo, hi)).collect(),
            peak: self.peak,
        }
    }

    pub(crate) fn check_same_shape(&self, other: &Image) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                actual: other.shape(),
            });
        }
        Ok(())
    }
}

/// Set of sampled pixel positions, the operator that keeps sampled pixels and
/// zeroes the rest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    sampled: Vec<bool>,
    count: usize,
}

impl Mask {
    pub fn new(height: usize, width: usize, sampled: Vec<bool>) -> Result<Self> {
        if sampled.len() != height * width {
            return Err(Error::InvalidParameter(format!(
                "mask length {} does not match {height}x{width}",
                sampled.len()
            )));
        }
        let count = sampled.iter().filter(|&&s| s).count();
        Ok(Self {
            height,
            width,
            sampled,
            count,
        })
    }

    pub fn full(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            sampled: vec![true; height * width],
            count: height * width,
        }
    }

    pub fn empty(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            sampled: vec![false; height * width],
            count: 0,
        }
    }

    /// Builds a mask from probe positions. Repeated positions count once.
    pub fn from_positions(height: usize, width: usize, positions: &[(usize, usize)]) -> Result<Self> {
        let mut sampled = vec![false; height * width];
        for &(r, c) in positions {
            if r >= height || c >= width {
                return Err(Error::InvalidParameter(format!(
                    "position ({r}, {c}) outside {height}x{width}"
                )));
            }
            sampled[r * width + c] = true;
        }
        Self::new(height, width, sampled)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// Number of sampled pixels, M.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn ratio(&self) -> f64 {
        self.count as f64 / (self.height * self.width) as f64
    }

    pub fn sampled(&self) -> &[bool] {
        &self.sampled
    }

    #[inline]
    pub fn is_sampled(&self, row: usize, col: usize) -> bool {
        self.sampled[row * self.width + col]
    }

    /// Sampled positions in row-major order.
    pub fn positions(&self) -> Vec<(usize, usize)> {
        self.sampled
            .iter()
            .enumerate()
            .filter(|(_, &s)| s)
            .map(|(i, _)| (i / self.width, i % self.width))
            .collect()
    }

    /// Zero-fills `image` outside the mask.
    pub fn apply(&self, image: &Image) -> Result<Image> {
        if image.shape() != self.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                actual: image.shape(),
            });
        }
        let mut out = image.clone();
        for (v, &s) in out.data_mut().iter_mut().zip(&self.sampled) {
            if !s {
                *v = 0.0;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_lengths_and_nan() {
        assert!(Image::new(2, 2, vec![0.0; 3]).is_err());
        assert!(matches!(
            Image::new(1, 2, vec![0.0, f64::NAN]),
            Err(Error::NonFinite(_))
        ));
        assert!(Mask::new(2, 2, vec![true; 5]).is_err());
    }

    #[test]
    fn mask_count_matches_true_entries() {
        let m = Mask::new(2, 3, vec![true, false, true, false, false, true]).unwrap();
        assert_eq!(m.count(), 3);
        assert_eq!(m.positions(), vec![(0, 0), (0, 2), (1, 2)]);
    }

    #[test]
    fn apply_zero_fills() {
        let img = Image::from_fn(2, 2, |r, c| (r * 2 + c) as f64 + 1.0);
        let m = Mask::from_positions(2, 2, &[(0, 1), (1, 0)]).unwrap();
        let y = m.apply(&img).unwrap();
        assert_eq!(y.data(), &[0.0, 2.0, 3.0, 0.0]);
    }

    #[test]
    fn shift_moves_content() {
        let img = Image::from_fn(4, 4, |r, c| (r * 4 + c) as f64);
        let s = img.shifted(1, 2);
        assert_eq!(s.get(1, 2), img.get(0, 0));
        assert_eq!(s.get(3, 3), img.get(2, 1));
        assert_eq!(s.get(0, 0), img.get(0, 0));
    }
}
