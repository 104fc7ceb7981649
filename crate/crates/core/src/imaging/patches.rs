use crate::error::{Error, Result};

use super::{Image, Mask};

/// Layout of the overlapping `B x B` windows cut from an image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchGrid {
    height: usize,
    width: usize,
    patch_size: usize,
    stride: usize,
    origins: Vec<(usize, usize)>,
}

impl PatchGrid {
    /// Every window position on a `stride`-spaced lattice that keeps the full
    /// window inside a `height x width` image, in row-major order.
    pub fn new(height: usize, width: usize, patch_size: usize, stride: usize) -> Result<Self> {
        if patch_size == 0 || patch_size > height.min(width) {
            return Err(Error::PatchTooLarge {
                patch: patch_size,
                height,
                width,
            });
        }
        if stride == 0 {
            return Err(Error::InvalidParameter("stride must be at least 1".into()));
        }
        let origins = (0..=height - patch_size)
            .step_by(stride)
            .flat_map(|r| (0..=width - patch_size).step_by(stride).map(move |c| (r, c)))
            .collect();
        Ok(Self {
            height,
            width,
            patch_size,
            stride,
            origins,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Side length B.
    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    /// Number of pixels per patch, B².
    pub fn patch_len(&self) -> usize {
        self.patch_size * self.patch_size
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn origins(&self) -> &[(usize, usize)] {
        &self.origins
    }

    /// N_p.
    pub fn patch_count(&self) -> usize {
        self.origins.len()
    }

    /// Image index of pixel `p` (row-major within the window) of patch `i`.
    #[inline]
    pub fn pixel_index(&self, i: usize, p: usize) -> usize {
        let (r, c) = self.origins[i];
        (r + p / self.patch_size) * self.width + c + p % self.patch_size
    }

    /// How many windows cover each pixel.
    pub fn coverage(&self) -> Vec<u32> {
        let mut cover = vec![0u32; self.height * self.width];
        let b = self.patch_size;
        for &(r, c) in &self.origins {
            for dr in 0..b {
                let row = (r + dr) * self.width + c;
                for v in &mut cover[row..row + b] {
                    *v += 1;
                }
            }
        }
        cover
    }
}

/// One `B x B` window of an observation.
///
/// `values` is zero wherever `observed` is false.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub origin: (usize, usize),
    pub values: Vec<f64>,
    pub observed: Vec<bool>,
}

impl Patch {
    pub fn observed_count(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }
}

/// Cuts `image` into overlapping windows and restricts `mask` to each.
pub fn extract_patches(
    image: &Image,
    mask: &Mask,
    patch_size: usize,
    stride: usize,
) -> Result<(PatchGrid, Vec<Patch>)> {
    if image.shape() != mask.shape() {
        return Err(Error::ShapeMismatch {
            expected: image.shape(),
            actual: mask.shape(),
        });
    }
    let grid = PatchGrid::new(image.height(), image.width(), patch_size, stride)?;
    let len = grid.patch_len();
    let patches = (0..grid.patch_count())
        .map(|i| {
            let mut values = Vec::with_capacity(len);
            let mut observed = Vec::with_capacity(len);
            for p in 0..len {
                let idx = grid.pixel_index(i, p);
                let seen = mask.sampled()[idx];
                observed.push(seen);
                values.push(if seen { image.data()[idx] } else { 0.0 });
            }
            Patch {
                origin: grid.origins()[i],
                values,
                observed,
            }
        })
        .collect();
    Ok((grid, patches))
}

/// Averages overlapping patch values back into a `height x width` image.
///
/// Each output pixel is the arithmetic mean of every patch value covering it;
/// a pixel no patch covers is an error.
pub fn reassemble(patches: &[Patch], grid: &PatchGrid, height: usize, width: usize) -> Result<Image> {
    if (height, width) != (grid.height(), grid.width()) {
        return Err(Error::ShapeMismatch {
            expected: (grid.height(), grid.width()),
            actual: (height, width),
        });
    }
    if patches.len() != grid.patch_count() {
        return Err(Error::InvalidParameter(format!(
            "{} patches for a grid of {}",
            patches.len(),
            grid.patch_count()
        )));
    }
    let len = grid.patch_len();
    let mut sum = vec![0.0; height * width];
    for (i, patch) in patches.iter().enumerate() {
        if patch.values.len() != len {
            return Err(Error::InvalidParameter(format!(
                "patch {i} has {} values, expected {len}",
                patch.values.len()
            )));
        }
        for (p, &v) in patch.values.iter().enumerate() {
            sum[grid.pixel_index(i, p)] += v;
        }
    }
    average(sum, &grid.coverage(), width).and_then(|d| Image::new(height, width, d))
}

/// Divides accumulated sums by coverage counts.
pub(crate) fn average(mut sum: Vec<f64>, coverage: &[u32], width: usize) -> Result<Vec<f64>> {
    for (i, (s, &n)) in sum.iter_mut().zip(coverage).enumerate() {
        if n == 0 {
            return Err(Error::UncoveredPixel {
                row: i / width,
                col: i % width,
            });
        }
        *s /= n as f64;
    }
    Ok(sum)
}
