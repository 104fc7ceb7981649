//! Image containers, overlapping patches and image-quality metrics.

mod image;
mod metrics;
mod patches;

pub use image::{Image, Mask};
pub use metrics::{drift_matched_psnr, mse, psnr, DriftMatch};
pub use patches::{extract_patches, reassemble, Patch, PatchGrid};
pub(crate) use patches::average as average_coverage;
