//! Simulation of subsampled (compressive) probe-scanning acquisition and
//! image recovery with beta-process factor analysis (BPFA) dictionary
//! learning.
//!
//! The crate is organised around the acquisition pipeline:
//!
//! - [`imaging`]: images, masks, overlapping patches and quality metrics.
//! - [`sampling`]: raster, uniform-density and line-hop scan plans, plan
//!   metrics and electron-dose budgets.
//! - [`acquisition`]: applying a plan to a ground truth, noise models and
//!   constrained-dose series.
//! - [`bpfa`]: the BPFA model and its stochastic mini-batch EM / Gibbs
//!   inference.
//! - [`phantom`]: synthetic atomic-lattice ground truths.
//! - [`formats`]: PGM/PBM/raw image and mask files.

pub mod acquisition;
pub mod bpfa;
pub mod error;
pub mod formats;
pub mod imaging;
pub mod phantom;
pub mod rng;
pub mod sampling;

pub use error::{Error, Result};
pub use imaging::{Image, Mask, Patch, PatchGrid};
