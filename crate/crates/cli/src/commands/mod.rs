mod basic;
mod experiments;
mod recon;

use std::path::Path;

use cs_scan_core::bpfa::{run_inference, InferenceResult, PatchData};
use cs_scan_core::formats::load_image;
use cs_scan_core::phantom::{lattice_phantom, PhantomParams};
use cs_scan_core::{Image, Mask};

use crate::args::{BpfaArgs, TruthArgs};
use crate::error::{CliError, CliResult};

pub use basic::{build_plan, cmd_acquire, cmd_evaluate, cmd_phantom, cmd_plan};
pub use experiments::{
    cmd_curve, cmd_dose_series, curve_means, curve_runs, dose_runs, reference_crop, CurveRow, DoseRow, DoseSetup,
};
pub use recon::{cmd_denoise, cmd_reconstruct};

pub(crate) fn load(path: &Path) -> CliResult<Image> {
    load_image(path).map_err(|e| CliError::file(path, e))
}

/// The configured truth image, or the default phantom of the requested size.
pub(crate) fn load_truth(args: &TruthArgs) -> CliResult<Image> {
    match &args.truth {
        Some(path) => load(path),
        None => Ok(lattice_phantom(&PhantomParams::new(args.size.0, args.size.1))?),
    }
}

/// BPFA reconstruction of a zero-filled observation.
pub struct Recovery {
    pub image: Image,
    pub result: InferenceResult,
}

pub fn recover(observation: &Image, mask: &Mask, bpfa: &BpfaArgs, seed: u64) -> CliResult<Recovery> {
    let (h, w) = observation.shape();
    let grid = bpfa.grid(h, w)?;
    let data = PatchData::from_observation(observation, mask, &grid, bpfa.centre)?;
    let result = run_inference(&data, &bpfa.inference(seed)?)?;
    let image = result.state.reconstruct(&data, &grid)?;
    Ok(Recovery { image, result })
}
