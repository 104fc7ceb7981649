use std::fmt::Write as _;
use std::path::Path;

use cs_scan_core::bpfa::{write_snapshot, DictionarySnapshot};
use cs_scan_core::formats::load_mask;
use cs_scan_core::imaging::psnr;
use cs_scan_core::{Image, Mask};

use super::{load, recover, Recovery};
use crate::args::{DenoiseCmd, ReconstructCmd};
use crate::error::{CliError, CliResult};
use crate::output::{create_dir, num, write_atomic, write_image};

fn write_outputs(
    dir: &Path,
    rec: &Recovery,
    input: &Image,
    reference: Option<&Image>,
    manifest: &str,
) -> CliResult<()> {
    create_dir(dir)?;
    write_image(&dir.join("reconstruction.raw"), &rec.image)?;
    write_image(&dir.join("reconstruction.pgm"), &rec.image)?;

    let mut trace = Vec::new();
    rec.result
        .write_trace_csv(&mut trace)
        .map_err(|e| CliError::file(&dir.join("trace.csv"), e))?;
    write_atomic(&dir.join("trace.csv"), &trace)?;

    let mut snap = Vec::new();
    write_snapshot(&DictionarySnapshot::from_state(&rec.result.state)?, &mut snap)?;
    write_atomic(&dir.join("dictionary.bin"), &snap)?;

    let state = &rec.result.state;
    let mut summary = String::new();
    let _ = writeln!(summary, "epochs={}", rec.result.trace.len());
    let _ = writeln!(summary, "batch_size={}", rec.result.batch_size);
    let _ = writeln!(summary, "restart={}", rec.result.restart);
    let _ = writeln!(summary, "stopped_early={}", rec.result.stopped_early);
    if let Some(last) = rec.result.trace.last() {
        let _ = writeln!(summary, "objective={:.12e}", last.objective);
    }
    let _ = writeln!(summary, "active_atoms={}", state.active_atom_count());
    let _ = writeln!(summary, "gamma_n={:.9e}", state.gamma_n());
    let _ = writeln!(summary, "gamma_w={:.9e}", state.gamma_w());
    if let Some(reference) = reference {
        let _ = writeln!(summary, "psnr={}", num(psnr(reference, &rec.image, 1.0)?));
        let _ = writeln!(summary, "input_psnr={}", num(psnr(reference, input, 1.0)?));
    }
    write_atomic(&dir.join("summary.txt"), summary.as_bytes())?;
    write_atomic(&dir.join("manifest.txt"), manifest.as_bytes())?;
    print!("{summary}");
    Ok(())
}

fn check_reference(reference: Option<&std::path::PathBuf>, shape: (usize, usize)) -> CliResult<Option<Image>> {
    let Some(path) = reference else {
        return Ok(None);
    };
    let image = load(path)?;
    if image.shape() != shape {
        return Err(CliError::file(
            path,
            cs_scan_core::Error::ShapeMismatch {
                expected: shape,
                actual: image.shape(),
            },
        ));
    }
    Ok(Some(image))
}

pub fn cmd_reconstruct(cmd: &ReconstructCmd, manifest: &str) -> CliResult<()> {
    let observation = load(&cmd.observation)?;
    let mask = load_mask(&cmd.mask, Some(observation.shape())).map_err(|e| CliError::file(&cmd.mask, e))?;
    if mask.shape() != observation.shape() {
        return Err(CliError::file(
            &cmd.mask,
            cs_scan_core::Error::ShapeMismatch {
                expected: observation.shape(),
                actual: mask.shape(),
            },
        ));
    }
    let reference = check_reference(cmd.reference.as_ref(), observation.shape())?;
    let rec = recover(&observation, &mask, &cmd.bpfa, cmd.seed)?;
    write_outputs(&cmd.out_dir, &rec, &observation, reference.as_ref(), manifest)
}

pub fn cmd_denoise(cmd: &DenoiseCmd, manifest: &str) -> CliResult<()> {
    let input = load(&cmd.input)?;
    let (h, w) = input.shape();
    let reference = check_reference(cmd.reference.as_ref(), (h, w))?;
    let rec = recover(&input, &Mask::full(h, w), &cmd.bpfa, cmd.seed)?;
    write_outputs(&cmd.out_dir, &rec, &input, reference.as_ref(), manifest)
}
