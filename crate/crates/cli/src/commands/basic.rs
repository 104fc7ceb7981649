use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cs_scan_core::acquisition::acquire;
use cs_scan_core::formats::write_pbm;
use cs_scan_core::imaging::{drift_matched_psnr, mse, psnr};
use cs_scan_core::phantom::lattice_phantom;
use cs_scan_core::sampling::{parse_ratio, plan_metrics, raster_plan, uds_plan, SamplingPlan, Scheme};

use super::load;
use crate::args::{AcquireCmd, EvaluateCmd, PhantomCmd, PlanCmd};
use crate::error::{CliError, CliResult};
use crate::output::{create_dir, num, write_atomic, write_image};

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest");
    path.with_file_name(name)
}

pub fn build_plan(cmd: &PlanCmd) -> CliResult<SamplingPlan> {
    let (h, w) = cmd.size;
    if cmd.scheme == Scheme::Raster {
        return Ok(raster_plan(h, w, cmd.dwell));
    }
    let ratio = cmd
        .ratio
        .as_deref()
        .ok_or_else(|| CliError::Usage(format!("--ratio is required for {} plans", cmd.scheme)))?;
    let ratio = parse_ratio(ratio)?;
    let seed = cmd
        .seed
        .ok_or_else(|| CliError::Usage(format!("--seed is required for {} plans", cmd.scheme)))?;
    Ok(match cmd.scheme {
        Scheme::Uds => uds_plan(h, w, ratio, cmd.dwell, seed)?,
        _ => cmd.hop.config().plan(h, w, ratio, cmd.dwell, seed)?,
    })
}

pub fn cmd_plan(cmd: &PlanCmd, manifest: &str) -> CliResult<()> {
    let plan = build_plan(cmd)?;
    let metrics = plan_metrics(&plan)?;
    write_atomic(&cmd.out, plan.to_text().as_bytes())?;
    if let Some(path) = &cmd.mask_out {
        let mut buf = Vec::new();
        write_pbm(&plan.mask()?, &mut buf)?;
        write_atomic(path, &buf)?;
    }
    write_atomic(&sidecar(&cmd.out), manifest.as_bytes())?;
    println!("M={}", plan.len());
    println!("max_jump={}", metrics.max_jump);
    println!("mean_jump={}", num(metrics.mean_jump));
    println!("overlap_count={}", metrics.overlap_count);
    Ok(())
}

pub fn cmd_phantom(cmd: &PhantomCmd, manifest: &str) -> CliResult<()> {
    let image = lattice_phantom(&cmd.params())?;
    write_image(&cmd.out, &image)?;
    write_atomic(&sidecar(&cmd.out), manifest.as_bytes())?;
    println!("wrote {}x{} phantom to {}", image.height(), image.width(), cmd.out.display());
    Ok(())
}

pub fn cmd_acquire(cmd: &AcquireCmd, manifest: &str) -> CliResult<()> {
    let truth = load(&cmd.truth)?;
    let file = std::fs::File::open(&cmd.plan).map_err(|e| CliError::file(&cmd.plan, e))?;
    let plan = SamplingPlan::read_text(std::io::BufReader::new(file)).map_err(|e| CliError::file(&cmd.plan, e))?;
    let obs = acquire(&truth, &plan, &cmd.noise.spec(cmd.seed))?;

    create_dir(&cmd.out_dir)?;
    write_image(&cmd.out_dir.join("observation.raw"), &obs.image)?;
    let mut mask = Vec::new();
    write_pbm(&obs.mask, &mut mask)?;
    write_atomic(&cmd.out_dir.join("mask.pbm"), &mask)?;
    write_atomic(&cmd.out_dir.join("scan.plan"), plan.to_text().as_bytes())?;
    write_atomic(&cmd.out_dir.join("manifest.txt"), manifest.as_bytes())?;
    println!("M={}", plan.len());
    println!("dwell_us={}", num(plan.dwell));
    println!("dose={}", num(plan.dose()));
    Ok(())
}

fn parse_crop(text: &str) -> CliResult<(usize, usize, usize)> {
    let parts: Vec<usize> = text
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("invalid crop {text:?}, expected ROW,COL,SIZE")))?;
    match parts[..] {
        [r, c, s] if s > 0 => Ok((r, c, s)),
        _ => Err(CliError::Usage(format!("invalid crop {text:?}, expected ROW,COL,SIZE"))),
    }
}

pub fn cmd_evaluate(cmd: &EvaluateCmd) -> CliResult<()> {
    let reference = load(&cmd.reference)?;
    let test = load(&cmd.test)?;
    let mut report = String::new();
    match &cmd.crop {
        Some(crop) => {
            let (r, c, s) = parse_crop(crop)?;
            let window = reference.crop(r, c, s, s)?;
            let m = drift_matched_psnr(&window, &test, s, cmd.peak)?;
            let _ = writeln!(report, "psnr={}", num(m.psnr));
            let _ = writeln!(report, "offset_row={}", m.offset.0);
            let _ = writeln!(report, "offset_col={}", m.offset.1);
        }
        None => {
            let _ = writeln!(report, "psnr={}", num(psnr(&reference, &test, cmd.peak)?));
            let _ = writeln!(report, "mse={:.6e}", mse(&reference, &test)?);
        }
    }
    print!("{report}");
    if let Some(path) = &cmd.out {
        write_atomic(path, report.as_bytes())?;
    }
    Ok(())
}
