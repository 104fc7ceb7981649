use std::fmt::Write as _;

use cs_scan_core::acquisition::{constrained_dose_series, SeriesConfig};
use cs_scan_core::imaging::{drift_matched_psnr, psnr};
use cs_scan_core::sampling::{uds_plan, DoseBudget, LineHopConfig, Scheme};
use cs_scan_core::Image;
use rayon::prelude::*;

use super::{load_truth, recover};
use crate::args::{parse_ratios, parse_seeds, BpfaArgs, CurveCmd, DoseSeriesCmd, NoiseArgs};
use crate::error::{CliError, CliResult};
use crate::output::{create_dir, num, write_atomic, write_image};

/// One reconstruction of the sampling-ratio sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub scheme: Scheme,
    pub ratio: f64,
    pub seed: u64,
    pub psnr: f64,
    pub zero_fill_psnr: f64,
}

/// Masks `truth` with every (scheme, ratio, seed) combination, reconstructs
/// without added noise and scores against the truth. Rows come back in
/// scheme, ratio, seed order.
pub fn curve_runs(
    truth: &Image,
    schemes: &[Scheme],
    ratios: &[f64],
    seeds: &[u64],
    linehop: &LineHopConfig,
    bpfa: &BpfaArgs,
) -> CliResult<Vec<CurveRow>> {
    let (h, w) = truth.shape();
    let jobs: Vec<(Scheme, f64, u64)> = schemes
        .iter()
        .flat_map(|&s| ratios.iter().flat_map(move |&r| seeds.iter().map(move |&seed| (s, r, seed))))
        .collect();
    jobs.par_iter()
        .map(|&(scheme, ratio, seed)| {
            let plan = match scheme {
                Scheme::Uds => uds_plan(h, w, ratio, 1.0, seed)?,
                Scheme::LineHop => linehop.plan(h, w, ratio, 1.0, seed)?,
                Scheme::Raster => return Err(CliError::Usage("the curve compares uds and linehop only".into())),
            };
            let mask = plan.mask()?;
            let observed = mask.apply(truth)?;
            let rec = recover(&observed, &mask, bpfa, seed)?;
            Ok(CurveRow {
                scheme,
                ratio,
                seed,
                psnr: psnr(truth, &rec.image, 1.0)?,
                zero_fill_psnr: psnr(truth, &observed, 1.0)?,
            })
        })
        .collect()
}

/// Mean and population std of the PSNR per (scheme, ratio), in row order.
pub fn curve_means(rows: &[CurveRow]) -> Vec<(Scheme, f64, usize, f64, f64)> {
    let mut keys: Vec<(Scheme, f64)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.scheme, r.ratio)) {
            keys.push((r.scheme, r.ratio));
        }
    }
    keys.into_iter()
        .map(|(s, ratio)| {
            let vals: Vec<f64> = rows
                .iter()
                .filter(|r| r.scheme == s && r.ratio == ratio)
                .map(|r| r.psnr)
                .collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            (s, ratio, vals.len(), mean, var.sqrt())
        })
        .collect()
}

fn parse_schemes(text: &str) -> CliResult<Vec<Scheme>> {
    let schemes = text
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<Scheme>())
        .collect::<Result<Vec<_>, _>>()?;
    if schemes.is_empty() || schemes.contains(&Scheme::Raster) {
        return Err(CliError::Usage(format!("--schemes must list uds and/or linehop, got {text:?}")));
    }
    Ok(schemes)
}

pub fn cmd_curve(cmd: &CurveCmd, manifest: &str) -> CliResult<()> {
    let truth = load_truth(&cmd.truth)?;
    let schemes = parse_schemes(&cmd.schemes)?;
    let ratios = parse_ratios(&cmd.ratios)?;
    let seeds = parse_seeds(&cmd.seeds)?;
    cmd.bpfa.inference(0)?;
    create_dir(&cmd.out_dir)?;
    let rows = curve_runs(&truth, &schemes, &ratios, &seeds, &cmd.hop.config(), &cmd.bpfa)?;

    let mut csv = String::from("scheme,ratio,seed,psnr,zero_fill_psnr\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{},{},{}", r.scheme, r.ratio, r.seed, num(r.psnr), num(r.zero_fill_psnr));
    }
    let means = curve_means(&rows);
    let mut mean_csv = String::from("scheme,ratio,runs,mean_psnr,std_psnr\n");
    for (s, ratio, n, mean, std) in &means {
        let _ = writeln!(mean_csv, "{s},{ratio},{n},{},{}", num(*mean), num(*std));
    }
    let mut dat = String::from("# ratio");
    for s in &schemes {
        let _ = write!(dat, " {s}");
    }
    dat.push('\n');
    for &ratio in &ratios {
        let _ = write!(dat, "{ratio}");
        for s in &schemes {
            let m = means.iter().find(|m| m.0 == *s && m.1 == ratio).map_or(f64::NAN, |m| m.3);
            let _ = write!(dat, " {}", num(m));
        }
        dat.push('\n');
    }
    write_atomic(&cmd.out_dir.join("curve.csv"), csv.as_bytes())?;
    write_atomic(&cmd.out_dir.join("curve_mean.csv"), mean_csv.as_bytes())?;
    write_atomic(&cmd.out_dir.join("curve.dat"), dat.as_bytes())?;
    write_atomic(&cmd.out_dir.join("manifest.txt"), manifest.as_bytes())?;
    print!("{mean_csv}");
    Ok(())
}

/// One reconstruction of a constrained-dose series.
#[derive(Debug, Clone, PartialEq)]
pub struct DoseRow {
    pub seed: u64,
    pub ratio: f64,
    pub positions: usize,
    pub dwell: f64,
    pub drift: (isize, isize),
    pub psnr: f64,
    pub offset: (usize, usize),
}

/// Settings shared by every seed of a dose-series experiment.
#[derive(Debug, Clone)]
pub struct DoseSetup {
    pub ratios: Vec<f64>,
    pub budget_dwell: f64,
    pub noise: NoiseArgs,
    pub max_drift: usize,
    pub crop_size: usize,
    pub linehop: LineHopConfig,
}

/// Centred square crop of `truth` used as the drift-matching reference.
pub fn reference_crop(truth: &Image, size: usize) -> CliResult<Image> {
    let (h, w) = truth.shape();
    if size == 0 || size > h || size > w {
        return Err(CliError::Usage(format!("crop size {size} does not fit a {h}x{w} image")));
    }
    Ok(truth.crop((h - size) / 2, (w - size) / 2, size, size)?)
}

/// Runs the series for every seed. Reconstructions are returned alongside
/// their rows, in seed then ratio order.
pub fn dose_runs(
    truth: &Image,
    setup: &DoseSetup,
    seeds: &[u64],
    bpfa: &BpfaArgs,
) -> CliResult<Vec<(DoseRow, Image)>> {
    let (h, w) = truth.shape();
    let budget = DoseBudget::new(setup.budget_dwell, h * w)?;
    let reference = reference_crop(truth, setup.crop_size)?;
    let per_seed: Vec<Vec<(DoseRow, Image)>> = seeds
        .par_iter()
        .map(|&seed| {
            let config = SeriesConfig {
                linehop: setup.linehop,
                noise: setup.noise.spec(seed),
                max_drift: setup.max_drift,
                seed,
            };
            let series = constrained_dose_series(truth, &setup.ratios, &budget, &config)?;
            series
                .iter()
                .map(|el| {
                    let obs = &el.observation;
                    let rec = recover(&obs.image, &obs.mask, bpfa, seed)?;
                    let m = drift_matched_psnr(&reference, &rec.image, setup.crop_size, 1.0)?;
                    let row = DoseRow {
                        seed,
                        ratio: el.ratio,
                        positions: obs.plan.len(),
                        dwell: el.dwell,
                        drift: el.drift,
                        psnr: m.psnr,
                        offset: m.offset,
                    };
                    Ok((row, rec.image))
                })
                .collect::<CliResult<Vec<_>>>()
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(per_seed.into_iter().flatten().collect())
}

pub fn cmd_dose_series(cmd: &DoseSeriesCmd, manifest: &str) -> CliResult<()> {
    let truth = load_truth(&cmd.truth)?;
    let (h, w) = truth.shape();
    let setup = DoseSetup {
        ratios: parse_ratios(&cmd.ratios)?,
        budget_dwell: cmd.budget_dwell,
        noise: cmd.noise_args(),
        max_drift: cmd.max_drift,
        crop_size: cmd.crop_size.unwrap_or(h.min(w) * 3 / 4),
        linehop: cmd.hop.config(),
    };
    if setup.crop_size + 2 * setup.max_drift > h.min(w) {
        return Err(CliError::Usage(format!(
            "crop {} plus drift {} on each side does not fit a {h}x{w} image",
            setup.crop_size, setup.max_drift
        )));
    }
    let seeds = parse_seeds(&cmd.seeds)?;
    cmd.bpfa.inference(0)?;
    create_dir(&cmd.out_dir)?;
    let runs = dose_runs(&truth, &setup, &seeds, &cmd.bpfa)?;

    let mut csv = String::from("seed,ratio,positions,dwell_us,drift_row,drift_col,psnr,offset_row,offset_col\n");
    for (r, _) in &runs {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            r.seed,
            r.ratio,
            r.positions,
            num(r.dwell),
            r.drift.0,
            r.drift.1,
            num(r.psnr),
            r.offset.0,
            r.offset.1
        );
    }
    let mut mean_csv = String::from("ratio,dwell_us,runs,mean_psnr\n");
    for &ratio in &setup.ratios {
        let rows: Vec<&DoseRow> = runs.iter().map(|(r, _)| r).filter(|r| r.ratio == ratio).collect();
        let mean = rows.iter().map(|r| r.psnr).sum::<f64>() / rows.len() as f64;
        let _ = writeln!(mean_csv, "{ratio},{},{},{}", num(rows[0].dwell), rows.len(), num(mean));
    }
    for (r, image) in &runs {
        let name = format!("seed{}_ratio{:03}.pgm", r.seed, (r.ratio * 100.0).round() as u32);
        write_image(&cmd.out_dir.join("recon").join(name), image)?;
    }
    let mut full_manifest = manifest.to_string();
    for line in mean_csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let _ = writeln!(full_manifest, "# series ratio={} dwell_us={}", f[0], f[1]);
    }
    write_atomic(&cmd.out_dir.join("dose.csv"), csv.as_bytes())?;
    write_atomic(&cmd.out_dir.join("dose_mean.csv"), mean_csv.as_bytes())?;
    write_atomic(&cmd.out_dir.join("manifest.txt"), full_manifest.as_bytes())?;
    print!("{mean_csv}");
    Ok(())
}
