use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use cs_scan_core::acquisition::NoiseKind;
use cs_scan_core::bpfa::{BatchSchedule, BpfaHyperparams, InferenceConfig, Mode, StepSize, SupportUpdate};
use cs_scan_core::phantom::Lattice;
use cs_scan_core::sampling::{LineHopConfig, Scheme};
use cs_scan_core::{Error, PatchGrid, Result};

#[derive(Debug, Parser)]
#[command(
    name = "cs-scan",
    version,
    about = "Subsampled probe-scan simulation and BPFA image reconstruction",
    args_override_self = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a scan plan and print its hardware metrics.
    Plan(PlanCmd),
    /// Render a synthetic atomic-lattice ground truth.
    Phantom(PhantomCmd),
    /// Apply a scan plan to a ground truth, with optional noise.
    Acquire(AcquireCmd),
    /// Recover an image from a subsampled observation.
    Reconstruct(ReconstructCmd),
    /// Fully sampled BPFA denoising.
    Denoise(DenoiseCmd),
    /// PSNR between two images, optionally drift-matched.
    Evaluate(EvaluateCmd),
    /// PSNR against sampling ratio for UDS and line-hop.
    Curve(CurveCmd),
    /// Constrained-dose line-hop series with drift-matched PSNR.
    DoseSeries(DoseSeriesCmd),
}

/// Parses `HxW` (or a single `N` for a square).
pub fn parse_size(text: &str) -> std::result::Result<(usize, usize), String> {
    let bad = || format!("invalid size {text:?}, expected HxW");
    let parts: Vec<&str> = text.split(['x', 'X']).collect();
    let nums: Vec<usize> = parts
        .iter()
        .map(|p| p.trim().parse::<usize>().map_err(|_| bad()))
        .collect::<std::result::Result<_, _>>()?;
    match nums[..] {
        [n] if n > 0 => Ok((n, n)),
        [h, w] if h > 0 && w > 0 => Ok((h, w)),
        _ => Err(bad()),
    }
}

/// Parses a ratio list such as `0.1,0.2` or `10%,20%`.
pub fn parse_ratios(text: &str) -> Result<Vec<f64>> {
    let ratios = text
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(cs_scan_core::sampling::parse_ratio)
        .collect::<Result<Vec<_>>>()?;
    if ratios.is_empty() {
        return Err(Error::InvalidParameter("empty ratio list".into()));
    }
    Ok(ratios)
}

/// Parses a seed list: comma-separated seeds and inclusive ranges `a-b`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = || Error::InvalidParameter(format!("invalid seed list {text:?}"));
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().map_err(|_| bad())?;
                let b: u64 = b.trim().parse().map_err(|_| bad())?;
                if b < a {
                    return Err(bad());
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(part.parse().map_err(|_| bad())?),
        }
    }
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

#[derive(Debug, Clone, Args)]
pub struct HopArgs {
    /// Line-hop amplitude h in pixels [default: chosen from the line spacing].
    #[arg(long)]
    pub hop_amplitude: Option<usize>,
    /// Probability per column that a line-hop row moves by one.
    #[arg(long, default_value_t = 1.0)]
    pub hop_prob: f64,
    /// Scan every line-hop line left to right.
    #[arg(long)]
    pub no_serpentine: bool,
}

impl HopArgs {
    pub fn config(&self) -> LineHopConfig {
        LineHopConfig {
            amplitude: self.hop_amplitude,
            hop_prob: self.hop_prob,
            serpentine: !self.no_serpentine,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct PlanCmd {
    #[arg(long, value_parser = parse_scheme)]
    pub scheme: Scheme,
    /// Sampling ratio, as a fraction or percentage (ignored by raster).
    #[arg(long)]
    pub ratio: Option<String>,
    #[arg(long, value_parser = parse_size)]
    pub size: (usize, usize),
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dwell time per position, in microseconds.
    #[arg(long, default_value_t = 4.0)]
    pub dwell: f64,
    #[command(flatten)]
    pub hop: HopArgs,
    /// Plan file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the plan's mask as PBM.
    #[arg(long)]
    pub mask_out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse_scheme(text: &str) -> std::result::Result<Scheme, String> {
    text.parse::<Scheme>().map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct PhantomCmd {
    #[arg(long, value_parser = parse_size, default_value = "128x128")]
    pub size: (usize, usize),
    #[arg(long, default_value = "hex")]
    pub lattice: Lattice,
    /// Column spacing in pixels.
    #[arg(long, default_value_t = 6.0)]
    pub spacing: f64,
    /// Column width (Gaussian std) in pixels.
    #[arg(long, default_value_t = 1.2)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.1)]
    pub background: f64,
    #[arg(long, default_value_t = 0.8)]
    pub contrast: f64,
    /// Lattice rotation in degrees.
    #[arg(long, default_value_t = 12.0)]
    pub rotation: f64,
    /// Relative spread of column heights.
    #[arg(long, default_value_t = 0.1)]
    pub jitter: f64,
    /// Particle radius as a fraction of the smaller side; 0 fills the field.
    #[arg(long, default_value_t = 0.42)]
    pub radius: f64,
    #[arg(long)]
    pub seed: u64,
    /// Output image (.pgm or .raw).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl PhantomCmd {
    pub fn params(&self) -> cs_scan_core::phantom::PhantomParams {
        let mut p = cs_scan_core::phantom::PhantomParams::new(self.size.0, self.size.1);
        p.lattice = self.lattice;
        p.spacing = self.spacing;
        p.sigma = self.sigma;
        p.background = self.background;
        p.contrast = self.contrast;
        p.rotation_deg = self.rotation;
        p.jitter = self.jitter;
        p.particle_radius = (self.radius > 0.0).then_some(self.radius);
        p.seed = self.seed;
        p
    }
}

#[derive(Debug, Clone, Args)]
pub struct NoiseArgs {
    #[arg(long, default_value = "none")]
    pub noise: NoiseKind,
    /// Gaussian noise std at the noise reference dwell.
    #[arg(long, default_value_t = 0.05)]
    pub noise_sigma: f64,
    /// Dwell time (us) at which the noise std applies.
    #[arg(long, default_value_t = 4.0)]
    pub noise_dwell: f64,
    /// Poisson counts per unit intensity per microsecond.
    #[arg(long, default_value_t = 100.0)]
    pub gain: f64,
}

impl NoiseArgs {
    pub fn spec(&self, seed: u64) -> cs_scan_core::acquisition::NoiseSpec {
        use cs_scan_core::acquisition::NoiseSpec;
        match self.noise {
            NoiseKind::None => NoiseSpec::none(),
            NoiseKind::Gaussian => NoiseSpec::gaussian(self.noise_sigma, self.noise_dwell, seed),
            NoiseKind::Poisson => NoiseSpec::poisson(self.gain, seed),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct AcquireCmd {
    /// Ground-truth image (.pgm or .raw).
    #[arg(long)]
    pub truth: PathBuf,
    /// Scan plan written by `plan`.
    #[arg(long)]
    pub plan: PathBuf,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BpfaArgs {
    /// Dictionary size K.
    #[arg(long, default_value_t = 64)]
    pub atoms: usize,
    /// Patch side B.
    #[arg(long, default_value_t = 8)]
    pub patch_size: usize,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    /// Patches per mini-batch [default: all patches].
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long, default_value = "em")]
    pub mode: Mode,
    #[arg(long, default_value = "greedy")]
    pub support: SupportUpdate,
    /// Independent initialisations; the best final objective is kept.
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    /// Initial noise precision as a multiple of 1/mean(y^2); 0 starts from the prior.
    #[arg(long, default_value_t = 1.0)]
    pub warm_start_snr: f64,
    /// Robbins-Monro forgetting rate; unset uses plain batch scaling.
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub t0: f64,
    /// Relative objective change over five epochs that stops early.
    #[arg(long)]
    pub early_stop: Option<f64>,
    /// Subtract each patch's observed mean before coding.
    #[arg(long)]
    pub centre: bool,
    /// Record per-epoch wall time in the trace (makes it non-reproducible).
    #[arg(long)]
    pub timing: bool,
    #[arg(long, default_value_t = 1.0)]
    pub prior_a: f64,
    #[arg(long, default_value_t = 1.0)]
    pub prior_b: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub prior_c: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub prior_d: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub prior_e: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub prior_f: f64,
}

impl Default for BpfaArgs {
    fn default() -> Self {
        #[derive(Parser)]
        struct Defaults {
            #[command(flatten)]
            bpfa: BpfaArgs,
        }
        Defaults::parse_from(["cs-scan"]).bpfa
    }
}

impl BpfaArgs {
    pub fn inference(&self, seed: u64) -> Result<InferenceConfig> {
        let hyper = BpfaHyperparams {
            atoms: self.atoms,
            a: self.prior_a,
            b: self.prior_b,
            c: self.prior_c,
            d: self.prior_d,
            e: self.prior_e,
            f: self.prior_f,
        };
        hyper.validate()?;
        let step = match self.kappa {
            Some(kappa) => StepSize::RobbinsMonro { t0: self.t0, kappa },
            None => StepSize::Scaled,
        };
        if !(self.warm_start_snr >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "warm-start SNR must be non-negative, got {}",
                self.warm_start_snr
            )));
        }
        Ok(InferenceConfig {
            hyper,
            schedule: BatchSchedule {
                batch_size: self.batch_size,
                epochs: self.epochs,
                seed,
            },
            mode: self.mode,
            support: self.support,
            step,
            noise_warm_start: (self.warm_start_snr > 0.0).then_some(self.warm_start_snr),
            early_stop: self.early_stop,
            record_time: self.timing,
            restarts: self.restarts,
            seed,
        })
    }

    pub fn grid(&self, height: usize, width: usize) -> Result<PatchGrid> {
        PatchGrid::new(height, width, self.patch_size, self.stride)
    }
}

#[derive(Debug, Clone, Args)]
pub struct ReconstructCmd {
    /// Zero-filled observation (.raw or .pgm).
    #[arg(long)]
    pub observation: PathBuf,
    /// Sampling mask (.pbm, .plan or index list).
    #[arg(long)]
    pub mask: PathBuf,
    /// Ground truth for reporting PSNR.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[command(flatten)]
    pub bpfa: BpfaArgs,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DenoiseCmd {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[command(flatten)]
    pub bpfa: BpfaArgs,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateCmd {
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Drift-matched comparison of the reference crop `ROW,COL,SIZE`
    /// against every window of the test image.
    #[arg(long)]
    pub crop: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub peak: f64,
    /// Write the result as key=value text.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TruthArgs {
    /// Ground-truth image; the default lattice phantom when absent.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Phantom size when no truth image is given.
    #[arg(long, value_parser = parse_size, default_value = "128x128")]
    pub size: (usize, usize),
}

#[derive(Debug, Clone, Args)]
pub struct CurveCmd {
    #[command(flatten)]
    pub truth: TruthArgs,
    #[arg(long, default_value = "0.1,0.2,0.3,0.4,0.5")]
    pub ratios: String,
    #[arg(long, default_value = "uds,linehop")]
    pub schemes: String,
    /// Seeds, e.g. `0-9` or `1,4,7`.
    #[arg(long)]
    pub seeds: String,
    #[command(flatten)]
    pub hop: HopArgs,
    #[command(flatten)]
    pub bpfa: BpfaArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DoseSeriesCmd {
    #[command(flatten)]
    pub truth: TruthArgs,
    #[arg(long, default_value = "0.5,0.4,0.3,0.2,0.1")]
    pub ratios: String,
    /// Reference dwell (us) of the full raster that sets the dose budget.
    #[arg(long, default_value_t = 4.0)]
    pub budget_dwell: f64,
    #[arg(long, default_value = "gaussian")]
    pub noise: NoiseKind,
    #[arg(long, default_value_t = 0.1)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 4.0)]
    pub noise_dwell: f64,
    #[arg(long, default_value_t = 100.0)]
    pub gain: f64,
    /// Largest simulated drift per axis between acquisitions.
    #[arg(long, default_value_t = 0)]
    pub max_drift: usize,
    /// Side of the centred reference crop [default: 3/4 of the smaller side].
    #[arg(long)]
    pub crop_size: Option<usize>,
    #[arg(long)]
    pub seeds: String,
    #[command(flatten)]
    pub hop: HopArgs,
    #[command(flatten)]
    pub bpfa: BpfaArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl DoseSeriesCmd {
    pub fn noise_args(&self) -> NoiseArgs {
        NoiseArgs {
            noise: self.noise,
            noise_sigma: self.noise_sigma,
            noise_dwell: self.noise_dwell,
            gain: self.gain,
        }
    }
}
