use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, derived_rng};

use super::data::PatchData;
use super::state::{init_state, BpfaHyperparams, BpfaState};

const TAG_SHUFFLE: u64 = 0x10;
const TAG_RESTART: u64 = 0x11;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Posterior means, with a Gaussian variance kept for active weights.
    Em,
    /// Samples from every conditional.
    Gibbs,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Em => "em",
            Mode::Gibbs => "gibbs",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "em" => Ok(Mode::Em),
            "gibbs" => Ok(Mode::Gibbs),
            other => Err(Error::InvalidParameter(format!("unknown inference mode '{other}'"))),
        }
    }
}

/// How the E-step decides support bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupportUpdate {
    /// Each `z_ik` is decided with all weights of the patch integrated out,
    /// so redundant atoms can be dropped.
    Collapsed,
    /// EM only: like `Collapsed`, but always flips the bit with the largest
    /// gain first. Gibbs mode falls back to `Collapsed`.
    Greedy,
    /// Each `z_ik` is decided with the other weights of the patch fixed.
    SingleSite,
}

impl std::fmt::Display for SupportUpdate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SupportUpdate::Collapsed => "collapsed",
            SupportUpdate::Greedy => "greedy",
            SupportUpdate::SingleSite => "single-site",
        })
    }
}

impl FromStr for SupportUpdate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "collapsed" => Ok(SupportUpdate::Collapsed),
            "greedy" => Ok(SupportUpdate::Greedy),
            "single-site" | "single" => Ok(SupportUpdate::SingleSite),
            other => Err(Error::InvalidParameter(format!("unknown support update '{other}'"))),
        }
    }
}

/// How mini-batch statistics are folded into the global parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    /// Replace parameters by the batch posterior scaled by N_p / N_b.
    Scaled,
    /// Average with weight `rho_t = (t0 + t)^-kappa`, `t` counting batches.
    RobbinsMonro { t0: f64, kappa: f64 },
}

impl StepSize {
    fn rho(&self, t: u64) -> f64 {
        match *self {
            StepSize::Scaled => 1.0,
            StepSize::RobbinsMonro { t0, kappa } => (t0 + t as f64).powf(-kappa).min(1.0),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            StepSize::Scaled => Ok(()),
            StepSize::RobbinsMonro { t0, kappa } => {
                if t0 >= 1.0 && kappa > 0.5 && kappa <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "Robbins-Monro step needs t0 >= 1 and kappa in (0.5, 1], got t0={t0}, kappa={kappa}"
                    )))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchSchedule {
    /// Patches per batch; `None` means full batch.
    pub batch_size: Option<usize>,
    pub epochs: usize,
    /// Seed of the per-epoch shuffles.
    pub seed: u64,
}

impl Default for BatchSchedule {
    fn default() -> Self {
        Self {
            batch_size: None,
            epochs: 60,
            seed: 0,
        }
    }
}

impl BatchSchedule {
    pub fn resolved_batch_size(&self, patches: usize) -> Result<usize> {
        let nb = self.batch_size.unwrap_or(patches);
        if nb == 0 || nb > patches {
            return Err(Error::InvalidParameter(format!(
                "batch size {nb} must lie in 1..={patches} (number of patches)"
            )));
        }
        Ok(nb)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceConfig {
    pub hyper: BpfaHyperparams,
    pub schedule: BatchSchedule,
    pub mode: Mode,
    pub support: SupportUpdate,
    pub step: StepSize,
    /// Starting noise precision as a multiple of `1 / mean(y^2)`; `None`
    /// keeps the prior mean `c / d`.
    pub noise_warm_start: Option<f64>,
    /// Stop once the objective moves less than this relative amount over
    /// five epochs.
    pub early_stop: Option<f64>,
    /// Record wall-clock time per epoch in the trace (otherwise zero).
    pub record_time: bool,
    /// Independent initialisations; the run with the highest final
    /// objective is kept.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            hyper: BpfaHyperparams::default(),
            schedule: BatchSchedule::default(),
            mode: Mode::Em,
            support: SupportUpdate::Greedy,
            step: StepSize::Scaled,
            noise_warm_start: Some(1.0),
            early_stop: None,
            record_time: false,
            restarts: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochTrace {
    pub epoch: usize,
    pub objective: f64,
    pub active_atoms: usize,
    pub mean_pi: f64,
    pub gamma_n: f64,
    pub gamma_w: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct InferenceResult {
    pub state: BpfaState,
    pub trace: Vec<EpochTrace>,
    pub batch_size: usize,
    pub stopped_early: bool,
    /// Index of the restart that was kept.
    pub restart: usize,
}

impl InferenceResult {
    /// Writes the trace as CSV: `epoch,objective,active_atoms,mean_pi,wall_ms`.
    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "epoch,objective,active_atoms,mean_pi,wall_ms")?;
        for t in &self.trace {
            writeln!(
                out,
                "{},{:.12e},{},{:.9},{:.3}",
                t.epoch, t.objective, t.active_atoms, t.mean_pi, t.wall_ms
            )?;
        }
        Ok(())
    }
}

/// Runs stochastic mini-batch inference from a fresh [`init_state`].
///
/// Restart `r` initialises from `derive_seed(seed, [r])` (restart 0 uses
/// `seed` itself); the result with the highest final objective is returned,
/// ties going to the earliest restart.
pub fn run_inference(data: &PatchData, config: &InferenceConfig) -> Result<InferenceResult> {
    if config.restarts == 0 {
        return Err(Error::InvalidParameter("need at least one restart".into()));
    }
    let mut best: Option<InferenceResult> = None;
    for r in 0..config.restarts {
        let seed = if r == 0 { config.seed } else { derive_seed(config.seed, &[TAG_RESTART, r as u64]) };
        let mut state = init_state(data, &config.hyper, seed)?;
        if let Some(snr) = config.noise_warm_start {
            if !(snr > 0.0) || !snr.is_finite() {
                return Err(Error::InvalidParameter(format!("noise warm start must be positive, got {snr}")));
            }
            let power = data.mean_square();
            if power > 0.0 {
                state.set_precisions(snr / power, state.gamma_w())?;
            }
        }
        let mut result = run_from_state(data, state, config)?;
        result.restart = r;
        let better = match &best {
            None => true,
            Some(b) => final_objective(&result) > final_objective(b),
        };
        if better {
            best = Some(result);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn final_objective(result: &InferenceResult) -> f64 {
    result.trace.last().map_or(f64::NEG_INFINITY, |t| t.objective)
}

/// Continues inference from an existing state.
pub fn run_from_state(data: &PatchData, mut state: BpfaState, config: &InferenceConfig) -> Result<InferenceResult> {
    if data.len() != state.patch_count() || data.patch_len() != state.patch_len() {
        return Err(Error::InvalidParameter("patch data does not match the state".into()));
    }
    config.step.validate()?;
    let np = data.len();
    let nb = config.schedule.resolved_batch_size(np)?;
    let scale = np as f64 / nb as f64;
    let mut order: Vec<usize> = (0..np).collect();
    let mut trace: Vec<EpochTrace> = Vec::with_capacity(config.schedule.epochs);
    let mut t = 0u64;
    let mut stopped_early = false;
    for epoch in 0..config.schedule.epochs {
        let start = Instant::now();
        if nb < np {
            let mut rng = derived_rng(config.schedule.seed, &[TAG_SHUFFLE, epoch as u64]);
            order.shuffle(&mut rng);
        }
        for (b, batch) in order.chunks(nb).enumerate() {
            let rho = config.step.rho(t);
            step_batch(&mut state, data, batch, config.mode, config.support, scale, rho, epoch as u64)
                .map_err(|e| annotate(e, epoch, b))?;
            t += 1;
        }
        let objective = state.objective(data);
        if !objective.is_finite() {
            return Err(Error::NonFiniteObjective {
                epoch,
                batch: order.len().div_ceil(nb) - 1,
            });
        }
        trace.push(EpochTrace {
            epoch,
            objective,
            active_atoms: state.active_atom_count(),
            mean_pi: state.pi().iter().sum::<f64>() / state.atoms() as f64,
            gamma_n: state.gamma_n(),
            gamma_w: state.gamma_w(),
            wall_ms: if config.record_time {
                start.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            },
        });
        if let Some(tol) = config.early_stop {
            if trace.len() > 5 {
                let old = trace[trace.len() - 6].objective;
                if (objective - old).abs() <= tol * old.abs().max(f64::MIN_POSITIVE) {
                    stopped_early = true;
                    break;
                }
            }
        }
    }
    state.refresh_all_residuals(data);
    Ok(InferenceResult {
        state,
        trace,
        batch_size: nb,
        stopped_early,
        restart: 0,
    })
}

/// One E-step plus M-step on a batch.
#[allow(clippy::too_many_arguments)]
pub fn step_batch(
    state: &mut BpfaState,
    data: &PatchData,
    batch: &[usize],
    mode: Mode,
    support: SupportUpdate,
    scale: f64,
    rho: f64,
    epoch: u64,
) -> Result<()> {
    state.e_step(data, batch, mode, support, epoch)?;
    state.update_dictionary(data, batch, mode, scale, rho)?;
    state.update_pi(batch, mode, scale, rho);
    state.update_precisions(data, batch, mode, scale, rho);
    state.advance_step();
    if !state.gamma_n().is_finite() || !state.gamma_w().is_finite() {
        return Err(Error::NonFinite("precision".into()));
    }
    Ok(())
}

fn annotate(e: Error, epoch: usize, batch: usize) -> Error {
    match e {
        Error::NonFinite(_) => Error::NonFiniteObjective { epoch, batch },
        other => other,
    }
}
