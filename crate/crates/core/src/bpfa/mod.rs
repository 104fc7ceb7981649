//! Beta-process factor analysis for masked patches.
//!
//! Each observed patch is modelled as `y_i = P_i D (z_i * w_i) + n_i` with
//! Gaussian atoms `d_k ~ N(0, B^-2 I)`, Gaussian weights
//! `w_i ~ N(0, gamma_w^-1 I)`, Gaussian noise `n_i ~ N(0, gamma_n^-1 I)`,
//! Bernoulli supports `z_ik ~ Bern(pi_k)` and `pi_k ~ Beta(a/K, b(K-1)/K)`,
//! with gamma hyper-priors on both precisions.
//!
//! Inference runs over mini-batches of patches. The same conjugate
//! conditionals drive two modes: [`Mode::Gibbs`] samples them, while
//! [`Mode::Em`] takes posterior means and keeps a Gaussian variance for every
//! active weight, which makes each step a coordinate ascent on the
//! [`objective`](BpfaState::objective) at full batch.

pub mod conditionals;
mod data;
mod estep;
mod inference;
mod snapshot;
mod state;

pub use conditionals::{
    atom_pixel_posterior, noise_precision_posterior, pi_posterior, support_log_odds, weight_posterior,
    weight_precision_posterior, BetaPosterior, GammaPosterior, GaussianPosterior,
};
pub use data::PatchData;
pub use inference::{
    run_from_state, run_inference, step_batch, BatchSchedule, EpochTrace, InferenceConfig, InferenceResult, Mode, StepSize,
    SupportUpdate,
};
pub use snapshot::{read_snapshot, write_snapshot, DictionarySnapshot};
pub use state::{init_state, ActiveWeight, BpfaHyperparams, BpfaState, MAX_PRECISION};
