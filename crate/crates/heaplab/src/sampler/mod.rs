//! Metropolis-within-Gibbs posterior sampling: discretized-normal latent
//! count proposals with exact accept/reject, adaptive random-walk blocks for
//! the continuous parameters, and conjugate draws for the variances.

mod blocks;
mod cache;
mod latent;
mod run;

pub use blocks::{
    sample_inv_gamma, sample_inv_wishart, update_sigma2_xi, update_sigma_beta, AdaptiveStep,
    BlockStats, TARGET_SCALAR, TARGET_VECTOR,
};
pub use cache::{GRowCache, SigId};
pub use latent::{
    proposal_log_density, proposal_table, update_latent_count, update_latent_wh08, LatentTuning,
    ProposalTable,
};
pub use run::{initial_params, run_chains, run_mcmc, Chain, RunState, SamplerConfig, StepSizes};
