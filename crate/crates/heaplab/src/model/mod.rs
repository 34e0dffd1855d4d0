//! The hierarchical model for latent true counts: a Poisson GLMM with log
//! link, subject random effects, subject-specific heaping intensities and
//! conditionally conjugate priors, plus the deterministic-rounding baseline.

pub mod data;
pub mod loglik;
pub mod params;
pub mod wh08;

pub use data::{Observation, PanelData, Subject};
pub use loglik::{
    heap_params_for, latent_intensity, log_joint, log_prior, report_log_lik,
    subject_heap_intensity, FROZEN_EPS,
};
pub use params::{Hyperparams, ModelParams, Variant};
pub use wh08::{nearest_multiple, regime_report, support_halfwidth, wh08_pmf, wh08_report};
