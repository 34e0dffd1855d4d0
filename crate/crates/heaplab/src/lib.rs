//! Reporting distributions for heaped count data via general birth-death
//! processes, and a Bayesian hierarchical model for longitudinal panels of
//! self-reported counts.
//!
//! The crate is organized around the pipeline:
//!
//! * [`bdp`] — transition rows of a general birth-death process (Laplace
//!   solve + numerical inversion, with a uniformization oracle),
//! * [`report`] — heaping rate schedules and the reporting pmf `g(y|x)`,
//! * [`model`] — the Poisson GLMM with latent true counts and priors,
//! * [`sampler`] — Metropolis-within-Gibbs posterior sampling,
//! * [`fitstats`] — DIC, SSPE and posterior summaries,
//! * [`datagen`] — simulation of heaped longitudinal panels,
//! * [`io`] — CSV panels, JSON configs, chain persistence and run manifests.

pub mod bdp;
pub mod datagen;
pub mod linalg;
pub mod model;
pub mod report;
pub mod sampler;
pub mod error;
pub mod fitstats;
pub mod io;
pub mod util;

pub use error::{HeapError, Result};
