//! The Metropolis-within-Gibbs driver.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bdp::SolverConfig;
use crate::error::{HeapError, Result};
use crate::linalg::SmallMat;
use crate::model::{heap_params_for, latent_intensity, Hyperparams, ModelParams, PanelData, Variant};
use crate::util::derive_seed;

use super::blocks::{self, AdaptiveStep, BlockStats, TARGET_SCALAR, TARGET_VECTOR};
use super::cache::{GRowCache, SigId};
use super::latent::{update_latent_count, update_latent_wh08, LatentTuning};

/// Per-block starting step sizes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct StepSizes {
    pub alpha: f64,
    pub beta: f64,
    pub theta_disp: f64,
    pub theta_heap: f64,
    pub gamma: f64,
    pub omega: f64,
    pub xi: f64,
}

impl Default for StepSizes {
    fn default() -> Self {
        StepSizes {
            alpha: 0.1,
            beta: 0.3,
            theta_disp: 0.3,
            theta_heap: 0.5,
            gamma: 0.3,
            omega: 0.3,
            xi: 0.5,
        }
    }
}

/// Sampler controls.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub chains: usize,
    pub adapt: bool,
    /// Iterations over which step sizes adapt; capped at burn-in so kept
    /// samples always come from a fixed kernel. `None` adapts through all
    /// of burn-in.
    pub adaptation_window: Option<usize>,
    pub steps: StepSizes,
    pub latent: LatentTuning,
    pub solver: SolverConfig,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            iterations: 20_000,
            burn_in: 5_000,
            thin: 5,
            seed: 0,
            chains: 1,
            adapt: true,
            adaptation_window: None,
            steps: StepSizes::default(),
            latent: LatentTuning::default(),
            solver: SolverConfig::fast(),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in {
            return Err(HeapError::Domain(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iterations, self.burn_in
            )));
        }
        if self.thin == 0 || self.chains == 0 {
            return Err(HeapError::Domain("thin and chains must be positive".into()));
        }
        let steps = [
            self.steps.alpha,
            self.steps.beta,
            self.steps.theta_disp,
            self.steps.theta_heap,
            self.steps.gamma,
            self.steps.omega,
            self.steps.xi,
        ];
        if steps.iter().any(|s| !(*s > 0.0)) {
            return Err(HeapError::Domain("step sizes must be positive".into()));
        }
        Ok(())
    }
}

/// Posterior samples plus sampler metadata for one chain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Chain {
    pub variant: Variant,
    pub seed: u64,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Post-burn-in acceptance rate per block.
    pub acceptance: BTreeMap<String, f64>,
    pub wall_secs: f64,
    pub samples: Vec<ModelParams>,
}

/// Mutable sampler state shared by the block updates.
pub struct RunState {
    pub params: ModelParams,
    /// Latent-count intensity per observation (kept in sync with alpha/beta).
    pub etas: Vec<f64>,
    /// Reporting configuration per subject (interned in the cache).
    pub sigs: Vec<SigId>,
    pub cache: GRowCache,
    /// Staging area for sigs computed during a proposal evaluation.
    pub(crate) pending_sigs: Option<Vec<SigId>>,
}

impl RunState {
    /// Interned reporting configuration for one subject under the current
    /// parameters.
    pub(crate) fn subject_sig(
        &mut self,
        data: &PanelData,
        variant: Variant,
        hyper: &Hyperparams,
        subject: usize,
    ) -> SigId {
        let hp = heap_params_for(&self.params, variant, data, subject, hyper);
        self.cache.sig(&hp)
    }

    /// Sigs for all subjects under the current parameters.
    pub(crate) fn rebuild_sigs(
        &mut self,
        data: &PanelData,
        variant: Variant,
        hyper: &Hyperparams,
    ) -> Vec<SigId> {
        (0..data.n_subjects())
            .map(|i| self.subject_sig(data, variant, hyper, i))
            .collect()
    }

    /// Sigs for all subjects after applying `edit` to each subject's heap
    /// parameters (used to evaluate block proposals).
    pub(crate) fn sigs_with<F>(
        &mut self,
        data: &PanelData,
        variant: Variant,
        hyper: &Hyperparams,
        edit: F,
    ) -> Vec<SigId>
    where
        F: Fn(&mut crate::report::HeapParams),
    {
        (0..data.n_subjects())
            .map(|i| {
                let mut hp = heap_params_for(&self.params, variant, data, i, hyper);
                edit(&mut hp);
                self.cache.sig(&hp)
            })
            .collect()
    }
}

/// Deterministic starting state.
pub fn initial_params(data: &PanelData, hyper: &Hyperparams, variant: Variant) -> ModelParams {
    let j = hyper.grids.len();
    let mut gamma = Vec::with_capacity(j + 1);
    gamma.push(0.5);
    for k in 0..j {
        gamma.push(-5.0 * 2f64.powi(k as i32));
    }
    let omega_dim = if variant == Variant::SubjectHeapingCov {
        data.h_dim
    } else {
        1
    };
    ModelParams {
        alpha: {
            let mut a = vec![0.0; data.w_dim];
            a[0] = (data.mean_y() + 0.5).ln();
            a
        },
        beta: vec![vec![0.0; data.z_dim]; data.n_subjects()],
        sigma_beta: SmallMat::identity(data.z_dim),
        theta_disp: 1.0,
        theta_heap: 1.0,
        omega: vec![0.0; omega_dim],
        xi: vec![0.0; data.n_subjects()],
        sigma2_xi: 1.0,
        gamma,
        x: data.obs.iter().map(|o| o.y).collect(),
    }
}

struct Blocks {
    alpha: (AdaptiveStep, BlockStats),
    beta: (AdaptiveStep, BlockStats),
    theta_disp: (AdaptiveStep, BlockStats),
    theta_heap: (AdaptiveStep, BlockStats),
    gamma: (AdaptiveStep, BlockStats),
    omega: (AdaptiveStep, BlockStats),
    xi: (AdaptiveStep, BlockStats),
    latent: BlockStats,
}

impl Blocks {
    fn new(cfg: &SamplerConfig, data: &PanelData) -> Self {
        let scalar_or = |dim: usize| if dim == 1 { TARGET_SCALAR } else { TARGET_VECTOR };
        Blocks {
            alpha: (
                AdaptiveStep::new(cfg.steps.alpha, scalar_or(data.w_dim)),
                BlockStats::default(),
            ),
            beta: (
                AdaptiveStep::new(cfg.steps.beta, scalar_or(data.z_dim)),
                BlockStats::default(),
            ),
            theta_disp: (
                AdaptiveStep::new(cfg.steps.theta_disp, TARGET_SCALAR),
                BlockStats::default(),
            ),
            theta_heap: (
                AdaptiveStep::new(cfg.steps.theta_heap, TARGET_SCALAR),
                BlockStats::default(),
            ),
            gamma: (
                AdaptiveStep::new(cfg.steps.gamma, TARGET_VECTOR),
                BlockStats::default(),
            ),
            omega: (
                AdaptiveStep::new(cfg.steps.omega, TARGET_SCALAR),
                BlockStats::default(),
            ),
            xi: (
                AdaptiveStep::new(cfg.steps.xi, TARGET_SCALAR),
                BlockStats::default(),
            ),
            latent: BlockStats::default(),
        }
    }

    fn rates(&self, variant: Variant) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        if variant.has_latent() {
            m.insert("latent_x".into(), self.latent.rate());
        }
        m.insert("alpha".into(), self.alpha.1.rate());
        m.insert("beta".into(), self.beta.1.rate());
        if variant.has_theta_disp() {
            m.insert("theta_disp".into(), self.theta_disp.1.rate());
        }
        if variant.has_global_heap() {
            m.insert("theta_heap".into(), self.theta_heap.1.rate());
        }
        if variant.has_gamma() {
            m.insert("gamma".into(), self.gamma.1.rate());
        }
        if variant.has_subject_heap() {
            m.insert("omega".into(), self.omega.1.rate());
            m.insert("xi".into(), self.xi.1.rate());
        }
        m
    }

    fn reset_stats(&mut self) {
        self.alpha.1 = BlockStats::default();
        self.beta.1 = BlockStats::default();
        self.theta_disp.1 = BlockStats::default();
        self.theta_heap.1 = BlockStats::default();
        self.gamma.1 = BlockStats::default();
        self.omega.1 = BlockStats::default();
        self.xi.1 = BlockStats::default();
        self.latent = BlockStats::default();
    }
}

/// Run one chain. Deterministic given (data, hyper, variant, cfg).
pub fn run_mcmc(
    data: &PanelData,
    hyper: &Hyperparams,
    variant: Variant,
    cfg: &SamplerConfig,
) -> Result<Chain> {
    cfg.validate()?;
    hyper.validate()?;
    if data.n_obs() == 0 {
        return Err(HeapError::Domain("panel has no observations".into()));
    }
    if variant == Variant::SubjectHeapingCov && data.h_dim < 2 {
        return Err(HeapError::Domain(
            "subject-heaping-cov needs at least one heaping covariate beyond the intercept".into(),
        ));
    }

    let started = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let params = initial_params(data, hyper, variant);

    let mut rs = RunState {
        etas: compute_etas(&params, data)?,
        params,
        sigs: Vec::new(),
        cache: GRowCache::default(),
        pending_sigs: None,
    };
    rs.sigs = rs.rebuild_sigs(data, variant, hyper);

    let mut blocks = Blocks::new(cfg, data);
    let mut samples = Vec::new();

    let adapt_until = cfg
        .adaptation_window
        .unwrap_or(cfg.burn_in)
        .min(cfg.burn_in);
    for iter in 0..cfg.iterations {
        let adapting = cfg.adapt && iter < adapt_until;
        sweep(&mut rs, data, hyper, variant, cfg, &mut blocks, adapting, &mut rng)
            .map_err(|e| sweep_error(e, iter, variant, &rs.params))?;

        if iter + 1 == cfg.burn_in {
            // Acceptance rates are reported for the post-adaptation phase.
            blocks.reset_stats();
        }
        if iter >= cfg.burn_in && (iter - cfg.burn_in) % cfg.thin == 0 {
            samples.push(rs.params.clone());
        }
        let live = rs.sigs.clone();
        rs.cache.maybe_purge(&live);
    }

    Ok(Chain {
        variant,
        seed: cfg.seed,
        iterations: cfg.iterations,
        burn_in: cfg.burn_in,
        thin: cfg.thin,
        acceptance: blocks.rates(variant),
        wall_secs: started.elapsed().as_secs_f64(),
        samples,
    })
}

fn sweep_error(e: HeapError, iter: usize, variant: Variant, params: &ModelParams) -> HeapError {
    let dump = serde_json::to_string(params).unwrap_or_else(|_| "<unserializable>".into());
    HeapError::Sampler(format!(
        "iteration {iter}, variant {variant}: {e}; state dump: {dump}"
    ))
}

#[allow(clippy::too_many_arguments)]
fn sweep<R: Rng>(
    rs: &mut RunState,
    data: &PanelData,
    hyper: &Hyperparams,
    variant: Variant,
    cfg: &SamplerConfig,
    blocks: &mut Blocks,
    adapting: bool,
    rng: &mut R,
) -> Result<()> {
    // Latent counts first: the refreshed truths sharpen every parameter
    // block that follows.
    if variant.has_latent() {
        match variant {
            Variant::Wh08 => {
                for oi in 0..data.n_obs() {
                    let obs = &data.obs[oi];
                    let x = update_latent_wh08(
                        obs.y,
                        rs.etas[oi],
                        &rs.params.gamma,
                        &hyper.grids,
                        rng,
                    )?;
                    blocks.latent.proposed += 1;
                    if x != rs.params.x[oi] {
                        blocks.latent.accepted += 1;
                    }
                    rs.params.x[oi] = x;
                }
            }
            _ => {
                // Prefetch current-state rows in one parallel batch.
                let wants: Vec<(SigId, u32)> = data
                    .obs
                    .iter()
                    .enumerate()
                    .map(|(oi, o)| (rs.sigs[o.subject], rs.params.x[oi]))
                    .collect();
                rs.cache.ensure(&wants, &cfg.solver)?;
                for oi in 0..data.n_obs() {
                    let obs = &data.obs[oi];
                    let (x, accepted) = update_latent_count(
                        rs.params.x[oi],
                        obs.y,
                        rs.etas[oi],
                        rs.sigs[obs.subject],
                        &mut rs.cache,
                        &cfg.solver,
                        &cfg.latent,
                        rng,
                    )?;
                    rs.params.x[oi] = x;
                    blocks.latent.proposed += 1;
                    if accepted {
                        blocks.latent.accepted += 1;
                    }
                }
            }
        }
    }

    blocks::update_alpha(
        rs,
        data,
        hyper,
        &mut blocks.alpha.0,
        &mut blocks.alpha.1,
        adapting,
        rng,
    )?;
    blocks::update_betas(
        rs,
        data,
        &mut blocks.beta.0,
        &mut blocks.beta.1,
        adapting,
        rng,
    )?;
    blocks::update_sigma_beta(rs, data, hyper, rng)?;

    if variant.has_theta_disp() {
        blocks::update_theta_disp(
            rs,
            data,
            hyper,
            variant,
            &cfg.solver,
            &mut blocks.theta_disp.0,
            &mut blocks.theta_disp.1,
            adapting,
            rng,
        )?;
    }
    if variant.has_gamma() {
        blocks::update_gamma(
            rs,
            data,
            hyper,
            variant,
            &cfg.solver,
            &mut blocks.gamma.0,
            &mut blocks.gamma.1,
            adapting,
            rng,
        )?;
    }
    if variant.has_global_heap() {
        blocks::update_theta_heap(
            rs,
            data,
            hyper,
            variant,
            &cfg.solver,
            &mut blocks.theta_heap.0,
            &mut blocks.theta_heap.1,
            adapting,
            rng,
        )?;
    }
    if variant.has_subject_heap() {
        blocks::update_omega(
            rs,
            data,
            hyper,
            variant,
            &cfg.solver,
            &mut blocks.omega.0,
            &mut blocks.omega.1,
            adapting,
            rng,
        )?;
        blocks::update_xis(
            rs,
            data,
            hyper,
            variant,
            &cfg.solver,
            &mut blocks.xi.0,
            &mut blocks.xi.1,
            adapting,
            rng,
        )?;
        blocks::update_sigma2_xi(rs, data, hyper, rng)?;
    }
    Ok(())
}

fn compute_etas(params: &ModelParams, data: &PanelData) -> Result<Vec<f64>> {
    data.obs
        .iter()
        .map(|o| latent_intensity(&o.w, &o.z, &params.alpha, &params.beta[o.subject]))
        .collect()
}

/// Run `cfg.chains` independent chains with derived seeds.
pub fn run_chains(
    data: &PanelData,
    hyper: &Hyperparams,
    variant: Variant,
    cfg: &SamplerConfig,
) -> Result<Vec<Chain>> {
    use rayon::prelude::*;
    let configs: Vec<SamplerConfig> = (0..cfg.chains)
        .map(|k| SamplerConfig {
            seed: if cfg.chains == 1 {
                cfg.seed
            } else {
                derive_seed(cfg.seed, k as u64)
            },
            chains: 1,
            ..cfg.clone()
        })
        .collect();
    configs
        .par_iter()
        .map(|c| run_mcmc(data, hyper, variant, c))
        .collect()
}
