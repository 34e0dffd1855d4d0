//! Simulation of heaped longitudinal panels: subject random intercepts,
//! Poisson latent counts and reports drawn from the exact reporting pmf.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::bdp::SolverConfig;
use crate::error::Result;
use crate::model::{wh08_report, PanelData};
use crate::report::{reporting_pmf, HeapParams, RegimeModel};
use crate::util::derive_seed;

/// Which reporting mechanism generates the observed counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mechanism {
    /// Birth-death heaping process (the default generative model).
    Bdp,
    /// Deterministic rounding baseline.
    Wh08,
    /// Reports equal the true counts.
    None,
}

/// Generative settings for a simulated panel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_subjects: usize,
    pub repeats: usize,
    pub alpha: f64,
    pub sigma2_beta: f64,
    pub theta_disp: f64,
    pub theta_heap: f64,
    pub gamma: Vec<f64>,
    pub grids: Vec<u32>,
    pub seed: u64,
    pub mechanism: Mechanism,
}

impl Default for SimConfig {
    fn default() -> Self {
        // The simulation-study defaults.
        SimConfig {
            n_subjects: 20,
            repeats: 5,
            alpha: 2.0,
            sigma2_beta: 1.21,
            theta_disp: 0.5,
            theta_heap: 2.0,
            gamma: vec![0.5, -5.0, -10.0, -20.0],
            grids: vec![5, 10, 50],
            seed: 1,
            mechanism: Mechanism::Bdp,
        }
    }
}

impl SimConfig {
    pub fn n_obs(&self) -> usize {
        self.n_subjects * self.repeats
    }

    fn heap_params(&self) -> HeapParams {
        HeapParams {
            theta_disp: self.theta_disp,
            theta_heap: self.theta_heap,
            grids: self.grids.clone(),
            regimes: RegimeModel::Logistic(self.gamma.clone()),
        }
    }
}

/// Ground truth recorded alongside a simulated panel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub alpha: f64,
    pub sigma2_beta: f64,
    pub theta_disp: f64,
    pub theta_heap: f64,
    pub gamma: Vec<f64>,
    pub grids: Vec<u32>,
    pub beta: Vec<f64>,
    pub x: Vec<u32>,
    pub seed: u64,
    pub mechanism: Mechanism,
}

/// Draw one report from the exact reporting pmf by inverse CDF.
pub fn sample_reporting<R: Rng>(
    x: u32,
    params: &HeapParams,
    cfg: &SolverConfig,
    rng: &mut R,
) -> Result<u32> {
    if params.theta_disp < crate::model::FROZEN_EPS && params.theta_heap < crate::model::FROZEN_EPS
    {
        return Ok(x);
    }
    let row = reporting_pmf(params, x, cfg)?;
    Ok(sample_from_pmf(&row, rng))
}

pub(crate) fn sample_from_pmf<R: Rng>(pmf: &[f64], rng: &mut R) -> u32 {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for (y, &p) in pmf.iter().enumerate() {
        cum += p;
        if u < cum {
            return y as u32;
        }
    }
    pmf.len() as u32 - 1
}

/// Simulate a panel under the generative model; returns the data and the
/// ground truth. Subjects use independently derived RNG streams, so the
/// output is stable under any parallelization across subjects.
pub fn simulate_panel(cfg: &SimConfig) -> Result<(PanelData, GroundTruth)> {
    let heap = cfg.heap_params();
    if cfg.mechanism == Mechanism::Bdp && cfg.theta_heap > 0.0 {
        heap.validate()?;
    }
    let solver = SolverConfig::default();
    let sd_beta = cfg.sigma2_beta.sqrt();

    // Rows keyed by true count; the parameters are fixed across the panel.
    let mut row_cache: HashMap<u32, Vec<f64>> = HashMap::new();

    let mut rows = Vec::with_capacity(cfg.n_obs());
    let mut betas = Vec::with_capacity(cfg.n_subjects);
    let mut xs = Vec::with_capacity(cfg.n_obs());

    for i in 0..cfg.n_subjects {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, i as u64));
        let beta = if sd_beta > 0.0 {
            Normal::new(0.0, sd_beta).unwrap().sample(&mut rng)
        } else {
            0.0
        };
        betas.push(beta);
        let eta = (cfg.alpha + beta).exp();
        for t in 0..cfg.repeats {
            let x = Poisson::new(eta).unwrap().sample(&mut rng) as u32;
            xs.push(x);
            let y = match cfg.mechanism {
                Mechanism::None => x,
                Mechanism::Wh08 => wh08_report(x, &cfg.gamma, &cfg.grids, &mut rng)?,
                Mechanism::Bdp => {
                    if heap.theta_disp < crate::model::FROZEN_EPS
                        && heap.theta_heap < crate::model::FROZEN_EPS
                    {
                        x
                    } else {
                        let row = match row_cache.get(&x) {
                            Some(r) => r,
                            None => {
                                let r = reporting_pmf(&heap, x, &solver)?;
                                row_cache.entry(x).or_insert(r)
                            }
                        };
                        sample_from_pmf(row, &mut rng)
                    }
                }
            };
            rows.push((
                format!("s{:04}", i + 1),
                t as u32,
                y,
                vec![1.0],
                vec![1.0],
                vec![1.0],
            ));
        }
    }

    let panel = PanelData::assemble(rows, vec!["intercept".into()], vec!["intercept".into()])?;
    let truth = GroundTruth {
        alpha: cfg.alpha,
        sigma2_beta: cfg.sigma2_beta,
        theta_disp: cfg.theta_disp,
        theta_heap: cfg.theta_heap,
        gamma: cfg.gamma.clone(),
        grids: cfg.grids.clone(),
        beta: betas,
        x: xs,
        seed: cfg.seed,
        mechanism: cfg.mechanism,
    };
    Ok((panel, truth))
}
