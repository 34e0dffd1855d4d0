//! Heaping rate schedules and the reporting distribution g(y|x).
//!
//! Misreporting is modeled as a birth-death process started at the true
//! count: a dispersion term spreads reports around the truth, and heaping
//! terms attract the process to nearby grid multiples. With several grids,
//! proportional-odds regime weights decide how strongly each grid acts as a
//! function of the true count.

use serde::{Deserialize, Serialize};

use crate::bdp::{transition_row, RateSchedule, SolverConfig};
use crate::error::{HeapError, Result};
use crate::util::{inv_one_plus_exp, log_sum_exp, poisson_log_pmf};

/// How regime weights are assigned across heaping grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RegimeModel {
    /// Single-grid model: all weight on the one heaping regime (`v_1 = 1`),
    /// no truthful-reporting regime.
    AlwaysHeap,
    /// Proportional-odds weights driven by `gamma = (g_0, g_1, ..., g_J)`
    /// with `g_0 > 0` and `g_1 > g_2 > ... > g_J`.
    Logistic(Vec<f64>),
}

/// Parameters of the heaping reporting process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeapParams {
    pub theta_disp: f64,
    pub theta_heap: f64,
    /// Strictly increasing grid spacings, each at least 2.
    pub grids: Vec<u32>,
    pub regimes: RegimeModel,
}

impl HeapParams {
    /// Single-grid heaping with forced regime weight 1.
    pub fn single_grid(theta_disp: f64, theta_heap: f64, m: u32) -> Self {
        HeapParams {
            theta_disp,
            theta_heap,
            grids: vec![m],
            regimes: RegimeModel::AlwaysHeap,
        }
    }

    /// Multi-grid heaping with proportional-odds regime weights.
    pub fn with_regimes(theta_disp: f64, theta_heap: f64, grids: Vec<u32>, gamma: Vec<f64>) -> Self {
        HeapParams {
            theta_disp,
            theta_heap,
            grids,
            regimes: RegimeModel::Logistic(gamma),
        }
    }

    /// Dispersion only: no heaping attraction at all.
    pub fn dispersion_only(theta_disp: f64) -> Self {
        HeapParams {
            theta_disp,
            theta_heap: 0.0,
            grids: Vec::new(),
            regimes: RegimeModel::AlwaysHeap,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta_disp >= 0.0) || !(self.theta_heap >= 0.0) {
            return Err(HeapError::Domain(format!(
                "heaping intensities must be nonnegative: theta_disp={}, theta_heap={}",
                self.theta_disp, self.theta_heap
            )));
        }
        for w in self.grids.windows(2) {
            if w[1] <= w[0] {
                return Err(HeapError::Domain(format!(
                    "grids must be strictly increasing, got {:?}",
                    self.grids
                )));
            }
        }
        if self.grids.iter().any(|&m| m < 2) {
            return Err(HeapError::Domain(format!(
                "grid spacings must be at least 2, got {:?}",
                self.grids
            )));
        }
        match &self.regimes {
            RegimeModel::AlwaysHeap => {
                if self.grids.len() > 1 {
                    return Err(HeapError::Domain(
                        "single-regime heaping takes exactly one grid".into(),
                    ));
                }
            }
            RegimeModel::Logistic(gamma) => {
                validate_gamma(gamma, self.grids.len())?;
            }
        }
        Ok(())
    }

    /// Regime weights `(v_0, ..., v_J)` at true count `x`.
    pub fn weights(&self, x: u32) -> Result<Vec<f64>> {
        match &self.regimes {
            RegimeModel::AlwaysHeap => {
                if self.grids.is_empty() {
                    Ok(vec![1.0])
                } else {
                    Ok(vec![0.0, 1.0])
                }
            }
            RegimeModel::Logistic(gamma) => regime_weights(gamma, x),
        }
    }
}

/// Check the proportional-odds constraints `g_0 > 0`, `g_1 > ... > g_J`.
pub fn validate_gamma(gamma: &[f64], n_grids: usize) -> Result<()> {
    if gamma.len() != n_grids + 1 {
        return Err(HeapError::Domain(format!(
            "gamma needs one entry per regime transition plus the slope: got {} for {} grids",
            gamma.len(),
            n_grids
        )));
    }
    if !(gamma[0] > 0.0) {
        return Err(HeapError::Domain(format!(
            "regime slope gamma_0 must be positive, got {}",
            gamma[0]
        )));
    }
    for w in gamma[1..].windows(2) {
        if !(w[0] > w[1]) {
            return Err(HeapError::Domain(format!(
                "regime offsets must strictly decrease, got {:?}",
                &gamma[1..]
            )));
        }
    }
    if gamma.iter().any(|g| !g.is_finite()) {
        return Err(HeapError::Domain("gamma must be finite".into()));
    }
    Ok(())
}

/// Proportional-odds regime weights at true count `x`.
///
/// `v_0` is the truthful-reporting intensity; `v_j` the weight of heaping to
/// grid `j`. The logistic differences telescope so the weights always sum to
/// one; the ordering constraint on `gamma` keeps each nonnegative.
pub fn regime_weights(gamma: &[f64], x: u32) -> Result<Vec<f64>> {
    let j_max = gamma.len() - 1;
    validate_gamma(gamma, j_max)?;
    let f = |j: usize| inv_one_plus_exp(gamma[j] + gamma[0] * x as f64);
    let mut v = Vec::with_capacity(j_max + 1);
    v.push(f(1));
    for j in 1..j_max {
        v.push((f(j + 1) - f(j)).max(0.0));
    }
    v.push(1.0 - f(j_max));
    Ok(v)
}

/// The heaping rate schedule out of true count `x`: dispersion plus
/// weight-mixed attraction to each grid. Regime weights are evaluated once
/// at `x` and held fixed across states.
#[derive(Debug, Clone)]
pub struct HeapingRates {
    theta_disp: f64,
    theta_heap: f64,
    grids: Vec<u32>,
    grid_weights: Vec<f64>,
}

impl HeapingRates {
    /// Weighted pull toward the next grid multiple at or above `k`.
    fn pull_up(&self, k: u32) -> f64 {
        self.grids
            .iter()
            .zip(&self.grid_weights)
            .map(|(&m, &w)| w * ((k % m) as f64))
            .sum()
    }

    /// Weighted pull toward the grid multiple at or below `k`; zero exactly
    /// at grid points.
    fn pull_down(&self, k: u32) -> f64 {
        self.grids
            .iter()
            .zip(&self.grid_weights)
            .map(|(&m, &w)| w * (((m - k % m) % m) as f64))
            .sum()
    }
}

impl RateSchedule for HeapingRates {
    fn birth(&self, k: u32) -> f64 {
        self.theta_disp * (1.0 + k as f64) + self.theta_heap * self.pull_up(k)
    }
    fn death(&self, k: u32) -> f64 {
        self.theta_disp * k as f64 + self.theta_heap * self.pull_down(k)
    }
}

/// Build the rate schedule of the reporting process for true count `x`.
pub fn heap_rates(params: &HeapParams, x: u32) -> Result<HeapingRates> {
    params.validate()?;
    let weights = params.weights(x)?;
    Ok(HeapingRates {
        theta_disp: params.theta_disp,
        theta_heap: params.theta_heap,
        grids: params.grids.clone(),
        grid_weights: weights[1..].to_vec(),
    })
}

/// Starting truncation cap for the reporting row out of `x`: room for the
/// next multiple of every grid that carries non-negligible weight, plus a
/// dispersion-scaled buffer.
pub fn reporting_cap_hint(params: &HeapParams, x: u32) -> usize {
    let weights = params.weights(x).unwrap_or_default();
    let mut top = x as usize;
    if params.theta_heap > 0.0 {
        for (&m, &w) in params.grids.iter().zip(weights.get(1..).unwrap_or(&[])) {
            if w > 1e-8 {
                let next = x.div_ceil(m) * m;
                top = top.max(next as usize);
            }
        }
    }
    let (_, var) = crate::bdp::dispersion_moments(x, params.theta_disp, 1.0);
    top + 20 + (10.0 * var.sqrt()).ceil() as usize
}

/// Solver configuration for a reporting row, inheriting precision settings
/// from `base` but starting the cap at the heuristic for (`params`, `x`).
pub fn reporting_solver_config(params: &HeapParams, x: u32, base: &SolverConfig) -> SolverConfig {
    SolverConfig {
        truncation_cap: base.truncation_cap.max(reporting_cap_hint(params, x)),
        ..*base
    }
}

/// The reporting pmf g(.|x): the transition row of the heaping process out
/// of `x` after unit time. Support runs up to the adaptive truncation cap.
pub fn reporting_pmf(params: &HeapParams, x: u32, cfg: &SolverConfig) -> Result<Vec<f64>> {
    let rates = heap_rates(params, x)?;
    let cfg = reporting_solver_config(params, x, cfg);
    transition_row(&rates, x, 1.0, &cfg)
}

/// Log marginal likelihood of a single report under a Poisson true-count
/// distribution.
#[derive(Debug, Clone, Copy)]
pub struct MixtureLogLik {
    pub log_lik: f64,
    /// True when every term of the mixture underflowed to zero.
    pub underflow: bool,
}

/// log sum_x g(y|x) Poisson(x; eta), summed over an adaptive window of true
/// counts around both the Poisson bulk and the report.
pub fn mixture_loglik(
    y: u32,
    eta: f64,
    params: &HeapParams,
    cfg: &SolverConfig,
) -> Result<MixtureLogLik> {
    if !(eta > 0.0) {
        return Err(HeapError::Domain(format!(
            "Poisson mean must be positive, got {eta}"
        )));
    }
    params.validate()?;

    // Both factors decay fast, so only true counts near the Poisson bulk or
    // near the report contribute.
    let sd = eta.sqrt();
    let a_lo = (eta - 10.0 * sd - 10.0).floor().max(0.0) as u32;
    let a_hi = (eta + 10.0 * sd + 10.0).ceil() as u32;
    let w = 10 + (10.0 * ((2.0 * y as f64 + 1.0) * params.theta_disp).sqrt()).ceil() as u32;
    let b_lo = y.saturating_sub(w);
    let b_hi = y + w;

    let mut xs: Vec<u32> = (a_lo..=a_hi).chain(b_lo..=b_hi).collect();
    xs.sort_unstable();
    xs.dedup();

    let frozen = params.theta_disp < 1e-8 && params.theta_heap < 1e-8;
    let mut terms = Vec::with_capacity(xs.len());
    for x in xs {
        let log_g = if frozen {
            if x == y {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        } else {
            let row = reporting_pmf(params, x, cfg)?;
            match row.get(y as usize) {
                Some(&g) if g > 0.0 => g.ln(),
                _ => f64::NEG_INFINITY,
            }
        };
        terms.push(log_g + poisson_log_pmf(x, eta));
    }
    let log_lik = log_sum_exp(&terms);
    Ok(MixtureLogLik {
        log_lik,
        underflow: log_lik == f64::NEG_INFINITY,
    })
}
