//! Latent true-count updates.
//!
//! BDP variants use a Metropolis-Hastings step with a discretized-normal
//! proposal built from the dispersion-only dynamics around the current
//! count (heaping ignored in the proposal, corrected by the acceptance
//! ratio). The rounding baseline has a small finite support for the true
//! count given a report, so it is updated by exact enumeration.

use rand::Rng;

use crate::bdp::{discretized_normal, dispersion_moments, SolverConfig};
use crate::error::Result;
use crate::model::{support_halfwidth, wh08_pmf};
use crate::util::poisson_log_pmf;

use super::cache::{GRowCache, SigId};

/// Latent-proposal tuning: variance inflation over the dispersion-only
/// approximation and the half-width of the support window in proposal
/// standard deviations.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct LatentTuning {
    pub inflation: f64,
    pub halfwidth_sds: f64,
}

impl Default for LatentTuning {
    fn default() -> Self {
        LatentTuning {
            inflation: 1.5,
            halfwidth_sds: 6.0,
        }
    }
}

/// Discretized-normal proposal table centered per the dispersion-only
/// dynamics around `x`.
pub struct ProposalTable {
    pub lo: u32,
    pub probs: Vec<f64>,
}

impl ProposalTable {
    pub fn log_prob(&self, target: u32) -> f64 {
        if target < self.lo {
            return f64::NEG_INFINITY;
        }
        match self.probs.get((target - self.lo) as usize) {
            Some(&p) if p > 0.0 => p.ln(),
            _ => f64::NEG_INFINITY,
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> u32 {
        self.lo + crate::datagen::sample_from_pmf(&self.probs, rng)
    }
}

/// Build the proposal table at current count `x`; `None` when the proposal
/// variance is too small to move (callers fall back to a +/-1 random walk).
pub fn proposal_table(x: u32, theta_disp: f64, tuning: &LatentTuning) -> Option<ProposalTable> {
    let (mean, var) = dispersion_moments(x, theta_disp, 1.0);
    let var = var * tuning.inflation;
    if var < 0.25 {
        return None;
    }
    let sd = var.sqrt();
    let lo = (mean - tuning.halfwidth_sds * sd).floor().max(0.0) as u32;
    let hi = (mean + tuning.halfwidth_sds * sd).ceil().max(lo as f64) as u32;
    let probs = discretized_normal(mean, var, lo..=hi).ok()?;
    Some(ProposalTable { lo, probs })
}

/// One Metropolis-Hastings update of the latent count for an observation
/// under a BDP reporting variant. Returns (new_x, accepted).
#[allow(clippy::too_many_arguments)]
pub fn update_latent_count<R: Rng>(
    x0: u32,
    y: u32,
    eta: f64,
    sig: SigId,
    cache: &mut GRowCache,
    solver: &SolverConfig,
    tuning: &LatentTuning,
    rng: &mut R,
) -> Result<(u32, bool)> {
    let theta_disp = cache.params_of(sig).theta_disp;

    let x1 = match proposal_table(x0, theta_disp, tuning) {
        Some(fwd) => fwd.sample(rng),
        None => match rw_proposal(x0, rng) {
            Some(x1) => x1,
            None => return Ok((x0, false)),
        },
    };
    if x1 == x0 {
        // Self-proposal: always accepted, nothing changes.
        return Ok((x0, true));
    }
    let log_q_fwd = proposal_log_density(x0, x1, theta_disp, tuning);
    let log_q_rev = proposal_log_density(x1, x0, theta_disp, tuning);

    let lp_new = cache.log_g(sig, y, x1, solver)? + poisson_log_pmf(x1, eta) + log_q_rev;
    if lp_new == f64::NEG_INFINITY {
        return Ok((x0, false));
    }
    let lp_old = cache.log_g(sig, y, x0, solver)? + poisson_log_pmf(x0, eta) + log_q_fwd;
    if lp_old == f64::NEG_INFINITY {
        return Ok((x1, true));
    }
    let log_alpha = lp_new - lp_old;
    let u: f64 = rng.random();
    if u.ln() < log_alpha {
        Ok((x1, true))
    } else {
        Ok((x0, false))
    }
}

fn rw_proposal<R: Rng>(x0: u32, rng: &mut R) -> Option<u32> {
    let up: bool = rng.random();
    if up {
        Some(x0 + 1)
    } else if x0 > 0 {
        Some(x0 - 1)
    } else {
        None
    }
}

/// Density of the proposal mechanism actually in effect at `from`: the
/// discretized-normal table when the dispersion window is wide enough,
/// otherwise the +/-1 random walk.
pub fn proposal_log_density(from: u32, to: u32, theta_disp: f64, tuning: &LatentTuning) -> f64 {
    match proposal_table(from, theta_disp, tuning) {
        Some(t) => t.log_prob(to),
        None => {
            if to == from + 1 || from == to + 1 {
                0.5f64.ln()
            } else {
                f64::NEG_INFINITY
            }
        }
    }
}

/// Exact draw of the latent count for the rounding baseline: the support of
/// x given a report is finite, so sample the normalized product directly.
pub fn update_latent_wh08<R: Rng>(
    y: u32,
    eta: f64,
    gamma: &[f64],
    grids: &[u32],
    rng: &mut R,
) -> Result<u32> {
    let w = support_halfwidth(grids);
    let lo = y.saturating_sub(w);
    let hi = y + w;
    let mut log_terms = Vec::with_capacity((hi - lo + 1) as usize);
    for x in lo..=hi {
        let p = wh08_pmf(y, x, gamma, grids)?;
        log_terms.push(if p > 0.0 {
            p.ln() + poisson_log_pmf(x, eta)
        } else {
            f64::NEG_INFINITY
        });
    }
    let norm = crate::util::log_sum_exp(&log_terms);
    if norm == f64::NEG_INFINITY {
        // Degenerate corner (eta underflow far from the report); keep the
        // only always-possible value.
        return Ok(y);
    }
    let probs: Vec<f64> = log_terms.iter().map(|t| (t - norm).exp()).collect();
    Ok(lo + crate::datagen::sample_from_pmf(&probs, rng))
}
