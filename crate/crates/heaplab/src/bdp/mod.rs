//! General birth-death-process engine: transition rows P_a.(t) for arbitrary
//! nonnegative rate schedules.
//!
//! The production route works in the Laplace domain: for each point on the
//! Bromwich contour the transformed forward equations reduce to a tridiagonal
//! solve over the truncated state space, and the row is recovered by
//! Euler-accelerated numerical inversion. Uniformization provides an
//! independent time-domain oracle, and the dispersion-only normal
//! approximation feeds the latent-count proposal in the sampler.

mod approx;
mod invert;
mod rates;
mod solver;
mod uniform;

pub use approx::{discretized_normal, dispersion_moments, normal_approx_pmf};
pub use rates::{FnRates, LinearRates, RateSchedule, TabulatedRates};
pub use solver::continued_fraction_h00;

use invert::EulerInversion;
use num_complex::Complex64;
use solver::{solve_transform_row, SolveWorkspace};

use crate::error::{HeapError, Result};

/// Truncation and inversion controls for the engine.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct SolverConfig {
    /// Starting state-space cap; raised to at least `a + 3` and doubled on
    /// demand until the boundary mass test passes.
    pub truncation_cap: usize,
    /// Acceptable probability mass on the top three truncated states.
    pub tail_tolerance: f64,
    /// Number of partial sums in the inversion series (burn-in plus the
    /// Euler window).
    pub inversion_terms: usize,
    /// Bromwich contour parameter; discretization error is about `e^{-A}`.
    pub inversion_decay: f64,
    /// Target absolute error for inverted probabilities.
    pub target_abs_error: f64,
    /// How many times the cap may double before reporting failure.
    pub max_doublings: u32,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            truncation_cap: 64,
            tail_tolerance: 1e-10,
            inversion_terms: 2 * (15 + 10),
            inversion_decay: 23.5,
            target_abs_error: 1e-8,
            max_doublings: 6,
        }
    }
}

impl SolverConfig {
    pub fn with_cap(cap: usize) -> Self {
        SolverConfig {
            truncation_cap: cap,
            ..SolverConfig::default()
        }
    }

    /// Cheaper profile for inner-loop likelihood evaluations in the sampler:
    /// fewer inversion terms and a looser (still conservative) tail budget.
    pub fn fast() -> Self {
        SolverConfig {
            truncation_cap: 64,
            tail_tolerance: 1e-8,
            inversion_terms: 30,
            inversion_decay: 18.4,
            target_abs_error: 1e-6,
            max_doublings: 6,
        }
    }
}

/// A single transition-probability query P_ab(t).
#[derive(Debug, Clone, Copy)]
pub struct TransitionQuery {
    pub a: u32,
    pub b: u32,
    pub t: f64,
}

impl TransitionQuery {
    pub fn new(a: u32, b: u32) -> Self {
        TransitionQuery { a, b, t: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0) {
            return Err(HeapError::Domain(format!(
                "elapsed time must be positive, got {}",
                self.t
            )));
        }
        Ok(())
    }
}

/// Single transition probability P_ab(t).
pub fn transition_probability<R: RateSchedule>(
    rates: &R,
    query: &TransitionQuery,
    cfg: &SolverConfig,
) -> Result<f64> {
    query.validate()?;
    let row = transition_row(rates, query.a, query.t, cfg)?;
    Ok(row.get(query.b as usize).copied().unwrap_or(0.0))
}

/// Laplace transform of the transition row out of `a`, evaluated at `s` on
/// the fixed truncated space `0..=cfg.truncation_cap` (no adaptivity here;
/// the cap is the caller's contract).
pub fn laplace_row<R: RateSchedule>(
    rates: &R,
    a: u32,
    s: Complex64,
    cfg: &SolverConfig,
) -> Result<Vec<Complex64>> {
    if s.re <= 0.0 {
        return Err(HeapError::Domain(format!(
            "transform point must have positive real part, got {s}"
        )));
    }
    let cap = cfg.truncation_cap.max(a as usize + 3);
    let (birth, death) = rates::tabulate(rates, cap)?;
    let mut out = Vec::new();
    let mut ws = SolveWorkspace::default();
    solve_transform_row(&birth, &death, a, s, &mut out, &mut ws)?;
    Ok(out)
}

/// Transition row P_a.(t) by numerical inversion of the Laplace-domain
/// solves, with adaptive cap doubling until the boundary mass is negligible.
pub fn transition_row<R: RateSchedule>(
    rates: &R,
    a: u32,
    t: f64,
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    if !(t > 0.0) {
        return Err(HeapError::Domain(format!("time must be positive, got {t}")));
    }
    let mut cap = cfg.truncation_cap.max(a as usize + 3);
    let inv = EulerInversion::new(t, cfg.inversion_terms, cfg.inversion_decay);
    let n_points = inv.s_points.len();
    let mut ws = SolveWorkspace::default();
    let mut h = Vec::new();

    for _ in 0..=cfg.max_doublings {
        let (birth, death) = rates::tabulate(rates, cap)?;
        // Real parts of h_ab(s_k), laid out per transform point.
        let mut re_vals = vec![0.0f64; n_points * (cap + 1)];
        for (k, &s) in inv.s_points.iter().enumerate() {
            solve_transform_row(&birth, &death, a, s, &mut h, &mut ws)?;
            let dst = &mut re_vals[k * (cap + 1)..(k + 1) * (cap + 1)];
            for (d, v) in dst.iter_mut().zip(&h) {
                *d = v.re;
            }
        }

        let mut row = Vec::with_capacity(cap + 1);
        for b in 0..=cap {
            let p = inv.invert(|k| re_vals[k * (cap + 1) + b]);
            row.push(p.clamp(0.0, 1.0));
        }

        let boundary: f64 = row[cap.saturating_sub(2)..].iter().sum();
        if boundary < cfg.tail_tolerance {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > cfg.target_abs_error {
                return Err(HeapError::Accuracy(format!(
                    "inverted row sums to {sum}, off by more than {}",
                    cfg.target_abs_error
                )));
            }
            return Ok(row);
        }
        cap *= 2;
    }
    Err(HeapError::Truncation(format!(
        "boundary mass stayed above {} after {} cap doublings (last cap {})",
        cfg.tail_tolerance, cfg.max_doublings, cap / 2
    )))
}

/// Transition row by uniformization; the independent time-domain oracle.
pub fn uniformization_row<R: RateSchedule>(
    rates: &R,
    a: u32,
    t: f64,
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    if !(t > 0.0) {
        return Err(HeapError::Domain(format!("time must be positive, got {t}")));
    }
    let mut cap = cfg.truncation_cap.max(a as usize + 3);
    for _ in 0..=cfg.max_doublings {
        let (birth, death) = rates::tabulate(rates, cap)?;
        let row = uniform::uniform_row_at_cap(&birth, &death, a, t, cfg.tail_tolerance)?;
        let boundary: f64 = row[cap.saturating_sub(2)..].iter().sum();
        if boundary < cfg.tail_tolerance {
            return Ok(row);
        }
        cap *= 2;
    }
    Err(HeapError::Truncation(format!(
        "boundary mass stayed above {} after {} cap doublings",
        cfg.tail_tolerance, cfg.max_doublings
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frozen_chain_row_is_a_point_mass() {
        let rates = TabulatedRates {
            birth: vec![0.0; 4],
            death: vec![0.0; 4],
        };
        let row = transition_row(&rates, 2, 1.0, &SolverConfig::default()).unwrap();
        assert!((row[2] - 1.0).abs() < 1e-9);
        for (b, &p) in row.iter().enumerate() {
            if b != 2 {
                assert!(p < 1e-9, "b={b}: {p}");
            }
        }
    }

    #[test]
    fn poisson_process_row_matches_closed_form() {
        let rates = FnRates {
            birth: |_| 1.0,
            death: |_| 0.0,
        };
        let row = transition_row(&rates, 0, 1.0, &SolverConfig::default()).unwrap();
        let mut expect = (-1.0f64).exp();
        assert!((row[0] - expect).abs() < 1e-8, "P00 {} vs {expect}", row[0]);
        for b in 1..15 {
            expect *= 1.0 / b as f64;
            assert!((row[b] - expect).abs() < 1e-8, "b={b}");
        }
    }

    #[test]
    fn laplace_and_uniformization_routes_agree() {
        // Heaping-style rates with attraction to multiples of 5.
        let rates = FnRates {
            birth: |k| 1.0 * (1.0 + k as f64) + 2.5 * ((k % 5) as f64),
            death: |k| 1.0 * k as f64 + 2.5 * (((5 - k % 5) % 5) as f64),
        };
        let cfg = SolverConfig::with_cap(140);
        let lap = transition_row(&rates, 33, 1.0, &cfg).unwrap();
        let uni = uniformization_row(&rates, 33, 1.0, &cfg).unwrap();
        let n = lap.len().min(uni.len());
        let max_diff = (0..n)
            .map(|b| (lap[b] - uni[b]).abs())
            .fold(0.0f64, f64::max);
        assert!(max_diff < 1e-6, "max diff {max_diff}");
        let sum: f64 = lap.iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
    }

    #[test]
    fn linear_rates_row_matches_appendix_moments() {
        let rates = LinearRates { theta: 0.5 };
        let row = uniformization_row(&rates, 7, 1.0, &SolverConfig::default()).unwrap();
        let mean: f64 = row.iter().enumerate().map(|(b, p)| b as f64 * p).sum();
        let var: f64 = row
            .iter()
            .enumerate()
            .map(|(b, p)| (b as f64 - mean).powi(2) * p)
            .sum();
        assert!((mean - 7.5).abs() < 1e-7, "mean {mean}");
        assert!((var - 7.75).abs() < 1e-6, "var {var}");
    }

    #[test]
    fn doubling_the_cap_leaves_the_row_unchanged() {
        let rates = FnRates {
            birth: |k| 0.5 * (1.0 + k as f64) + 2.0 * ((k % 10) as f64),
            death: |k| 0.5 * k as f64 + 2.0 * (((10 - k % 10) % 10) as f64),
        };
        let base = SolverConfig::with_cap(80);
        let doubled = SolverConfig::with_cap(160);
        let r1 = transition_row(&rates, 12, 1.0, &base).unwrap();
        let r2 = transition_row(&rates, 12, 1.0, &doubled).unwrap();
        for b in 0..r1.len().min(r2.len()) {
            assert!(
                (r1[b] - r2[b]).abs() <= base.tail_tolerance,
                "entry {b} moved by {}",
                (r1[b] - r2[b]).abs()
            );
        }
    }

    #[test]
    fn single_probability_query_reads_the_row() {
        let rates = FnRates {
            birth: |_| 1.0,
            death: |_| 0.0,
        };
        let q = TransitionQuery::new(0, 3);
        let p = transition_probability(&rates, &q, &SolverConfig::default()).unwrap();
        let expect = (-1.0f64).exp() / 6.0;
        assert!((p - expect).abs() < 1e-8);
    }

    #[test]
    fn nonpositive_time_is_rejected() {
        let rates = LinearRates { theta: 1.0 };
        assert!(transition_row(&rates, 0, 0.0, &SolverConfig::default()).is_err());
        assert!(TransitionQuery { a: 0, b: 0, t: -1.0 }.validate().is_err());
    }
}
