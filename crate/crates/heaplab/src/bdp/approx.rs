//! Dispersion-only moments and the discretized-normal approximation to the
//! reporting distribution, used as the latent-count proposal.

use crate::error::{HeapError, Result};

/// Mean and variance of the reported count after time `t` under the
/// dispersion-only process started at `a`:
/// mean `a + theta t`, variance `(2a+1) theta t + theta^2 t^2`.
pub fn dispersion_moments(a: u32, theta_disp: f64, t: f64) -> (f64, f64) {
    let a = a as f64;
    let mean = a + theta_disp * t;
    let var = (2.0 * a + 1.0) * theta_disp * t + theta_disp * theta_disp * t * t;
    (mean, var)
}

/// Normal pmf discretized to the integers of `support` and renormalized.
pub fn discretized_normal(
    mean: f64,
    var: f64,
    support: std::ops::RangeInclusive<u32>,
) -> Result<Vec<f64>> {
    if support.is_empty() {
        return Err(HeapError::Domain("empty support for discretized normal".into()));
    }
    if !(var > 0.0) {
        return Err(HeapError::Domain(format!(
            "discretized normal needs positive variance, got {var}"
        )));
    }
    let inv2v = 0.5 / var;
    let mut probs: Vec<f64> = support
        .map(|b| {
            let d = b as f64 - mean;
            (-d * d * inv2v).exp()
        })
        .collect();
    let total: f64 = probs.iter().sum();
    if total <= 0.0 {
        return Err(HeapError::Domain(
            "discretized normal support carries no mass".into(),
        ));
    }
    for p in &mut probs {
        *p /= total;
    }
    Ok(probs)
}

/// The dispersion-only normal approximation to the reporting pmf out of `a`
/// at t = 1, restricted to `support`.
pub fn normal_approx_pmf(
    a: u32,
    theta_disp: f64,
    support: std::ops::RangeInclusive<u32>,
) -> Result<Vec<f64>> {
    if !(theta_disp > 0.0) {
        return Err(HeapError::Domain(format!(
            "normal approximation needs theta_disp > 0, got {theta_disp}"
        )));
    }
    let (mean, var) = dispersion_moments(a, theta_disp, 1.0);
    discretized_normal(mean, var, support)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_match_stated_values() {
        assert_eq!(dispersion_moments(33, 1.0, 1.0), (34.0, 68.0));
        assert_eq!(dispersion_moments(7, 0.5, 1.0), (7.5, 7.75));
        assert_eq!(dispersion_moments(12, 0.0, 1.0), (12.0, 0.0));
    }

    #[test]
    fn approx_pmf_normalizes_and_peaks_at_mean() {
        let pmf = normal_approx_pmf(33, 1.0, 0..=120).unwrap();
        let sum: f64 = pmf.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        let mode = pmf
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(mode, 34);
    }

    #[test]
    fn approx_pmf_is_symmetric_before_truncation() {
        let pmf = normal_approx_pmf(33, 1.0, 0..=120).unwrap();
        for d in 1..20usize {
            let hi = pmf[34 + d];
            let lo = pmf[34 - d];
            assert!((hi - lo).abs() < 1e-15 * (hi + lo).max(1e-300), "d={d}");
        }
    }

    #[test]
    fn low_count_mass_sits_near_origin() {
        let pmf = normal_approx_pmf(0, 0.5, 0..=30).unwrap();
        let mean: f64 = pmf.iter().enumerate().map(|(b, p)| b as f64 * p).sum();
        assert!((mean - 0.5).abs() < 0.5, "mean {mean}");
        let head: f64 = pmf[0..=2].iter().sum();
        assert!(head > 0.85, "head mass {head}");
    }

    #[test]
    #[allow(clippy::reversed_empty_ranges)]
    fn empty_support_is_a_domain_error() {
        assert!(normal_approx_pmf(5, 1.0, 10..=9).is_err());
        assert!(normal_approx_pmf(5, 0.0, 0..=10).is_err());
    }
}
