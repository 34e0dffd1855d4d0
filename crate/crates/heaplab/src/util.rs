//! Small numeric helpers shared across the crate.

/// log Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma_r(x).0
}

/// log x! for a count.
pub fn ln_factorial(x: u32) -> f64 {
    ln_gamma(x as f64 + 1.0)
}

/// log of the Poisson pmf at `x` with mean `eta`.
pub fn poisson_log_pmf(x: u32, eta: f64) -> f64 {
    if eta <= 0.0 {
        return if x == 0 && eta == 0.0 {
            0.0
        } else {
            f64::NEG_INFINITY
        };
    }
    x as f64 * eta.ln() - eta - ln_factorial(x)
}

/// log of a univariate normal density.
pub fn normal_log_pdf(x: f64, mean: f64, var: f64) -> f64 {
    debug_assert!(var > 0.0);
    let d = x - mean;
    -0.5 * (d * d / var + var.ln() + core::f64::consts::TAU.ln())
}

/// log of an inverse-gamma density with shape `a` and rate `b`
/// (density proportional to x^{-a-1} e^{-b/x}).
pub fn inv_gamma_log_pdf(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    a * b.ln() - ln_gamma(a) - (a + 1.0) * x.ln() - b / x
}

/// Overflow-safe 1 / (1 + e^z).
pub fn inv_one_plus_exp(z: f64) -> f64 {
    if z > 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// log(Σ exp(v)) without overflow; -inf for an empty or all -inf input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return f64::NEG_INFINITY;
    }
    let s: f64 = values.iter().map(|v| (v - m).exp()).sum();
    m + s.ln()
}

/// SplitMix64 step, used to derive independent stream seeds from a base seed.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9e3779b97f4a7c15u64.wrapping_mul(stream.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Mean and (population) variance of a slice.
pub fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Empirical quantile by linear interpolation on the sorted sample.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_pmf_matches_direct_evaluation() {
        // e^{-2} 2^3 / 3!
        let expect = (-2.0f64).exp() * 8.0 / 6.0;
        assert!((poisson_log_pmf(3, 2.0).exp() - expect).abs() < 1e-14);
    }

    #[test]
    fn logistic_is_stable_for_large_arguments() {
        assert!(inv_one_plus_exp(800.0) >= 0.0);
        assert!(inv_one_plus_exp(800.0) < 1e-300);
        assert!((inv_one_plus_exp(-800.0) - 1.0).abs() < 1e-15);
        assert!((inv_one_plus_exp(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn log_sum_exp_handles_spread_magnitudes() {
        let v = [-1000.0, -1001.0];
        let expect = -1000.0 + (1.0 + (-1.0f64).exp()).ln();
        assert!((log_sum_exp(&v) - expect).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn derived_seeds_differ_across_streams() {
        let a = derive_seed(42, 0);
        let b = derive_seed(42, 1);
        assert_ne!(a, b);
        assert_eq!(a, derive_seed(42, 0));
    }

    #[test]
    fn quantile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert!((quantile(&v, 0.0) - 1.0).abs() < 1e-15);
        assert!((quantile(&v, 1.0) - 4.0).abs() < 1e-15);
        assert!((quantile(&v, 0.5) - 2.5).abs() < 1e-15);
    }
}
