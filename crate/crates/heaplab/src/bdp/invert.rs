//! Numerical Laplace inversion on the Bromwich contour with Euler-summation
//! acceleration of the alternating series (Abate-Whitt style).
//!
//! For a transform `h(s)` of a function bounded by 1,
//!
//! ```text
//! f(t) ~ (e^{A/2} / t) * [ Re h(A/2t) / 2
//!                          + sum_{k>=1} (-1)^k Re h((A + 2 pi i k) / 2t) ]
//! ```
//!
//! where `A` controls the discretization error (about `e^{-A}`). The series
//! is alternating and nearly geometric for smooth transforms, so Euler
//! summation of the last `m` partial sums converges quickly.

use num_complex::Complex64;

/// Precomputed evaluation grid and Euler weights for one (t, config) pair.
pub(crate) struct EulerInversion {
    pub s_points: Vec<Complex64>,
    weights: Vec<f64>,
    burn: usize,
    factor: f64,
}

impl EulerInversion {
    /// `terms` is the total number of partial sums used (burn-in plus the
    /// Euler window); `decay` is the contour parameter `A`.
    pub fn new(t: f64, terms: usize, decay: f64) -> Self {
        let terms = terms.max(6);
        let m = (terms / 3).min(15).max(1);
        let burn = terms - m;

        let re = decay / (2.0 * t);
        let s_points = (0..=terms)
            .map(|k| Complex64::new(re, k as f64 * core::f64::consts::PI / t))
            .collect();

        // Binomial weights C(m, j) / 2^m.
        let mut weights = vec![0.0f64; m + 1];
        weights[0] = 0.5f64.powi(m as i32);
        for j in 1..=m {
            weights[j] = weights[j - 1] * (m - j + 1) as f64 / j as f64;
        }

        EulerInversion {
            s_points,
            weights,
            burn,
            factor: (decay / 2.0).exp() / t,
        }
    }

    /// Combine the real parts of the transform evaluated on `s_points`.
    /// `val(k)` must return `Re h(s_points[k])`.
    pub fn invert<F: Fn(usize) -> f64>(&self, val: F) -> f64 {
        let mut partial = 0.5 * val(0);
        let mut sign = -1.0;
        for k in 1..=self.burn {
            partial += sign * val(k);
            sign = -sign;
        }
        let mut acc = self.weights[0] * partial;
        for j in 1..self.weights.len() {
            partial += sign * val(self.burn + j);
            sign = -sign;
            acc += self.weights[j] * partial;
        }
        self.factor * acc
    }
}
