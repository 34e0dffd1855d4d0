//! Laplace-domain solves for the transition probabilities of a truncated
//! birth-death process.
//!
//! Transforming the Kolmogorov forward equations turns the row of transition
//! probabilities out of state `a` into the solution of a tridiagonal linear
//! system `(sI - Q)^T h = e_a`, where `Q` is the generator restricted to
//! states `0..=cap`. The state space is truncated conservatively: the top
//! state keeps its death rate but its birth rate is dropped, so `Q` remains a
//! proper generator and `s * sum(h) = 1` holds exactly on the truncated space.

use num_complex::Complex64;

use super::rates::RateSchedule;
use crate::error::{HeapError, Result};

/// Scratch buffers reused across solves at different transform points.
#[derive(Default)]
pub(crate) struct SolveWorkspace {
    carry: Vec<Complex64>,
}

/// Solve `(sI - Q)^T h = e_a` on states `0..=cap` given tabulated rates.
///
/// `birth` and `death` must have length `cap + 1` with `death[0] == 0`.
/// The result is written into `out` (resized to `cap + 1`).
pub(crate) fn solve_transform_row(
    birth: &[f64],
    death: &[f64],
    a: u32,
    s: Complex64,
    out: &mut Vec<Complex64>,
    ws: &mut SolveWorkspace,
) -> Result<()> {
    let n = birth.len();
    debug_assert_eq!(death.len(), n);
    debug_assert!((a as usize) < n);
    let cap = n - 1;

    out.clear();
    out.resize(n, Complex64::ZERO);
    ws.carry.clear();
    ws.carry.resize(n, Complex64::ZERO);

    // Row b of the transposed system:
    //   -birth[b-1] h[b-1] + (s + birth[b] + death[b]) h[b] - death[b+1] h[b+1] = e_a[b]
    // with birth[cap] treated as zero (conserving truncation). The matrix is
    // strictly column diagonally dominant for Re(s) > 0, so elimination
    // without pivoting is stable.
    let lam = |k: usize| if k == cap { 0.0 } else { birth[k] };

    // Forward elimination: carry[b] holds sup[b] / m_b, out[b] the reduced rhs.
    let mut m = s + lam(0) + death[0];
    if m.norm_sqr() == 0.0 {
        return Err(HeapError::Numerical(
            "singular transform solve at state 0".into(),
        ));
    }
    let mut inv_m = m.inv();
    let sup0 = if cap > 0 { -death[1] } else { 0.0 };
    ws.carry[0] = inv_m * sup0;
    out[0] = inv_m * if a == 0 { 1.0 } else { 0.0 };

    for b in 1..=cap {
        let sub = -birth[b - 1];
        m = s + lam(b) + death[b] - ws.carry[b - 1] * sub;
        if m.norm_sqr() == 0.0 {
            return Err(HeapError::Numerical(format!(
                "singular transform solve at state {b}"
            )));
        }
        inv_m = m.inv();
        let sup = if b < cap { -death[b + 1] } else { 0.0 };
        ws.carry[b] = inv_m * sup;
        let rhs = if a as usize == b { 1.0 } else { 0.0 };
        out[b] = inv_m * (rhs - out[b - 1] * sub);
    }

    // Back substitution.
    for b in (0..cap).rev() {
        let t = ws.carry[b] * out[b + 1];
        out[b] -= t;
    }
    Ok(())
}

/// Evaluate the continued fraction for `h_00(s)` bottom-up from `depth`.
///
/// The truncation at `depth` drops the birth rate of the deepest level, which
/// is the same conserving convention the tridiagonal solve uses; as `depth`
/// grows both converge to the untruncated value.
pub fn continued_fraction_h00<R: RateSchedule>(rates: &R, s: Complex64, depth: usize) -> Complex64 {
    let mut d = s + rates.death(depth as u32);
    for k in (0..depth).rev() {
        let lam_k = rates.birth(k as u32);
        let mu_k = if k == 0 { 0.0 } else { rates.death(k as u32) };
        let mu_next = rates.death(k as u32 + 1);
        d = s + lam_k + mu_k - lam_k * mu_next / d;
    }
    d.inv()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bdp::rates::{FnRates, LinearRates, TabulatedRates};

    fn solve(birth: &[f64], death: &[f64], a: u32, s: Complex64) -> Vec<Complex64> {
        let mut out = Vec::new();
        let mut ws = SolveWorkspace::default();
        solve_transform_row(birth, death, a, s, &mut out, &mut ws).unwrap();
        out
    }

    #[test]
    fn frozen_chain_transform_is_one_over_s() {
        // All rates zero: P_aa(t) = 1, so h_aa(s) = 1/s.
        let h = solve(&[0.0; 8], &[0.0; 8], 3, Complex64::new(2.0, 0.0));
        assert!((h[3] - Complex64::new(0.5, 0.0)).norm() < 1e-14);
        assert!(h[0].norm() < 1e-14);
    }

    #[test]
    fn pure_birth_transform_matches_closed_form() {
        // birth = 1, death = 0 from state 0: h_00(s) = 1 / (s + 1).
        let birth = vec![1.0; 10];
        let death = vec![0.0; 10];
        let h = solve(&birth, &death, 0, Complex64::new(1.0, 0.0));
        assert!((h[0] - Complex64::new(0.5, 0.0)).norm() < 1e-14);
        // h_0b(s) = lambda^b / (s+lambda)^{b+1} away from the truncation edge.
        for b in 0..6 {
            let expect = 0.5f64.powi(b as i32 + 1);
            assert!((h[b] - Complex64::new(expect, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn transform_row_sums_to_one_over_s() {
        // Conserving truncation keeps total mass: s * sum_b h_ab(s) = 1.
        let r = LinearRates { theta: 0.7 };
        let (birth, death) = crate::bdp::rates::tabulate(&r, 200).unwrap();
        for &re in &[0.5, 1.0, 5.0] {
            let s = Complex64::new(re, 0.3);
            let h = solve(&birth, &death, 4, s);
            let total: Complex64 = h.iter().sum();
            assert!(
                (s * total - Complex64::ONE).norm() < 1e-12,
                "mass defect {:?}",
                s * total - Complex64::ONE
            );
        }
    }

    #[test]
    fn continued_fraction_agrees_with_tridiagonal_solve() {
        let rates = FnRates {
            birth: |k| 0.8 * (1.0 + k as f64) + 1.5 * ((k % 5) as f64),
            death: |k| 0.8 * k as f64 + 1.5 * (((5 - k % 5) % 5) as f64),
        };
        let cap = 300;
        let (birth, death) = crate::bdp::rates::tabulate(&rates, cap).unwrap();
        for &re in &[0.5, 1.0, 5.0, 20.0] {
            let s = Complex64::new(re, 0.0);
            let h = solve(&birth, &death, 0, s);
            let cf = continued_fraction_h00(&rates, s, cap);
            assert!(
                (h[0] - cf).norm() < 1e-13,
                "s={re}: tridiag {:?} vs cf {:?}",
                h[0],
                cf
            );
        }
    }

    #[test]
    fn continued_fraction_tail_is_negligible_at_depth() {
        let rates = TabulatedRates {
            birth: vec![1.0; 400],
            death: (0..400).map(|k| 0.5 * k as f64).collect(),
        };
        let s = Complex64::new(1.0, 0.0);
        let shallow = continued_fraction_h00(&rates, s, 150);
        let deep = continued_fraction_h00(&rates, s, 399);
        assert!((shallow - deep).norm() < 1e-13);
    }
}
