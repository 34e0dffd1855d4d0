//! Time-domain transition rows by uniformization: the row of `e^{Qt}` as a
//! Poisson-weighted mixture of powers of the uniformized jump kernel. Serves
//! as an independent oracle for the Laplace-inversion route.

use crate::error::{HeapError, Result};

/// Compute the transition row out of `a` at time `t` on states `0..=cap`
/// (tabulated rates, `birth[cap]` ignored). Poisson weights are accumulated
/// until the missing tail is below `tail_tol / 2`.
pub(crate) fn uniform_row_at_cap(
    birth: &[f64],
    death: &[f64],
    a: u32,
    t: f64,
    tail_tol: f64,
) -> Result<Vec<f64>> {
    let n = birth.len();
    let cap = n - 1;

    let rate = |k: usize| -> f64 {
        let b = if k == cap { 0.0 } else { birth[k] };
        b + death[k]
    };
    let nu = (0..=cap).map(rate).fold(0.0f64, f64::max);

    let mut row = vec![0.0f64; n];
    if nu == 0.0 {
        row[a as usize] = 1.0;
        return Ok(row);
    }

    let nu_t = nu * t;
    let budget = (nu_t + 40.0 * (nu_t.sqrt() + 1.0) + 400.0) as usize;

    let mut v = vec![0.0f64; n];
    let mut next = vec![0.0f64; n];
    v[a as usize] = 1.0;

    let mut log_w = -nu_t;
    let ln_nu_t = nu_t.ln();
    let mut cum_w = 0.0f64;

    for step in 0..=budget {
        if step > 0 {
            // next = v * (I + Q/nu)
            for k in 0..=cap {
                let lam = if k == cap { 0.0 } else { birth[k] };
                let stay = 1.0 - (lam + death[k]) / nu;
                let mut acc = v[k] * stay;
                if k > 0 {
                    let lam_prev = if k - 1 == cap { 0.0 } else { birth[k - 1] };
                    acc += v[k - 1] * lam_prev / nu;
                }
                if k < cap {
                    acc += v[k + 1] * death[k + 1] / nu;
                }
                next[k] = acc;
            }
            std::mem::swap(&mut v, &mut next);
            log_w += ln_nu_t - ((step) as f64).ln();
        }
        let w = log_w.exp();
        if w > 0.0 {
            for k in 0..=cap {
                row[k] += w * v[k];
            }
            cum_w += w;
        }
        if cum_w >= 1.0 - 0.5 * tail_tol {
            return Ok(row);
        }
    }
    Err(HeapError::Truncation(format!(
        "uniformization did not absorb the Poisson tail within {budget} terms (nu*t = {nu_t:.2})"
    )))
}
