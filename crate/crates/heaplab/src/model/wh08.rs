//! The deterministic-rounding baseline: reports equal the truth or the
//! nearest grid multiple, chosen by the regime weights.

use rand::Rng;

use crate::error::Result;
use crate::report::regime_weights;

/// Nearest multiple of `m` to `x`, rounding half up (75 -> 100 for m = 50).
pub fn nearest_multiple(x: u32, m: u32) -> u32 {
    (x + m / 2) / m * m
}

/// Deterministic value reported under regime `j` (0 = truthful).
pub fn regime_report(x: u32, j: usize, grids: &[u32]) -> u32 {
    if j == 0 {
        x
    } else {
        nearest_multiple(x, grids[j - 1])
    }
}

/// Sample a report: draw a regime from the proportional-odds weights, then
/// round deterministically.
pub fn wh08_report<R: Rng>(x: u32, gamma: &[f64], grids: &[u32], rng: &mut R) -> Result<u32> {
    let v = regime_weights(gamma, x)?;
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for (j, &w) in v.iter().enumerate() {
        cum += w;
        if u < cum {
            return Ok(regime_report(x, j, grids));
        }
    }
    Ok(regime_report(x, v.len() - 1, grids))
}

/// Reporting pmf of the rounding model: mass of every regime whose rounded
/// value equals `y`.
pub fn wh08_pmf(y: u32, x: u32, gamma: &[f64], grids: &[u32]) -> Result<f64> {
    let v = regime_weights(gamma, x)?;
    let mut p = 0.0;
    for (j, &w) in v.iter().enumerate() {
        if regime_report(x, j, grids) == y {
            p += w;
        }
    }
    Ok(p)
}

/// Half-width of the set of true counts that can produce a given report:
/// one report reaches back at most half the coarsest grid.
pub fn support_halfwidth(grids: &[u32]) -> u32 {
    grids.iter().copied().max().unwrap_or(0) / 2 + 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    const GRIDS: [u32; 3] = [5, 10, 50];

    #[test]
    fn rounding_matches_stated_cases() {
        assert_eq!(nearest_multiple(22, 5), 20);
        assert_eq!(nearest_multiple(23, 5), 25);
        // Midpoints round half up.
        assert_eq!(nearest_multiple(75, 50), 100);
        assert_eq!(nearest_multiple(15, 10), 20);
        assert_eq!(regime_report(22, 1, &GRIDS), 20);
        assert_eq!(regime_report(75, 3, &GRIDS), 100);
        assert_eq!(regime_report(9, 0, &GRIDS), 9);
    }

    #[test]
    fn grid_points_are_fixed_points() {
        for j in 1..=3usize {
            let m = GRIDS[j - 1];
            for mult in [0u32, 1, 2, 7] {
                assert_eq!(regime_report(mult * m, j, &GRIDS), mult * m);
            }
        }
    }

    #[test]
    fn pmf_sums_to_one_over_reachable_reports() {
        let gamma = [0.5, -5.0, -10.0, -20.0];
        for x in [0u32, 7, 22, 53, 75] {
            let mut total = 0.0;
            for y in 0..=200u32 {
                total += wh08_pmf(y, x, &gamma, &GRIDS).unwrap();
            }
            assert!((total - 1.0).abs() < 1e-12, "x={x}: {total}");
        }
    }

    #[test]
    fn sampled_reports_follow_the_pmf() {
        let gamma = [0.5, -5.0, -10.0, -20.0];
        let x = 22;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 40_000;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..n {
            let y = wh08_report(x, &gamma, &GRIDS, &mut rng).unwrap();
            *counts.entry(y).or_insert(0usize) += 1;
        }
        for (&y, &c) in &counts {
            let p = wh08_pmf(y, x, &gamma, &GRIDS).unwrap();
            let freq = c as f64 / n as f64;
            assert!(
                (freq - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt() + 1e-3,
                "y={y}: freq {freq} vs p {p}"
            );
        }
    }
}
