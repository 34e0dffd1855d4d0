//! Birth/death rate schedules.

/// An evaluable rule giving the jump rates of a general birth-death process.
///
/// `birth(k)` is the instantaneous rate of `k -> k+1` for `k >= 0` and
/// `death(k)` the rate of `k -> k-1` for `k >= 1`. The process lives on the
/// nonnegative integers, so `death(0)` is fixed to zero regardless of what an
/// implementation returns; the engine never uses it.
pub trait RateSchedule {
    fn birth(&self, k: u32) -> f64;
    fn death(&self, k: u32) -> f64;
}

impl<T: RateSchedule + ?Sized> RateSchedule for &T {
    fn birth(&self, k: u32) -> f64 {
        (**self).birth(k)
    }
    fn death(&self, k: u32) -> f64 {
        (**self).death(k)
    }
}

/// Rates given as explicit tables; states past the table end get rate zero.
#[derive(Debug, Clone)]
pub struct TabulatedRates {
    pub birth: Vec<f64>,
    pub death: Vec<f64>,
}

impl RateSchedule for TabulatedRates {
    fn birth(&self, k: u32) -> f64 {
        self.birth.get(k as usize).copied().unwrap_or(0.0)
    }
    fn death(&self, k: u32) -> f64 {
        self.death.get(k as usize).copied().unwrap_or(0.0)
    }
}

/// Rates defined by a pair of closures.
pub struct FnRates<B, D>
where
    B: Fn(u32) -> f64,
    D: Fn(u32) -> f64,
{
    pub birth: B,
    pub death: D,
}

impl<B, D> RateSchedule for FnRates<B, D>
where
    B: Fn(u32) -> f64,
    D: Fn(u32) -> f64,
{
    fn birth(&self, k: u32) -> f64 {
        (self.birth)(k)
    }
    fn death(&self, k: u32) -> f64 {
        (self.death)(k)
    }
}

/// Linear immigration-birth-death rates: `birth(k) = theta (1+k)`,
/// `death(k) = theta k`. The dispersion-only reporting process.
#[derive(Debug, Clone, Copy)]
pub struct LinearRates {
    pub theta: f64,
}

impl RateSchedule for LinearRates {
    fn birth(&self, k: u32) -> f64 {
        self.theta * (1.0 + k as f64)
    }
    fn death(&self, k: u32) -> f64 {
        self.theta * k as f64
    }
}

/// Tabulate a schedule on `0..=cap`, clamping death(0) to zero and
/// validating nonnegativity.
pub(crate) fn tabulate<R: RateSchedule>(
    rates: &R,
    cap: usize,
) -> Result<(Vec<f64>, Vec<f64>), crate::HeapError> {
    let mut birth = Vec::with_capacity(cap + 1);
    let mut death = Vec::with_capacity(cap + 1);
    for k in 0..=cap {
        let b = rates.birth(k as u32);
        let d = if k == 0 { 0.0 } else { rates.death(k as u32) };
        if !(b >= 0.0) || !(d >= 0.0) || !b.is_finite() || !d.is_finite() {
            return Err(crate::HeapError::Domain(format!(
                "rates must be finite and nonnegative; got birth({k})={b}, death({k})={d}"
            )));
        }
        birth.push(b);
        death.push(d);
    }
    Ok((birth, death))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tabulate_rejects_negative_rates() {
        let bad = FnRates {
            birth: |_| -1.0,
            death: |_| 0.0,
        };
        assert!(tabulate(&bad, 4).is_err());
    }

    #[test]
    fn tabulate_zeroes_death_at_origin() {
        let r = FnRates {
            birth: |_| 1.0,
            death: |_| 7.0,
        };
        let (_, death) = tabulate(&r, 3).unwrap();
        assert_eq!(death[0], 0.0);
        assert_eq!(death[1], 7.0);
    }
}
