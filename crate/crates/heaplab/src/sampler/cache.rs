//! Cache of reporting rows keyed by (parameter signature, true count).
//!
//! Rows are pure functions of the heaping parameters and the start state, so
//! caching is an optimization only; results are unchanged. Signatures intern
//! exact parameter bit patterns, which makes proposal rows reusable when a
//! block move is accepted and lets stale generations be purged.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::bdp::SolverConfig;
use crate::error::Result;
use crate::model::FROZEN_EPS;
use crate::report::{reporting_pmf, HeapParams, RegimeModel};

#[derive(Clone, PartialEq, Eq, Hash)]
struct ThetaSig {
    disp: u64,
    heap: u64,
    gamma: Vec<u64>,
    grids: Vec<u32>,
}

impl ThetaSig {
    fn of(p: &HeapParams) -> Self {
        let gamma = match &p.regimes {
            RegimeModel::Logistic(g) => g.iter().map(|v| v.to_bits()).collect(),
            RegimeModel::AlwaysHeap => Vec::new(),
        };
        ThetaSig {
            disp: p.theta_disp.to_bits(),
            heap: p.theta_heap.to_bits(),
            gamma,
            grids: p.grids.clone(),
        }
    }
}

/// Interned id for one exact heaping-parameter configuration.
pub type SigId = u32;

pub struct GRowCache {
    sigs: HashMap<ThetaSig, SigId>,
    params: Vec<HeapParams>,
    rows: HashMap<(SigId, u32), Arc<Vec<f64>>>,
    limit: usize,
}

impl Default for GRowCache {
    fn default() -> Self {
        GRowCache::with_limit(20_000)
    }
}

impl GRowCache {
    pub fn with_limit(limit: usize) -> Self {
        GRowCache {
            sigs: HashMap::new(),
            params: Vec::new(),
            rows: HashMap::new(),
            limit,
        }
    }

    /// Intern a parameter configuration.
    pub fn sig(&mut self, p: &HeapParams) -> SigId {
        let key = ThetaSig::of(p);
        if let Some(&id) = self.sigs.get(&key) {
            return id;
        }
        let id = self.params.len() as SigId;
        self.sigs.insert(key, id);
        self.params.push(p.clone());
        id
    }

    pub fn params_of(&self, id: SigId) -> &HeapParams {
        &self.params[id as usize]
    }

    /// Whether the configuration degenerates to the identity report.
    pub fn is_frozen(&self, id: SigId) -> bool {
        let p = &self.params[id as usize];
        p.theta_disp < FROZEN_EPS && p.theta_heap < FROZEN_EPS
    }

    /// Fetch (computing if needed) the reporting row out of `x`.
    pub fn row(&mut self, id: SigId, x: u32, cfg: &SolverConfig) -> Result<Arc<Vec<f64>>> {
        if let Some(r) = self.rows.get(&(id, x)) {
            return Ok(r.clone());
        }
        let row = Arc::new(reporting_pmf(&self.params[id as usize], x, cfg)?);
        self.rows.insert((id, x), row.clone());
        Ok(row)
    }

    /// Compute all missing rows for the given keys in parallel.
    pub fn ensure(&mut self, wants: &[(SigId, u32)], cfg: &SolverConfig) -> Result<()> {
        let mut missing: Vec<(SigId, u32)> = wants
            .iter()
            .copied()
            .filter(|k| !self.rows.contains_key(k) && !self.is_frozen(k.0))
            .collect();
        missing.sort_unstable();
        missing.dedup();
        if missing.is_empty() {
            return Ok(());
        }
        let params = &self.params;
        let computed: Vec<((SigId, u32), Result<Vec<f64>>)> = missing
            .par_iter()
            .map(|&(id, x)| ((id, x), reporting_pmf(&params[id as usize], x, cfg)))
            .collect();
        for (key, row) in computed {
            self.rows.insert(key, Arc::new(row?));
        }
        Ok(())
    }

    /// log g(y|x) under configuration `id`, with the frozen-parameter
    /// indicator branch.
    pub fn log_g(&mut self, id: SigId, y: u32, x: u32, cfg: &SolverConfig) -> Result<f64> {
        if self.is_frozen(id) {
            return Ok(if y == x { 0.0 } else { f64::NEG_INFINITY });
        }
        let row = self.row(id, x, cfg)?;
        Ok(match row.get(y as usize) {
            Some(&g) if g > 0.0 => g.ln(),
            _ => f64::NEG_INFINITY,
        })
    }

    /// Drop rows from configurations not in `live` once the cache is large.
    pub fn maybe_purge(&mut self, live: &[SigId]) {
        if self.rows.len() <= self.limit {
            return;
        }
        self.rows.retain(|(id, _), _| live.contains(id));
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interning_is_stable_and_exact() {
        let mut cache = GRowCache::default();
        let p1 = HeapParams::single_grid(0.5, 2.0, 5);
        let p2 = HeapParams::single_grid(0.5, 2.0, 5);
        let p3 = HeapParams::single_grid(0.5, 2.0000000001, 5);
        assert_eq!(cache.sig(&p1), cache.sig(&p2));
        assert_ne!(cache.sig(&p1), cache.sig(&p3));
    }

    #[test]
    fn cached_rows_match_direct_computation() {
        let mut cache = GRowCache::default();
        let p = HeapParams::single_grid(0.5, 2.0, 5);
        let cfg = SolverConfig::default();
        let id = cache.sig(&p);
        let row = cache.row(id, 7, &cfg).unwrap();
        let direct = reporting_pmf(&p, 7, &cfg).unwrap();
        assert_eq!(*row, direct);
        // Second fetch is the same Arc.
        let again = cache.row(id, 7, &cfg).unwrap();
        assert!(Arc::ptr_eq(&row, &again));
    }

    #[test]
    fn frozen_signature_short_circuits() {
        let mut cache = GRowCache::default();
        let p = HeapParams::single_grid(0.0, 0.0, 5);
        let id = cache.sig(&p);
        let cfg = SolverConfig::default();
        assert_eq!(cache.log_g(id, 4, 4, &cfg).unwrap(), 0.0);
        assert_eq!(
            cache.log_g(id, 5, 4, &cfg).unwrap(),
            f64::NEG_INFINITY
        );
        assert!(cache.is_empty());
    }

    #[test]
    fn purge_keeps_live_generations() {
        let mut cache = GRowCache::with_limit(4);
        let cfg = SolverConfig::fast();
        let live = cache.sig(&HeapParams::single_grid(0.5, 1.0, 5));
        let stale = cache.sig(&HeapParams::single_grid(0.6, 1.0, 5));
        for x in 0..4u32 {
            cache.row(live, x, &cfg).unwrap();
            cache.row(stale, x, &cfg).unwrap();
        }
        cache.maybe_purge(&[live]);
        assert_eq!(cache.len(), 4);
        assert!(cache.rows.contains_key(&(live, 0)));
        assert!(!cache.rows.contains_key(&(stale, 0)));
    }
}
