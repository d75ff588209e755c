//! Stored chain history: kept states, accumulated pairwise co-clustering
//! counts, and per-move acceptance counters.

use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceKind {
    NoCovariate,
    Covariate,
}

/// One kept state. `w` is empty for the covariate model (weights come from
/// the gating coefficients); `gamma`/`beta` are empty for the no-covariate
/// model.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceState<T> {
    pub iteration: u64,
    pub k: usize,
    pub rho: T,
    pub nu: T,
    pub w: Vec<T>,
    pub mu: Vec<T>,
    pub sigma2: Vec<T>,
    pub gamma: Vec<Vec<T>>,
    pub beta: Vec<Vec<T>>,
    pub labels: Vec<u32>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MoveCounters {
    pub mu_attempts: u64,
    pub mu_accepts: u64,
    pub rho_attempts: u64,
    pub rho_accepts: u64,
    pub beta_attempts: u64,
    pub beta_accepts: u64,
    pub split_attempts: u64,
    pub split_accepts: u64,
    pub combine_attempts: u64,
    pub combine_accepts: u64,
    pub rj_skipped: u64,
}

impl MoveCounters {
    pub fn rate(attempts: u64, accepts: u64) -> f64 {
        if attempts == 0 {
            0.0
        } else {
            accepts as f64 / attempts as f64
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trace<T> {
    pub kind: TraceKind,
    pub n_items: usize,
    pub n_covariates: usize,
    pub states: Vec<TraceState<T>>,
    pub counters: MoveCounters,
    /// Upper-triangle pairwise co-clustering counts, row-major over i < j.
    pair_counts: Vec<u64>,
}

impl<T: Real> Trace<T> {
    pub fn new(kind: TraceKind, n_items: usize, n_covariates: usize) -> Self {
        Trace {
            kind,
            n_items,
            n_covariates,
            states: Vec::new(),
            counters: MoveCounters::default(),
            pair_counts: vec![0; n_items * n_items.saturating_sub(1) / 2],
        }
    }

    pub fn n_kept(&self) -> usize {
        self.states.len()
    }

    fn pair_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.n_items);
        // offset of row i in the strictly-upper triangle
        i * self.n_items - i * (i + 1) / 2 + (j - i - 1)
    }

    pub fn record(&mut self, state: TraceState<T>) {
        assert_eq!(state.labels.len(), self.n_items);
        for i in 0..self.n_items {
            for j in (i + 1)..self.n_items {
                if state.labels[i] == state.labels[j] {
                    let idx = self.pair_index(i, j);
                    self.pair_counts[idx] += 1;
                }
            }
        }
        self.states.push(state);
    }

    /// Empirical co-clustering probability of items i and j.
    pub fn coclustering_probability(&self, i: usize, j: usize) -> T {
        if i == j {
            return T::one();
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        T::of(self.pair_counts[self.pair_index(a, b)] as f64) / T::of(self.n_kept() as f64)
    }

    /// Full co-clustering count matrix (diagonal = number of kept samples).
    pub fn coclustering_counts(&self) -> Vec<u64> {
        let n = self.n_items;
        let mut m = vec![0u64; n * n];
        for i in 0..n {
            m[i * n + i] = self.n_kept() as u64;
            for j in (i + 1)..n {
                let c = self.pair_counts[self.pair_index(i, j)];
                m[i * n + j] = c;
                m[j * n + i] = c;
            }
        }
        m
    }
}
