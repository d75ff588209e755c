//! Posterior summarization: Binder-loss clustering point estimate, LPML/CPO,
//! MSE against posterior fitted values, predictive density bands, and
//! summaries of the posterior on K.

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::real::Real;
use crate::sampler::cov::gating_weights;
use crate::stats::{ln_normal_pdf, log_sum_exp};
use crate::trace::{Trace, TraceState};

/// Clustering point estimate minimizing the posterior expected Binder loss
/// over the visited partitions.
#[derive(Clone, Debug)]
pub struct PartitionEstimate<T> {
    /// Contiguous labels starting at 1.
    pub labels: Vec<u32>,
    pub n_groups: usize,
    pub expected_loss: T,
    /// Index of the kept state realizing the minimum (earliest on ties).
    pub state_index: usize,
}

/// Per-state component weights at a covariate value (gating weights for the
/// covariate model, the sampled simplex otherwise).
fn state_weights<T: Real>(state: &TraceState<T>, x: Option<&[T]>) -> Vec<T> {
    if state.w.is_empty() {
        let x = x.expect("covariate trace requires a covariate vector");
        gating_weights(&state.beta, x)
    } else {
        state.w.clone()
    }
}

fn component_mean<T: Real>(state: &TraceState<T>, c: usize, x: Option<&[T]>) -> T {
    match x {
        Some(xv) if !state.gamma.is_empty() => state.mu[c] + dot(&state.gamma[c], xv),
        _ => state.mu[c],
    }
}

/// Mixture log density of one kept state at a point.
fn state_log_density<T: Real>(state: &TraceState<T>, t: T, x: Option<&[T]>) -> T {
    let w = state_weights(state, x);
    let terms: Vec<T> = (0..state.k)
        .map(|c| w[c].ln() + ln_normal_pdf(t, component_mean(state, c, x), state.sigma2[c]))
        .collect();
    log_sum_exp(&terms)
}

/// Posterior fitted value under one kept state: the component means averaged
/// under p(s_i = k | theta, y_i).
fn state_fitted_value<T: Real>(state: &TraceState<T>, y: T, x: Option<&[T]>) -> T {
    let w = state_weights(state, x);
    let logits: Vec<T> = (0..state.k)
        .map(|c| w[c].ln() + ln_normal_pdf(y, component_mean(state, c, x), state.sigma2[c]))
        .collect();
    let lse = log_sum_exp(&logits);
    if !lse.is_finite() {
        // all components underflow: fall back to the prior-weighted mean
        return (0..state.k).map(|c| w[c] * component_mean(state, c, x)).sum();
    }
    (0..state.k)
        .map(|c| (logits[c] - lse).exp() * component_mean(state, c, x))
        .sum()
}

fn covariate_row<'a, T>(x: Option<&'a [T]>, p: usize, i: usize) -> Option<&'a [T]> {
    x.map(|flat| &flat[i * p..(i + 1) * p])
}

/// Minimize the posterior expectation of the Binder loss (equal
/// misclassification costs) over the sampled partitions; ties break toward
/// the earliest kept iteration.
pub fn binder_partition<T: Real>(trace: &Trace<T>) -> Result<PartitionEstimate<T>> {
    if trace.states.is_empty() {
        return Err(Error::Config("binder_partition needs at least one kept state".into()));
    }
    let n = trace.n_items;
    // loss(c) = sum_{i<j} p_hat_ij + sum_{i<j: c_i = c_j} (1 - 2 p_hat_ij)
    let mut total_phat = T::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            total_phat += trace.coclustering_probability(i, j);
        }
    }
    let mut best: Option<(T, usize)> = None;
    for (idx, state) in trace.states.iter().enumerate() {
        let mut loss = total_phat;
        for i in 0..n {
            for j in (i + 1)..n {
                if state.labels[i] == state.labels[j] {
                    loss += T::one() - T::of(2.0) * trace.coclustering_probability(i, j);
                }
            }
        }
        let better = match &best {
            None => true,
            Some((cur, _)) => loss < *cur,
        };
        if better {
            best = Some((loss, idx));
        }
    }
    let (expected_loss, state_index) = best.unwrap();
    let raw = &trace.states[state_index].labels;
    // renumber to contiguous 1-based labels in order of first appearance
    let mut map: Vec<Option<u32>> = vec![None; raw.iter().map(|&l| l as usize + 1).max().unwrap_or(1)];
    let mut next = 0u32;
    let mut labels = Vec::with_capacity(n);
    for &l in raw {
        let slot = &mut map[l as usize];
        let v = match slot {
            Some(v) => *v,
            None => {
                next += 1;
                *slot = Some(next);
                next
            }
        };
        labels.push(v);
    }
    Ok(PartitionEstimate { labels, n_groups: next as usize, expected_loss, state_index })
}

#[derive(Clone, Debug)]
pub struct LpmlResult<T> {
    pub lpml: T,
    pub cpo: Vec<T>,
    /// Items whose CPO discarded zero-density ordinates.
    pub flagged: Vec<usize>,
}

/// Log pseudo marginal likelihood via harmonic-mean conditional predictive
/// ordinates. `x` is the flattened n x p covariate matrix for covariate
/// traces.
pub fn lpml<T: Real>(trace: &Trace<T>, data: &[T], x: Option<&[T]>) -> Result<LpmlResult<T>> {
    if trace.n_kept() < 2 {
        return Err(Error::Config("lpml needs at least two kept states".into()));
    }
    if data.len() != trace.n_items {
        return Err(Error::Data("data length does not match the trace".into()));
    }
    let p = trace.n_covariates;
    let mut cpo = Vec::with_capacity(data.len());
    let mut flagged = Vec::new();
    for (i, &y) in data.iter().enumerate() {
        let xi = covariate_row(x, p, i);
        let mut neg_logs = Vec::with_capacity(trace.n_kept());
        let mut dropped = false;
        for state in &trace.states {
            let ld = state_log_density(state, y, xi);
            if ld.is_finite() {
                neg_logs.push(-ld);
            } else {
                dropped = true;
            }
        }
        if dropped {
            flagged.push(i);
        }
        if neg_logs.is_empty() {
            cpo.push(T::neg_infinity());
            continue;
        }
        let m = T::of(neg_logs.len() as f64);
        // log CPO_i = log M - logsumexp(-log f_im)
        cpo.push(m.ln() - log_sum_exp(&neg_logs));
    }
    let lpml = cpo.iter().cloned().sum();
    Ok(LpmlResult { lpml, cpo, flagged })
}

/// Sum of squared errors between the responses and their posterior fitted
/// values (the paper's MSE convention).
pub fn mse<T: Real>(trace: &Trace<T>, data: &[T], x: Option<&[T]>) -> Result<T> {
    if trace.states.is_empty() {
        return Err(Error::Config("mse needs at least one kept state".into()));
    }
    if data.len() != trace.n_items {
        return Err(Error::Data("data length does not match the trace".into()));
    }
    let p = trace.n_covariates;
    let m = T::of(trace.n_kept() as f64);
    let mut total = T::zero();
    for (i, &y) in data.iter().enumerate() {
        let xi = covariate_row(x, p, i);
        let yhat = trace
            .states
            .iter()
            .map(|st| state_fitted_value(st, y, xi))
            .sum::<T>()
            / m;
        let d = y - yhat;
        total += d * d;
    }
    Ok(total)
}

/// Square root of [`mse`] (the convention of the covariate comparisons).
pub fn root_mse<T: Real>(trace: &Trace<T>, data: &[T], x: Option<&[T]>) -> Result<T> {
    Ok(mse(trace, data, x)?.sqrt())
}

#[derive(Clone, Debug)]
pub struct PredictiveBands<T> {
    pub grid: Vec<T>,
    pub mean: Vec<T>,
    /// Pointwise 5% quantile.
    pub lo: Vec<T>,
    /// Pointwise 95% quantile.
    pub hi: Vec<T>,
}

/// Pointwise posterior mean and equal-tailed 90% band of the mixture density
/// over a grid. `x` gives the covariate vector for covariate traces.
pub fn predictive_density<T: Real>(
    trace: &Trace<T>,
    grid: &[T],
    x: Option<&[T]>,
) -> Result<PredictiveBands<T>> {
    if grid.is_empty() {
        return Err(Error::Config("predictive grid is empty".into()));
    }
    if trace.states.is_empty() {
        return Err(Error::Config("predictive_density needs kept states".into()));
    }
    let m = trace.n_kept();
    let mut mean = Vec::with_capacity(grid.len());
    let mut lo = Vec::with_capacity(grid.len());
    let mut hi = Vec::with_capacity(grid.len());
    let mut vals = vec![T::zero(); m];
    for &t in grid {
        for (v, state) in vals.iter_mut().zip(&trace.states) {
            *v = state_log_density(state, t, x).exp();
        }
        mean.push(vals.iter().cloned().sum::<T>() / T::of(m as f64));
        let mut sorted = vals.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        lo.push(quantile_sorted(&sorted, T::of(0.05)));
        hi.push(quantile_sorted(&sorted, T::of(0.95)));
    }
    Ok(PredictiveBands { grid: grid.to_vec(), mean, lo, hi })
}

/// Linear-interpolation quantile of a sorted sample.
fn quantile_sorted<T: Real>(sorted: &[T], q: T) -> T {
    let m = sorted.len();
    if m == 1 {
        return sorted[0];
    }
    let h = q * T::of((m - 1) as f64);
    let lo = h.floor();
    let idx = lo.to_f64() as usize;
    if idx + 1 >= m {
        return sorted[m - 1];
    }
    sorted[idx] + (h - lo) * (sorted[idx + 1] - sorted[idx])
}

#[derive(Clone, Debug)]
pub struct KSummary<T> {
    /// (k, probability), ascending in k.
    pub pmf: Vec<(usize, T)>,
    pub mean: T,
    pub var: T,
}

/// Empirical posterior distribution of the number of components.
pub fn k_summary<T: Real>(trace: &Trace<T>) -> Result<KSummary<T>> {
    if trace.states.is_empty() {
        return Err(Error::Config("k_summary needs kept states".into()));
    }
    let max_k = trace.states.iter().map(|s| s.k).max().unwrap();
    let mut counts = vec![0usize; max_k + 1];
    for s in &trace.states {
        counts[s.k] += 1;
    }
    let m = T::of(trace.n_kept() as f64);
    let pmf: Vec<(usize, T)> = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(k, &c)| (k, T::of(c as f64) / m))
        .collect();
    let mean: T = pmf.iter().map(|&(k, p)| T::of(k as f64) * p).sum();
    let second: T = pmf.iter().map(|&(k, p)| T::of((k * k) as f64) * p).sum();
    Ok(KSummary { pmf, mean, var: second - mean * mean })
}

/// Adjusted Rand index between two labelings.
pub fn adjusted_rand_index(a: &[u32], b: &[u32]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let ka = a.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
    let kb = b.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
    let mut table = vec![0u64; ka * kb];
    let mut row = vec![0u64; ka];
    let mut col = vec![0u64; kb];
    for i in 0..n {
        table[a[i] as usize * kb + b[i] as usize] += 1;
        row[a[i] as usize] += 1;
        col[b[i] as usize] += 1;
    }
    let c2 = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;
    let sum_cells: f64 = table.iter().map(|&x| c2(x)).sum();
    let sum_row: f64 = row.iter().map(|&x| c2(x)).sum();
    let sum_col: f64 = col.iter().map(|&x| c2(x)).sum();
    let total = c2(n as u64);
    let expected = sum_row * sum_col / total;
    let max_index = 0.5 * (sum_row + sum_col);
    if (max_index - expected).abs() < 1e-12 {
        return 1.0;
    }
    (sum_cells - expected) / (max_index - expected)
}
