//! Reversible-jump Gibbs samplers for the two mixture models.

pub mod cov;
pub mod nocov;

use crate::dpp::Rect;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::spectral::SpectralFamily;

/// Burn-in / thinning / kept-sample schedule plus the seed.
#[derive(Clone, Copy, Debug)]
pub struct McmcSchedule {
    pub n_burnin: usize,
    pub n_thin: usize,
    pub n_keep: usize,
    pub seed: u64,
    /// Batch length of the random-walk scale adaptation (burn-in only).
    pub adapt_window: usize,
}

impl McmcSchedule {
    pub fn new(n_burnin: usize, n_thin: usize, n_keep: usize, seed: u64) -> Self {
        McmcSchedule { n_burnin, n_thin, n_keep, seed, adapt_window: 50 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_thin < 1 {
            return Err(Error::Config("thinning must be >= 1".into()));
        }
        if self.n_keep < 1 {
            return Err(Error::Config("kept sample size must be >= 1".into()));
        }
        if self.adapt_window < 1 {
            return Err(Error::Config("adaptation window must be >= 1".into()));
        }
        Ok(())
    }
}

/// Window rectangle policy for the d = 1 samplers.
#[derive(Clone, Copy, Debug)]
pub enum WindowPolicy<T> {
    Explicit { lo: T, hi: T },
    /// Data range expanded by `factor` times the span on each side.
    Expand { factor: T },
}

impl<T: Real> WindowPolicy<T> {
    pub fn resolve(&self, data: &[T]) -> Result<Rect<T>> {
        match *self {
            WindowPolicy::Explicit { lo, hi } => {
                let rect = Rect::interval(lo, hi)?;
                if let Some(bad) = data.iter().find(|&&y| !rect.contains1(y)) {
                    return Err(Error::Config(format!(
                        "window [{lo}, {hi}] does not contain the data point {bad}"
                    )));
                }
                Ok(rect)
            }
            WindowPolicy::Expand { factor } => {
                if data.is_empty() {
                    return Err(Error::Config(
                        "auto window needs data; use an explicit window for prior-only runs".into(),
                    ));
                }
                if !(factor > T::zero()) {
                    return Err(Error::Config("window expansion factor must be > 0".into()));
                }
                let lo = data.iter().cloned().fold(T::infinity(), T::min);
                let hi = data.iter().cloned().fold(T::neg_infinity(), T::max);
                let span = (hi - lo).max(T::of(1e-6));
                Rect::interval(lo - factor * span, hi + factor * span)
            }
        }
    }
}

/// Spectral family choice plus run-level overrides.
#[derive(Clone, Copy, Debug)]
pub struct SpectralConfig<T> {
    pub family: SpectralFamily,
    /// Scale for Whittle-Matern / generalized Cauchy (ignored by the power
    /// exponential family).
    pub alpha: T,
    /// Fixes rho instead of sampling it from the shifted-gamma prior.
    pub rho_fixed: Option<T>,
    /// Fourier truncation order N.
    pub trunc: usize,
}

impl<T: Real> Default for SpectralConfig<T> {
    fn default() -> Self {
        SpectralConfig {
            family: SpectralFamily::PowerExponential,
            alpha: T::one(),
            rho_fixed: None,
            trunc: 50,
        }
    }
}

impl<T: Real> SpectralConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.trunc == 0 {
            return Err(Error::Config("truncation order must be >= 1".into()));
        }
        if self.family != SpectralFamily::PowerExponential && self.rho_fixed.is_none() {
            return Err(Error::Config(
                "the shifted-gamma rho prior is defined for the power exponential family; \
                 fix rho for Whittle-Matern / generalized Cauchy"
                    .into(),
            ));
        }
        if let Some(r) = self.rho_fixed {
            if !(r > T::zero()) {
                return Err(Error::Config(format!("fixed rho must be > 0, got {r}")));
            }
        }
        Ok(())
    }
}

/// Random-walk scale adapted toward a target acceptance rate in batches,
/// frozen after burn-in.
#[derive(Clone, Debug)]
pub struct AdaptiveScale<T> {
    log_scale: T,
    target: T,
    batch_size: usize,
    in_batch: usize,
    accepted: usize,
    batches_done: usize,
    frozen: bool,
}

impl<T: Real> AdaptiveScale<T> {
    pub fn new(initial: T, batch_size: usize) -> Self {
        AdaptiveScale {
            log_scale: initial.ln(),
            target: T::of(0.234),
            batch_size: batch_size.max(1),
            in_batch: 0,
            accepted: 0,
            batches_done: 0,
            frozen: false,
        }
    }

    pub fn scale(&self) -> T {
        self.log_scale.exp()
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn record(&mut self, accepted: bool) {
        if self.frozen {
            return;
        }
        self.in_batch += 1;
        if accepted {
            self.accepted += 1;
        }
        if self.in_batch >= self.batch_size {
            self.batches_done += 1;
            let rate = T::of(self.accepted as f64 / self.in_batch as f64);
            let step = T::of(0.05).min(T::one() / T::of(self.batches_done as f64).sqrt());
            if rate > self.target {
                self.log_scale += step;
            } else {
                self.log_scale -= step;
            }
            self.in_batch = 0;
            self.accepted = 0;
        }
    }
}
