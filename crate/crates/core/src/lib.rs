//! Repulsive Gaussian mixture models whose component locations follow a
//! determinantal point process prior defined through a spectral density.
//!
//! The crate provides:
//!
//! * [`spectral`]: power exponential, Whittle-Matern and generalized Cauchy
//!   spectral density families with their existence bounds;
//! * [`dpp`]: the truncated-Fourier approximation of the DPP density on a
//!   compact window, its normalizing constant, kernel evaluations and the
//!   point-count law;
//! * [`model`]: parameter states, hyperparameters, the shifted-gamma prior on
//!   the repulsion parameter, and invariant checking;
//! * [`sampler`]: reversible-jump Gibbs samplers for the plain mixture
//!   ([`sampler::nocov`]) and the covariate-dependent mixture-of-experts
//!   variant ([`sampler::cov`]);
//! * [`analysis`]: Binder-loss clustering, LPML/CPO, MSE, predictive density
//!   bands and posterior-K summaries.
//!
//! All numerics are generic over the scalar type through [`Real`]
//! (`f64` or `f32`); the aliases below pin the common choices.

pub mod analysis;
pub mod datasets;
pub mod dpp;
pub mod error;
pub mod linalg;
pub mod model;
pub mod real;
pub mod sampler;
pub mod special;
pub mod spectral;
pub mod stats;
pub mod trace;

pub use error::{Error, Result};
pub use real::Real;

pub type SpectralModel64 = spectral::SpectralModel<f64>;
pub type SpectralModel32 = spectral::SpectralModel<f32>;
pub type DppWindow64 = dpp::DppWindow<f64>;
pub type DppWindow32 = dpp::DppWindow<f32>;
pub type Rect64 = dpp::Rect<f64>;
pub type Hyperparams64 = model::Hyperparams<f64>;
pub type CovHyperparams64 = model::CovHyperparams<f64>;
pub type MixtureState64 = model::MixtureState<f64>;
pub type CovMixtureState64 = model::CovMixtureState<f64>;
pub type CovDataset64 = model::CovDataset<f64>;
pub type Trace64 = trace::Trace<f64>;
pub type SpectralConfig64 = sampler::SpectralConfig<f64>;
pub type WindowPolicy64 = sampler::WindowPolicy<f64>;
