//! Parameter states, hyperparameter containers and prior evaluators for the
//! two mixture models.

use crate::dpp::DppWindow;
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Mat};
use crate::real::Real;
use crate::spectral::m_threshold;
use crate::stats;

/// Prior on the spectral shape parameter.
#[derive(Clone, Debug)]
pub enum NuSpec<T> {
    Fixed(T),
    /// Uniform over a finite support set.
    Discrete(Vec<T>),
}

impl<T: Real> NuSpec<T> {
    pub fn validate(&self) -> Result<()> {
        match self {
            NuSpec::Fixed(v) => {
                if !(*v > T::zero()) {
                    return Err(Error::Config(format!("nu must be > 0, got {v}")));
                }
            }
            NuSpec::Discrete(vs) => {
                if vs.is_empty() {
                    return Err(Error::Config("discrete nu support is empty".into()));
                }
                if vs.iter().any(|v| !(*v > T::zero())) {
                    return Err(Error::Config("discrete nu support must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

/// Hyperparameters of the no-covariate model.
#[derive(Clone, Debug)]
pub struct Hyperparams<T> {
    /// Dirichlet concentration for the weights.
    pub delta: T,
    /// Inverse-gamma shape/scale for the component variances.
    pub a0: T,
    pub b0: T,
    /// Gamma shape/rate for rho0 in rho = offset + rho0.
    pub a_rho: T,
    pub b_rho: T,
    /// Threshold defining the offset M(s, epsilon, nu).
    pub epsilon: T,
    /// Spectral ceiling (power exponential).
    pub s: T,
    pub nu_spec: NuSpec<T>,
}

impl<T: Real> Default for Hyperparams<T> {
    fn default() -> Self {
        Hyperparams {
            delta: T::one(),
            a0: T::of(3.0),
            b0: T::of(3.0),
            a_rho: T::one(),
            b_rho: T::one(),
            epsilon: T::of(0.05),
            s: T::of(0.5),
            nu_spec: NuSpec::Fixed(T::of(2.0)),
        }
    }
}

impl<T: Real> Hyperparams<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("delta", self.delta),
            ("a0", self.a0),
            ("b0", self.b0),
            ("a_rho", self.a_rho),
            ("b_rho", self.b_rho),
        ] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.s > T::zero() && self.s < T::one()) {
            return Err(Error::Config(format!("s must lie in (0,1), got {}", self.s)));
        }
        if !(self.epsilon > T::zero() && self.epsilon < self.s) {
            return Err(Error::Config(format!(
                "epsilon must lie in (0, s), got epsilon = {}, s = {}",
                self.epsilon, self.s
            )));
        }
        self.nu_spec.validate()
    }

    /// Support offset of the rho prior for a given nu.
    pub fn rho_offset(&self, nu: T) -> T {
        m_threshold(self.s, self.epsilon, nu).expect("validated hyperparameters")
    }
}

/// Log density of the shifted-gamma prior on rho given nu; -inf at or below
/// the offset.
pub fn log_prior_rho<T: Real>(rho: T, nu: T, hyper: &Hyperparams<T>) -> T {
    let offset = hyper.rho_offset(nu);
    if rho <= offset {
        return T::neg_infinity();
    }
    stats::ln_gamma_pdf(rho - offset, hyper.a_rho, hyper.b_rho)
}

/// Full parameter snapshot of the no-covariate chain.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureState<T> {
    pub k: usize,
    pub mu: Vec<T>,
    pub sigma2: Vec<T>,
    pub w: Vec<T>,
    /// Cluster assignments, 0-based, one per observation.
    pub labels: Vec<usize>,
    pub rho: T,
    pub nu: T,
}

impl<T: Real> MixtureState<T> {
    pub fn cluster_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.k];
        for &s in &self.labels {
            counts[s] += 1;
        }
        counts
    }

    pub fn mixture_log_lik(&self, data: &[T]) -> T {
        data.iter()
            .map(|&y| stats::ln_mixture_density(y, &self.w, &self.mu, &self.sigma2))
            .sum()
    }
}

/// A single machine-readable invariant violation.
#[derive(Clone, Debug)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl Violation {
    fn new(field: &'static str, message: String) -> Self {
        Violation { field, message }
    }
}

/// Check every type invariant of a no-covariate state; empty result means ok.
/// `rho_prior_active` is false when rho is a fixed override (the shifted-gamma
/// support constraint then does not apply).
pub fn validate_state<T: Real>(
    state: &MixtureState<T>,
    hyper: &Hyperparams<T>,
    window: &DppWindow<T>,
    rho_prior_active: bool,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let k = state.k;
    if k == 0 {
        out.push(Violation::new("k", "state must have at least one component".into()));
        return out;
    }
    for (name, len) in [("mu", state.mu.len()), ("sigma2", state.sigma2.len()), ("w", state.w.len())] {
        if len != k {
            out.push(Violation::new(name, format!("length {len} != K = {k}")));
        }
    }
    if out.iter().any(|v| v.field == "mu" || v.field == "sigma2" || v.field == "w") {
        return out;
    }
    let sum_w: T = state.w.iter().cloned().sum();
    let tol = T::of(1e-12).max(T::epsilon() * T::of(16.0 * k as f64));
    if (sum_w - T::one()).abs() > tol {
        out.push(Violation::new("w", format!("weights sum to {sum_w}, not 1")));
    }
    if state.w.iter().any(|&wi| !(wi >= T::zero())) {
        out.push(Violation::new("w", "negative weight".into()));
    }
    for (i, &v) in state.sigma2.iter().enumerate() {
        if !(v > T::zero()) || !v.is_finite() {
            out.push(Violation::new("sigma2", format!("sigma2[{i}] = {v} is not positive")));
        }
    }
    for (i, &m) in state.mu.iter().enumerate() {
        if !window.rect().contains1(m) {
            out.push(Violation::new("mu", format!("mu[{i}] = {m} lies outside the window")));
        }
    }
    for (i, &s) in state.labels.iter().enumerate() {
        if s >= k {
            out.push(Violation::new("labels", format!("label[{i}] = {s} exceeds K-1")));
        }
    }
    if !(state.nu > T::zero()) {
        out.push(Violation::new("nu", format!("nu = {} is not positive", state.nu)));
    } else if rho_prior_active {
        let offset = hyper.rho_offset(state.nu);
        if !(state.rho > offset) {
            out.push(Violation::new(
                "rho",
                format!("rho = {} is not above the prior offset {offset}", state.rho),
            ));
        }
    } else if !(state.rho > T::zero()) {
        out.push(Violation::new("rho", format!("rho = {} is not positive", state.rho)));
    }
    out
}

/// Hyperparameters of the covariate-dependent model. The gating coefficients
/// get the g-prior N_p(beta0, phi_g (X^T X)^{-1}); the regression block gets a
/// normal-inverse-gamma prior with gamma0 = 0.
#[derive(Clone, Debug)]
pub struct CovHyperparams<T> {
    pub a0: T,
    pub b0: T,
    pub a_rho: T,
    pub b_rho: T,
    pub epsilon: T,
    pub s: T,
    /// g-prior scale.
    pub phi_g: T,
    pub beta0: Vec<T>,
    /// Must be the zero vector (the conjugate block assumes it).
    pub gamma0: Vec<T>,
    pub lambda0: Mat<T>,
    /// Auxiliary split-model prior covariance scale matrix, (p+1) x (p+1).
    pub big_gamma0: Mat<T>,
    pub xi0: T,
    pub nu0: T,
    /// Random-walk variance of the gating-coefficient proposal.
    pub zeta: T,
}

impl<T: Real> CovHyperparams<T> {
    /// Defaults for `p` covariates: beta0 = gamma0 = 0, Lambda0 = I,
    /// Gamma0 = 10 I, xi0 = a0, nu0 = b0.
    pub fn defaults(p: usize) -> Self {
        CovHyperparams {
            a0: T::of(3.0),
            b0: T::of(3.0),
            a_rho: T::one(),
            b_rho: T::one(),
            epsilon: T::of(0.05),
            s: T::of(0.5),
            phi_g: T::of(100.0),
            beta0: vec![T::zero(); p],
            gamma0: vec![T::zero(); p],
            lambda0: Mat::identity(p),
            big_gamma0: {
                let mut g = Mat::identity(p + 1);
                g.scale(T::of(10.0));
                g
            },
            xi0: T::of(3.0),
            nu0: T::of(3.0),
            zeta: T::of(0.1),
        }
    }

    pub fn p(&self) -> usize {
        self.beta0.len()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("a0", self.a0),
            ("b0", self.b0),
            ("a_rho", self.a_rho),
            ("b_rho", self.b_rho),
            ("phi_g", self.phi_g),
            ("xi0", self.xi0),
            ("nu0", self.nu0),
            ("zeta", self.zeta),
        ] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.s > T::zero() && self.s < T::one()) {
            return Err(Error::Config(format!("s must lie in (0,1), got {}", self.s)));
        }
        if !(self.epsilon > T::zero() && self.epsilon < self.s) {
            return Err(Error::Config("epsilon must lie in (0, s)".into()));
        }
        let p = self.p();
        if self.gamma0.len() != p {
            return Err(Error::Config("gamma0 dimension mismatch".into()));
        }
        if self.gamma0.iter().any(|g| *g != T::zero()) {
            return Err(Error::Config(
                "the conjugate regression block requires gamma0 = 0".into(),
            ));
        }
        if self.lambda0.n_rows() != p || self.lambda0.n_cols() != p {
            return Err(Error::Config("Lambda0 must be p x p".into()));
        }
        if Cholesky::new(&self.lambda0).is_none() {
            return Err(Error::Config("Lambda0 must be positive definite".into()));
        }
        if self.big_gamma0.n_rows() != p + 1 || self.big_gamma0.n_cols() != p + 1 {
            return Err(Error::Config("Gamma0 must be (p+1) x (p+1)".into()));
        }
        if Cholesky::new(&self.big_gamma0).is_none() {
            return Err(Error::Config("Gamma0 must be positive definite".into()));
        }
        Ok(())
    }

    pub fn rho_offset(&self, nu: T) -> T {
        m_threshold(self.s, self.epsilon, nu).expect("validated hyperparameters")
    }
}

/// Covariate data: responses plus an n x p design matrix.
#[derive(Clone, Debug)]
pub struct CovDataset<T> {
    y: Vec<T>,
    x: Mat<T>,
    names: Vec<String>,
}

impl<T: Real> CovDataset<T> {
    pub fn new(y: Vec<T>, x: Mat<T>, names: Vec<String>) -> Result<Self> {
        if x.n_rows() != y.len() {
            return Err(Error::Data(format!(
                "design matrix has {} rows but {} responses",
                x.n_rows(),
                y.len()
            )));
        }
        if names.len() != x.n_cols() {
            return Err(Error::Data("column name count mismatch".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite response".into()));
        }
        for i in 0..x.n_rows() {
            if x.row(i).iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("non-finite covariate in row {i}")));
            }
        }
        let ds = CovDataset { y, x, names };
        ds.xtx_cholesky()?;
        Ok(ds)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.n_cols()
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn x(&self) -> &Mat<T> {
        &self.x
    }

    pub fn x_row(&self, i: usize) -> &[T] {
        self.x.row(i)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn xtx(&self) -> Mat<T> {
        let p = self.p();
        let mut m = Mat::zeros(p, p);
        for i in 0..self.n() {
            m.add_outer(self.x.row(i), T::one());
        }
        m
    }

    /// Cholesky of X^T X; the g-prior needs it invertible.
    pub fn xtx_cholesky(&self) -> Result<Cholesky<T>> {
        Cholesky::new(&self.xtx())
            .ok_or_else(|| Error::Data("X^T X is singular; the g-prior is undefined".into()))
    }
}

/// Full parameter snapshot of the covariate chain. `nu` is fixed at 2.
#[derive(Clone, Debug, PartialEq)]
pub struct CovMixtureState<T> {
    pub k: usize,
    pub mu: Vec<T>,
    pub sigma2: Vec<T>,
    /// Per-component regression coefficients (p each).
    pub gamma: Vec<Vec<T>>,
    /// Per-component gating coefficients (p each); beta[0] is pinned to 0.
    pub beta: Vec<Vec<T>>,
    pub labels: Vec<usize>,
    pub rho: T,
}

impl<T: Real> CovMixtureState<T> {
    pub const NU: f64 = 2.0;

    pub fn cluster_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.k];
        for &s in &self.labels {
            counts[s] += 1;
        }
        counts
    }

    pub fn cluster_items(&self, c: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == c).collect()
    }
}

/// Check every type invariant of a covariate state.
pub fn validate_cov_state<T: Real>(
    state: &CovMixtureState<T>,
    hyper: &CovHyperparams<T>,
    window: &DppWindow<T>,
    rho_prior_active: bool,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let k = state.k;
    if k == 0 {
        out.push(Violation::new("k", "state must have at least one component".into()));
        return out;
    }
    for (name, len) in [
        ("mu", state.mu.len()),
        ("sigma2", state.sigma2.len()),
        ("gamma", state.gamma.len()),
        ("beta", state.beta.len()),
    ] {
        if len != k {
            out.push(Violation::new(name, format!("length {len} != K = {k}")));
        }
    }
    if !out.is_empty() {
        return out;
    }
    if state.beta[0].iter().any(|b| *b != T::zero()) {
        out.push(Violation::new("beta", "beta[1] must be exactly the zero vector".into()));
    }
    let p = hyper.p();
    for (name, vecs) in [("gamma", &state.gamma), ("beta", &state.beta)] {
        for (i, v) in vecs.iter().enumerate() {
            if v.len() != p {
                out.push(Violation::new(name, format!("{name}[{i}] has dimension {} != p = {p}", v.len())));
            }
        }
    }
    for (i, &v) in state.sigma2.iter().enumerate() {
        if !(v > T::zero()) || !v.is_finite() {
            out.push(Violation::new("sigma2", format!("sigma2[{i}] = {v} is not positive")));
        }
    }
    for (i, &m) in state.mu.iter().enumerate() {
        if !window.rect().contains1(m) {
            out.push(Violation::new("mu", format!("mu[{i}] = {m} lies outside the window")));
        }
    }
    for (i, &s) in state.labels.iter().enumerate() {
        if s >= k {
            out.push(Violation::new("labels", format!("label[{i}] = {s} exceeds K-1")));
        }
    }
    if rho_prior_active {
        let offset = hyper.rho_offset(T::of(CovMixtureState::<T>::NU));
        if !(state.rho > offset) {
            out.push(Violation::new(
                "rho",
                format!("rho = {} is not above the prior offset {offset}", state.rho),
            ));
        }
    } else if !(state.rho > T::zero()) {
        out.push(Violation::new("rho", format!("rho = {} is not positive", state.rho)));
    }
    out
}
