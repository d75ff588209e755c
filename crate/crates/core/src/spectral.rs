//! Parametric spectral densities driving the determinantal point process
//! prior. All three families are parameterized so that `rho` is the process
//! intensity (the spectral density integrates to `rho`), which is the
//! parameterization the repulsion prior on `rho` is built around.
//!
//! Families:
//! * power exponential: phi(x) = s^d exp(-(a ||x||)^nu) with
//!   a = s (pi^{d/2} Gamma(d/nu+1) / (rho Gamma(d/2+1)))^{1/d}; phi(0) = s^d < 1
//!   for every rho, so the windowed density always exists.
//! * Whittle-Matern: phi(x) = rho Gamma(nu+d/2)(2 a sqrt(pi))^d / Gamma(nu) *
//!   (1+||2 pi a x||^2)^{-(nu+d/2)}; requires rho < a^{-d} M.
//! * generalized Cauchy: phi(x) = rho 2^{1-nu}(sqrt(pi) a)^d / Gamma(nu+d/2) *
//!   ||2 pi a x||^nu K_nu(||2 pi a x||); requires rho < a^{-d} M.

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpectralFamily {
    PowerExponential,
    WhittleMatern,
    GeneralizedCauchy,
}

impl SpectralFamily {
    pub fn name(self) -> &'static str {
        match self {
            SpectralFamily::PowerExponential => "power-exponential",
            SpectralFamily::WhittleMatern => "whittle-matern",
            SpectralFamily::GeneralizedCauchy => "generalized-cauchy",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SpectralModel<T> {
    pub family: SpectralFamily,
    /// Ambient dimension (1 for the mixture models).
    pub d: usize,
    /// Intensity / repulsion parameter.
    pub rho: T,
    /// Shape parameter.
    pub nu: T,
    /// Spectral ceiling in (0,1); power exponential only.
    pub s: T,
    /// Scale; Whittle-Matern and generalized Cauchy only.
    pub alpha: T,
}

impl<T: Real> SpectralModel<T> {
    pub fn power_exponential(d: usize, s: T, rho: T, nu: T) -> Self {
        SpectralModel { family: SpectralFamily::PowerExponential, d, rho, nu, s, alpha: T::one() }
    }

    pub fn whittle_matern(d: usize, alpha: T, rho: T, nu: T) -> Self {
        SpectralModel { family: SpectralFamily::WhittleMatern, d, rho, nu, s: T::of(0.5), alpha }
    }

    pub fn generalized_cauchy(d: usize, alpha: T, rho: T, nu: T) -> Self {
        SpectralModel { family: SpectralFamily::GeneralizedCauchy, d, rho, nu, s: T::of(0.5), alpha }
    }

    pub fn with_rho_nu(&self, rho: T, nu: T) -> Self {
        let mut m = self.clone();
        m.rho = rho;
        m.nu = nu;
        m
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidParameter("dimension d must be >= 1".into()));
        }
        if !(self.rho > T::zero()) || !self.rho.is_finite() {
            return Err(Error::InvalidParameter(format!("rho must be > 0, got {}", self.rho)));
        }
        if !(self.nu > T::zero()) || !self.nu.is_finite() {
            return Err(Error::InvalidParameter(format!("nu must be > 0, got {}", self.nu)));
        }
        match self.family {
            SpectralFamily::PowerExponential => {
                if !(self.s > T::zero() && self.s < T::one()) {
                    return Err(Error::InvalidParameter(format!(
                        "spectral ceiling s must lie in (0,1), got {}",
                        self.s
                    )));
                }
            }
            SpectralFamily::WhittleMatern | SpectralFamily::GeneralizedCauchy => {
                if !(self.alpha > T::zero()) || !self.alpha.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "scale alpha must be > 0, got {}",
                        self.alpha
                    )));
                }
                let rho_max = self.rho_max().unwrap();
                if !(self.rho < rho_max) {
                    return Err(Error::InvalidParameter(format!(
                        "rho = {} must be below rho_max = {} for {}",
                        self.rho,
                        rho_max,
                        self.family.name()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Upper bound alpha^{-d} M on the intensity for the Whittle-Matern and
    /// generalized Cauchy families; `None` for power exponential (no bound).
    pub fn rho_max(&self) -> Option<T> {
        let d = T::of(self.d as f64);
        let half_d = d * T::of(0.5);
        match self.family {
            SpectralFamily::PowerExponential => None,
            SpectralFamily::WhittleMatern => {
                // M = Gamma(nu) / (2^d pi^{d/2} Gamma(nu + d/2))
                let ln_m = self.nu.ln_gamma()
                    - d * T::of(2.0f64.ln())
                    - half_d * T::pi().ln()
                    - (self.nu + half_d).ln_gamma();
                Some(self.alpha.powf(-d) * ln_m.exp())
            }
            SpectralFamily::GeneralizedCauchy => {
                // M = Gamma(nu + d/2) / (Gamma(nu) pi^{d/2})
                let ln_m = (self.nu + half_d).ln_gamma() - self.nu.ln_gamma() - half_d * T::pi().ln();
                Some(self.alpha.powf(-d) * ln_m.exp())
            }
        }
    }

    /// Evaluate the spectral density at a frequency vector.
    pub fn phi(&self, x: &[T]) -> T {
        debug_assert_eq!(x.len(), self.d);
        let r = x.iter().map(|&v| v * v).sum::<T>().sqrt();
        self.phi_radial(r)
    }

    /// Evaluate at radius `r = ||x||`.
    pub fn phi_radial(&self, r: T) -> T {
        let d = T::of(self.d as f64);
        let half_d = d * T::of(0.5);
        match self.family {
            SpectralFamily::PowerExponential => {
                let a = self.pes_inverse_scale();
                self.s.powf(d) * (-((a * r).powf(self.nu))).exp()
            }
            SpectralFamily::WhittleMatern => {
                let z = T::of(2.0) * T::pi() * self.alpha * r;
                let ln_pref = self.rho.ln()
                    + (self.nu + half_d).ln_gamma()
                    - self.nu.ln_gamma()
                    + d * (T::of(2.0) * self.alpha * T::pi().sqrt()).ln();
                (ln_pref - (self.nu + half_d) * (T::one() + z * z).ln()).exp()
            }
            SpectralFamily::GeneralizedCauchy => {
                let z = T::of(2.0) * T::pi() * self.alpha * r;
                if z == T::zero() {
                    // z^nu K_nu(z) -> 2^{nu-1} Gamma(nu)
                    let ln0 = self.rho.ln()
                        + d * self.alpha.ln()
                        + half_d * T::pi().ln()
                        + self.nu.ln_gamma()
                        - (self.nu + half_d).ln_gamma();
                    return ln0.exp();
                }
                let ln_pref = self.rho.ln()
                    + (T::one() - self.nu) * T::of(2.0f64.ln())
                    + d * (T::pi().sqrt() * self.alpha).ln()
                    - (self.nu + half_d).ln_gamma();
                ln_pref.exp() * z.powf(self.nu) * T::bessel_k(self.nu, z)
            }
        }
    }

    /// Inverse scale of the power exponential family:
    /// s * (pi^{d/2} Gamma(d/nu+1) / (rho Gamma(d/2+1)))^{1/d}.
    fn pes_inverse_scale(&self) -> T {
        let d = T::of(self.d as f64);
        let half_d = d * T::of(0.5);
        let ln = half_d * T::pi().ln() + (d / self.nu + T::one()).ln_gamma()
            - self.rho.ln()
            - (half_d + T::one()).ln_gamma();
        self.s * (ln / d).exp()
    }
}

/// M(s, eps, nu) = 2 s Gamma(1/nu + 1) sqrt(pi) / (Gamma(3/2) log(s/eps)^{1/nu}),
/// the smallest intensity for which phi(2) > eps under the power exponential
/// family with ceiling `s` (d = 1).
pub fn m_threshold<T: Real>(s: T, epsilon: T, nu: T) -> Result<T> {
    if !(epsilon > T::zero() && epsilon < s && s < T::one()) {
        return Err(Error::InvalidParameter(format!(
            "m_threshold requires 0 < eps < s < 1, got s = {s}, eps = {epsilon}"
        )));
    }
    if !(nu > T::zero()) {
        return Err(Error::InvalidParameter(format!("m_threshold requires nu > 0, got {nu}")));
    }
    let two = T::of(2.0);
    let g32 = T::of(1.5).ln_gamma().exp();
    Ok(two * s * (T::one() / nu + T::one()).ln_gamma().exp() * T::pi().sqrt()
        / (g32 * (s / epsilon).ln().powf(T::one() / nu)))
}
