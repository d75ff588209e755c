//! Approximate determinantal point process density on a compact rectangle.
//!
//! The process is defined on the unit cube S = [-1/2, 1/2]^d through the
//! truncated Fourier expansion of the transformed kernel,
//!
//!   C~(x, y) = sum_{k in Z_N^d} [phi(k)/(1 - phi(k))] cos(2 pi k . (x - y)),
//!   D_app    = sum_{k in Z_N^d} log(1 + phi(k)/(1 - phi(k))),
//!
//! and pulled back to an arbitrary rectangle R by the affine map T with
//! T(R) = S, which contributes |R|^{-n} e^{|R| - |S|} to the density.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, Cholesky, Mat};
use crate::real::Real;

/// Axis-aligned rectangle with nondegenerate sides.
#[derive(Clone, Debug, PartialEq)]
pub struct Rect<T> {
    lo: Vec<T>,
    hi: Vec<T>,
}

impl<T: Real> Rect<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::InvalidParameter("rectangle needs matching lo/hi".into()));
        }
        for (l, h) in lo.iter().zip(&hi) {
            if !(l < h) || !l.is_finite() || !h.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "rectangle side [{l}, {h}] is degenerate"
                )));
            }
        }
        Ok(Rect { lo, hi })
    }

    pub fn interval(lo: T, hi: T) -> Result<Self> {
        Rect::new(vec![lo], vec![hi])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[T] {
        &self.lo
    }

    pub fn hi(&self) -> &[T] {
        &self.hi
    }

    pub fn volume(&self) -> T {
        self.lo
            .iter()
            .zip(&self.hi)
            .fold(T::one(), |acc, (&l, &h)| acc * (h - l))
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&v, (&l, &h))| v >= l && v <= h)
    }

    pub fn contains1(&self, x: T) -> bool {
        self.dim() == 1 && x >= self.lo[0] && x <= self.hi[0]
    }

    /// Affine map onto the unit cube [-1/2, 1/2]^d.
    pub fn to_unit(&self, x: &[T]) -> Vec<T> {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&v, (&l, &h))| (v - l) / (h - l) - T::of(0.5))
            .collect()
    }

    pub fn to_unit1(&self, x: T) -> T {
        (x - self.lo[0]) / (self.hi[0] - self.lo[0]) - T::of(0.5)
    }

    pub fn center(&self) -> Vec<T> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| (l + h) * T::of(0.5))
            .collect()
    }
}

/// Closed-form and conditional moments of the point count N(S).
#[derive(Clone, Copy, Debug)]
pub struct CountMoments<T> {
    pub mean: T,
    pub var: T,
    pub p_zero: T,
    /// Moments conditional on N >= 1 (the mixture-prior convention).
    pub cond_mean: T,
    pub cond_var: T,
}

/// Spectral values cached on the truncated lattice Z_N^d, plus everything the
/// windowed density needs. Immutable after construction.
#[derive(Clone, Debug)]
pub struct DppWindow<T> {
    rect: Rect<T>,
    n_trunc: usize,
    dim: usize,
    /// phi on the flattened lattice; coordinate k_j ranges -N..=N, row-major.
    phi: Vec<T>,
    /// phi/(1-phi), aligned with `phi`.
    odds: Vec<T>,
    d_app: T,
    /// d = 1 fast path: odds at k = 0..=N.
    odds_half: Vec<T>,
}

impl<T: Real> DppWindow<T> {
    /// Cache phi over the lattice and compute D_app.
    pub fn build(model: &crate::spectral::SpectralModel<T>, rect: Rect<T>, n_trunc: usize) -> Result<Self> {
        model.validate()?;
        if model.d != rect.dim() {
            return Err(Error::InvalidParameter(format!(
                "model dimension {} != rectangle dimension {}",
                model.d,
                rect.dim()
            )));
        }
        if n_trunc == 0 {
            return Err(Error::InvalidParameter("truncation order must be >= 1".into()));
        }
        let dim = rect.dim();
        let side = 2 * n_trunc + 1;
        let total = side.pow(dim as u32);
        let mut phi = Vec::with_capacity(total);
        let mut k = vec![0i64; dim];
        let mut x = vec![T::zero(); dim];
        for idx in 0..total {
            lattice_point(idx, n_trunc, dim, &mut k);
            for (xj, &kj) in x.iter_mut().zip(&k) {
                *xj = T::of(kj as f64);
            }
            phi.push(model.phi(&x));
        }
        Self::from_phi_values(rect, n_trunc, phi)
    }

    /// Construct from raw spectral values on the lattice (length (2N+1)^d),
    /// e.g. for custom spectral models.
    pub fn from_phi_values(rect: Rect<T>, n_trunc: usize, phi: Vec<T>) -> Result<Self> {
        let dim = rect.dim();
        let side = 2 * n_trunc + 1;
        if phi.len() != side.pow(dim as u32) {
            return Err(Error::InvalidParameter(format!(
                "expected {} spectral values, got {}",
                side.pow(dim as u32),
                phi.len()
            )));
        }
        let mut odds = Vec::with_capacity(phi.len());
        let mut d_app = T::zero();
        let mut k = vec![0i64; dim];
        for (idx, &p) in phi.iter().enumerate() {
            if !(p >= T::zero() && p < T::one()) {
                lattice_point(idx, n_trunc, dim, &mut k);
                return Err(Error::ExistenceViolation(format!("{k:?}"), p.to_f64()));
            }
            let o = p / (T::one() - p);
            d_app += o.ln_1p();
            odds.push(o);
        }
        let odds_half = if dim == 1 {
            (0..=n_trunc).map(|k| odds[n_trunc + k]).collect()
        } else {
            Vec::new()
        };
        Ok(DppWindow { rect, n_trunc, dim, phi, odds, d_app, odds_half })
    }

    pub fn rect(&self) -> &Rect<T> {
        &self.rect
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_trunc(&self) -> usize {
        self.n_trunc
    }

    pub fn d_app(&self) -> T {
        self.d_app
    }

    pub fn phi_at(&self, k: &[i64]) -> T {
        self.phi[self.lattice_index(k)]
    }

    fn lattice_index(&self, k: &[i64]) -> usize {
        assert_eq!(k.len(), self.dim);
        let n = self.n_trunc as i64;
        let side = 2 * self.n_trunc + 1;
        let mut idx = 0usize;
        for &kj in k {
            assert!(kj >= -n && kj <= n, "lattice point out of range");
            idx = idx * side + (kj + n) as usize;
        }
        idx
    }

    /// Kernel value C~_app,0(t) for a displacement t between unit-cube points.
    pub fn c_app(&self, t: &[T]) -> T {
        assert_eq!(t.len(), self.dim);
        if self.dim == 1 {
            return self.c_app1(t[0]);
        }
        let mut k = vec![0i64; self.dim];
        let two_pi = T::of(2.0) * T::pi();
        let mut acc = T::zero();
        for (idx, &o) in self.odds.iter().enumerate() {
            if o == T::zero() {
                continue;
            }
            lattice_point(idx, self.n_trunc, self.dim, &mut k);
            let ang = k
                .iter()
                .zip(t)
                .fold(T::zero(), |a, (&kj, &tj)| a + T::of(kj as f64) * tj);
            acc += o * (two_pi * ang).cos();
        }
        acc
    }

    /// d = 1 kernel evaluation via the Chebyshev recurrence for cos(k theta).
    pub fn c_app1(&self, t: T) -> T {
        debug_assert_eq!(self.dim, 1);
        let theta = T::of(2.0) * T::pi() * t;
        let c1 = theta.cos();
        let two_c1 = T::of(2.0) * c1;
        let mut acc = self.odds_half[0];
        let mut prev = T::one();
        let mut cur = c1;
        for &o in &self.odds_half[1..] {
            acc += T::of(2.0) * o * cur;
            let next = two_c1 * cur - prev;
            prev = cur;
            cur = next;
        }
        acc
    }

    /// Kernel matrix [C~](x_1..x_n) for unit-cube points (d = 1).
    pub fn kernel_matrix(&self, pts: &[T]) -> Mat<T> {
        Mat::from_fn(pts.len(), pts.len(), |i, j| self.c_app1(pts[i] - pts[j]))
    }

    pub fn kernel_matrix_excluding(&self, pts: &[T], skip: usize) -> Mat<T> {
        let others: Vec<T> = pts
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != skip)
            .map(|(_, &v)| v)
            .collect();
        self.kernel_matrix(&others)
    }

    /// b = C~(val, mu_{-skip}) for d = 1.
    pub fn cross_vector(&self, pts: &[T], skip: usize, val: T) -> Vec<T> {
        pts.iter()
            .enumerate()
            .filter(|(i, _)| *i != skip)
            .map(|(_, &v)| self.c_app1(val - v))
            .collect()
    }

    /// log det [C~](pts); `None` when the matrix is not numerically positive
    /// definite (density 0).
    pub fn log_det_kernel(&self, pts: &[T]) -> Option<T> {
        linalg::sym_log_det(&self.kernel_matrix(pts))
    }

    /// Schur complement C~(x_k, x_k) - b C~_{-k}^{-1} b^T of the kernel matrix
    /// at component `k` (d = 1). `None` when C~_{-k} is not positive definite.
    pub fn schur_factor(&self, pts: &[T], k: usize) -> Option<T> {
        let c0 = self.c_app1(T::zero());
        if pts.len() == 1 {
            return Some(c0);
        }
        let minor = self.kernel_matrix_excluding(pts, k);
        let chol = Cholesky::new(&minor)?;
        let b = self.cross_vector(pts, k, pts[k]);
        Some(c0 - chol.inv_quad_form(&b, &b))
    }

    /// Log density w.r.t. the unit-rate Poisson process on S = [-1/2,1/2]^d:
    /// |S| - D_app + log det [C~](pts). The empty configuration has density 0
    /// (-inf), as does any configuration whose kernel matrix fails to be
    /// positive definite.
    pub fn log_density_unit(&self, pts: &[T]) -> Result<T> {
        assert_eq!(self.dim, 1, "use log_density_unit_nd for d > 1");
        let half = T::of(0.5);
        if pts.iter().any(|&p| p < -half || p > half) {
            return Err(Error::PointOutsideWindow);
        }
        if pts.is_empty() {
            return Ok(T::neg_infinity());
        }
        Ok(match self.log_det_kernel(pts) {
            Some(ld) => T::one() - self.d_app + ld,
            None => T::neg_infinity(),
        })
    }

    /// General-d version; `pts` is row-major n x d.
    pub fn log_density_unit_nd(&self, pts: &[T], n: usize) -> Result<T> {
        let d = self.dim;
        assert_eq!(pts.len(), n * d);
        let half = T::of(0.5);
        if pts.iter().any(|&p| p < -half || p > half) {
            return Err(Error::PointOutsideWindow);
        }
        if n == 0 {
            return Ok(T::neg_infinity());
        }
        let m = Mat::from_fn(n, n, |i, j| {
            let t: Vec<T> = (0..d).map(|c| pts[i * d + c] - pts[j * d + c]).collect();
            self.c_app(&t)
        });
        Ok(match linalg::sym_log_det(&m) {
            Some(ld) => T::one() - self.d_app + ld,
            None => T::neg_infinity(),
        })
    }

    /// Log density on the rectangle R:
    /// -n log|R| + (|R| - |S|) + log_density_unit(T(pts)).
    pub fn log_density_rect(&self, pts: &[T]) -> Result<T> {
        assert_eq!(self.dim, 1, "use log_density_rect_nd for d > 1");
        if pts.iter().any(|&p| !self.rect.contains1(p)) {
            return Err(Error::PointOutsideWindow);
        }
        let unit: Vec<T> = pts.iter().map(|&p| self.rect.to_unit1(p)).collect();
        let vol = self.rect.volume();
        let n = T::of(pts.len() as f64);
        Ok(-n * vol.ln() + (vol - T::one()) + self.log_density_unit(&unit)?)
    }

    pub fn log_density_rect_nd(&self, pts: &[T], n: usize) -> Result<T> {
        let d = self.dim;
        assert_eq!(pts.len(), n * d);
        let mut unit = Vec::with_capacity(pts.len());
        for i in 0..n {
            let row = &pts[i * d..(i + 1) * d];
            if !self.rect.contains(row) {
                return Err(Error::PointOutsideWindow);
            }
            unit.extend(self.rect.to_unit(row));
        }
        let vol = self.rect.volume();
        let nn = T::of(n as f64);
        Ok(-nn * vol.ln() + (vol - T::one()) + self.log_density_unit_nd(&unit, n)?)
    }

    /// One draw of the point count, conditioned on at least one point: the sum
    /// of independent Bernoulli(phi(k)) over the lattice, rejection-resampled
    /// while zero.
    pub fn prior_count_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        if self.phi.iter().all(|&p| p == T::zero()) {
            return Err(Error::DegeneratePrior);
        }
        loop {
            let mut n = 0usize;
            for &p in &self.phi {
                if p > T::zero() && T::sample_unit(rng) < p {
                    n += 1;
                }
            }
            if n >= 1 {
                return Ok(n);
            }
        }
    }

    /// Closed-form unconditional moments of N(S), plus the moments conditional
    /// on N >= 1 obtained from them.
    pub fn prior_count_moments(&self) -> CountMoments<T> {
        let mean: T = self.phi.iter().cloned().sum();
        let var: T = self.phi.iter().map(|&p| p * (T::one() - p)).sum();
        let p_zero = self
            .phi
            .iter()
            .fold(T::zero(), |acc, &p| acc + (T::one() - p).ln())
            .exp();
        let p_pos = T::one() - p_zero;
        let (cond_mean, cond_var) = if p_pos > T::zero() {
            let m1 = mean / p_pos;
            let m2 = (var + mean * mean) / p_pos;
            (m1, m2 - m1 * m1)
        } else {
            (T::nan(), T::nan())
        };
        CountMoments { mean, var, p_zero, cond_mean, cond_var }
    }

    /// Exact unconditional pmf of N(S) for k = 0..=k_max (Poisson-binomial
    /// over the cached spectral values, by direct convolution).
    pub fn count_pmf(&self, k_max: usize) -> Vec<T> {
        let mut pmf = vec![T::zero(); k_max + 2];
        pmf[0] = T::one();
        for &p in &self.phi {
            if p == T::zero() {
                continue;
            }
            for k in (0..=k_max.min(pmf.len() - 2)).rev() {
                let move_up = pmf[k] * p;
                pmf[k + 1] += move_up;
                pmf[k] -= move_up;
            }
        }
        pmf.truncate(k_max + 1);
        pmf
    }
}

fn lattice_point(idx: usize, n_trunc: usize, dim: usize, out: &mut [i64]) {
    let side = 2 * n_trunc + 1;
    let mut rem = idx;
    for j in (0..dim).rev() {
        out[j] = (rem % side) as i64 - n_trunc as i64;
        rem /= side;
    }
}
