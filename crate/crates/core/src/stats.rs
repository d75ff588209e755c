//! Log densities and elementary draws shared by the samplers and the
//! posterior analysis.

use rand::Rng;

use crate::real::Real;

pub fn ln_normal_pdf<T: Real>(x: T, mean: T, var: T) -> T {
    let half = T::of(0.5);
    let two_pi = T::of(2.0) * T::pi();
    let d = x - mean;
    -half * (two_pi * var).ln() - d * d / (T::of(2.0) * var)
}

/// Inverse-gamma with shape `a` and scale `b`: b^a/Gamma(a) x^{-a-1} e^{-b/x}.
pub fn ln_inv_gamma_pdf<T: Real>(x: T, a: T, b: T) -> T {
    if x <= T::zero() {
        return T::neg_infinity();
    }
    a * b.ln() - a.ln_gamma() - (a + T::one()) * x.ln() - b / x
}

/// Gamma with shape `a` and rate `b`.
pub fn ln_gamma_pdf<T: Real>(x: T, a: T, b: T) -> T {
    if x <= T::zero() {
        return T::neg_infinity();
    }
    a * b.ln() - a.ln_gamma() + (a - T::one()) * x.ln() - b * x
}

pub fn ln_beta_pdf<T: Real>(x: T, a: T, b: T) -> T {
    if x <= T::zero() || x >= T::one() {
        return T::neg_infinity();
    }
    (a + b).ln_gamma() - a.ln_gamma() - b.ln_gamma()
        + (a - T::one()) * x.ln()
        + (b - T::one()) * (T::one() - x).ln()
}

/// Symmetric Dirichlet(delta, ..., delta) density at `w`.
pub fn ln_dirichlet_sym_pdf<T: Real>(w: &[T], delta: T) -> T {
    let k = T::of(w.len() as f64);
    let norm = (delta * k).ln_gamma() - k * delta.ln_gamma();
    norm + w.iter().map(|&wi| (delta - T::one()) * wi.ln()).sum::<T>()
}

pub fn log_sum_exp<T: Real>(vals: &[T]) -> T {
    let m = vals.iter().cloned().fold(T::neg_infinity(), T::max);
    if !m.is_finite() {
        return m;
    }
    m + vals.iter().map(|&v| (v - m).exp()).sum::<T>().ln()
}

/// Draw an index with probability proportional to exp(logits[i]), normalized
/// in log space. If every logit is -inf the draw falls back to the argmax
/// (first index on ties).
pub fn sample_categorical_logits<T: Real, R: Rng + ?Sized>(logits: &[T], rng: &mut R) -> usize {
    debug_assert!(!logits.is_empty());
    let m = logits.iter().cloned().fold(T::neg_infinity(), T::max);
    if !m.is_finite() {
        return argmax(logits);
    }
    let total: T = logits.iter().map(|&v| (v - m).exp()).sum();
    let mut u = T::sample_unit(rng) * total;
    for (i, &v) in logits.iter().enumerate() {
        u = u - (v - m).exp();
        if u <= T::zero() {
            return i;
        }
    }
    logits.len() - 1
}

pub fn argmax<T: Real>(vals: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in vals.iter().enumerate().skip(1) {
        if v > vals[best] {
            best = i;
        }
    }
    best
}

pub fn sample_inv_gamma<T: Real, R: Rng + ?Sized>(rng: &mut R, a: T, b: T) -> T {
    b / T::sample_gamma(rng, a, T::one())
}

/// Dirichlet draw with per-component concentrations, via normalized gammas.
pub fn sample_dirichlet<T: Real, R: Rng + ?Sized>(rng: &mut R, alphas: &[T]) -> Vec<T> {
    let gs: Vec<T> = alphas.iter().map(|&a| T::sample_gamma(rng, a, T::one())).collect();
    let total: T = gs.iter().cloned().sum();
    gs.into_iter().map(|g| g / total).collect()
}

/// Mixture log density sum_k w_k N(y; mu_k, sigma2_k), in log space.
pub fn ln_mixture_density<T: Real>(y: T, w: &[T], mu: &[T], sigma2: &[T]) -> T {
    let terms: Vec<T> = w
        .iter()
        .zip(mu)
        .zip(sigma2)
        .map(|((&wk, &mk), &vk)| wk.ln() + ln_normal_pdf(y, mk, vk))
        .collect();
    log_sum_exp(&terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    // frozen with mpmath (50 digits)
    #[test]
    fn density_spot_values() {
        assert!((ln_normal_pdf(1.3f64, 0.2, 2.5) - -1.6190838991417503).abs() < 1e-14);
        assert!((ln_inv_gamma_pdf(0.8f64, 3.0, 3.0) - -0.25473610929877721).abs() < 1e-13);
        assert!((ln_beta_pdf(0.52f64, 2.0, 2.0) - 0.40386382674119055).abs() < 1e-13);
        let w = [0.2f64, 0.3, 0.5];
        assert!((ln_dirichlet_sym_pdf(&w, 1.5) - 1.062804335088187).abs() < 1e-13);
        assert!((ln_gamma_pdf(0.5f64, 1.0, 1.2) - -0.41767844320604537).abs() < 1e-14);
    }

    #[test]
    fn categorical_underflow_falls_back_to_argmax() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let logits = [f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        assert_eq!(sample_categorical_logits(&logits, &mut rng), 0);
        let logits = [f64::NEG_INFINITY, -1e300, f64::NEG_INFINITY];
        assert_eq!(sample_categorical_logits(&logits, &mut rng), 1);
    }

    #[test]
    fn categorical_matches_probabilities() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let logits = [0.0f64, (2.0f64).ln(), (5.0f64).ln()];
        let mut counts = [0usize; 3];
        let n = 200_000;
        for _ in 0..n {
            counts[sample_categorical_logits(&logits, &mut rng)] += 1;
        }
        let probs = [1.0 / 8.0, 2.0 / 8.0, 5.0 / 8.0];
        for (c, p) in counts.iter().zip(probs) {
            let freq = *c as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() < 4.0 * se, "freq {freq} vs {p}");
        }
    }

    #[test]
    fn inv_gamma_moments() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let (a, b) = (5.0f64, 2.0);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| sample_inv_gamma(&mut rng, a, b)).sum::<f64>() / n as f64;
        // E = b/(a-1) = 0.5
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }
}
