//! Gibbs sampler with reversible-jump split/combine moves for the
//! no-covariate repulsive mixture.
//!
//! Sweep order: labels -> weights -> variances -> means -> (rho, nu) -> RJ.
//! The RJ move uses moment-matching proposals; its acceptance ratio is the
//! detailed-balance-exact one for the windowed DPP prior (including the
//! |R|^{-1} dimension-change factor), with the mixture likelihood taken with
//! labels marginalized.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::dpp::{DppWindow, Rect};
use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::model::{validate_state, Hyperparams, MixtureState, NuSpec};
use crate::real::Real;
use crate::spectral::SpectralModel;
use crate::stats::{
    ln_beta_pdf, ln_inv_gamma_pdf, ln_normal_pdf, sample_categorical_logits, sample_dirichlet,
    sample_inv_gamma,
};
use crate::trace::{MoveCounters, Trace, TraceKind, TraceState};

use super::{AdaptiveScale, McmcSchedule, SpectralConfig, WindowPolicy};

/// Draw every label from its discrete full conditional
/// p(s_i = k) propto w_k N(y_i; mu_k, sigma2_k).
pub fn update_labels<T: Real, R: Rng + ?Sized>(
    state: &mut MixtureState<T>,
    data: &[T],
    rng: &mut R,
) {
    let logw: Vec<T> = state.w.iter().map(|&w| w.ln()).collect();
    let mut logits = vec![T::zero(); state.k];
    for (i, &y) in data.iter().enumerate() {
        for c in 0..state.k {
            logits[c] = logw[c] + ln_normal_pdf(y, state.mu[c], state.sigma2[c]);
        }
        state.labels[i] = sample_categorical_logits(&logits, rng);
    }
}

/// Conjugate Dirichlet(delta + n_1, ..., delta + n_K) draw of the weights.
pub fn update_weights<T: Real, R: Rng + ?Sized>(
    state: &mut MixtureState<T>,
    delta: T,
    rng: &mut R,
) {
    let counts = state.cluster_counts();
    let alphas: Vec<T> = counts.iter().map(|&n| delta + T::of(n as f64)).collect();
    state.w = sample_dirichlet(rng, &alphas);
}

/// Conjugate inverse-gamma draw of every component variance; empty clusters
/// draw from the prior.
pub fn update_variances<T: Real, R: Rng + ?Sized>(
    state: &mut MixtureState<T>,
    data: &[T],
    a0: T,
    b0: T,
    rng: &mut R,
) {
    let half = T::of(0.5);
    for c in 0..state.k {
        let mut n = 0usize;
        let mut ss = T::zero();
        for (i, &y) in data.iter().enumerate() {
            if state.labels[i] == c {
                n += 1;
                let d = y - state.mu[c];
                ss += d * d;
            }
        }
        state.sigma2[c] = sample_inv_gamma(rng, a0 + half * T::of(n as f64), b0 + half * ss);
    }
}

pub struct NocovChain<T> {
    data: Vec<T>,
    hyper: Hyperparams<T>,
    config: SpectralConfig<T>,
    rect: Rect<T>,
    window: DppWindow<T>,
    pub state: MixtureState<T>,
    mu_scale: AdaptiveScale<T>,
    rho_scale: AdaptiveScale<T>,
    pub counters: MoveCounters,
}

impl<T: Real> NocovChain<T> {
    pub fn new(
        data: Vec<T>,
        hyper: Hyperparams<T>,
        config: SpectralConfig<T>,
        rect: Rect<T>,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        hyper.validate()?;
        config.validate()?;
        if let Some(bad) = data.iter().find(|&&y| !rect.contains1(y)) {
            return Err(Error::Config(format!("data point {bad} outside the window")));
        }
        let nu = match &hyper.nu_spec {
            NuSpec::Fixed(v) => *v,
            NuSpec::Discrete(vs) => vs[rng.random_range(0..vs.len())],
        };
        let rho = match config.rho_fixed {
            Some(r) => r,
            None => hyper.rho_offset(nu) + hyper.a_rho / hyper.b_rho,
        };
        let model = spectral_model(&config, &hyper, rho, nu);
        let window = DppWindow::build(&model, rect.clone(), config.trunc)?;
        let n = data.len();
        let mu0 = if n == 0 {
            rect.center()[0]
        } else {
            data.iter().cloned().sum::<T>() / T::of(n as f64)
        };
        let sigma20 = if n >= 2 {
            let mean = mu0;
            data.iter().map(|&y| (y - mean) * (y - mean)).sum::<T>() / T::of((n - 1) as f64)
        } else if hyper.a0 > T::one() {
            hyper.b0 / (hyper.a0 - T::one())
        } else {
            T::one()
        };
        let state = MixtureState {
            k: 1,
            mu: vec![mu0],
            sigma2: vec![sigma20.max(T::of(1e-8))],
            w: vec![T::one()],
            labels: vec![0; n],
            rho,
            nu,
        };
        let span = rect.hi()[0] - rect.lo()[0];
        Ok(NocovChain {
            data,
            hyper,
            config,
            rect,
            window,
            state,
            mu_scale: AdaptiveScale::new(T::of(0.05) * span, 50),
            rho_scale: AdaptiveScale::new(T::of(0.5), 50),
            counters: MoveCounters::default(),
        })
    }

    pub fn window(&self) -> &DppWindow<T> {
        &self.window
    }

    pub fn mu_scale(&self) -> T {
        self.mu_scale.scale()
    }

    pub fn rho_scale(&self) -> T {
        self.rho_scale.scale()
    }

    pub fn set_adapt_window(&mut self, batch: usize) {
        self.mu_scale = AdaptiveScale::new(self.mu_scale.scale(), batch);
        self.rho_scale = AdaptiveScale::new(self.rho_scale.scale(), batch);
    }

    /// Override the random-walk scale of the mean proposals (frozen).
    pub fn set_mu_scale(&mut self, scale: T) {
        self.mu_scale = AdaptiveScale::new(scale, usize::MAX);
        self.mu_scale.freeze();
    }

    pub fn freeze_adaptation(&mut self) {
        self.mu_scale.freeze();
        self.rho_scale.freeze();
    }

    pub fn sweep(&mut self, rng: &mut impl Rng) {
        update_labels(&mut self.state, &self.data, rng);
        update_weights(&mut self.state, self.hyper.delta, rng);
        update_variances(&mut self.state, &self.data, self.hyper.a0, self.hyper.b0, rng);
        self.update_means(rng);
        self.update_rho_nu(rng);
        self.rj_step(rng);
    }

    fn unit_mu(&self) -> Vec<T> {
        self.state.mu.iter().map(|&m| self.rect.to_unit1(m)).collect()
    }

    fn log_lik_component(&self, c: usize, mu_c: T) -> T {
        let mut acc = T::zero();
        for (i, &y) in self.data.iter().enumerate() {
            if self.state.labels[i] == c {
                acc += ln_normal_pdf(y, mu_c, self.state.sigma2[c]);
            }
        }
        acc
    }

    /// Per-component Metropolis random walk on the means. The DPP factor is
    /// the Schur complement of the kernel matrix at the updated component;
    /// when the reduced kernel matrix is numerically indefinite the move
    /// falls back to full determinant ratios.
    pub fn update_means(&mut self, rng: &mut impl Rng) {
        let k = self.state.k;
        let c0 = self.window.c_app1(T::zero());
        let mut unit = self.unit_mu();
        for c in 0..k {
            self.counters.mu_attempts += 1;
            let proposal = self.state.mu[c] + self.mu_scale.scale() * T::sample_std_normal(rng);
            if !self.rect.contains1(proposal) {
                self.mu_scale.record(false);
                continue;
            }
            let unit_new = self.rect.to_unit1(proposal);
            let dpp_ratio = if k == 1 {
                Some(T::zero())
            } else {
                let minor = self.window.kernel_matrix_excluding(&unit, c);
                match Cholesky::new(&minor) {
                    Some(chol) => {
                        let b_old = self.window.cross_vector(&unit, c, unit[c]);
                        let b_new = self.window.cross_vector(&unit, c, unit_new);
                        let f_old = c0 - chol.inv_quad_form(&b_old, &b_old);
                        let f_new = c0 - chol.inv_quad_form(&b_new, &b_new);
                        if f_new <= T::zero() {
                            None
                        } else if f_old <= T::zero() {
                            Some(T::infinity())
                        } else {
                            Some(f_new.ln() - f_old.ln())
                        }
                    }
                    None => {
                        // near-singular reduced kernel: use full determinants
                        let ld_old = self.window.log_det_kernel(&unit);
                        let mut cand = unit.clone();
                        cand[c] = unit_new;
                        let ld_new = self.window.log_det_kernel(&cand);
                        match (ld_new, ld_old) {
                            (None, _) => None,
                            (Some(_), None) => Some(T::infinity()),
                            (Some(n), Some(o)) => Some(n - o),
                        }
                    }
                }
            };
            let Some(dpp_ratio) = dpp_ratio else {
                self.mu_scale.record(false);
                continue;
            };
            let lik_ratio = self.log_lik_component(c, proposal)
                - self.log_lik_component(c, self.state.mu[c]);
            let log_alpha = dpp_ratio + lik_ratio;
            if accept(log_alpha, rng) {
                self.state.mu[c] = proposal;
                unit[c] = unit_new;
                self.counters.mu_accepts += 1;
                self.mu_scale.record(true);
            } else {
                self.mu_scale.record(false);
            }
        }
    }

    /// Joint adaptive Metropolis update of (rho, nu): random walk on
    /// log(rho - offset(nu)), independent uniform proposal on the discrete nu
    /// support. Skipped entirely when rho is fixed and nu has no support to
    /// move over.
    pub fn update_rho_nu(&mut self, rng: &mut impl Rng) {
        let nu_is_discrete = matches!(self.hyper.nu_spec, NuSpec::Discrete(_));
        if self.config.rho_fixed.is_some() && !nu_is_discrete {
            return;
        }
        self.counters.rho_attempts += 1;
        let unit = self.unit_mu();
        let cur_rho = self.state.rho;
        let cur_nu = self.state.nu;

        let prop_nu = match &self.hyper.nu_spec {
            NuSpec::Fixed(v) => *v,
            NuSpec::Discrete(vs) => vs[rng.random_range(0..vs.len())],
        };
        let (prop_rho, jac) = if self.config.rho_fixed.is_some() {
            (cur_rho, T::zero())
        } else {
            let off_cur = self.hyper.rho_offset(cur_nu);
            let off_prop = self.hyper.rho_offset(prop_nu);
            let z = (cur_rho - off_cur).ln();
            let z_new = z + self.rho_scale.scale() * T::sample_std_normal(rng);
            // proposal Jacobian of the log transform: + z_new - z
            (off_prop + z_new.exp(), z_new - z)
        };

        let model = spectral_model(&self.config, &self.hyper, prop_rho, prop_nu);
        let Ok(cand_window) = DppWindow::build(&model, self.rect.clone(), self.config.trunc) else {
            self.rho_scale.record(false);
            return;
        };
        let (Some(ld_new), Some(ld_old)) =
            (cand_window.log_det_kernel(&unit), self.window.log_det_kernel(&unit))
        else {
            self.rho_scale.record(false);
            return;
        };
        let mut log_alpha = ld_new - ld_old - cand_window.d_app() + self.window.d_app() + jac;
        if self.config.rho_fixed.is_none() {
            log_alpha += crate::model::log_prior_rho(prop_rho, prop_nu, &self.hyper)
                - crate::model::log_prior_rho(cur_rho, cur_nu, &self.hyper);
        }
        if accept(log_alpha, rng) {
            self.state.rho = prop_rho;
            self.state.nu = prop_nu;
            self.window = cand_window;
            self.counters.rho_accepts += 1;
            self.rho_scale.record(true);
        } else {
            self.rho_scale.record(false);
        }
    }

    /// Marginal mixture log likelihood at arbitrary component vectors.
    fn mix_log_lik(&self, w: &[T], mu: &[T], sigma2: &[T]) -> T {
        self.data
            .iter()
            .map(|&y| crate::stats::ln_mixture_density(y, w, mu, sigma2))
            .sum()
    }

    /// Log of the split ratio q for moving from the (K) configuration
    /// (w, mu, sigma2 vectors with the parent at `j`) to the (K+1)
    /// configuration (child1 at `j`, child2 appended), with proposal draws
    /// (alpha, beta, r). Splits are accepted with min(1, q); the matching
    /// combine with min(1, 1/q).
    #[allow(clippy::too_many_arguments)]
    fn split_log_q(
        &self,
        k_before: usize,
        parent: (T, T, T),
        child1: (T, T, T),
        child2: (T, T, T),
        u: (T, T, T),
        base_w: &[T],
        base_mu: &[T],
        base_sigma2: &[T],
        j: usize,
    ) -> T {
        let (w_p, _mu_p, s2_p) = parent;
        let (w1, mu1, s21) = child1;
        let (w2, mu2, s22) = child2;
        let (alpha, beta, r) = u;
        let one = T::one();
        let half = T::of(0.5);

        // |det J| = w^4 (sigma^2)^{3/2} (1 - r^2) / (w1 w2)^{3/2}
        let log_jac = T::of(4.0) * w_p.ln() - T::of(1.5) * (w1.ln() + w2.ln())
            + T::of(1.5) * s2_p.ln()
            + (one - r * r).ln();

        // proposal density of (alpha, beta, r)
        let log_u = ln_beta_pdf(alpha, one, one) + ln_beta_pdf(beta, one, one)
            + ln_beta_pdf(r, T::of(2.0), T::of(2.0));

        // split configuration vectors
        let mut w_new = base_w.to_vec();
        let mut mu_new = base_mu.to_vec();
        let mut s2_new = base_sigma2.to_vec();
        w_new[j] = w1;
        mu_new[j] = mu1;
        s2_new[j] = s21;
        w_new.push(w2);
        mu_new.push(mu2);
        s2_new.push(s22);

        let lik_ratio = if self.data.is_empty() {
            T::zero()
        } else {
            self.mix_log_lik(&w_new, &mu_new, &s2_new)
                - self.mix_log_lik(base_w, base_mu, base_sigma2)
        };

        let prior_sigma = ln_inv_gamma_pdf(s21, self.hyper.a0, self.hyper.b0)
            + ln_inv_gamma_pdf(s22, self.hyper.a0, self.hyper.b0)
            - ln_inv_gamma_pdf(s2_p, self.hyper.a0, self.hyper.b0);

        // symmetric Dirichlet ratio: only the normalizer and the split weight change
        let kk = T::of(k_before as f64);
        let delta = self.hyper.delta;
        let prior_w = (delta * (kk + one)).ln_gamma() - (delta * kk).ln_gamma()
            - delta.ln_gamma()
            + (delta - one) * (w1.ln() + w2.ln() - w_p.ln());

        // DPP location-prior ratio: |R|^{-1} det(K+1)/det(K)
        let unit_old: Vec<T> = base_mu.iter().map(|&m| self.rect.to_unit1(m)).collect();
        let mut unit_new = unit_old.clone();
        unit_new[j] = self.rect.to_unit1(mu1);
        unit_new.push(self.rect.to_unit1(mu2));
        let ld_new = self.window.log_det_kernel(&unit_new);
        let ld_old = self.window.log_det_kernel(&unit_old);
        let prior_mu = match (ld_new, ld_old) {
            (None, _) => return T::neg_infinity(),
            (Some(_), None) => return T::infinity(),
            (Some(n), Some(o)) => n - o - self.rect.volume().ln(),
        };

        // exact move-probability factor: 2 p^C_{K+1} / ((K+1) p^S_K)
        let p_split_k = if k_before == 1 { one } else { half };
        let p_comb_k1 = half;
        let log_move = T::of(2.0).ln() + p_comb_k1.ln() - p_split_k.ln() - (kk + one).ln();

        log_jac + lik_ratio + prior_sigma + prior_w + prior_mu + log_move - log_u
    }

    /// One reversible-jump move: split (forced at K = 1) or combine, each
    /// proposed with probability 1/2 otherwise.
    pub fn rj_step(&mut self, rng: &mut impl Rng) {
        if self.state.k == 1 || rng.random_bool(0.5) {
            self.try_split(rng);
        } else {
            self.try_combine(rng);
        }
    }

    fn try_split(&mut self, rng: &mut impl Rng) {
        self.counters.split_attempts += 1;
        let k = self.state.k;
        let j = rng.random_range(0..k);
        let alpha = T::sample_beta(rng, T::one(), T::one());
        let beta = T::sample_beta(rng, T::one(), T::one());
        let r = T::sample_beta(rng, T::of(2.0), T::of(2.0));

        let w_p = self.state.w[j];
        let mu_p = self.state.mu[j];
        let s2_p = self.state.sigma2[j];
        let (child1, child2) = split_components(w_p, mu_p, s2_p, alpha, beta, r);
        if !self.rect.contains1(child1.1) || !self.rect.contains1(child2.1) {
            return;
        }
        let (w_base, mu_base, s2_base) =
            (self.state.w.clone(), self.state.mu.clone(), self.state.sigma2.clone());
        let log_q = self.split_log_q(
            k,
            (w_p, mu_p, s2_p),
            child1,
            child2,
            (alpha, beta, r),
            &w_base,
            &mu_base,
            &s2_base,
            j,
        );
        if accept(log_q, rng) {
            let (w1, mu1, s21) = child1;
            let (w2, mu2, s22) = child2;
            self.state.w[j] = w1;
            self.state.mu[j] = mu1;
            self.state.sigma2[j] = s21;
            self.state.w.push(w2);
            self.state.mu.push(mu2);
            self.state.sigma2.push(s22);
            self.state.k += 1;
            let new_idx = self.state.k - 1;
            // reassign the split cluster's items between the two children
            for i in 0..self.data.len() {
                if self.state.labels[i] == j {
                    let y = self.data[i];
                    let l1 = w1.ln() + ln_normal_pdf(y, mu1, s21);
                    let l2 = w2.ln() + ln_normal_pdf(y, mu2, s22);
                    let pick = sample_categorical_logits(&[l1, l2], rng);
                    self.state.labels[i] = if pick == 0 { j } else { new_idx };
                }
            }
            self.counters.split_accepts += 1;
        }
    }

    fn try_combine(&mut self, rng: &mut impl Rng) {
        let k = self.state.k;
        debug_assert!(k >= 2, "combine never proposed at K = 1");
        self.counters.combine_attempts += 1;
        let j1 = rng.random_range(0..k);
        let mut j2 = rng.random_range(0..k - 1);
        if j2 >= j1 {
            j2 += 1;
        }
        // left child (smaller mean) plays the role of child1 in the inverse split
        let (left, right) = if self.state.mu[j1] <= self.state.mu[j2] { (j1, j2) } else { (j2, j1) };
        let (w_l, mu_l, s2_l) = (self.state.w[left], self.state.mu[left], self.state.sigma2[left]);
        let (w_r, mu_r, s2_r) =
            (self.state.w[right], self.state.mu[right], self.state.sigma2[right]);

        let w_m = w_l + w_r;
        let mu_m = (w_l * mu_l + w_r * mu_r) / w_m;
        let second = w_l * (mu_l * mu_l + s2_l) + w_r * (mu_r * mu_r + s2_r);
        let s2_m = second / w_m - mu_m * mu_m;
        if !(s2_m > T::zero()) {
            return;
        }
        // back-solved proposal draws of the inverse split
        let alpha = w_l / w_m;
        let r = (mu_m - mu_l) * (w_l / w_r).sqrt() / s2_m.sqrt();
        if !(r > T::zero() && r < T::one()) {
            return;
        }
        let beta = s2_l * w_l / ((T::one() - r * r) * w_m * s2_m);
        if !(beta > T::zero() && beta < T::one()) {
            return;
        }

        // merged (K-1) configuration: merged component at min slot, max slot removed
        let keep = left.min(right);
        let drop = left.max(right);
        let mut w_base = self.state.w.clone();
        let mut mu_base = self.state.mu.clone();
        let mut s2_base = self.state.sigma2.clone();
        w_base[keep] = w_m;
        mu_base[keep] = mu_m;
        s2_base[keep] = s2_m;
        w_base.remove(drop);
        mu_base.remove(drop);
        s2_base.remove(drop);

        let log_q = self.split_log_q(
            k - 1,
            (w_m, mu_m, s2_m),
            (w_l, mu_l, s2_l),
            (w_r, mu_r, s2_r),
            (alpha, beta, r),
            &w_base,
            &mu_base,
            &s2_base,
            keep,
        );
        if accept(-log_q, rng) {
            self.state.w = w_base;
            self.state.mu = mu_base;
            self.state.sigma2 = s2_base;
            self.state.k -= 1;
            for s in self.state.labels.iter_mut() {
                if *s == drop {
                    *s = keep;
                } else if *s > drop {
                    *s -= 1;
                }
            }
            self.counters.combine_accepts += 1;
        }
    }

    pub fn snapshot(&self, iteration: u64) -> TraceState<T> {
        TraceState {
            iteration,
            k: self.state.k,
            rho: self.state.rho,
            nu: self.state.nu,
            w: self.state.w.clone(),
            mu: self.state.mu.clone(),
            sigma2: self.state.sigma2.clone(),
            gamma: Vec::new(),
            beta: Vec::new(),
            labels: self.state.labels.iter().map(|&s| s as u32).collect(),
        }
    }

    pub fn validate(&self) -> Vec<crate::model::Violation> {
        validate_state(&self.state, &self.hyper, &self.window, self.config.rho_fixed.is_none())
    }
}

/// Moment-matching split of (w, mu, sigma2) by (alpha, beta, r); returns the
/// two children (child1 sits left of the parent mean for r > 0).
pub fn split_components<T: Real>(
    w: T,
    mu: T,
    sigma2: T,
    alpha: T,
    beta: T,
    r: T,
) -> ((T, T, T), (T, T, T)) {
    let one = T::one();
    let w1 = alpha * w;
    let w2 = (one - alpha) * w;
    let sd = sigma2.sqrt();
    let mu1 = mu - (w2 / w1).sqrt() * r * sd;
    let mu2 = mu + (w1 / w2).sqrt() * r * sd;
    let s21 = beta * (one - r * r) * (w / w1) * sigma2;
    let s22 = (one - beta) * (one - r * r) * (w / w2) * sigma2;
    ((w1, mu1, s21), (w2, mu2, s22))
}

fn accept<T: Real>(log_alpha: T, rng: &mut impl Rng) -> bool {
    if log_alpha >= T::zero() {
        return true;
    }
    if log_alpha == T::neg_infinity() {
        return false;
    }
    T::sample_unit(rng).ln() < log_alpha
}

fn spectral_model<T: Real>(
    config: &SpectralConfig<T>,
    hyper: &Hyperparams<T>,
    rho: T,
    nu: T,
) -> SpectralModel<T> {
    match config.family {
        crate::spectral::SpectralFamily::PowerExponential => {
            SpectralModel::power_exponential(1, hyper.s, rho, nu)
        }
        crate::spectral::SpectralFamily::WhittleMatern => {
            SpectralModel::whittle_matern(1, config.alpha, rho, nu)
        }
        crate::spectral::SpectralFamily::GeneralizedCauchy => {
            SpectralModel::generalized_cauchy(1, config.alpha, rho, nu)
        }
    }
}

/// Run the full chain: burn-in with adaptation, then record `n_keep` states
/// every `n_thin` sweeps. Fully reproducible from the schedule seed.
pub fn run_chain<T: Real>(
    data: &[T],
    hyper: &Hyperparams<T>,
    config: &SpectralConfig<T>,
    schedule: &McmcSchedule,
    window: &WindowPolicy<T>,
) -> Result<Trace<T>> {
    schedule.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(schedule.seed);
    let rect = window.resolve(data)?;
    let mut chain = NocovChain::new(data.to_vec(), hyper.clone(), config.clone(), rect, &mut rng)?;
    chain.set_adapt_window(schedule.adapt_window);
    let violations = chain.validate();
    if let Some(v) = violations.first() {
        return Err(Error::Config(format!("initial state invalid: {}: {}", v.field, v.message)));
    }
    let mut trace = Trace::new(TraceKind::NoCovariate, data.len(), 0);
    for _ in 0..schedule.n_burnin {
        chain.sweep(&mut rng);
    }
    chain.freeze_adaptation();
    let mut iteration = schedule.n_burnin as u64;
    for _ in 0..schedule.n_keep {
        for _ in 0..schedule.n_thin {
            chain.sweep(&mut rng);
            iteration += 1;
        }
        let lik = chain.state.mixture_log_lik(data);
        if !lik.is_finite() && !data.is_empty() {
            return Err(Error::Numerical(format!(
                "mixture log likelihood became non-finite at iteration {iteration}"
            )));
        }
        trace.record(chain.snapshot(iteration));
    }
    trace.counters = chain.counters;
    Ok(trace)
}
