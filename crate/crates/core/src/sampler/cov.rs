//! Gibbs sampler for the covariate-dependent mixture: softmax gating weights,
//! a conjugate normal-inverse-gamma regression block, Metropolis updates for
//! the gating coefficients, and trans-dimensional split/combine moves whose
//! new-component parameters are drawn from an auxiliary regression posterior.
//!
//! Sweep order: labels -> (gamma, sigma2) -> beta -> means -> rho -> RJ.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::dpp::{DppWindow, Rect};
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Mat};
use crate::model::{validate_cov_state, CovDataset, CovHyperparams, CovMixtureState};
use crate::real::Real;
use crate::spectral::{SpectralFamily, SpectralModel};
use crate::stats::{
    ln_inv_gamma_pdf, ln_normal_pdf, log_sum_exp, sample_categorical_logits, sample_inv_gamma,
};
use crate::trace::{MoveCounters, Trace, TraceKind, TraceState};

use super::{AdaptiveScale, McmcSchedule, SpectralConfig, WindowPolicy};

/// Softmax gating weights w_k(x) = exp(beta_k^T x) / sum_l exp(beta_l^T x),
/// computed in log space with max subtraction.
pub fn gating_weights<T: Real>(beta: &[Vec<T>], x: &[T]) -> Vec<T> {
    let scores: Vec<T> = beta.iter().map(|b| crate::linalg::dot(b, x)).collect();
    let m = scores.iter().cloned().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = scores.iter().map(|&s| (s - m).exp()).collect();
    let total: T = exps.iter().cloned().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Label full conditional p(s_i = k) propto w_k(x_i) N(y_i; mu_k + x_i^T
/// gamma_k, sigma2_k). The normalizing sum over l in w_k(x_i) is constant in
/// k and drops out.
pub fn update_labels_cov<T: Real, R: Rng + ?Sized>(
    state: &mut CovMixtureState<T>,
    data: &CovDataset<T>,
    rng: &mut R,
) {
    let mut logits = vec![T::zero(); state.k];
    for i in 0..data.n() {
        let x = data.x_row(i);
        let y = data.y()[i];
        for c in 0..state.k {
            let mean = state.mu[c] + crate::linalg::dot(&state.gamma[c], x);
            logits[c] = crate::linalg::dot(&state.beta[c], x) + ln_normal_pdf(y, mean, state.sigma2[c]);
        }
        state.labels[i] = sample_categorical_logits(&logits, rng);
    }
}

/// Gaussian proposal for a gating vector: mode plus the Cholesky factor of
/// the precision matrix.
struct BetaProposal<T> {
    mode: Vec<T>,
    prec: Mat<T>,
    chol: Cholesky<T>,
}

impl<T: Real> BetaProposal<T> {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        let p = self.mode.len();
        let z: Vec<T> = (0..p).map(|_| T::sample_std_normal(rng)).collect();
        let v = self.chol.solve_lt(&z);
        self.mode.iter().zip(v).map(|(&m, d)| m + d).collect()
    }

    fn log_pdf(&self, x: &[T]) -> T {
        let p = T::of(self.mode.len() as f64);
        let d: Vec<T> = x.iter().zip(&self.mode).map(|(&a, &b)| a - b).collect();
        let q = self.prec.quad_form(&d, &d);
        let half = T::of(0.5);
        -half * p * (T::of(2.0) * T::pi()).ln() + half * self.chol.log_det() - half * q
    }
}

/// Sufficient-statistic form of the conjugate normal-inverse-gamma regression
/// posterior: posterior precision Lambda*^{-1} = prior precision + sum x x^T,
/// posterior mean m* = Lambda* sum y_i x_i, and the scale increment
/// sum y_i^2 - m*^T Lambda*^{-1} m*.
pub struct RegressionPosterior<T> {
    pub prec: Mat<T>,
    pub chol: Cholesky<T>,
    pub m_star: Vec<T>,
    pub scale_increment: T,
    pub n: usize,
}

/// Compute the conjugate regression posterior from rows and responses (the
/// prior mean is the zero vector).
pub fn regression_posterior<T: Real>(
    prior_prec: &Mat<T>,
    rows: &[&[T]],
    ys: &[T],
) -> Option<RegressionPosterior<T>> {
    let p = prior_prec.n_rows();
    let mut prec = prior_prec.clone();
    let mut rhs = vec![T::zero(); p];
    let mut yy = T::zero();
    for (row, &y) in rows.iter().zip(ys) {
        prec.add_outer(row, T::one());
        for (r, &xj) in rhs.iter_mut().zip(*row) {
            *r += y * xj;
        }
        yy += y * y;
    }
    let chol = Cholesky::new(&prec)?;
    let m_star = chol.solve(&rhs);
    let quad = crate::linalg::dot(&m_star, &rhs);
    Some(RegressionPosterior {
        prec,
        chol,
        m_star,
        scale_increment: (yy - quad).max(T::zero()),
        n: ys.len(),
    })
}

/// Normal-inverse-gamma posterior of the auxiliary split model on a subset of
/// items, with design rows z_i = (1, x_i).
struct AuxPosterior<T> {
    prec: Mat<T>,
    chol: Cholesky<T>,
    m_star: Vec<T>,
    xi_star: T,
    nu_star: T,
}

impl<T: Real> AuxPosterior<T> {
    fn log_pdf(&self, mu: T, gamma: &[T], sigma2: T) -> T {
        let p1 = self.m_star.len();
        let mut v = Vec::with_capacity(p1);
        v.push(mu);
        v.extend_from_slice(gamma);
        let d: Vec<T> = v.iter().zip(&self.m_star).map(|(&a, &b)| a - b).collect();
        let q = self.prec.quad_form(&d, &d);
        let half = T::of(0.5);
        let pp = T::of(p1 as f64);
        ln_inv_gamma_pdf(sigma2, self.xi_star, self.nu_star)
            - half * pp * (T::of(2.0) * T::pi() * sigma2).ln()
            + half * self.chol.log_det()
            - q / (T::of(2.0) * sigma2)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (T, Vec<T>, T) {
        let p1 = self.m_star.len();
        let sigma2 = sample_inv_gamma(rng, self.xi_star, self.nu_star);
        let sd = sigma2.sqrt();
        let z: Vec<T> = (0..p1).map(|_| T::sample_std_normal(rng)).collect();
        let dev = self.chol.solve_lt(&z);
        let v: Vec<T> = self.m_star.iter().zip(dev).map(|(&m, d)| m + sd * d).collect();
        (v[0], v[1..].to_vec(), sigma2)
    }
}

pub struct CovChain<T> {
    data: CovDataset<T>,
    hyper: CovHyperparams<T>,
    config: SpectralConfig<T>,
    rect: Rect<T>,
    window: DppWindow<T>,
    pub state: CovMixtureState<T>,
    /// g-prior covariance of the gating coefficients and its inverse.
    sigma0: Mat<T>,
    sigma0_prec: Mat<T>,
    sigma0_prec_chol: Cholesky<T>,
    lambda0_prec: Mat<T>,
    lambda0_logdet: T,
    big_gamma0_prec: Mat<T>,
    /// exp(beta0^T x_i + x_i^T Sigma0 x_i / 2) per item, the moment generating
    /// function closure used by the gating-mode objective.
    mgf: Vec<T>,
    mu_scale: AdaptiveScale<T>,
    rho_scale: AdaptiveScale<T>,
    pub counters: MoveCounters,
    /// Replaces every response likelihood factor by 1 (prior-sanity testing).
    pub flatten_likelihood: bool,
}

impl<T: Real> CovChain<T> {
    pub fn new(
        data: CovDataset<T>,
        hyper: CovHyperparams<T>,
        config: SpectralConfig<T>,
        rect: Rect<T>,
    ) -> Result<Self> {
        hyper.validate()?;
        config.validate()?;
        if hyper.p() != data.p() {
            return Err(Error::Config(format!(
                "hyperparameters are for p = {} covariates, data has p = {}",
                hyper.p(),
                data.p()
            )));
        }
        if let Some(bad) = data.y().iter().find(|&&y| !rect.contains1(y)) {
            return Err(Error::Config(format!("response {bad} outside the window")));
        }
        let nu = T::of(CovMixtureState::<T>::NU);
        let rho = match config.rho_fixed {
            Some(r) => r,
            None => hyper.rho_offset(nu) + hyper.a_rho / hyper.b_rho,
        };
        let model = match config.family {
            SpectralFamily::PowerExponential => SpectralModel::power_exponential(1, hyper.s, rho, nu),
            SpectralFamily::WhittleMatern => SpectralModel::whittle_matern(1, config.alpha, rho, nu),
            SpectralFamily::GeneralizedCauchy => {
                SpectralModel::generalized_cauchy(1, config.alpha, rho, nu)
            }
        };
        let window = DppWindow::build(&model, rect.clone(), config.trunc)?;

        let xtx_chol = data.xtx_cholesky()?;
        let mut sigma0 = xtx_chol.inverse();
        sigma0.scale(hyper.phi_g);
        let sigma0_chol = Cholesky::new(&sigma0)
            .ok_or_else(|| Error::Data("g-prior covariance is not positive definite".into()))?;
        let sigma0_prec = sigma0_chol.inverse();
        let sigma0_prec_chol = Cholesky::new(&sigma0_prec)
            .ok_or_else(|| Error::Data("g-prior precision is not positive definite".into()))?;
        let lambda0_chol = Cholesky::new(&hyper.lambda0)
            .ok_or_else(|| Error::Config("Lambda0 must be positive definite".into()))?;
        let lambda0_prec = lambda0_chol.inverse();
        let lambda0_logdet = lambda0_chol.log_det();
        let big_gamma0_chol = Cholesky::new(&hyper.big_gamma0)
            .ok_or_else(|| Error::Config("Gamma0 must be positive definite".into()))?;
        let big_gamma0_prec = big_gamma0_chol.inverse();

        let p = data.p();
        let n = data.n();
        let mgf = (0..n)
            .map(|i| {
                let x = data.x_row(i);
                let q = sigma0.quad_form(x, x);
                (crate::linalg::dot(&hyper.beta0, x) + q * T::of(0.5)).exp()
            })
            .collect();

        let mean_y = if n == 0 {
            rect.center()[0]
        } else {
            data.y().iter().cloned().sum::<T>() / T::of(n as f64)
        };
        let var_y = if n >= 2 {
            data.y().iter().map(|&y| (y - mean_y) * (y - mean_y)).sum::<T>() / T::of((n - 1) as f64)
        } else {
            T::one()
        };
        let state = CovMixtureState {
            k: 1,
            mu: vec![mean_y],
            sigma2: vec![var_y.max(T::of(1e-8))],
            gamma: vec![vec![T::zero(); p]],
            beta: vec![vec![T::zero(); p]],
            labels: vec![0; n],
            rho,
        };
        let span = rect.hi()[0] - rect.lo()[0];
        Ok(CovChain {
            data,
            hyper,
            config,
            rect,
            window,
            state,
            sigma0,
            sigma0_prec,
            sigma0_prec_chol,
            lambda0_prec,
            lambda0_logdet,
            big_gamma0_prec,
            mgf,
            mu_scale: AdaptiveScale::new(T::of(0.05) * span, 50),
            rho_scale: AdaptiveScale::new(T::of(0.5), 50),
            counters: MoveCounters::default(),
            flatten_likelihood: false,
        })
    }

    pub fn window(&self) -> &DppWindow<T> {
        &self.window
    }

    pub fn sigma0(&self) -> &Mat<T> {
        &self.sigma0
    }

    pub fn set_adapt_window(&mut self, batch: usize) {
        self.mu_scale = AdaptiveScale::new(self.mu_scale.scale(), batch);
        self.rho_scale = AdaptiveScale::new(self.rho_scale.scale(), batch);
    }

    pub fn freeze_adaptation(&mut self) {
        self.mu_scale.freeze();
        self.rho_scale.freeze();
    }

    fn ln_lik_item(&self, i: usize, mu_c: T, gamma_c: &[T], sigma2_c: T) -> T {
        if self.flatten_likelihood {
            return T::zero();
        }
        let x = self.data.x_row(i);
        let mean = mu_c + crate::linalg::dot(gamma_c, x);
        ln_normal_pdf(self.data.y()[i], mean, sigma2_c)
    }

    pub fn sweep(&mut self, rng: &mut impl Rng) {
        self.update_labels(rng);
        self.update_gamma_sigma(rng);
        self.update_beta(rng);
        self.update_means(rng);
        self.update_rho(rng);
        self.rj_step(rng);
    }

    pub fn update_labels(&mut self, rng: &mut impl Rng) {
        let k = self.state.k;
        let mut logits = vec![T::zero(); k];
        for i in 0..self.data.n() {
            let x = self.data.x_row(i);
            for c in 0..k {
                logits[c] = crate::linalg::dot(&self.state.beta[c], x)
                    + self.ln_lik_item(i, self.state.mu[c], &self.state.gamma[c], self.state.sigma2[c]);
            }
            self.state.labels[i] = sample_categorical_logits(&logits, rng);
        }
    }

    /// Joint conjugate draw of (gamma_k, sigma2_k) per cluster from the
    /// normal-inverse-gamma full conditional on the residuals y_i - mu_k.
    pub fn update_gamma_sigma(&mut self, rng: &mut impl Rng) {
        let p = self.data.p();
        let half = T::of(0.5);
        for c in 0..self.state.k {
            let items: Vec<usize> = if self.flatten_likelihood {
                Vec::new()
            } else {
                self.state.cluster_items(c)
            };
            let rows: Vec<&[T]> = items.iter().map(|&i| self.data.x_row(i)).collect();
            let resids: Vec<T> =
                items.iter().map(|&i| self.data.y()[i] - self.state.mu[c]).collect();
            let Some(post) = regression_posterior(&self.lambda0_prec, &rows, &resids) else {
                continue;
            };
            let shape = self.hyper.a0 + half * T::of(post.n as f64);
            let scale = self.hyper.b0 + half * post.scale_increment;
            let sigma2 = sample_inv_gamma(rng, shape, scale);
            let sd = sigma2.sqrt();
            let z: Vec<T> = (0..p).map(|_| T::sample_std_normal(rng)).collect();
            let dev = post.chol.solve_lt(&z);
            self.state.gamma[c] = post.m_star.iter().zip(dev).map(|(&m, d)| m + sd * d).collect();
            self.state.sigma2[c] = sigma2;
        }
    }

    /// Blockwise Metropolis update of beta_2..beta_K with the N(current,
    /// zeta I) proposal; component 1 is the fixed softmax reference.
    pub fn update_beta(&mut self, rng: &mut impl Rng) {
        let k = self.state.k;
        if k == 1 {
            return;
        }
        let sd = self.hyper.zeta.sqrt();
        for c in 1..k {
            self.counters.beta_attempts += 1;
            let cur = self.state.beta[c].clone();
            let prop: Vec<T> =
                cur.iter().map(|&b| b + sd * T::sample_std_normal(rng)).collect();
            let mut log_alpha = self.ln_beta_prior(&prop) - self.ln_beta_prior(&cur);
            for i in 0..self.data.n() {
                let x = self.data.x_row(i);
                let scores: Vec<T> = (0..k)
                    .map(|l| crate::linalg::dot(&self.state.beta[l], x))
                    .collect();
                let mut scores_new = scores.clone();
                scores_new[c] = crate::linalg::dot(&prop, x);
                if self.state.labels[i] == c {
                    log_alpha += scores_new[c] - scores[c];
                }
                log_alpha += log_sum_exp(&scores) - log_sum_exp(&scores_new);
            }
            if accept(log_alpha, rng) {
                self.state.beta[c] = prop;
                self.counters.beta_accepts += 1;
            }
        }
    }

    fn ln_beta_prior(&self, b: &[T]) -> T {
        let p = T::of(b.len() as f64);
        let d: Vec<T> = b.iter().zip(&self.hyper.beta0).map(|(&a, &m)| a - m).collect();
        let q = self.sigma0_prec.quad_form(&d, &d);
        let half = T::of(0.5);
        -half * p * (T::of(2.0) * T::pi()).ln() + half * self.sigma0_prec_chol.log_det() - half * q
    }

    fn unit_mu(&self) -> Vec<T> {
        self.state.mu.iter().map(|&m| self.rect.to_unit1(m)).collect()
    }

    /// Per-component Metropolis walk on the means with responses residualized
    /// by the regression part; identical in structure to the no-covariate
    /// update.
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
            let mut lik_ratio = T::zero();
            for i in 0..self.data.n() {
                if self.state.labels[i] == c {
                    lik_ratio += self.ln_lik_item(i, proposal, &self.state.gamma[c], self.state.sigma2[c])
                        - self.ln_lik_item(i, self.state.mu[c], &self.state.gamma[c], self.state.sigma2[c]);
                }
            }
            if accept(dpp_ratio + lik_ratio, rng) {
                self.state.mu[c] = proposal;
                unit[c] = unit_new;
                self.counters.mu_accepts += 1;
                self.mu_scale.record(true);
            } else {
                self.mu_scale.record(false);
            }
        }
    }

    /// Adaptive Metropolis update of rho on log(rho - offset); nu is fixed
    /// at 2 for the covariate model.
    pub fn update_rho(&mut self, rng: &mut impl Rng) {
        if self.config.rho_fixed.is_some() {
            return;
        }
        self.counters.rho_attempts += 1;
        let nu = T::of(CovMixtureState::<T>::NU);
        let offset = self.hyper.rho_offset(nu);
        let unit = self.unit_mu();
        let cur_rho = self.state.rho;
        let z = (cur_rho - offset).ln();
        let z_new = z + self.rho_scale.scale() * T::sample_std_normal(rng);
        let prop_rho = offset + z_new.exp();
        let model = SpectralModel::power_exponential(1, self.hyper.s, prop_rho, nu);
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
        let prior = crate::stats::ln_gamma_pdf(prop_rho - offset, self.hyper.a_rho, self.hyper.b_rho)
            - crate::stats::ln_gamma_pdf(cur_rho - offset, self.hyper.a_rho, self.hyper.b_rho);
        let log_alpha =
            ld_new - ld_old - cand_window.d_app() + self.window.d_app() + prior + (z_new - z);
        if accept(log_alpha, rng) {
            self.state.rho = prop_rho;
            self.window = cand_window;
            self.counters.rho_accepts += 1;
            self.rho_scale.record(true);
        } else {
            self.rho_scale.record(false);
        }
    }

    /// Log label-prior term sum_i log w_{s_i}(x_i) of an arbitrary state.
    fn label_prior(&self, beta: &[Vec<T>], labels: &[usize]) -> T {
        let mut acc = T::zero();
        for i in 0..self.data.n() {
            let x = self.data.x_row(i);
            let scores: Vec<T> = beta.iter().map(|b| crate::linalg::dot(b, x)).collect();
            acc += scores[labels[i]] - log_sum_exp(&scores);
        }
        acc
    }

    fn labeled_log_lik(&self, state: &CovMixtureState<T>) -> T {
        if self.flatten_likelihood {
            return T::zero();
        }
        let mut acc = T::zero();
        for i in 0..self.data.n() {
            let c = state.labels[i];
            acc += {
                let x = self.data.x_row(i);
                let mean = state.mu[c] + crate::linalg::dot(&state.gamma[c], x);
                ln_normal_pdf(self.data.y()[i], mean, state.sigma2[c])
            };
        }
        acc
    }

    fn aux_posterior(&self, items: &[usize]) -> Option<AuxPosterior<T>> {
        let half = T::of(0.5);
        let z_rows: Vec<Vec<T>> = items
            .iter()
            .map(|&i| {
                let mut z = Vec::with_capacity(self.data.p() + 1);
                z.push(T::one());
                z.extend_from_slice(self.data.x_row(i));
                z
            })
            .collect();
        let rows: Vec<&[T]> = z_rows.iter().map(|z| z.as_slice()).collect();
        let ys: Vec<T> = items.iter().map(|&i| self.data.y()[i]).collect();
        let post = regression_posterior(&self.big_gamma0_prec, &rows, &ys)?;
        let xi_star = self.hyper.xi0 + half * T::of(post.n as f64);
        let nu_star = (self.hyper.nu0 + half * post.scale_increment).max(T::of(1e-12));
        Some(AuxPosterior {
            prec: post.prec,
            chol: post.chol,
            m_star: post.m_star,
            xi_star,
            nu_star,
        })
    }

    /// Mode of the approximate gating-vector conditional used by the split
    /// proposal (exposed for verification).
    pub fn gating_mode(&self, items: &[usize], n_other_comps: usize) -> Vec<T> {
        self.beta_proposal(items, n_other_comps).mode
    }

    /// Deterministic mode-finding for the new gating vector: gradient ascent
    /// with a numerical gradient on the approximate conditional in which the
    /// other components' softmax terms are replaced by their prior moment
    /// generating function. Falls back to the g-prior covariance when the
    /// negated Hessian is not positive definite.
    fn beta_proposal(&self, items: &[usize], n_other_comps: usize) -> BetaProposal<T> {
        let p = self.data.p();
        let objective = |b: &[T]| -> T {
            let mut acc = self.ln_beta_prior(b);
            for &i in items {
                let x = self.data.x_row(i);
                let t = crate::linalg::dot(b, x);
                // denominator: exp(t) + 1 (reference) + (n_other-1) * mgf_i
                let d = T::one() + T::of((n_other_comps - 1) as f64) * self.mgf[i];
                let m = t.max(d.ln());
                let lse = m + ((t - m).exp() + (d.ln() - m).exp()).ln();
                acc += t - lse;
            }
            acc
        };
        let mut b = self.hyper.beta0.clone();
        let mut grad = vec![T::zero(); p];
        for _ in 0..100 {
            let f0 = objective(&b);
            for j in 0..p {
                let h = T::of(1e-5) * (T::one() + b[j].abs());
                let mut bp = b.clone();
                bp[j] = b[j] + h;
                let mut bm = b.clone();
                bm[j] = b[j] - h;
                grad[j] = (objective(&bp) - objective(&bm)) / (T::of(2.0) * h);
            }
            let norm = grad.iter().map(|&g| g * g).sum::<T>().sqrt();
            if norm < T::of(1e-6) {
                break;
            }
            // backtracking line search along the gradient
            let mut step = T::one();
            let mut improved = false;
            for _ in 0..40 {
                let cand: Vec<T> = b.iter().zip(&grad).map(|(&bj, &gj)| bj + step * gj).collect();
                if objective(&cand) > f0 {
                    b = cand;
                    improved = true;
                    break;
                }
                step = step * T::of(0.5);
            }
            if !improved {
                break;
            }
        }
        // numerical Hessian at the mode
        let mut hess = Mat::zeros(p, p);
        let f0 = objective(&b);
        let hs: Vec<T> = b.iter().map(|&bj| T::of(1e-4) * (T::one() + bj.abs())).collect();
        for j in 0..p {
            for l in j..p {
                let v = if j == l {
                    let mut bp = b.clone();
                    bp[j] = b[j] + hs[j];
                    let mut bm = b.clone();
                    bm[j] = b[j] - hs[j];
                    (objective(&bp) - T::of(2.0) * f0 + objective(&bm)) / (hs[j] * hs[j])
                } else {
                    let mut bpp = b.clone();
                    bpp[j] += hs[j];
                    bpp[l] += hs[l];
                    let mut bpm = b.clone();
                    bpm[j] += hs[j];
                    bpm[l] -= hs[l];
                    let mut bmp = b.clone();
                    bmp[j] -= hs[j];
                    bmp[l] += hs[l];
                    let mut bmm = b.clone();
                    bmm[j] -= hs[j];
                    bmm[l] -= hs[l];
                    (objective(&bpp) - objective(&bpm) - objective(&bmp) + objective(&bmm))
                        / (T::of(4.0) * hs[j] * hs[l])
                };
                hess[(j, l)] = v;
                hess[(l, j)] = v;
            }
        }
        hess.scale(-T::one());
        match Cholesky::new(&hess) {
            Some(chol) => BetaProposal { mode: b, prec: hess, chol },
            None => BetaProposal {
                mode: b,
                prec: self.sigma0_prec.clone(),
                chol: Cholesky::new(&self.sigma0_prec).expect("precision factorizes"),
            },
        }
    }

    fn ln_nig_prior(&self, gamma: &[T], sigma2: T) -> T {
        let p = T::of(self.data.p() as f64);
        let half = T::of(0.5);
        let q = self.lambda0_prec.quad_form(gamma, gamma);
        ln_inv_gamma_pdf(sigma2, self.hyper.a0, self.hyper.b0)
            - half * p * (T::of(2.0) * T::pi() * sigma2).ln()
            - half * self.lambda0_logdet
            - q / (T::of(2.0) * sigma2)
    }

    pub fn rj_step(&mut self, rng: &mut impl Rng) {
        if self.state.k == 1 || rng.random_bool(0.5) {
            self.try_split(rng);
        } else {
            self.try_combine(rng);
        }
    }

    fn splittable(&self) -> Vec<usize> {
        self.state
            .cluster_counts()
            .iter()
            .enumerate()
            .filter(|(_, &n)| n >= 2)
            .map(|(c, _)| c)
            .collect()
    }

    fn try_split(&mut self, rng: &mut impl Rng) {
        let k = self.state.k;
        let splittable = self.splittable();
        if splittable.is_empty() {
            self.counters.rj_skipped += 1;
            return;
        }
        self.counters.split_attempts += 1;
        let j = splittable[rng.random_range(0..splittable.len())];
        let items = self.state.cluster_items(j);
        let n_j = items.len();
        // fair-coin bipartition, redrawn until both sides are nonempty
        let move_items = loop {
            let mut stay = 0usize;
            let mut b = Vec::new();
            for &i in &items {
                if rng.random_bool(0.5) {
                    stay += 1;
                } else {
                    b.push(i);
                }
            }
            if stay > 0 && !b.is_empty() {
                break b;
            }
        };
        let Some(aux) = self.aux_posterior(&move_items) else {
            return;
        };
        let (mu2, gamma2, s22) = aux.sample(rng);
        if !self.rect.contains1(mu2) {
            return;
        }
        let bprop = self.beta_proposal(&move_items, k);
        let beta2 = bprop.sample(rng);

        // candidate state
        let mut cand = self.state.clone();
        cand.mu.push(mu2);
        cand.sigma2.push(s22);
        cand.gamma.push(gamma2.clone());
        cand.beta.push(beta2.clone());
        cand.k = k + 1;
        for &i in &move_items {
            cand.labels[i] = k;
        }

        let lik = self.labeled_log_lik(&cand) - self.labeled_log_lik(&self.state);
        let label_prior =
            self.label_prior(&cand.beta, &cand.labels) - self.label_prior(&self.state.beta, &self.state.labels);
        let prior_new = self.ln_nig_prior(&gamma2, s22) + self.ln_beta_prior(&beta2);
        let unit_old = self.unit_mu();
        let mut unit_new = unit_old.clone();
        unit_new.push(self.rect.to_unit1(mu2));
        let prior_mu = match (self.window.log_det_kernel(&unit_new), self.window.log_det_kernel(&unit_old)) {
            (None, _) => return,
            (Some(n), Some(o)) => n - o - self.rect.volume().ln(),
            (Some(_), None) => T::infinity(),
        };
        let move_factor = self.split_move_factor(k, splittable.len(), Some(n_j));
        let proposal = aux.log_pdf(mu2, &gamma2, s22) + bprop.log_pdf(&beta2);

        let log_alpha = lik + label_prior + prior_new + prior_mu + move_factor - proposal;
        if accept(log_alpha, rng) {
            self.state = cand;
            self.counters.split_accepts += 1;
        }
    }

    /// Log move-probability factor of a split at level `k_before`:
    /// p^C_{K+1} p_c / ((K+1) p^S_K p_s P_bipartition), with
    /// p_c = 1/((K+1)K), p_s = 1/m and P_bipartition = 1/(2^{n_j} - 2).
    /// `n_parent` is `None` on the irregular path where the implied reverse
    /// bipartition has an empty side (the term is then dropped).
    fn split_move_factor(&self, k_before: usize, m_splittable: usize, n_parent: Option<usize>) -> T {
        let one = T::one();
        let half = T::of(0.5);
        let kk = T::of(k_before as f64);
        let p_split = if k_before == 1 { one } else { half };
        let p_comb = half;
        let mut f = p_comb.ln() - p_split.ln() + T::of(m_splittable as f64).ln()
            - ((kk + one) * kk).ln()
            - (kk + one).ln();
        if let Some(n) = n_parent {
            // log(2^n - 2)
            f += T::of(n as f64) * T::of(2.0f64.ln()) + (-T::of(2.0).powf(T::of(1.0 - n as f64))).ln_1p();
        }
        f
    }

    fn try_combine(&mut self, rng: &mut impl Rng) {
        let k = self.state.k;
        debug_assert!(k >= 2);
        self.counters.combine_attempts += 1;
        let j1 = rng.random_range(0..k);
        let mut j2 = rng.random_range(0..k - 1);
        if j2 >= j1 {
            j2 += 1;
        }
        let items1 = self.state.cluster_items(j1);
        let n1 = items1.len();
        let n2 = self.state.cluster_items(j2).len();
        let n_merged = n1 + n2;
        if n_merged < 2 {
            // the reverse split could not pick the merged cluster
            return;
        }

        // merged candidate state, in the pre-shift gauge
        let mut cand = self.state.clone();
        for &i in &items1 {
            cand.labels[i] = j2;
        }
        cand.mu.remove(j1);
        cand.sigma2.remove(j1);
        cand.gamma.remove(j1);
        cand.beta.remove(j1);
        cand.k = k - 1;
        for s in cand.labels.iter_mut() {
            if *s > j1 {
                *s -= 1;
            }
        }

        // reverse-split bookkeeping in the merged state
        let m_rev = {
            let mut counts = vec![0usize; cand.k];
            for &s in &cand.labels {
                counts[s] += 1;
            }
            counts.iter().filter(|&&n| n >= 2).count()
        };
        if m_rev == 0 {
            return;
        }
        let Some(aux) = self.aux_posterior(&items1) else {
            return;
        };
        let bprop = self.beta_proposal(&items1, k - 1);

        let lik = self.labeled_log_lik(&cand) - self.labeled_log_lik(&self.state);
        let label_prior = self.label_prior(&cand.beta, &cand.labels)
            - self.label_prior(&self.state.beta, &self.state.labels);
        let prior_removed =
            self.ln_nig_prior(&self.state.gamma[j1], self.state.sigma2[j1])
                + self.ln_beta_prior(&self.state.beta[j1]);
        let unit_old = self.unit_mu();
        let unit_new: Vec<T> = cand.mu.iter().map(|&m| self.rect.to_unit1(m)).collect();
        let prior_mu = match (self.window.log_det_kernel(&unit_new), self.window.log_det_kernel(&unit_old)) {
            (None, _) => return,
            (Some(n), Some(o)) => n - o + self.rect.volume().ln(),
            (Some(_), None) => T::infinity(),
        };
        let bip = if n1 >= 1 && n2 >= 1 { Some(n_merged) } else { None };
        let move_factor = -self.split_move_factor(k - 1, m_rev, bip);
        let proposal = aux.log_pdf(self.state.mu[j1], &self.state.gamma[j1], self.state.sigma2[j1])
            + bprop.log_pdf(&self.state.beta[j1]);

        let log_alpha = lik + label_prior - prior_removed + prior_mu + move_factor + proposal;
        if accept(log_alpha, rng) {
            if j1 == 0 {
                // re-reference: shift every gating vector by the new first one
                let shift = cand.beta[0].clone();
                for b in cand.beta.iter_mut() {
                    for (bj, sj) in b.iter_mut().zip(&shift) {
                        *bj = *bj - *sj;
                    }
                }
                for bj in cand.beta[0].iter_mut() {
                    *bj = T::zero();
                }
            }
            self.state = cand;
            self.counters.combine_accepts += 1;
        }
    }

    pub fn snapshot(&self, iteration: u64) -> TraceState<T> {
        TraceState {
            iteration,
            k: self.state.k,
            rho: self.state.rho,
            nu: T::of(CovMixtureState::<T>::NU),
            w: Vec::new(),
            mu: self.state.mu.clone(),
            sigma2: self.state.sigma2.clone(),
            gamma: self.state.gamma.clone(),
            beta: self.state.beta.clone(),
            labels: self.state.labels.iter().map(|&s| s as u32).collect(),
        }
    }

    pub fn validate(&self) -> Vec<crate::model::Violation> {
        validate_cov_state(&self.state, &self.hyper, &self.window, self.config.rho_fixed.is_none())
    }
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

/// Run the covariate chain end to end; reproducible from the schedule seed.
pub fn run_chain_cov<T: Real>(
    data: &CovDataset<T>,
    hyper: &CovHyperparams<T>,
    config: &SpectralConfig<T>,
    schedule: &McmcSchedule,
    window: &WindowPolicy<T>,
) -> Result<Trace<T>> {
    schedule.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(schedule.seed);
    let rect = window.resolve(data.y())?;
    let mut chain = CovChain::new(data.clone(), hyper.clone(), config.clone(), rect)?;
    chain.set_adapt_window(schedule.adapt_window);
    let violations = chain.validate();
    if let Some(v) = violations.first() {
        return Err(Error::Config(format!("initial state invalid: {}: {}", v.field, v.message)));
    }
    let mut trace = Trace::new(TraceKind::Covariate, data.n(), data.p());
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
        if chain.state.mu.iter().any(|m| !m.is_finite())
            || chain.state.sigma2.iter().any(|s| !s.is_finite())
        {
            return Err(Error::Numerical(format!(
                "state became non-finite at iteration {iteration}"
            )));
        }
        trace.record(chain.snapshot(iteration));
    }
    trace.counters = chain.counters;
    Ok(trace)
}
