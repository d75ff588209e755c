//! Kernel-level checks of the no-covariate sampler: conjugate updates against
//! closed forms, the Metropolis mean/rho updates against direct oracles, the
//! moment-matching split/combine algebra, and the prior-only K law against
//! the Bernoulli-sum count oracle.

use dppmix_core::dpp::Rect;
use dppmix_core::model::{Hyperparams, MixtureState, NuSpec};
use dppmix_core::sampler::nocov::{
    run_chain, split_components, update_labels, update_variances, update_weights, NocovChain,
};
use dppmix_core::sampler::{McmcSchedule, SpectralConfig, WindowPolicy};
use dppmix_core::spectral::{SpectralFamily, SpectralModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn fixed_config() -> SpectralConfig<f64> {
    SpectralConfig {
        family: SpectralFamily::PowerExponential,
        alpha: 1.0,
        rho_fixed: Some(2.0),
        trunc: 50,
    }
}

fn fixed_hyper() -> Hyperparams<f64> {
    Hyperparams { nu_spec: NuSpec::Fixed(2.0), ..Hyperparams::default() }
}

fn test_state(k: usize, data_len: usize) -> MixtureState<f64> {
    MixtureState {
        k,
        mu: (0..k).map(|i| i as f64 - (k as f64 - 1.0) / 2.0).collect(),
        sigma2: vec![1.0; k],
        w: vec![1.0 / k as f64; k],
        labels: vec![0; data_len],
        rho: 2.0,
        nu: 2.0,
    }
}

#[test]
fn labels_with_one_component_never_move() {
    let mut rng = ChaCha12Rng::seed_from_u64(1);
    let data = vec![0.4, -2.0, 7.0];
    let mut state = test_state(1, data.len());
    update_labels(&mut state, &data, &mut rng);
    assert!(state.labels.iter().all(|&s| s == 0));
}

#[test]
fn labels_follow_a_dominating_component() {
    let mut rng = ChaCha12Rng::seed_from_u64(2);
    let data = vec![1.0];
    let mut state = test_state(2, 1);
    state.mu = vec![-3.0, 1.0];
    state.sigma2 = vec![1.0, 1e-8];
    for _ in 0..50 {
        update_labels(&mut state, &data, &mut rng);
        assert_eq!(state.labels[0], 1);
    }
}

#[test]
fn label_frequencies_match_the_exact_conditional() {
    let mut rng = ChaCha12Rng::seed_from_u64(3);
    let data = vec![0.7];
    let mut state = test_state(3, 1);
    state.mu = vec![-1.0, 0.5, 2.0];
    state.sigma2 = vec![0.8, 1.5, 0.3];
    state.w = vec![0.2, 0.5, 0.3];
    // exact normalized probabilities
    let dens = |c: usize| {
        let v: f64 = state.sigma2[c];
        state.w[c] * (-(data[0] - state.mu[c]).powi(2) / (2.0 * v)).exp()
            / (2.0 * std::f64::consts::PI * v).sqrt()
    };
    let raw = [dens(0), dens(1), dens(2)];
    let z: f64 = raw.iter().sum();
    let n = 100_000;
    let mut counts = [0usize; 3];
    for _ in 0..n {
        update_labels(&mut state, &data, &mut rng);
        counts[state.labels[0]] += 1;
    }
    for c in 0..3 {
        let p = raw[c] / z;
        let freq = counts[c] as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((freq - p).abs() < 3.5 * se, "component {c}: {freq} vs {p}");
    }
}

#[test]
fn weights_with_one_component_are_one() {
    let mut rng = ChaCha12Rng::seed_from_u64(4);
    let mut state = test_state(1, 5);
    update_weights(&mut state, 1.0, &mut rng);
    assert_eq!(state.w, vec![1.0]);
}

#[test]
fn weights_follow_the_dirichlet_posterior() {
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    // empty clusters: Dirichlet(1,1) is uniform on the simplex
    let mut state = test_state(2, 0);
    let n = 100_000;
    let mut acc = 0.0;
    for _ in 0..n {
        update_weights(&mut state, 1.0, &mut rng);
        acc += state.w[0];
    }
    let mean = acc / n as f64;
    // mean 1/2, var 1/12 / ... Dirichlet(1,1): var = 1/12
    let se = (1.0f64 / 12.0 / n as f64).sqrt();
    assert!((mean - 0.5).abs() < 4.0 * se, "uniform simplex mean {mean}");

    // counts (10, 0) with delta = 1: posterior Dirichlet(11, 1), mean 11/12
    let mut state = test_state(2, 10);
    state.labels = vec![0; 10];
    let mut acc = 0.0;
    for _ in 0..n {
        update_weights(&mut state, 1.0, &mut rng);
        acc += state.w[0];
    }
    let mean = acc / n as f64;
    let want = 11.0 / 12.0;
    let var = 11.0 / (144.0 * 13.0);
    let se = (var / n as f64).sqrt();
    assert!((mean - want).abs() < 4.0 * se, "posterior mean {mean} vs {want}");
}

#[test]
fn variances_follow_the_conjugate_posterior() {
    let mut rng = ChaCha12Rng::seed_from_u64(6);
    let (a0, b0) = (3.0, 3.0);

    // empty cluster: prior draw, E = b0/(a0-1) = 1.5
    let mut state = test_state(1, 0);
    let n = 100_000;
    let mut acc = 0.0;
    for _ in 0..n {
        update_variances(&mut state, &[], a0, b0, &mut rng);
        acc += state.sigma2[0];
    }
    let mean = acc / n as f64;
    // prior var = b^2/((a-1)^2 (a-2)) = 9/4
    let se = (2.25f64 / n as f64).sqrt();
    assert!((mean - 1.5).abs() < 4.0 * se, "prior mean {mean}");

    // single datum exactly at the mean: inv-gamma(a0 + 1/2, b0)
    let data = vec![0.0];
    let mut state = test_state(1, 1);
    state.mu = vec![0.0];
    let mut acc = 0.0;
    for _ in 0..n {
        update_variances(&mut state, &data, a0, b0, &mut rng);
        acc += state.sigma2[0];
    }
    let mean = acc / n as f64;
    let want = b0 / (a0 + 0.5 - 1.0);
    assert!((mean - want).abs() < 0.02, "single-datum mean {mean} vs {want}");

    // 100 points of known variance: posterior concentrates near the truth
    let truth: f64 = 0.49;
    let mut rng2 = ChaCha12Rng::seed_from_u64(60);
    let data: Vec<f64> =
        (0..100).map(|_| truth.sqrt() * <rand_distr::StandardNormal as Distribution<f64>>::sample(&rand_distr::StandardNormal, &mut rng2)).collect();
    let mut state = test_state(1, 100);
    state.mu = vec![0.0];
    let mut acc = 0.0;
    let draws = 20_000;
    for _ in 0..draws {
        update_variances(&mut state, &data, a0, b0, &mut rng);
        acc += state.sigma2[0];
    }
    let mean = acc / draws as f64;
    assert!((mean - truth).abs() / truth < 0.2, "posterior mean {mean} vs truth {truth}");
}

use rand_distr::Distribution;

#[test]
fn mean_update_is_free_inside_the_window_at_k1() {
    // K = 1, no data: the Schur factor is c(0), constant in mu, so every
    // in-window proposal is accepted
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    let rect = Rect::interval(-50.0, 50.0).unwrap();
    let mut chain =
        NocovChain::new(Vec::<f64>::new(), fixed_hyper(), fixed_config(), rect, &mut rng).unwrap();
    chain.freeze_adaptation();
    chain.set_mu_scale(0.05);
    for _ in 0..2000 {
        chain.update_means(&mut rng);
    }
    assert_eq!(chain.counters.mu_attempts, 2000);
    assert_eq!(
        chain.counters.mu_accepts, 2000,
        "inside-window proposals must always be accepted at K = 1 with no data"
    );
}

#[test]
fn prior_mean_chain_is_more_separated_than_uniform() {
    // fixed K = 2, no data: the stationary law of the two means under the
    // DPP factor must dominate two independent uniforms in pairwise distance
    let mut rng = ChaCha12Rng::seed_from_u64(8);
    let rect = Rect::interval(-5.0, 5.0).unwrap();
    let mut chain =
        NocovChain::new(Vec::<f64>::new(), fixed_hyper(), fixed_config(), rect, &mut rng).unwrap();
    chain.state = MixtureState {
        k: 2,
        mu: vec![-1.0, 1.0],
        sigma2: vec![1.0, 1.0],
        w: vec![0.5, 0.5],
        labels: vec![],
        rho: 2.0,
        nu: 2.0,
    };
    for _ in 0..500 {
        chain.update_means(&mut rng);
    }
    chain.freeze_adaptation();
    let m = 40_000;
    let mut seps = Vec::with_capacity(m);
    for _ in 0..m {
        chain.update_means(&mut rng);
        seps.push((chain.state.mu[0] - chain.state.mu[1]).abs());
    }
    let mut unif = Vec::with_capacity(m);
    for _ in 0..m {
        let a: f64 = rng.random_range(-5.0..5.0);
        let b: f64 = rng.random_range(-5.0..5.0);
        unif.push((a - b).abs());
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    // E|U1 - U2| = |R|/3
    assert!((mean(&unif) - 10.0 / 3.0).abs() < 0.08);
    assert!(
        mean(&seps) > mean(&unif) + 0.15,
        "repulsed mean separation {} vs uniform {}",
        mean(&seps),
        mean(&unif)
    );
    let quant = |v: &mut Vec<f64>, q: f64| {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[(q * (v.len() as f64 - 1.0)) as usize]
    };
    for q in [0.25, 0.5, 0.75] {
        let qs = quant(&mut seps, q);
        let qu = quant(&mut unif, q);
        assert!(qs > qu, "separation quantile {q}: {qs} vs uniform {qu}");
    }
}

#[test]
fn rho_chain_matches_the_quadrature_oracle() {
    // K = 1, no data, nu = 2 fixed: the rho marginal is the shifted-gamma
    // prior reweighted by the one-point DPP density exp(-D_app(rho)) c_rho(0).
    // Quadrature values frozen from mpmath: E = 1.7347864, SD = 0.5398537.
    let mut rng = ChaCha12Rng::seed_from_u64(9);
    let rect = Rect::interval(-5.0, 5.0).unwrap();
    let config = SpectralConfig { rho_fixed: None, ..fixed_config() };
    let mut chain =
        NocovChain::new(Vec::<f64>::new(), fixed_hyper(), config, rect, &mut rng).unwrap();
    for _ in 0..2000 {
        chain.update_rho_nu(&mut rng);
    }
    chain.freeze_adaptation();
    let n = 60_000;
    let mut acc = 0.0;
    let mut acc2 = 0.0;
    for _ in 0..n {
        chain.update_rho_nu(&mut rng);
        acc += chain.state.rho;
        acc2 += chain.state.rho * chain.state.rho;
    }
    let mean = acc / n as f64;
    let sd = (acc2 / n as f64 - mean * mean).sqrt();
    assert!((mean - 1.7347864050734015).abs() < 0.05, "chain mean {mean}");
    assert!((sd - 0.53985373615292481).abs() < 0.05, "chain sd {sd}");
}

#[test]
fn adaptation_is_frozen_after_burn_in() {
    let mut rng = ChaCha12Rng::seed_from_u64(10);
    let rect = Rect::interval(-5.0, 5.0).unwrap();
    let config = SpectralConfig { rho_fixed: None, ..fixed_config() };
    let mut chain =
        NocovChain::new(Vec::<f64>::new(), fixed_hyper(), config, rect, &mut rng).unwrap();
    for _ in 0..500 {
        chain.sweep(&mut rng);
    }
    chain.freeze_adaptation();
    let mu_scale = chain.mu_scale();
    let rho_scale = chain.rho_scale();
    for _ in 0..500 {
        chain.sweep(&mut rng);
        assert_eq!(chain.mu_scale(), mu_scale);
        assert_eq!(chain.rho_scale(), rho_scale);
    }
}

#[test]
fn split_then_combine_is_the_identity() {
    let (w, mu, s2) = (0.6f64, 1.3f64, 1.7f64);
    let (c1, c2) = split_components(w, mu, s2, 0.33, 0.41, 0.52);
    // merge back by moment matching
    let wm = c1.0 + c2.0;
    let mum = (c1.0 * c1.1 + c2.0 * c2.1) / wm;
    let s2m = (c1.0 * (c1.1 * c1.1 + c1.2) + c2.0 * (c2.1 * c2.1 + c2.2)) / wm - mum * mum;
    assert!((wm - w).abs() < 1e-12);
    assert!((mum - mu).abs() < 1e-12);
    assert!((s2m - s2).abs() < 1e-12);
    // and the children preserve the first two moments by construction
    assert!(c1.1 < mu && c2.1 > mu, "children straddle the parent for r > 0");
}

/// 6x6 determinant via cofactor expansion (test-side oracle).
fn det6(m: &[Vec<f64>]) -> f64 {
    fn go(m: &[Vec<f64>]) -> f64 {
        let n = m.len();
        if n == 1 {
            return m[0][0];
        }
        let mut acc = 0.0;
        let mut sign = 1.0;
        for j in 0..n {
            let minor: Vec<Vec<f64>> = m[1..]
                .iter()
                .map(|r| r.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, &v)| v).collect())
                .collect();
            acc += sign * m[0][j] * go(&minor);
            sign = -sign;
        }
        acc
    }
    go(m)
}

#[test]
fn split_jacobian_matches_finite_differences() {
    let formula = |w: f64, s2: f64, a: f64, r: f64| {
        let (w1, w2) = (a * w, (1.0 - a) * w);
        w.powi(4) / (w1 * w2).powf(1.5) * s2.powf(1.5) * (1.0 - r * r)
    };
    // frozen closed-form value
    assert!((formula(0.6, 1.7, 0.33, 0.52) - 9.3331091286047181).abs() < 1e-12);
    // and the spec's simplification at w1 = w2 = w/2: 8 w (sigma^2)^{3/2} (1-r^2)
    let w = 0.6;
    let (s2, r) = (1.7f64, 0.52);
    assert!(
        (formula(w, s2, 0.5, r) - 8.0 * w * s2.powf(1.5) * (1.0 - r * r)).abs() < 1e-12
    );

    // finite-difference determinant of the split map at a few points
    let cases: [(f64, f64, f64, f64, f64, f64); 3] = [
        (0.6, 1.3, 1.7, 0.33, 0.41, 0.52),
        (0.25, -0.7, 0.4, 0.6, 0.2, 0.3),
        (0.9, 2.0, 3.0, 0.45, 0.75, 0.66),
    ];
    for (w, mu, s2, a, b, r) in cases {
        let f = |v: &[f64; 6]| {
            let (c1, c2) = split_components(v[0], v[1], v[2], v[3], v[4], v[5]);
            [c1.0, c2.0, c1.1, c2.1, c1.2, c2.2]
        };
        let x = [w, mu, s2, a, b, r];
        let mut jac = vec![vec![0.0f64; 6]; 6];
        for j in 0..6 {
            let h = 1e-6 * (1.0 + x[j].abs());
            let mut xp = x;
            xp[j] += h;
            let mut xm = x;
            xm[j] -= h;
            let (fp, fm) = (f(&xp), f(&xm));
            for i in 0..6 {
                jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let numeric = det6(&jac).abs();
        let closed = formula(w, s2, a, r);
        assert!(
            (numeric - closed).abs() / closed < 1e-4,
            "|J| numeric {numeric} vs closed form {closed}"
        );
    }
}

#[test]
fn deterministic_replay_with_the_same_seed() {
    let hyper = fixed_hyper();
    let config = fixed_config();
    let schedule = McmcSchedule::new(50, 2, 40, 777);
    let window = WindowPolicy::Explicit { lo: -5.0, hi: 5.0 };
    let data: Vec<f64> = vec![-1.2, -0.9, 0.4, 0.5, 2.2];
    let t1 = run_chain(&data, &hyper, &config, &schedule, &window).unwrap();
    let t2 = run_chain(&data, &hyper, &config, &schedule, &window).unwrap();
    assert_eq!(t1.states.len(), t2.states.len());
    for (a, b) in t1.states.iter().zip(&t2.states) {
        assert_eq!(a, b);
    }
}

#[test]
fn every_kept_state_is_valid() {
    let mut rng = ChaCha12Rng::seed_from_u64(12);
    let data: Vec<f64> = (0..30)
        .map(|i| if i % 2 == 0 { -2.0 } else { 2.0 } + 0.3 * <rand_distr::StandardNormal as Distribution<f64>>::sample(&rand_distr::StandardNormal, &mut rng))
        .collect();
    let hyper = Hyperparams { nu_spec: NuSpec::Discrete(vec![1.0, 2.0, 5.0]), ..Hyperparams::default() };
    let config = SpectralConfig { rho_fixed: None, ..fixed_config() };
    let rect = Rect::interval(-6.0, 6.0).unwrap();
    let mut chain = NocovChain::new(data.clone(), hyper, config, rect, &mut rng).unwrap();
    for sweep in 0..800 {
        chain.sweep(&mut rng);
        let violations = chain.validate();
        assert!(violations.is_empty(), "sweep {sweep}: {:?}", violations);
        assert!(chain.state.mixture_log_lik(&data).is_finite());
    }
    // the discrete nu support should actually be explored
    assert!(chain.counters.rho_attempts > 0);
}

#[test]
fn prior_only_k_law_matches_the_count_oracle() {
    // criterion-1 settings at reduced scale (the acceptance suite runs the
    // full 5e4): fixed rho = 2, nu = 2, R = [-5,5], N = 50, empty data
    let hyper = fixed_hyper();
    let config = fixed_config();
    let schedule = McmcSchedule::new(2_000, 2, 20_000, 4242);
    let window = WindowPolicy::Explicit { lo: -5.0, hi: 5.0 };
    let trace = run_chain(&[] as &[f64], &hyper, &config, &schedule, &window).unwrap();

    let model = SpectralModel::power_exponential(1, 0.5, 2.0, 2.0);
    let w = dppmix_core::dpp::DppWindow::build(&model, Rect::interval(-5.0, 5.0).unwrap(), 50).unwrap();
    let pmf = w.count_pmf(30);
    let p_pos = 1.0 - pmf[0];

    let mut emp = vec![0.0f64; 31];
    for st in &trace.states {
        if st.k <= 30 {
            emp[st.k] += 1.0;
        }
    }
    let m = trace.states.len() as f64;
    let mut tv = 0.0;
    for k in 1..=30 {
        tv += (emp[k] / m - pmf[k] / p_pos).abs();
    }
    tv *= 0.5;
    assert!(tv <= 0.08, "prior-only TV distance {tv}");
}
