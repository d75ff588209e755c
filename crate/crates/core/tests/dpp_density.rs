//! Windowed DPP density checks: the normalizing constant against an
//! independent summation, determinants against a cofactor-expansion oracle,
//! kernel symmetry/positivity, rescaling identities, and the point-count law.

use dppmix_core::dpp::{DppWindow, Rect};
use dppmix_core::error::Error;
use dppmix_core::spectral::SpectralModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "got {a:.17e}, want {b:.17e}");
}

/// The criterion-1 window: PES, s = 1/2, rho = 2, nu = 2, R = [-5, 5], N = 50.
fn reference_window() -> DppWindow<f64> {
    let model = SpectralModel::power_exponential(1, 0.5, 2.0, 2.0);
    DppWindow::build(&model, Rect::interval(-5.0, 5.0).unwrap(), 50).unwrap()
}

/// Independent phi for the reference model, written from scratch:
/// phi(k) = 1/2 exp(-(sqrt(pi)/4 k)^2).
fn phi_ref(k: f64) -> f64 {
    0.5 * (-(std::f64::consts::PI.sqrt() / 4.0 * k).powi(2)).exp()
}

#[test]
fn d_app_matches_independent_summation() {
    let w = reference_window();
    // independent route: D = -sum log(1 - phi(k))
    let mut d = 0.0f64;
    for k in -50..=50i64 {
        d -= (1.0 - phi_ref(k as f64)).ln();
    }
    close(w.d_app(), d, 1e-12);
    // frozen 50-digit value
    close(w.d_app(), 2.4993630128619396, 1e-13);
    assert!(w.d_app() >= 0.0);
}

#[test]
fn d_app_is_converged_at_n_50() {
    let model = SpectralModel::power_exponential(1, 0.5f64, 2.0, 2.0);
    let rect = Rect::interval(-5.0, 5.0).unwrap();
    let w50 = DppWindow::build(&model, rect.clone(), 50).unwrap();
    let w100 = DppWindow::build(&model, rect, 100).unwrap();
    assert!((w50.d_app() - w100.d_app()).abs() < 1e-6);
}

#[test]
fn degenerate_spectrum_gives_zero_d_app() {
    let w = DppWindow::from_phi_values(Rect::interval(-1.0, 1.0).unwrap(), 5, vec![0.0; 11]).unwrap();
    assert_eq!(w.d_app(), 0.0);
}

#[test]
fn spectral_value_at_one_is_an_existence_violation() {
    let mut phi = vec![0.0; 11];
    phi[5] = 1.0;
    let err = DppWindow::from_phi_values(Rect::interval(-1.0, 1.0).unwrap(), 5, phi).unwrap_err();
    assert!(matches!(err, Error::ExistenceViolation(_, _)));
}

#[test]
fn kernel_at_zero_is_the_odds_sum() {
    let w = reference_window();
    let mut want = 0.0f64;
    for k in -50..=50i64 {
        let p = phi_ref(k as f64);
        want += p / (1.0 - p);
    }
    close(w.c_app1(0.0), want, 1e-12);
    // frozen value
    close(w.c_app1(0.0), 3.2246340290343297, 1e-13);
}

#[test]
fn kernel_recurrence_matches_direct_cosine_sum() {
    let w = reference_window();
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    for _ in 0..200 {
        let t: f64 = rng.random_range(-1.0..1.0);
        let mut direct = 0.0f64;
        for k in -50..=50i64 {
            let p = phi_ref(k as f64);
            direct += p / (1.0 - p) * (2.0 * std::f64::consts::PI * k as f64 * t).cos();
        }
        close(w.c_app1(t), direct, 1e-11);
    }
}

#[test]
fn kernel_is_even_and_maximized_at_zero() {
    let w = reference_window();
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    let c0 = w.c_app1(0.0);
    for _ in 0..1000 {
        let t: f64 = rng.random_range(-1.0..1.0);
        assert_eq!(w.c_app1(t), w.c_app1(-t));
        assert!(c0 >= w.c_app1(t).abs());
    }
}

/// Recursive cofactor expansion, the independent determinant oracle.
fn cofactor_det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    if n == 1 {
        return m[0][0];
    }
    let mut acc = 0.0;
    let mut sign = 1.0;
    for j in 0..n {
        let minor: Vec<Vec<f64>> = m[1..]
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(c, _)| *c != j)
                    .map(|(_, &v)| v)
                    .collect()
            })
            .collect();
        acc += sign * m[0][j] * cofactor_det(&minor);
        sign = -sign;
    }
    acc
}

fn kernel_rows(w: &DppWindow<f64>, pts: &[f64]) -> Vec<Vec<f64>> {
    pts.iter()
        .map(|&a| pts.iter().map(|&b| w.c_app1(a - b)).collect())
        .collect()
}

#[test]
fn log_density_one_point_is_location_free() {
    let w = reference_window();
    let want = 1.0 - w.d_app() + w.c_app1(0.0).ln();
    close(want, -0.32854354842267466, 1e-12);
    for x in [-0.49, -0.2, 0.0, 0.13, 0.5] {
        close(w.log_density_unit(&[x]).unwrap(), want, 1e-12);
    }
}

#[test]
fn log_density_matches_cofactor_oracle() {
    let w = reference_window();
    let pts = [-0.3, 0.05, 0.4];
    let det = cofactor_det(&kernel_rows(&w, &pts));
    let want = 1.0 - w.d_app() + det.ln();
    let got = w.log_density_unit(&pts).unwrap();
    assert!((got - want).abs() / want.abs() < 1e-10);
    // frozen 50-digit value
    close(got, 2.0036062133022312, 1e-11);
}

#[test]
fn cofactor_oracle_over_random_configurations() {
    let w = reference_window();
    let mut rng = ChaCha12Rng::seed_from_u64(11);
    for trial in 0..400 {
        let n = 1 + trial % 5;
        let pts: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
        let det = cofactor_det(&kernel_rows(&w, &pts));
        let got = w.log_density_unit(&pts).unwrap();
        if det <= 0.0 {
            assert_eq!(got, f64::NEG_INFINITY);
            continue;
        }
        let want = 1.0 - w.d_app() + det.ln();
        let denom = want.abs().max(1.0);
        assert!(
            (got - want).abs() / denom < 1e-8,
            "n = {n}: got {got}, want {want}"
        );
    }
}

#[test]
fn empty_configuration_has_zero_density() {
    let w = reference_window();
    assert_eq!(w.log_density_unit(&[]).unwrap(), f64::NEG_INFINITY);
    assert_eq!(w.log_density_rect(&[]).unwrap(), f64::NEG_INFINITY);
}

#[test]
fn coincident_points_have_vanishing_density() {
    // pairwise-distinct is a precondition; at exact coincidence the kernel
    // matrix is singular and the density must collapse (either -inf or a
    // round-off-level determinant)
    let w = reference_window();
    let v = w.log_density_unit(&[0.1, 0.1]).unwrap();
    let separated = w.log_density_unit(&[-0.2, 0.2]).unwrap();
    assert!(v < separated - 25.0, "coincident density {v} vs separated {separated}");
}

#[test]
fn points_outside_the_window_error() {
    let w = reference_window();
    assert!(matches!(w.log_density_unit(&[0.6]), Err(Error::PointOutsideWindow)));
    assert!(matches!(w.log_density_rect(&[5.5]), Err(Error::PointOutsideWindow)));
}

#[test]
fn permutation_invariance() {
    let w = reference_window();
    let pts = [-0.41, -0.11, 0.03, 0.27, 0.46];
    let base = w.log_density_unit(&pts).unwrap();
    let perms: [[usize; 5]; 4] =
        [[4, 3, 2, 1, 0], [1, 0, 3, 2, 4], [2, 4, 0, 3, 1], [3, 0, 4, 1, 2]];
    for perm in perms {
        let shuffled: Vec<f64> = perm.iter().map(|&i| pts[i]).collect();
        let v = w.log_density_unit(&shuffled).unwrap();
        assert!((v - base).abs() < 1e-10);
    }
}

#[test]
fn rescaling_identities() {
    // R = S: the rectangle density must equal the unit density exactly
    let model = SpectralModel::power_exponential(1, 0.5f64, 2.0, 2.0);
    let w = DppWindow::build(&model, Rect::interval(-0.5, 0.5).unwrap(), 50).unwrap();
    let pts = [-0.3, 0.05, 0.4];
    let unit = w.log_density_unit(&pts).unwrap();
    let rect = w.log_density_rect(&pts).unwrap();
    close(rect, unit, 1e-12);

    // R = [-5, 5]: hand-composed formula with |R| = 10
    let w = reference_window();
    let scaled: Vec<f64> = pts.iter().map(|&p| p * 10.0).collect();
    let got = w.log_density_rect(&scaled).unwrap();
    let want = -3.0 * 10.0f64.ln() + (10.0 - 1.0) + w.log_density_unit(&pts).unwrap();
    close(got, want, 1e-12);
    // frozen 50-digit value
    close(got, 4.0958509343200942, 1e-11);
}

#[test]
fn two_point_density_increases_with_separation() {
    let w = reference_window();
    let mut prev = f64::NEG_INFINITY;
    for i in 1..=200 {
        let half_sep = 0.25 * i as f64 / 200.0;
        let v = w.log_density_unit(&[-half_sep, half_sep]).unwrap();
        assert!(v >= prev, "repulsion must be monotone in separation");
        prev = v;
    }
}

#[test]
fn schur_factor_matches_full_determinant_ratio() {
    let w = reference_window();
    let mut rng = ChaCha12Rng::seed_from_u64(13);
    for n in 2..=6usize {
        for _ in 0..50 {
            let pts: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
            let k = rng.random_range(0..n);
            let Some(schur) = w.schur_factor(&pts, k) else { continue };
            let full = w.log_det_kernel(&pts);
            let others: Vec<f64> = pts
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != k)
                .map(|(_, &v)| v)
                .collect();
            let minor = w.log_det_kernel(&others);
            let (Some(full), Some(minor)) = (full, minor) else { continue };
            let ratio = (full - minor).exp();
            assert!(
                (schur - ratio).abs() <= 1e-10 * ratio.abs().max(1.0),
                "schur {schur} vs det ratio {ratio}"
            );
        }
    }
}

#[test]
fn count_moments_closed_form() {
    let w = reference_window();
    let m = w.prior_count_moments();
    // sum phi(k) = 2 exactly for this model (50-digit value)
    close(m.mean, 2.0, 1e-12);
    close(m.var, 1.2928932187962534, 1e-12);
    close(m.p_zero, 0.082137302368887808, 1e-12);
    close(m.cond_mean, 2.1789751399220686, 1e-12);
    close(m.cond_var, 1.0186087106111688, 1e-12);
}

#[test]
fn count_pmf_matches_frozen_conditional_law() {
    let w = reference_window();
    let pmf = w.count_pmf(10);
    let p_pos = 1.0 - pmf[0];
    let want = [
        (1, 0.28856466327194143),
        (2, 0.36836257282601664),
        (3, 0.23929370315964193),
        (4, 0.085095498040605549),
        (5, 0.016785049346217871),
        (6, 0.0017954121312236325),
        (7, 0.00010033475685553506),
        (8, 2.7318447587114244e-6),
    ];
    for (k, p) in want {
        close(pmf[k] / p_pos, p, 1e-12);
    }
}

#[test]
fn count_sampler_matches_the_closed_form() {
    let w = reference_window();
    let m = w.prior_count_moments();
    let mut rng = ChaCha12Rng::seed_from_u64(17);
    let n = 1_000_000usize;
    let mut total = 0u64;
    for _ in 0..n {
        let k = w.prior_count_sample(&mut rng).unwrap();
        assert!(k >= 1);
        total += k as u64;
    }
    let emp_mean = total as f64 / n as f64;
    let se = (m.cond_var / n as f64).sqrt();
    assert!(
        (emp_mean - m.cond_mean).abs() < 3.0 * se,
        "empirical {emp_mean} vs {} (se {se})",
        m.cond_mean
    );
}

#[test]
fn point_mass_spectrum_always_yields_one_point() {
    let mut phi = vec![0.0f64; 11];
    phi[5] = 0.5; // k = 0 only
    let w = DppWindow::from_phi_values(Rect::interval(-1.0, 1.0).unwrap(), 5, phi).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(23);
    for _ in 0..200 {
        assert_eq!(w.prior_count_sample(&mut rng).unwrap(), 1);
    }
}

#[test]
fn all_zero_spectrum_cannot_be_conditioned() {
    let w = DppWindow::from_phi_values(Rect::interval(-1.0, 1.0).unwrap(), 5, vec![0.0; 11]).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(29);
    assert!(matches!(w.prior_count_sample(&mut rng), Err(Error::DegeneratePrior)));
}

#[test]
fn two_dimensional_window_basics() {
    let model = SpectralModel::power_exponential(2, 0.5f64, 2.0, 2.0);
    let rect = Rect::new(vec![-1.0, -2.0], vec![1.0, 2.0]).unwrap();
    let w = DppWindow::build(&model, rect, 8).unwrap();
    assert!(w.d_app() > 0.0);
    // kernel evenness and maximum at the origin
    let c0 = w.c_app(&[0.0, 0.0]);
    for t in [[0.1, 0.2], [0.35, -0.1], [-0.25, -0.4]] {
        let v = w.c_app(&t);
        let neg = w.c_app(&[-t[0], -t[1]]);
        assert!((v - neg).abs() < 1e-12);
        assert!(c0 >= v.abs());
    }
    // 2-point density: separation helps in 2d as well
    let near = w.log_density_unit_nd(&[0.0, 0.0, 0.05, 0.05], 2).unwrap();
    let far = w.log_density_unit_nd(&[-0.3, -0.3, 0.3, 0.3], 2).unwrap();
    assert!(far > near);
    // rect rescaling identity in 2d
    let pts_unit = [-0.2, -0.1, 0.3, 0.25];
    let pts_rect: Vec<f64> = vec![
        -0.2 * 2.0, -0.1 * 4.0, 0.3 * 2.0, 0.25 * 4.0,
    ];
    let vol: f64 = 8.0;
    let want = -2.0 * vol.ln() + (vol - 1.0) + w.log_density_unit_nd(&pts_unit, 2).unwrap();
    close(w.log_density_rect_nd(&pts_rect, 2).unwrap(), want, 1e-12);
}
