//! Spot checks of the spectral families and special functions against values
//! computed independently with 50-digit arithmetic (mpmath), plus the domain
//! errors of the parameter space.

use dppmix_core::error::Error;
use dppmix_core::special::{bessel_k, ln_gamma};
use dppmix_core::spectral::{m_threshold, SpectralModel};

fn close(a: f64, b: f64, rel: f64) {
    let scale = b.abs().max(1e-300);
    assert!(
        (a - b).abs() <= rel * scale,
        "got {a:.17e}, want {b:.17e} (rel err {:.3e})",
        (a - b).abs() / scale
    );
}

#[test]
fn m_threshold_reference_values() {
    // closed form at nu = 2, s = 1/2 equals sqrt(pi / log(1/(2 eps)))
    let m = m_threshold(0.5f64, 0.05, 2.0).unwrap();
    close(m, 1.1680652181457341, 1e-14);
    close(m, (std::f64::consts::PI / 10.0f64.ln()).sqrt(), 1e-14);
    close(m_threshold(0.5f64, 0.05, 1.0).unwrap(), 0.86858896380650366, 1e-14);
    close(m_threshold(0.7f64, 0.1, 3.5).unwrap(), 2.0829172387957663, 1e-14);
}

#[test]
fn m_threshold_diverges_at_the_boundary() {
    let mut last = 0.0f64;
    for eps in [0.4, 0.49, 0.499, 0.49999] {
        let m = m_threshold(0.5f64, eps, 2.0).unwrap();
        assert!(m > last, "monotone divergence as eps -> s");
        last = m;
    }
    assert!(m_threshold(0.5f64, 0.499999999, 2.0).unwrap() > 1e3);
    assert!(matches!(m_threshold(0.5f64, 0.5, 2.0), Err(Error::InvalidParameter(_))));
    assert!(matches!(m_threshold(0.5f64, 0.7, 2.0), Err(Error::InvalidParameter(_))));
}

#[test]
fn pes_phi_reference_values() {
    // phi(0) = s^d regardless of (rho, nu)
    for (rho, nu) in [(0.3, 0.7), (2.0, 2.0), (11.0, 5.5)] {
        let m = SpectralModel::power_exponential(1, 0.5f64, rho, nu);
        close(m.phi(&[0.0]), 0.5, 1e-15);
    }
    let m2 = SpectralModel::power_exponential(2, 0.7f64, 3.0, 2.0);
    close(m2.phi(&[0.0, 0.0]), 0.49, 1e-15);

    // by the defining property of M: phi(2; rho = M(s, eps, nu)) = eps
    let mth = m_threshold(0.5f64, 0.05, 2.0).unwrap();
    let m = SpectralModel::power_exponential(1, 0.5, mth, 2.0);
    close(m.phi(&[2.0]), 0.05, 1e-13);

    // direct scalar evaluation of the closed form (frozen from mpmath)
    let m = SpectralModel::power_exponential(1, 0.5f64, 2.0, 2.0);
    close(m.phi(&[1.0]), 0.41086247901693859, 1e-14);
    let m = SpectralModel::power_exponential(1, 0.5f64, 2.5, 1.0);
    close(m.phi(&[0.7]), 0.37789187072786274, 1e-14);
    let m = SpectralModel::power_exponential(2, 0.6f64, 3.0, 2.0);
    close(m.phi(&[1.0, 1.0]), 0.16937611837913444, 1e-14);
}

#[test]
fn pes_phi_is_strictly_decreasing_in_radius() {
    let m = SpectralModel::power_exponential(1, 0.5f64, 2.0, 2.0);
    let mut prev = m.phi(&[0.0]);
    for i in 1..=40 {
        let v = m.phi(&[i as f64 * 0.25]);
        assert!(v < prev, "phi must decrease with |x|");
        prev = v;
    }
}

#[test]
fn whittle_matern_reference_values() {
    let m = SpectralModel::whittle_matern(1, 0.1f64, 1.0, 2.0);
    let rho_max = m.rho_max().unwrap();
    close(rho_max, 2.1220659078919378, 1e-14);
    let m = SpectralModel::whittle_matern(1, 0.1f64, rho_max / 2.0, 2.0);
    m.validate().unwrap();
    close(m.phi(&[0.0]), 0.5, 1e-13);
    close(m.phi(&[1.0]), 0.21762183866238168, 1e-13);
    close(m.phi(&[3.0]), 0.011303479388521945, 1e-13);
}

#[test]
fn generalized_cauchy_reference_values() {
    let m = SpectralModel::generalized_cauchy(1, 0.1f64, 1.0, 2.0);
    let rho_max = m.rho_max().unwrap();
    close(rho_max, 7.5, 1e-14);
    let m = SpectralModel::generalized_cauchy(1, 0.1f64, rho_max / 2.0, 2.0);
    m.validate().unwrap();
    close(m.phi(&[0.0]), 0.5, 1e-13);
    close(m.phi(&[1.0]), 0.45745755284205544, 1e-12);
    close(m.phi(&[3.0]), 0.27013299428946526, 1e-12);

    let m = SpectralModel::generalized_cauchy(1, 1.0f64, 1.0, 0.1);
    let rm = m.rho_max().unwrap();
    let m = SpectralModel::generalized_cauchy(1, 1.0f64, rm / 2.0, 0.1);
    close(m.phi(&[0.5]), 0.0032495871728400142, 1e-12);
}

#[test]
fn invalid_parameters_are_rejected() {
    assert!(SpectralModel::power_exponential(1, 0.5f64, -1.0, 2.0).validate().is_err());
    assert!(SpectralModel::power_exponential(1, 0.5f64, 2.0, 0.0).validate().is_err());
    assert!(SpectralModel::power_exponential(1, 1.0f64, 2.0, 2.0).validate().is_err());
    assert!(SpectralModel::power_exponential(1, 0.0f64, 2.0, 2.0).validate().is_err());
    // rho at or above the existence bound
    let m = SpectralModel::whittle_matern(1, 0.1f64, 1.0, 2.0);
    let rho_max = m.rho_max().unwrap();
    assert!(SpectralModel::whittle_matern(1, 0.1f64, rho_max, 2.0).validate().is_err());
    assert!(SpectralModel::whittle_matern(1, 0.1f64, rho_max * 1.01, 2.0).validate().is_err());
    assert!(SpectralModel::whittle_matern(1, 0.1f64, rho_max * 0.99, 2.0).validate().is_ok());
    let c = SpectralModel::generalized_cauchy(1, 0.1f64, 1.0, 2.0);
    let rho_max = c.rho_max().unwrap();
    assert!(SpectralModel::generalized_cauchy(1, 0.1f64, rho_max + 1e-9, 2.0).validate().is_err());
}

#[test]
fn phi_is_symmetric() {
    for model in [
        SpectralModel::power_exponential(1, 0.5f64, 2.0, 2.0),
        SpectralModel::whittle_matern(1, 0.1f64, 1.0, 2.0),
        SpectralModel::generalized_cauchy(1, 0.1f64, 3.0, 2.0),
    ] {
        for x in [0.3, 1.0, 2.7] {
            assert_eq!(model.phi(&[x]), model.phi(&[-x]));
        }
    }
}

#[test]
fn ln_gamma_reference_values() {
    close(ln_gamma(0.01), 4.5994798780420217, 5e-13);
    close(ln_gamma(0.5), 0.57236494292470009, 5e-13);
    assert!(ln_gamma(1.0).abs() < 1e-13);
    close(ln_gamma(1.5), -0.12078223763524522, 5e-12);
    close(ln_gamma(3.7), 1.4280723266653879, 5e-13);
    close(ln_gamma(10.0), 12.80182748008147, 5e-13);
    close(ln_gamma(25.25), 55.58568604486943, 5e-13);
    close(ln_gamma(171.0), 706.57306224578735, 5e-13);
}

#[test]
fn bessel_k_reference_values() {
    close(bessel_k(0.0, 1.0), 0.42102443824070833, 1e-12);
    close(bessel_k(1.0, 1.0), 0.60190723019723457, 1e-12);
    close(bessel_k(0.5, 2.0), 0.11993777196806145, 1e-12);
    close(bessel_k(2.5, 0.3), 75.152140164374883, 1e-12);
    close(bessel_k(0.1, 5.0), 0.0036944832782554555, 1e-12);
    close(bessel_k(3.0, 0.01), 7999900.0012498825, 1e-12);
    close(bessel_k(4.7, 11.3), 1.1535532486278959e-5, 1e-12);
    close(bessel_k(0.9, 0.004), 143.49199003645089, 1e-12);
    close(bessel_k(12.5, 1.5), 2375387330.098448, 1e-12);
    // half-integer closed form: K_{1/2}(x) = sqrt(pi/(2x)) e^{-x}
    for x in [0.25, 1.0, 3.0, 12.0] {
        let want = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x as f64).exp();
        close(bessel_k(0.5, x), want, 1e-13);
    }
}
