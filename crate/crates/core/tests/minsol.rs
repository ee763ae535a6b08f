use std::f64::consts::PI;

use maryland::minsol::{wronskian, MinSolContext};
use maryland::quadrature::residue_by_circle;
use maryland::SpectralParams;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

const GOLDEN: f64 = 0.618_033_988_749_894_9;
const SILVER: f64 = 0.414_213_562_373_095_1;

fn ctx(omega: f64, eta: f64, l: f64) -> MinSolContext {
    MinSolContext::new(SpectralParams::new(omega, 0.3, eta, l).unwrap()).unwrap()
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn pole_residues_match_circle_quadrature() {
    for (omega, eta, l) in [(GOLDEN, 1.0, 0.5), (SILVER, -2.0, 0.3)] {
        let c = ctx(omega, eta, l);
        let all: Vec<_> = c.right_poles().iter().chain(c.left_poles()).copied().collect();
        for pole in all.iter().filter(|p| p.point.norm() < 8.0) {
            let gap = all
                .iter()
                .map(|q| (q.point - pole.point).norm())
                .filter(|&d| d > 1e-12)
                .fold(f64::INFINITY, f64::min);
            let radius = (0.5 * gap).min(0.1);
            let f = |p: Complex64| c.xhat(p);
            let r1 = residue_by_circle(f, pole.point, radius, 1e-12).unwrap();
            let r2 = residue_by_circle(f, pole.point, 0.5 * radius, 1e-12).unwrap();
            let scale = pole.residue.norm().max(1e-300);
            assert!((r1 - pole.residue).norm() < 1e-8 * scale, "at {}: {r1} vs {}", pole.point, pole.residue);
            assert!((r1 - r2).norm() < 1e-8 * scale);
        }
    }
}

#[test]
fn real_axis_representation_agrees_with_contour_near_the_axis() {
    let c = ctx(GOLDEN, 1.0, 0.5);
    for x in [-0.8, -0.3, 0.3, 0.55] {
        for eps in [0.2, 0.1, 0.05, -0.05, -0.1, -0.2] {
            let z = Complex64::new(x, eps);
            let a = c.upsilon(z).unwrap();
            let b = c.upsilon_real(z).unwrap();
            assert!(rel(b, a) < 1e-9, "z={z}: {b} vs {a}");
        }
    }
}

#[test]
fn real_axis_representation_holds_up_to_the_edge_of_its_strip() {
    for (omega, eta, l) in [(GOLDEN, 1.0, 0.5), (SILVER, -2.0, 1.2)] {
        let c = ctx(omega, eta, l);
        for x in [0.75, 0.85, 0.93, 0.99].map(|f| f * (1.0 + omega)) {
            for z in [Complex64::new(x, 0.0), Complex64::new(-x, 0.0), Complex64::new(x, 0.6)] {
                let a = c.eval(z).unwrap();
                let b = c.upsilon_real(z).unwrap();
                assert!(rel(b, a) < 1e-10, "z={z}: {b} vs {a}");
            }
        }
    }
}

#[test]
fn conjugation_antisymmetry_at_random_points() {
    let c = ctx(GOLDEN, 1.0, 0.5);
    let mut rng = rand::rngs::StdRng::seed_from_u64(17);
    for _ in 0..20 {
        let z = Complex64::new(rng.gen_range(-2.5..2.5), rng.gen_range(0.3..3.0));
        let up = c.eval(z).unwrap();
        let down = c.eval(z.conj()).unwrap();
        assert!(rel(down, -up.conj()) < 1e-9, "z={z}");
    }
    for x in [-2.7, -0.4, 0.1, 0.9, 1.4] {
        let u = c.eval(Complex64::new(x, 0.0)).unwrap();
        assert!((u + u.conj()).norm() < 1e-8 * u.norm(), "x={x}");
    }
}

#[test]
fn equation_residuals_off_the_axis() {
    for (omega, eta, l) in [(GOLDEN, 1.0, 0.5), (SILVER, 0.7, 1.5)] {
        let c = ctx(omega, eta, l);
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        for _ in 0..15 {
            let y = rng.gen_range(0.5..3.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let z = Complex64::new(rng.gen_range(-2.0..2.0), y);
            assert!(c.maryland_residual(z).unwrap() < 1e-8, "z={z}");
            assert!(c.second_equation_residual(z).unwrap() < 1e-8, "z={z}");
        }
    }
}

#[test]
fn wronskian_is_omega_periodic_and_matches_both_closed_forms() {
    let c = ctx(GOLDEN, 1.0, 0.5);
    let f = |z: Complex64| c.eval(z + 1.0);
    let g = |z: Complex64| c.eval(z);
    let (a_form, b_form) = c.wronskian_closed_forms();
    assert!(rel(a_form, b_form) < 1e-9);
    for z in [Complex64::new(0.2, 0.0), Complex64::new(0.4, 1.1), Complex64::new(-0.3, -0.8)] {
        let w0 = wronskian(f, g, z, GOLDEN).unwrap();
        let w1 = wronskian(f, g, z + GOLDEN, GOLDEN).unwrap();
        assert!(rel(w1, w0) < 1e-8);
        assert!(rel(w0, a_form) < 1e-7);
    }
}

#[test]
fn xhat_stays_bounded_along_rays() {
    let c = ctx(GOLDEN, 1.0, 0.5);
    for dir in [Complex64::from_polar(1.0, 1.2), Complex64::from_polar(1.0, -2.0)] {
        let samples: Vec<f64> = (1..12)
            .map(|k| c.xhat(dir * (3.0 * k as f64)).unwrap().norm())
            .collect();
        let (lo, hi) = samples.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(hi / lo < 1e3, "{samples:?}");
    }
}

#[test]
fn real_axis_integrand_decays_at_the_predicted_rate() {
    let c = ctx(GOLDEN, 1.0, 0.5);
    let rate = (1.0 + GOLDEN) / GOLDEN;
    let scaled: Vec<f64> = [5.0, 10.0, 20.0, 30.0]
        .iter()
        .map(|&t| c.regularized_integrand(Complex64::new(0.0, -t)).unwrap().norm() * (rate * t).exp())
        .collect();
    let (lo, hi) = scaled.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    assert!(hi / lo < 10.0, "{scaled:?}");
}

#[test]
fn coefficients_recovered_from_upper_asymptotics() {
    for (eta, l) in [(1.0, 0.5), (0.7, 1.5)] {
        let c = ctx(GOLDEN, eta, l);
        let k = c.asymptotic_coeffs();
        let (ap, am) = c.fit_upper_coeffs(6.0, 8.0).unwrap();
        assert!(rel(ap, k.a_plus) < 1e-4);
        assert!(rel(am, k.a_minus) < 1e-4);
    }
}

#[test]
fn resonant_eta_kills_the_subdominant_coefficients() {
    let c = ctx(GOLDEN, PI * GOLDEN, 0.5);
    let k = c.asymptotic_coeffs();
    assert!(c.is_resonant());
    assert!(k.a_minus.norm() < 1e-12 * k.a_plus.norm());
    assert!(k.b_minus.norm() < 1e-12 * k.b_plus.norm());
    let off = ctx(GOLDEN, GOLDEN, 0.5);
    assert!(!off.is_resonant());
    assert!(off.asymptotic_coeffs().a_minus.norm() > 0.1);
}

#[test]
fn every_admissible_eta_lies_in_the_existence_range() {
    let c = ctx(SILVER, 3.0, 0.5);
    let z = Complex64::new(0.2, 1.0);
    assert!(c.maryland_residual(z).unwrap() < 1e-8);
    assert!(MinSolContext::new(SpectralParams { eta: 4.0, ..c.params }).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn conjugation_holds_for_random_parameters(
        eta in -2.5f64..2.5,
        l in 0.1f64..2.0,
        x in -1.5f64..1.5,
        y in 0.6f64..2.5,
    ) {
        let c = ctx(GOLDEN, eta, l);
        let z = Complex64::new(x, y);
        let up = c.upsilon(z).unwrap();
        let down = c.upsilon(z.conj()).unwrap();
        prop_assert!(rel(down, -up.conj()) < 1e-9);
    }

    #[test]
    fn maryland_residual_small_for_random_parameters(
        eta in -2.5f64..2.5,
        l in 0.1f64..2.0,
        x in -1.5f64..1.5,
        y in 0.5f64..3.0,
    ) {
        let c = ctx(SILVER, eta, l);
        prop_assert!(c.maryland_residual(Complex64::new(x, y)).unwrap() < 1e-8);
    }
}
