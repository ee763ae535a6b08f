//! Acceptance criteria, one pass/fail line each. Exits nonzero if any fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use maryland::cocycle::{cocycle_product, cot_pi, transfer_matrix};
use maryland::minsol::{nearest_pole, MinSolContext};
use maryland::quadrature::residue_by_circle;
use maryland::renorm::*;
use maryland::sigma::{gaussian_exponent, zero_lattice, SigmaContext};
use maryland::{renorm_params, run_verification, Error, SpectralParams, VerifyConfig};
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const GOLDEN: f64 = 0.618_033_988_749_894_9;
const SILVER: f64 = 0.414_213_562_373_095_1;
const BRONZE: f64 = 0.302_775_637_731_994_6;

struct Outcome {
    pass: bool,
    summary: String,
}

fn outcome(pass: bool, summary: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        summary: summary.into(),
    }
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

fn default_params() -> SpectralParams {
    SpectralParams::new(GOLDEN, 0.3, 1.0, 0.5).unwrap()
}

fn sigma_suite() -> Outcome {
    let start = Instant::now();
    let mut worst = [0.0f64; 4];
    let mut count = 0;
    for omega in [GOLDEN, SILVER] {
        let s = SigmaContext::new(omega).unwrap();
        let mut rng = StdRng::seed_from_u64(1);
        let reach = PI * (1.0 + omega);
        for j in 0..200 {
            let y = rng.gen_range(0.05..10.0) * if j % 2 == 0 { 1.0 } else { -1.0 };
            let z = Complex64::new(rng.gen_range(-reach..reach), y);
            let sig = |u: Complex64| s.sigma(u).unwrap();
            let w = PI * omega;
            let lhs = sig(z + w);
            worst[0] = worst[0].max((lhs - (1.0 + (-Complex64::i() * z).exp()) * sig(z - w)).norm() / lhs.norm());
            let lhs = sig(z + PI);
            worst[1] = worst[1].max((lhs - (1.0 + (-Complex64::i() * z / omega).exp()) * sig(z - PI)).norm() / lhs.norm());
            let g = gaussian_exponent(omega, z).exp();
            worst[2] = worst[2].max((sig(z) * sig(-z) - g).norm() / g.norm());
            worst[3] = worst[3].max((sig(z.conj()).conj() * sig(-z) - 1.0).norm());
            count += 1;
        }
    }
    let time = start.elapsed();
    let max = worst.iter().copied().fold(0.0, f64::max);
    outcome(
        max < 1e-10 && time < Duration::from_secs(30),
        format!(
            "sigma relations at {count} points: shift-pi*w {:.1e}, shift-pi {:.1e}, reflection {:.1e}, conjugation {:.1e} (< 1e-10), {:.2?} (< 30 s)",
            worst[0], worst[1], worst[2], worst[3], time
        ),
    )
}

fn residue_check() -> Outcome {
    let mut worst = 0.0f64;
    for omega in [GOLDEN, SILVER] {
        let s = SigmaContext::new(omega).unwrap();
        let center = Complex64::new(zero_lattice(omega, 0, 0), 0.0);
        let closed = s.residue_inv_sigma();
        let quad = residue_by_circle(|z| Ok(1.0 / s.sigma(z)?), center, 0.1, 1e-13).unwrap();
        worst = worst.max(rel(quad, closed));
    }
    outcome(worst < 1e-8, format!("residue of 1/sigma at pi(1+w) vs circle quadrature: {worst:.1e} (< 1e-8)"))
}

/// `|a + b − c| / (|a| + |b| + |c|)`.
fn three_term(a: Complex64, b: Complex64, c: Complex64) -> f64 {
    (a + b - c).norm() / (a.norm() + b.norm() + c.norm())
}

fn maryland_lhs_rhs(p: &SpectralParams, f: impl Fn(Complex64) -> Complex64, z: Complex64) -> f64 {
    let k = p.energy() - p.coupling() * cot_pi(z);
    three_term(f(z + p.omega), f(z - p.omega), k * f(z))
}

fn second_lhs_rhs(p: &SpectralParams, f: impl Fn(Complex64) -> Complex64, z: Complex64) -> f64 {
    let (eta1, l1) = (p.eta / p.omega, p.l / p.omega);
    let k = 2.0 * eta1.cos() * l1.cosh() + 2.0 * eta1.sin() * l1.sinh() * cot_pi(z / p.omega);
    three_term(f(z + 1.0), f(z - 1.0), k * f(z))
}

fn equation_suite() -> Outcome {
    let start = Instant::now();
    let mut worst = [0.0f64; 2];
    let mut counts = [0usize; 3];
    for (omega, eta, l) in [(GOLDEN, 1.0, 0.5), (SILVER, -2.0, 1.2)] {
        let p = SpectralParams::new(omega, 0.3, eta, l).unwrap();
        let ctx = MinSolContext::new(p).unwrap();
        let f = |z: Complex64| ctx.eval(z).unwrap();
        let mut rng = StdRng::seed_from_u64(9);
        for half in [1.0, -1.0] {
            for _ in 0..50 {
                let z = Complex64::new(rng.gen_range(-2.5..2.5), half * rng.gen_range(0.1..4.0));
                worst[0] = worst[0].max(maryland_lhs_rhs(&p, f, z));
                worst[1] = worst[1].max(second_lhs_rhs(&p, f, z));
                counts[if half > 0.0 { 0 } else { 1 }] += 1;
            }
        }
        // real points through the real-axis representation alone
        let g = |z: Complex64| ctx.upsilon_real(z).unwrap();
        let clear = |x: f64, shifts: &[f64]| shifts.iter().all(|s| nearest_pole((x + s).into(), omega).1 > 0.03);
        let mut real = 0;
        while real < 20 {
            let x = rng.gen_range(-0.95..0.95);
            if clear(x, &[0.0, omega, -omega]) {
                worst[0] = worst[0].max(maryland_lhs_rhs(&p, g, x.into()));
                real += 1;
            }
            let y = rng.gen_range(-omega..omega) * 0.95;
            if clear(y, &[0.0, 1.0, -1.0]) {
                worst[1] = worst[1].max(second_lhs_rhs(&p, g, y.into()));
            }
        }
        counts[2] += real;
    }
    let time = start.elapsed();
    outcome(
        worst[0] < 1e-8 && worst[1] < 1e-8 && time < Duration::from_secs(120),
        format!(
            "Upsilon equations at {}/{} upper/lower and {} real points: Maryland {:.1e}, second {:.1e} (< 1e-8), {:.2?} (< 2 min)",
            counts[0], counts[1], counts[2], worst[0], worst[1], time
        ),
    )
}

fn wronskian_suite() -> Outcome {
    let p = default_params();
    let ctx = MinSolContext::new(p).unwrap();
    let f = |z: Complex64| ctx.eval(z).unwrap();
    let w = |z: Complex64| f(z + 1.0) * f(z - p.omega) - f(z + 1.0 - p.omega) * f(z);
    let mut grid = Vec::new();
    for x in [0.11, 0.29, 0.47, 0.83] {
        for y in [-1.3, 0.0, 0.7, 2.1] {
            grid.push(Complex64::new(x, y));
        }
    }
    let values: Vec<Complex64> = grid.iter().map(|&z| w(z)).collect();
    let mean = values.iter().sum::<Complex64>() / values.len() as f64;
    let spread = values.iter().map(|v| (v - mean).norm()).fold(0.0, f64::max) / mean.norm();
    let (a_form, b_form) = ctx.wronskian_closed_forms();
    let (ea, eb) = (rel(mean, a_form), rel(mean, b_form));
    outcome(
        spread < 1e-7 && ea < 1e-7 && eb < 1e-7,
        format!(
            "Wronskian over {} points: spread {spread:.1e}, a-form {ea:.1e}, b-form {eb:.1e} (< 1e-7)",
            grid.len()
        ),
    )
}

fn coefficient_fit() -> Outcome {
    let p = default_params();
    let ctx = MinSolContext::new(p).unwrap();
    let u = Complex64::new(p.l, -p.eta) / p.omega;
    let (z1, z2) = (Complex64::new(0.0, 6.0), Complex64::new(0.0, 8.0));
    let (f1, f2) = (ctx.eval(z1).unwrap(), ctx.eval(z2).unwrap());
    // least squares on two heights is the 2x2 solve
    let (p1, m1, p2, m2) = ((u * z1).exp(), (-u * z1).exp(), (u * z2).exp(), (-u * z2).exp());
    let det = p1 * m2 - m1 * p2;
    let (ap, am) = ((f1 * m2 - m1 * f2) / det, (p1 * f2 - f1 * p2) / det);
    let k = ctx.asymptotic_coeffs();
    let (ep, em) = (rel(ap, k.a_plus), rel(am, k.a_minus));
    outcome(
        ep < 1e-4 && em < 1e-4,
        format!("fit at heights 6 and 8: a+ {ep:.1e}, a- {em:.1e} (< 1e-4)"),
    )
}

fn monodromy_suite() -> Outcome {
    let mut rng = StdRng::seed_from_u64(21);
    let mut worst = 0.0f64;
    let mut sets = 0;
    while sets < 5 {
        let omega = [GOLDEN, SILVER, BRONZE][sets % 3];
        let p = SpectralParams::new(omega, 0.3, rng.gen_range(-3.0..3.0), rng.gen_range(0.1..2.0)).unwrap();
        if p.resonance_distance() < 1e-3 {
            continue;
        }
        let fs = FundamentalSolution::from_minsol(Arc::new(MinSolContext::new(p).unwrap()), 1.0.into()).unwrap();
        let next = renorm_params(&p, 1).unwrap().next_params;
        let mut points = 0;
        while points < 10 {
            let x: f64 = rng.gen_range(0.0..1.0);
            let Ok(m) = monodromy_matrix(&fs, omega, x) else { continue };
            let f = transfer_matrix(x.into(), next.eta, next.l).unwrap();
            worst = worst.max(m.relative_distance(&f));
            points += 1;
        }
        sets += 1;
    }
    outcome(worst < 1e-7, format!("monodromy vs F(., eta1, l1), 10 points x 5 sets: {worst:.1e} (< 1e-7)"))
}

fn renormalization_sweep() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut cases = 0;
    for omega in [GOLDEN, SILVER] {
        for theta in [0.13, 0.3, 0.77] {
            for eta in [-2.0, 1.0] {
                for l in [0.3, 1.0] {
                    let p = SpectralParams::new(omega, theta, eta, l).unwrap();
                    for n in [-100, -7, 1, 50, 100] {
                        let once = renormalize_once(&p, n).unwrap();
                        let (ip, n1) = once.inner();
                        let rec = once.reconstruct(&cocycle_product(&ip, n1).unwrap());
                        worst = worst.max(rec.relative_distance(&cocycle_product(&p, n).unwrap()));
                        cases += 1;
                    }
                }
            }
        }
    }
    let time = start.elapsed();
    outcome(
        worst < 1e-7 && time < Duration::from_secs(600),
        format!("one-step identity over {cases} cases: {worst:.1e} (< 1e-7), {time:.2?} (< 10 min)"),
    )
}

fn full_cascade() -> Outcome {
    let p = default_params();
    let n = 100;
    let opts = CascadeOptions {
        error_budget: f64::INFINITY,
        ..CascadeOptions::default()
    };
    let bound = 2.0 * (n as f64).log2() + 4.0;
    match cascade(&p, n, &opts) {
        Ok(chain) => {
            let err = cascade_reconstruct(&chain).relative_distance(&cocycle_product(&p, n).unwrap());
            let levels = chain.levels.len();
            outcome(
                err < 1e-6 && (levels as f64) <= bound && chain.terminal_n.abs() <= 1,
                format!(
                    "cascade N=100 golden to |N_k| <= 1: {levels} levels (<= {bound:.1}), error {err:.1e} (< 1e-6), predicted {:.1e}",
                    chain.predicted_error()
                ),
            )
        }
        Err(e) => outcome(false, format!("cascade N=100 golden: {e}")),
    }
}

fn transport_identity() -> Outcome {
    let mut worst = 0.0f64;
    for (omega, eta, l) in [(GOLDEN, 1.0, 0.5), (SILVER, -2.0, 0.3)] {
        let p = SpectralParams::new(omega, 0.3, eta, l).unwrap();
        let fs = FundamentalSolution::from_minsol(Arc::new(MinSolContext::new(p).unwrap()), 1.0.into()).unwrap();
        for n in -30..=30 {
            let t = psi_transport(&fs, omega, p.theta, n).unwrap();
            worst = worst.max(t.relative_distance(&cocycle_product(&p, n).unwrap().to_mat()));
        }
    }
    outcome(worst < 1e-8, format!("P_N = Psi(theta+Nw) Psi^-1(theta) for |N| <= 30: {worst:.1e} (< 1e-8)"))
}

fn degenerate_handling() -> Outcome {
    let mut notes = Vec::new();
    let p = default_params();
    let resonant = SpectralParams { eta: PI * GOLDEN, ..p };
    let on_pole = SpectralParams { theta: 0.0, ..p };
    let mut ok = true;
    let mut expect = |name: &str, hit: bool| {
        ok &= hit;
        if !hit {
            notes.push(name.to_string());
        }
    };
    expect("resonance flagged", MinSolContext::new(resonant).unwrap().is_resonant());
    expect(
        "resonant step refused",
        matches!(renormalize_once(&resonant, 10), Err(Error::SingularFundamental { .. })),
    );
    expect(
        "resonant cascade refused",
        matches!(cascade(&resonant, 10, &CascadeOptions::default()), Err(Error::SingularFundamental { .. })),
    );
    expect(
        "theta = 0 product refused",
        matches!(cocycle_product(&on_pole, 5), Err(Error::PotentialPole { .. })),
    );
    expect(
        "theta = 0 step refused",
        matches!(renormalize_once(&on_pole, 5), Err(Error::PotentialPole { .. })),
    );
    expect(
        "theta = 0 verify refused",
        matches!(run_verification(&VerifyConfig::new(on_pole, 50)), Err(Error::PotentialPole { .. })),
    );
    expect(
        "pole of Upsilon refused",
        matches!(MinSolContext::new(p).unwrap().eval(GOLDEN.into()), Err(Error::MinSolPole { .. })),
    );
    match run_verification(&VerifyConfig::new(resonant, 50)) {
        Ok(r) => {
            expect("resonant verify records perturbation", r.perturbation.is_some());
            expect("resonant verify passes after perturbation", r.all_passed);
            let neg = r.checks.iter().filter(|c| c.anchor.ends_with("-rejected"));
            expect("negative checks pass", neg.clone().count() == 3 && neg.into_iter().all(|c| c.passed));
        }
        Err(_) => expect("resonant verify runs", false),
    }
    let summary = if ok {
        "resonance and pole inputs raise documented errors or recorded perturbations".to_string()
    } else {
        format!("unexpected behaviour: {}", notes.join(", "))
    };
    outcome(ok, summary)
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("sigma suite", sigma_suite),
        ("residue", residue_check),
        ("Upsilon equations", equation_suite),
        ("Wronskian", wronskian_suite),
        ("coefficient fit", coefficient_fit),
        ("monodromy", monodromy_suite),
        ("renormalization identity", renormalization_sweep),
        ("cascade", full_cascade),
        ("transport identity", transport_identity),
        ("degenerate handling", degenerate_handling),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let o = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| outcome(false, "panicked"));
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {}: {} ({})",
            k + 1,
            if o.pass { "PASS" } else { "FAIL" },
            name,
            o.summary
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
