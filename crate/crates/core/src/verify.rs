//! Named identity checks across all modules, used by `maryland verify`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::cocycle::{check_orbit, cocycle_product_with, transfer_matrix, Precision, ScaledMat2C};
use crate::error::{Error, Result};
use crate::minsol::{wronskian, MinSolContext};
use crate::params::{perturb_off_resonance, renorm_params, SpectralParams};
use crate::quadrature::residue_by_circle;
use crate::renorm::{
    cascade, cascade_reconstruct, cascade_within_budget, monodromy_matrix, psi_transport, renormalize_once_with, CascadeOptions,
    FundamentalSolution,
};
use crate::sigma::{zero_lattice, SigmaContext};

/// Distance from the resonance lattice below which `verify` moves η.
pub const VERIFY_RESONANCE_GAP: f64 = 1e-4;
/// Largest `|N|` used for the transport identity.
pub const TRANSPORT_N_MAX: i64 = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyConfig {
    pub params: SpectralParams,
    pub n: i64,
    /// Multiplies every check tolerance.
    pub tol_scale: f64,
    pub precision: Precision,
    /// Deepest cascade level; `None` goes down to a single factor.
    pub depth: Option<usize>,
    /// Sample points per check.
    pub samples: usize,
    pub seed: u64,
}

impl VerifyConfig {
    pub fn new(params: SpectralParams, n: i64) -> Self {
        VerifyConfig {
            params,
            n,
            tol_scale: 1.0,
            precision: Precision::Double,
            depth: None,
            samples: 8,
            seed: 2024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub anchor: String,
    pub description: String,
    /// `None` when the check could not be evaluated.
    pub residual: Option<f64>,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Perturbation {
    pub original_eta: f64,
    pub eta: f64,
    pub resonance_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub params: SpectralParams,
    pub n: i64,
    pub perturbation: Option<Perturbation>,
    pub checks: Vec<CheckResult>,
    pub all_passed: bool,
}

struct Suite {
    tol_scale: f64,
    checks: Vec<CheckResult>,
}

impl Suite {
    fn run(&mut self, anchor: &str, description: &str, tolerance: f64, f: impl FnOnce() -> Result<f64>) {
        let tolerance = tolerance * self.tol_scale;
        let (residual, detail) = match f() {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let passed = residual.is_some_and(|r| r <= tolerance);
        self.checks.push(CheckResult {
            anchor: anchor.into(),
            description: description.into(),
            residual,
            tolerance,
            passed,
            detail,
        });
    }

    /// Passes when `f` fails with an error accepted by `expected`.
    fn expect_error<T>(
        &mut self,
        anchor: &str,
        description: &str,
        f: impl FnOnce() -> Result<T>,
        expected: impl Fn(&Error) -> bool,
    ) {
        let (passed, detail) = match f() {
            Ok(_) => (false, "no error raised".to_string()),
            Err(e) => (expected(&e), e.to_string()),
        };
        self.checks.push(CheckResult {
            anchor: anchor.into(),
            description: description.into(),
            residual: Some(if passed { 0.0 } else { 1.0 }),
            tolerance: 0.0,
            passed,
            detail: Some(detail),
        });
    }
}

fn max_over<T>(items: impl IntoIterator<Item = T>, f: impl Fn(T) -> Result<f64>) -> Result<f64> {
    items.into_iter().try_fold(0.0f64, |acc, x| Ok(acc.max(f(x)?)))
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

/// First orbit index in `[min(0,N), max(0,N)]` whose point `θ+kω` lies on
/// the pole set of the potential.
/// Points off the real axis with `|Im z| ∈ [0.3, 3]`, alternating half-planes.
fn complex_points(rng: &mut StdRng, count: usize) -> Vec<Complex64> {
    (0..count)
        .map(|j| {
            let y = rng.gen_range(0.3..3.0) * if j % 2 == 0 { 1.0 } else { -1.0 };
            Complex64::new(rng.gen_range(-2.0..2.0), y)
        })
        .collect()
}

/// Runs every check. Invalid parameters and a θ orbit through the pole
/// set of the potential are reported as errors before any computation; η
/// within [`VERIFY_RESONANCE_GAP`] of the resonance lattice is moved off it
/// and the move is recorded in the report.
pub fn run_verification(cfg: &VerifyConfig) -> Result<VerifyReport> {
    cfg.params.validate()?;
    check_orbit(&cfg.params, cfg.n)?;
    let mut p = cfg.params;
    let (eta, moved) = perturb_off_resonance(p.eta, p.omega, VERIFY_RESONANCE_GAP);
    let perturbation = moved.then(|| Perturbation {
        original_eta: p.eta,
        eta,
        resonance_distance: p.resonance_distance(),
    });
    p.eta = eta;

    let mut suite = Suite {
        tol_scale: cfg.tol_scale,
        checks: Vec::new(),
    };
    let mut rng = StdRng::seed_from_u64(cfg.seed);
    let omega = p.omega;
    let count = cfg.samples.max(2);

    match SigmaContext::new(omega) {
        Ok(sigma) => sigma_checks(&mut suite, &sigma, &mut rng, count),
        Err(e) => suite.run("sigma-construction", "sigma engine for the given omega", 0.0, || Err(e)),
    }

    let ctx = match MinSolContext::new(p) {
        Ok(c) => Arc::new(c),
        Err(e) => {
            suite.run("minsol-construction", "minimal solution for the given parameters", 0.0, || Err(e));
            return Ok(finish(p, cfg.n, perturbation, suite));
        }
    };
    minsol_checks(&mut suite, &ctx, &mut rng, count);
    renorm_checks(&mut suite, &ctx, &p, cfg, &mut rng, count);
    negative_checks(&mut suite, &p);
    Ok(finish(p, cfg.n, perturbation, suite))
}

fn finish(params: SpectralParams, n: i64, perturbation: Option<Perturbation>, suite: Suite) -> VerifyReport {
    let all_passed = suite.checks.iter().all(|c| c.passed);
    VerifyReport {
        params,
        n,
        perturbation,
        checks: suite.checks,
        all_passed,
    }
}

fn sigma_checks(suite: &mut Suite, sigma: &SigmaContext, rng: &mut StdRng, count: usize) {
    let w = sigma.omega;
    let reach = PI * (1.0 + w);
    let pts: Vec<Complex64> = (0..count)
        .map(|j| {
            let y = rng.gen_range(0.1..5.0) * if j % 2 == 0 { 1.0 } else { -1.0 };
            Complex64::new(rng.gen_range(-reach..reach), y)
        })
        .collect();
    suite.run(
        "sigma-shift-pi-omega",
        "sigma(z+pi*w) = (1+exp(-iz)) sigma(z-pi*w)",
        1e-10,
        || max_over(&pts, |&z| sigma.first_equation_residual(z)),
    );
    suite.run(
        "sigma-shift-pi",
        "sigma(z+pi) = (1+exp(-iz/w)) sigma(z-pi)",
        1e-10,
        || max_over(&pts, |&z| sigma.second_equation_residual(z)),
    );
    suite.run("sigma-reflection", "sigma(z) sigma(-z) = exp(G(z))", 1e-10, || {
        max_over(&pts, |&z| sigma.sigma_reflection_check(z))
    });
    suite.run("sigma-conjugation", "conj(sigma(conj z)) sigma(-z) = 1", 1e-10, || {
        max_over(&pts, |&z| sigma.sigma_conjugate_relation_check(z))
    });
    suite.run(
        "sigma-residue",
        "closed-form residue of 1/sigma at pi(1+w) against circle quadrature",
        1e-8,
        || {
            let center = Complex64::new(zero_lattice(w, 0, 0), 0.0);
            let closed = sigma.residue_inv_sigma();
            let f = |z: Complex64| sigma.sigma(z).map(|s| 1.0 / s);
            let radius = (0.25 * PI * w).min(0.2);
            let quad = residue_by_circle(f, center, radius, 1e-12)?;
            Ok(rel(quad, closed))
        },
    );
}

fn minsol_checks(suite: &mut Suite, ctx: &MinSolContext, rng: &mut StdRng, count: usize) {
    let omega = ctx.omega();
    let pts = complex_points(rng, 2 * count);
    let reals: Vec<Complex64> = (0..count)
        .map(|_| Complex64::new(rng.gen_range(-0.95..0.95), 0.0))
        .filter(|&z| crate::minsol::nearest_pole(z, omega).1 > 0.02)
        .collect();
    suite.run(
        "upsilon-maryland-equation",
        "Upsilon(z+w) + Upsilon(z-w) = (E - lambda cot(pi z)) Upsilon(z), off the axis",
        1e-8,
        || max_over(&pts, |&z| ctx.maryland_residual(z)),
    );
    suite.run(
        "upsilon-maryland-equation-real",
        "same equation on the real axis through the real-axis representation",
        1e-8,
        || max_over(&reals, |&z| ctx.maryland_residual(z)),
    );
    suite.run(
        "upsilon-second-equation",
        "the 1-shift equation with the conjugate coefficients",
        1e-8,
        || max_over(&pts, |&z| ctx.second_equation_residual(z)),
    );
    suite.run(
        "upsilon-conjugation",
        "Upsilon(conj z) = -conj(Upsilon(z))",
        1e-9,
        || {
            max_over(&pts, |&z| {
                let up = ctx.eval(z)?;
                Ok(rel(ctx.eval(z.conj())?, -up.conj()))
            })
        },
    );
    suite.run(
        "upsilon-real-representation",
        "real-axis representation against the contour integral at Im z = 0.1",
        1e-9,
        || {
            max_over(&reals, |&z| {
                let z = z + Complex64::new(0.0, 0.1);
                Ok(rel(ctx.upsilon_real(z)?, ctx.upsilon(z)?))
            })
        },
    );
    let grid = [
        Complex64::new(0.2, 0.0),
        Complex64::new(0.45, 0.7),
        Complex64::new(-0.3, -0.9),
        Complex64::new(0.1, 1.5),
    ];
    let values = grid
        .iter()
        .map(|&z| wronskian(|u| ctx.eval(u + 1.0), |u| ctx.eval(u), z, omega))
        .collect::<Result<Vec<_>>>();
    let (a_form, b_form) = ctx.wronskian_closed_forms();
    let vals = values.clone();
    suite.run(
        "wronskian-constancy",
        "w(Upsilon(z+1), Upsilon(z)) spread over a z-grid, relative to its mean",
        1e-7,
        move || {
            let v = vals?;
            let mean = v.iter().sum::<Complex64>() / v.len() as f64;
            Ok(v.iter().map(|&x| (x - mean).norm()).fold(0.0, f64::max) / mean.norm())
        },
    );
    let vals = values.clone();
    suite.run(
        "wronskian-closed-form-a",
        "Wronskian against the closed form in the a-coefficients",
        1e-7,
        move || max_over(vals?, |w| Ok(rel(w, a_form))),
    );
    suite.run(
        "wronskian-closed-form-b",
        "Wronskian against the closed form in the b-coefficients",
        1e-7,
        move || max_over(values?, |w| Ok(rel(w, b_form))),
    );
    // the other coefficient sits below the dominant one by e^{-2|eta|y/w}
    suite.run(
        "asymptotic-coefficient-dominant",
        "the growing one of a+, a- recovered from Upsilon at heights 6 and 8",
        1e-4,
        || {
            let k = ctx.asymptotic_coeffs();
            let (ap, am) = ctx.fit_upper_coeffs(6.0, 8.0)?;
            Ok(if ctx.params.eta >= 0.0 {
                rel(ap, k.a_plus)
            } else {
                rel(am, k.a_minus)
            })
        },
    );
}

fn renorm_checks(
    suite: &mut Suite,
    ctx: &Arc<MinSolContext>,
    p: &SpectralParams,
    cfg: &VerifyConfig,
    rng: &mut StdRng,
    count: usize,
) {
    let fs = match FundamentalSolution::from_minsol(ctx.clone(), 1.0.into()) {
        Ok(fs) => fs,
        Err(e) => {
            suite.run("fundamental-solution", "Psi is a fundamental solution", 0.0, || Err(e));
            return;
        }
    };
    let omega = p.omega;
    let xs: Vec<f64> = (0..count).map(|_| rng.gen_range(0.02..0.98)).collect();
    suite.run(
        "psi-matrix-equation",
        "Psi(z+w) = F(z) Psi(z) on [0, 1)",
        1e-8,
        || {
            max_over(&xs, |&x| {
                let f = transfer_matrix(x.into(), p.eta, p.l)?;
                Ok((f * fs.psi(x)?).relative_distance(&fs.psi(x + omega)?))
            })
        },
    );
    suite.run(
        "monodromy-identity",
        "the monodromy of Psi equals F(., eta1, l1)",
        1e-7,
        || {
            let next = renorm_params(p, 1)?.next_params;
            max_over(&xs, |&x| {
                let m = monodromy_matrix(&fs, omega, x)?;
                Ok(m.relative_distance(&transfer_matrix(x.into(), next.eta, next.l)?))
            })
        },
    );
    let direct = cocycle_product_with(p, cfg.n, cfg.precision);
    suite.run(
        "renormalization-identity",
        "P_N against the boundary matrices times the renormalized cocycle",
        1e-7,
        || {
            let once = renormalize_once_with(&fs, p, cfg.n)?;
            let (inner_p, inner_n) = once.inner();
            let inner = cocycle_product_with(&inner_p, inner_n, cfg.precision)?;
            Ok(once.reconstruct(&inner).relative_distance(&direct.clone()?))
        },
    );
    let nt = cfg.n.clamp(-TRANSPORT_N_MAX, TRANSPORT_N_MAX);
    suite.run(
        "transport-identity",
        "P_N = Psi(theta+Nw) Psi^-1(theta) for |N| <= 30",
        1e-8,
        || {
            let t = psi_transport(&fs, omega, p.theta, nt)?;
            Ok(t.relative_distance(&cocycle_product_with(p, nt, cfg.precision)?.to_mat()))
        },
    );
    let opts = CascadeOptions {
        precision: cfg.precision,
        max_depth: cfg.depth.unwrap_or(CascadeOptions::default().max_depth),
        ..CascadeOptions::default()
    };
    suite.run(
        "cascade-reconstruction",
        "cascade down to the deepest level within the error budget, against the direct product",
        opts.error_budget,
        || {
            let chain = cascade_within_budget(p, cfg.n, &opts)?;
            Ok(cascade_reconstruct(&chain).relative_distance(&direct.clone()?))
        },
    );
    cascade_guard(suite, p, cfg.n, &opts, direct);
}

/// The full cascade either reconstructs `P_N` within the budget or refuses
/// with a precision error.
fn cascade_guard(suite: &mut Suite, p: &SpectralParams, n: i64, opts: &CascadeOptions, direct: Result<ScaledMat2C>) {
    let (residual, passed, detail) = match (cascade(p, n, opts), direct) {
        (Ok(chain), Ok(d)) => {
            let err = cascade_reconstruct(&chain).relative_distance(&d);
            (Some(err), err <= opts.error_budget, None)
        }
        (Err(e @ Error::Precision { .. }), _) => (None, true, Some(format!("refused: {e}"))),
        (Err(e), _) | (_, Err(e)) => (None, false, Some(e.to_string())),
    };
    suite.checks.push(CheckResult {
        anchor: "cascade-precision-guard".into(),
        description: "the full cascade is accurate whenever it does not refuse".into(),
        residual,
        tolerance: opts.error_budget,
        passed,
        detail,
    });
}

fn negative_checks(suite: &mut Suite, p: &SpectralParams) {
    let resonant = SpectralParams { eta: PI * p.omega, ..*p };
    suite.expect_error(
        "resonance-rejected",
        "eta = pi*w gives a degenerate Psi, which is refused",
        || {
            let ctx = Arc::new(MinSolContext::new(resonant)?);
            FundamentalSolution::from_minsol(ctx, 1.0.into())
        },
        |e| matches!(e, Error::SingularFundamental { .. }),
    );
    let on_pole = SpectralParams { theta: 0.0, ..*p };
    suite.expect_error(
        "potential-pole-rejected",
        "theta = 0 puts the orbit on a pole of cot(pi z)",
        || crate::cocycle::cocycle_product(&on_pole, 3),
        |e| matches!(e, Error::PotentialPole { .. }),
    );
    suite.expect_error(
        "minsol-pole-rejected",
        "Upsilon is not evaluated at its pole z = w",
        || MinSolContext::new(*p)?.eval(p.omega.into()),
        |e| matches!(e, Error::MinSolPole { .. }),
    );
}
