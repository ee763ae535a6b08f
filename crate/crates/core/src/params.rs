//! Parameter algebra for the Maryland equation.
//!
//! The spectral data `(E, λ)` is carried as `(η, l)` with
//! `E + iλ = 2 cos(η + il)`, i.e. `E = 2 cosh l cos η` and
//! `λ = −2 sinh l sin η`. One renormalization step sends
//! `(ω, θ, η, l, N)` to `({1/ω}, {θ/ω}, η/ω mod 2π, l/ω, −⌊θ + Nω⌋)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

/// Distance to a rational `p/q`, `q ≤ q_max`, below which a frequency is
/// reported as near-rational.
pub const RATIONAL_TOL: f64 = 1e-9;
pub const RATIONAL_Q_MAX: u64 = 64;
/// Tolerance for detecting `η` on the resonance lattice.
pub const RESONANCE_TOL: f64 = 1e-8;
/// A Gauss-map iterate this close to an integer ends the chain.
pub const CHAIN_FLOOR: f64 = 1e-9;

/// `(ω, θ, η, l)`; `E` and `λ` are derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralParams {
    pub omega: f64,
    pub theta: f64,
    pub eta: f64,
    pub l: f64,
}

impl SpectralParams {
    pub fn new(omega: f64, theta: f64, eta: f64, l: f64) -> Result<Self> {
        let p = SpectralParams {
            omega,
            theta,
            eta,
            l,
        };
        p.validate()?;
        Ok(p)
    }

    /// Build from `(E, λ)` with `λ > 0`.
    pub fn from_energy(omega: f64, theta: f64, energy: f64, lambda: f64) -> Result<Self> {
        let (eta, l) = params_from_energy(energy, lambda)?;
        Self::new(omega, theta, eta, l)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega < 1.0) {
            return Err(Error::Domain(format!("omega = {} not in (0, 1)", self.omega)));
        }
        if !(0.0..1.0).contains(&self.theta) {
            return Err(Error::Domain(format!("theta = {} not in [0, 1)", self.theta)));
        }
        if !(self.eta > -PI && self.eta <= PI) {
            return Err(Error::Domain(format!("eta = {} not in (-pi, pi]", self.eta)));
        }
        if !(self.l > 0.0 && self.l.is_finite()) {
            return Err(Error::Domain(format!("l = {} must be positive", self.l)));
        }
        if !(self.energy().is_finite() && self.coupling().is_finite()) {
            return Err(Error::Domain("E or lambda overflows".into()));
        }
        Ok(())
    }

    /// `E = 2 cosh l cos η`.
    pub fn energy(&self) -> f64 {
        2.0 * self.l.cosh() * self.eta.cos()
    }

    /// `λ = −2 sinh l sin η`.
    pub fn coupling(&self) -> f64 {
        -2.0 * self.l.sinh() * self.eta.sin()
    }

    /// `η + il`, the complex spectral parameter.
    pub fn spectral_point(&self) -> Complex64 {
        Complex64::new(self.eta, self.l)
    }

    /// Nearest rational `p/q` (`q ≤ q_max`) within `tol` of ω, if any.
    pub fn near_rational(&self, tol: f64, q_max: u64) -> Option<(u64, u64)> {
        near_rational(self.omega, tol, q_max)
    }

    /// Distance from η to the resonance lattice, see [`resonance_distance`].
    pub fn resonance_distance(&self) -> f64 {
        resonance_distance(self.eta, self.omega)
    }

    pub fn is_resonant(&self, tol: f64) -> bool {
        self.resonance_distance() < tol
    }
}

/// Inverts `E + iλ = 2 cos(η + il)` for `λ > 0`, returning `(η, l)` with
/// `l > 0` and `η ∈ (−π, 0)`.
pub fn params_from_energy(energy: f64, lambda: f64) -> Result<(f64, f64)> {
    if !(lambda > 0.0) || !energy.is_finite() || !lambda.is_finite() {
        return Err(Error::Domain(format!(
            "lambda = {lambda} must be positive and E = {energy} finite"
        )));
    }
    let u = Complex64::new(energy, lambda) * 0.5;
    let mut w = u.acos();
    if w.im < 0.0 {
        w = -w;
    }
    // Newton polish on cos w = u.
    for _ in 0..3 {
        let f = w.cos() - u;
        let df = -w.sin();
        if df.norm() < 1e-300 {
            break;
        }
        let step = f / df;
        w -= step;
        if step.norm() < 1e-17 * (1.0 + w.norm()) {
            break;
        }
    }
    let (eta, l) = (w.re, w.im);
    if !(l > 0.0 && eta > -PI && eta < 0.0) {
        return Err(Error::Domain(format!(
            "inversion of (E, lambda) = ({energy}, {lambda}) left the principal branch: eta = {eta}, l = {l}"
        )));
    }
    Ok((eta, l))
}

/// Integer part `⌊x⌋` and fractional part `{x} = x − ⌊x⌋ ∈ [0, 1)`.
pub fn floor_frac(x: f64) -> (i64, f64) {
    let n = x.floor();
    let mut f = x - n;
    let mut n = n as i64;
    if f >= 1.0 {
        f -= 1.0;
        n += 1;
    }
    (n, f)
}

/// Reduce an angle to `(−π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let tau = 2.0 * PI;
    let mut r = x - tau * (x / tau).round();
    if r <= -PI {
        r += tau;
    } else if r > PI {
        r -= tau;
    }
    r
}

/// Distance from η to `{±π(kω + m) : k, m ≥ 0}`; the asymptotic
/// coefficients of the minimal solution vanish on this set and its
/// fundamental matrix degenerates.
pub fn resonance_distance(eta: f64, omega: f64) -> f64 {
    let x = eta.abs() / PI;
    let mut best = f64::INFINITY;
    let m_max = x.floor() as i64 + 1;
    for m in 0..=m_max {
        let r = x - m as f64;
        // nearest k ≥ 0 with kω ≈ r
        let k = (r / omega).round().max(0.0);
        best = best.min((r - k * omega).abs());
    }
    best * PI
}

pub fn near_rational(x: f64, tol: f64, q_max: u64) -> Option<(u64, u64)> {
    for q in 1..=q_max {
        let p = (x * q as f64).round();
        if (x - p / q as f64).abs() < tol {
            return Some((p as u64, q));
        }
    }
    None
}

/// Resonance status of a renormalized `η₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResonanceWarning {
    pub eta: f64,
    pub distance: f64,
}

/// One application of the parameter renormalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RenormStep {
    pub params: SpectralParams,
    pub n_steps: i64,
    pub next_params: SpectralParams,
    pub n_next: i64,
    pub resonance: Option<ResonanceWarning>,
}

pub fn renorm_params(p: &SpectralParams, n: i64) -> Result<RenormStep> {
    p.validate()?;
    let inv = 1.0 / p.omega;
    let (_, omega1) = floor_frac(inv);
    if omega1 < CHAIN_FLOOR || 1.0 - omega1 < CHAIN_FLOOR {
        return Err(Error::RationalFrequency {
            step: 1,
            value: omega1,
        });
    }
    let (_, theta1) = floor_frac(p.theta * inv);
    let (floor_orbit, _) = floor_frac(p.theta + n as f64 * p.omega);
    let eta1 = wrap_angle(p.eta * inv);
    let l1 = p.l * inv;
    let next = SpectralParams {
        omega: omega1,
        theta: theta1,
        eta: eta1,
        l: l1,
    };
    next.validate()?;
    let distance = resonance_distance(eta1, omega1);
    let resonance = (distance < RESONANCE_TOL).then_some(ResonanceWarning { eta: eta1, distance });
    Ok(RenormStep {
        params: *p,
        n_steps: n,
        next_params: next,
        n_next: -floor_orbit,
        resonance,
    })
}

/// Why a Gauss chain ended before the requested depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ChainStop {
    /// The next iterate was within [`CHAIN_FLOOR`] of an integer.
    NearRational { step: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussChain {
    pub omegas: Vec<f64>,
    pub stopped: Option<ChainStop>,
}

/// `ω₀ = ω`, `ωₖ = {1/ωₖ₋₁}` for `depth` terms.
pub fn gauss_chain(omega: f64, depth: usize) -> Result<GaussChain> {
    if depth == 0 {
        return Err(Error::Domain("depth must be at least 1".into()));
    }
    if !(omega > 0.0 && omega < 1.0) {
        return Err(Error::Domain(format!("omega = {omega} not in (0, 1)")));
    }
    let mut omegas = vec![omega];
    let mut stopped = None;
    while omegas.len() < depth {
        let prev = *omegas.last().unwrap();
        let (_, next) = floor_frac(1.0 / prev);
        if next == 0.0 {
            return Err(Error::RationalFrequency {
                step: omegas.len(),
                value: next,
            });
        }
        if next < CHAIN_FLOOR || 1.0 - next < CHAIN_FLOOR {
            stopped = Some(ChainStop::NearRational {
                step: omegas.len(),
                value: next,
            });
            break;
        }
        omegas.push(next);
    }
    Ok(GaussChain { omegas, stopped })
}

/// Perturb η off the resonance lattice by `10·tol`, keeping it in `(−π, π]`.
/// Returns the new value and whether a perturbation was applied.
pub fn perturb_off_resonance(eta: f64, omega: f64, tol: f64) -> (f64, bool) {
    if resonance_distance(eta, omega) >= tol {
        return (eta, false);
    }
    let step = 10.0 * tol;
    for cand in [eta + step, eta - step, eta + 2.0 * step, eta - 2.0 * step] {
        if cand > -PI && cand <= PI && resonance_distance(cand, omega) >= tol {
            return (cand, true);
        }
    }
    (eta + step, true)
}
