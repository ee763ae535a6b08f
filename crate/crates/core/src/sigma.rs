//! The σ special function: the meromorphic solution of
//! `σ(z+πω) = (1+e^{−iz}) σ(z−πω)` that tends to 1 as `Im z → −∞`.
//!
//! Three evaluation regimes:
//! * `Im z ≤ −δ`: the Fourier series
//!   `log σ(z) = Σ (−1)ⁿ/(2in) [e^{−inz}/sin(πnω) + e^{−inz/ω}/sin(πn/ω)]`;
//! * `Im z ≥ δ`: the reflection `σ(z) = e^{G(z)}/σ(−z)` with the Gaussian
//!   exponent `G`;
//! * `|Im z| < δ`: the line integral
//!   `log σ(z) = ∫_{Im t = c} e^{−zt} / (4 sinh(πt) sinh(πωt) t) dt`,
//!   after moving `Re z` into `[−πω, πω]` with the first functional
//!   equation.
//!
//! The logarithm in the band is the sum of principal logarithms picked up
//! along that reduction, so it can differ from the series branch by
//! multiples of `2πi`; `exp(log σ)` is unaffected.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, LatticeKind, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaOptions {
    /// Half-width of the band around ℝ handled by the line integral.
    pub strip_delta: f64,
    /// Bound on the dropped series tail at `Im z = −strip_delta`.
    pub tail_tol: f64,
    /// Smallest admissible `|sin(πnω)|`, `|sin(πn/ω)|`.
    pub sin_floor: f64,
    /// Distance to the zero/pole lattice below which a value is flagged.
    pub lattice_tol: f64,
}

impl Default for SigmaOptions {
    fn default() -> Self {
        SigmaOptions {
            strip_delta: 0.5,
            tail_tol: 1e-14,
            sin_floor: 1e-12,
            lattice_tol: 1e-9,
        }
    }
}

const MAX_SERIES_TERMS: usize = 20_000;
/// Height of the integration line in the band representation.
const LINE_HEIGHT: f64 = 0.5;
const LINE_STEP: f64 = 1.0 / 16.0;
const LINE_HALF_LENGTH: f64 = 16.0;

/// Precomputed data for evaluating σ at a fixed ω.
#[derive(Debug, Clone)]
pub struct SigmaContext {
    pub omega: f64,
    pub series_cutoff: usize,
    pub strip_delta: f64,
    pub min_sin_denominator: f64,
    options: SigmaOptions,
    /// `(−1)ⁿ/(2n sin(πnω))`, index `n−1`.
    c1: Vec<f64>,
    /// `(−1)ⁿ/(2n sin(πn/ω))`, index `n−1`.
    c2: Vec<f64>,
    /// `max_{m ≥ n} |c1[m]|`, used to stop the series early.
    c1_tail: Vec<f64>,
    c2_tail: Vec<f64>,
    line_nodes: Vec<Complex64>,
    line_weights: Vec<Complex64>,
}

/// A computed `log σ(z)` with its lattice diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SigmaValue {
    pub log_sigma: Complex64,
    pub near: Option<NearLattice>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NearLattice {
    pub kind: LatticeKind,
    pub point: f64,
    pub distance: f64,
}

impl SigmaValue {
    pub fn is_near_singular(&self) -> bool {
        self.near.is_some()
    }

    pub fn value(&self) -> Complex64 {
        self.log_sigma.exp()
    }
}

impl SigmaContext {
    pub fn new(omega: f64) -> Result<Self> {
        Self::with_options(omega, SigmaOptions::default())
    }

    pub fn with_options(omega: f64, options: SigmaOptions) -> Result<Self> {
        if !(omega > 0.0 && omega < 1.0) {
            return Err(Error::Domain(format!("omega = {omega} is not in (0, 1)")));
        }
        if !(options.strip_delta > 0.0) {
            return Err(Error::Domain("strip_delta must be positive".into()));
        }
        let delta = options.strip_delta;
        let decay = (-delta).exp();
        let mut c1 = Vec::new();
        let mut c2 = Vec::new();
        let mut min_sin = f64::INFINITY;
        let mut cutoff = 0;
        for n in 1..=MAX_SERIES_TERMS {
            let nf = n as f64;
            let s1 = (PI * nf * omega).sin();
            let s2 = (PI * nf / omega).sin();
            for s in [s1, s2] {
                if s.abs() < options.sin_floor {
                    return Err(Error::SmallDenominator { n, value: s.abs() });
                }
            }
            min_sin = min_sin.min(s1.abs()).min(s2.abs());
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            c1.push(sign / (2.0 * nf * s1));
            c2.push(sign / (2.0 * nf * s2));
            let tail = decay.powf(nf) / (2.0 * nf * min_sin * (1.0 - decay));
            if tail < options.tail_tol {
                cutoff = n;
                break;
            }
        }
        if cutoff == 0 {
            return Err(Error::SmallDenominator {
                n: MAX_SERIES_TERMS,
                value: min_sin,
            });
        }
        let suffix_max = |c: &[f64]| {
            let mut out = vec![0.0; c.len()];
            let mut m: f64 = 0.0;
            for (i, v) in c.iter().enumerate().rev() {
                m = m.max(v.abs());
                out[i] = m;
            }
            out
        };
        let c1_tail = suffix_max(&c1);
        let c2_tail = suffix_max(&c2);

        let count = (2.0 * LINE_HALF_LENGTH / LINE_STEP).round() as i64;
        let mut line_nodes = Vec::with_capacity(count as usize + 1);
        let mut line_weights = Vec::with_capacity(count as usize + 1);
        for j in 0..=count {
            let t = Complex64::new(-LINE_HALF_LENGTH + j as f64 * LINE_STEP, LINE_HEIGHT);
            let k = 4.0 * (PI * t).sinh() * (PI * omega * t).sinh() * t;
            line_nodes.push(t);
            line_weights.push(LINE_STEP / k);
        }

        Ok(SigmaContext {
            omega,
            series_cutoff: cutoff,
            strip_delta: delta,
            min_sin_denominator: min_sin,
            options,
            c1,
            c2,
            c1_tail,
            c2_tail,
            line_nodes,
            line_weights,
        })
    }

    pub fn options(&self) -> &SigmaOptions {
        &self.options
    }

    /// `log σ(z)`; near the lattice the value is still returned and flagged.
    pub fn log_sigma(&self, z: Complex64) -> Result<SigmaValue> {
        if !z.is_finite() {
            return Err(Error::NonFinite(format!("sigma argument {z}")));
        }
        let near = self.nearest_lattice(z);
        let log_sigma = self.log_sigma_unchecked(z);
        Ok(SigmaValue { log_sigma, near })
    }

    /// `log σ(z)`, failing with `NearSingularValue` close to the lattice.
    pub fn log_sigma_regular(&self, z: Complex64) -> Result<Complex64> {
        let v = self.log_sigma(z)?;
        match v.near {
            Some(n) => Err(Error::NearSingularValue {
                z,
                kind: n.kind,
                point: n.point,
                distance: n.distance,
            }),
            None => Ok(v.log_sigma),
        }
    }

    pub fn sigma(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.log_sigma(z)?.value())
    }

    pub(crate) fn log_sigma_unchecked(&self, z: Complex64) -> Complex64 {
        let d = self.strip_delta;
        if z.im <= -d {
            self.log_sigma_series(z)
        } else if z.im >= d {
            gaussian_exponent(self.omega, z) - self.log_sigma_series(-z)
        } else {
            self.log_sigma_band(z)
        }
    }

    /// The Fourier series; meaningful for `Im z < 0`, accurate to `tail_tol`
    /// for `Im z ≤ −strip_delta`.
    pub fn log_sigma_series(&self, z: Complex64) -> Complex64 {
        let q1 = (-I * z).exp();
        let q2 = (-I * z / self.omega).exp();
        let (a1, a2) = (q1.norm(), q2.norm());
        let mut p1 = q1;
        let mut p2 = q2;
        let mut m1 = a1;
        let mut m2 = a2;
        let mut sum = Complex64::new(0.0, 0.0);
        for n in 0..self.series_cutoff {
            sum += p1 * self.c1[n] + p2 * self.c2[n];
            p1 *= q1;
            p2 *= q2;
            m1 *= a1;
            m2 *= a2;
            let bound = m1 * self.c1_tail.get(n + 1).copied().unwrap_or(0.0) / (1.0 - a1)
                + m2 * self.c2_tail.get(n + 1).copied().unwrap_or(0.0) / (1.0 - a2);
            if bound < 1e-18 {
                break;
            }
        }
        -I * sum
    }

    /// The line integral, valid for `|Re z| < π(1+ω)`; used directly on
    /// `|Re z| ≤ πω`.
    pub fn log_sigma_integral(&self, z: Complex64) -> Complex64 {
        // e^{−z t_j} along equispaced nodes is a geometric progression;
        // restart it every block to keep rounding from accumulating
        const BLOCK: usize = 32;
        let ratio = (-z * LINE_STEP).exp();
        let mut sum = Complex64::new(0.0, 0.0);
        let mut factor = Complex64::new(0.0, 0.0);
        for (j, (t, w)) in self.line_nodes.iter().zip(&self.line_weights).enumerate() {
            if j % BLOCK == 0 {
                factor = (-z * t).exp();
            } else {
                factor *= ratio;
            }
            sum += w * factor;
        }
        sum
    }

    /// Band evaluation: shift `Re z` into `[−πω, πω]` by steps of `2πω`.
    fn log_sigma_band(&self, z: Complex64) -> Complex64 {
        let w = PI * self.omega;
        let mut acc = Complex64::new(0.0, 0.0);
        let mut x = z;
        let steps = ((x.re.abs() - w) / (2.0 * w)).ceil().max(0.0) as usize;
        if x.re > w {
            // σ(x) = (1+e^{−i(x−πω)}) σ(x−2πω)
            for _ in 0..steps {
                acc += log_one_plus_exp_neg_i(x - w);
                x -= 2.0 * w;
            }
        } else if x.re < -w {
            // σ(x) = σ(x+2πω) / (1+e^{−i(x+πω)})
            for _ in 0..steps {
                acc -= log_one_plus_exp_neg_i(x + w);
                x += 2.0 * w;
            }
        }
        acc + self.log_sigma_integral(x)
    }

    /// Closest point of the zero or pole lattice, if within `lattice_tol`.
    pub fn nearest_lattice(&self, z: Complex64) -> Option<NearLattice> {
        let tol = self.options.lattice_tol;
        if z.im.abs() >= tol {
            return None;
        }
        let (kind, x) = if z.re > 0.0 {
            (LatticeKind::Zero, z)
        } else {
            (LatticeKind::Pole, -z)
        };
        let (point, distance) = nearest_lattice_point(self.omega, x)?;
        (distance < tol).then_some(NearLattice {
            kind,
            point: if kind == LatticeKind::Zero { point } else { -point },
            distance,
        })
    }

    /// Distance from `z` to the union of the zero and pole lattices.
    pub fn lattice_distance(&self, z: Complex64) -> f64 {
        let a = nearest_lattice_point(self.omega, z).map_or(f64::INFINITY, |p| p.1);
        let b = nearest_lattice_point(self.omega, -z).map_or(f64::INFINITY, |p| p.1);
        a.min(b)
    }

    /// `res_{z=π(1+ω)} 1/σ(z)`.
    pub fn residue_inv_sigma(&self) -> Complex64 {
        residue_inv_sigma(self.omega)
    }

    /// `res 1/σ` at the zero `ζ_{k,m} = π(1+ω) + 2πωk + 2πm`.
    pub fn residue_inv_sigma_at(&self, k: u32, m: u32) -> Complex64 {
        let mut r = residue_inv_sigma(self.omega);
        for j in 1..=k {
            r /= one_minus_exp_neg_2pi_i(self.omega * j as f64);
        }
        for j in 1..=m {
            r /= one_minus_exp_neg_2pi_i(j as f64 / self.omega);
        }
        r
    }

    /// `res σ` at the pole `−ζ_{k,m}`.
    pub fn residue_sigma_at_pole(&self, k: u32, m: u32) -> Complex64 {
        let zeta = Complex64::new(zero_lattice(self.omega, k, m), 0.0);
        -gaussian_exponent(self.omega, -zeta).exp() * self.residue_inv_sigma_at(k, m)
    }

    /// `|conj(σ(conj z))·σ(−z) − 1|`.
    pub fn sigma_conjugate_relation_check(&self, z: Complex64) -> Result<f64> {
        let a = self.log_sigma_regular(z.conj())?.conj();
        let b = self.log_sigma_regular(-z)?;
        Ok(((a + b).exp() - 1.0).norm())
    }

    /// `|σ(z)σ(−z)e^{−G(z)} − 1|`.
    pub fn sigma_reflection_check(&self, z: Complex64) -> Result<f64> {
        let a = self.log_sigma_regular(z)?;
        let b = self.log_sigma_regular(-z)?;
        Ok(((a + b - gaussian_exponent(self.omega, z)).exp() - 1.0).norm())
    }

    /// Relative residual of `σ(z+πω) = (1+e^{−iz})σ(z−πω)`.
    pub fn first_equation_residual(&self, z: Complex64) -> Result<f64> {
        let w = PI * self.omega;
        let lhs = self.log_sigma_regular(z + w)?;
        let rhs = self.log_sigma_regular(z - w)? + log_one_plus_exp_neg_i(z);
        Ok(((rhs - lhs).exp() - 1.0).norm())
    }

    /// Relative residual of `σ(z+π) = (1+e^{−iz/ω})σ(z−π)`.
    pub fn second_equation_residual(&self, z: Complex64) -> Result<f64> {
        let lhs = self.log_sigma_regular(z + PI)?;
        let rhs = self.log_sigma_regular(z - PI)? + log_one_plus_exp_neg_i(z / self.omega);
        Ok(((rhs - lhs).exp() - 1.0).norm())
    }
}

/// `G(z) = −iz²/(4πω) + iπ/(12ω) + iπω/12`, the exponent of the upper
/// asymptotics.
pub fn gaussian_exponent(omega: f64, z: Complex64) -> Complex64 {
    -I * z * z / (4.0 * PI * omega) + I * (PI / (12.0 * omega) + PI * omega / 12.0)
}

/// Closed form `−√ω e^{iπ/(12ω) + iπω/12 + iπ/4}`.
pub fn residue_inv_sigma(omega: f64) -> Complex64 {
    let phase = PI / (12.0 * omega) + PI * omega / 12.0 + PI / 4.0;
    -omega.sqrt() * Complex64::from_polar(1.0, phase)
}

/// `ζ_{k,m} = π(1+ω) + 2πωk + 2πm`.
pub fn zero_lattice(omega: f64, k: u32, m: u32) -> f64 {
    PI * (1.0 + omega) + 2.0 * PI * omega * k as f64 + 2.0 * PI * m as f64
}

/// Nearest `ζ_{k,m}` to `z`, with the distance. `None` when `Re z` is far
/// to the left of the lattice.
fn nearest_lattice_point(omega: f64, z: Complex64) -> Option<(f64, f64)> {
    let base = PI * (1.0 + omega);
    let x = z.re - base;
    if x < -1.0 {
        return Some((base, (z - base).norm()));
    }
    let mut best: Option<(f64, f64)> = None;
    let m_max = (x.max(0.0) / (2.0 * PI)).floor() as i64 + 1;
    for m in 0..=m_max {
        let r = (x - 2.0 * PI * m as f64) / (2.0 * PI * omega);
        let k0 = r.round() as i64;
        for k in [k0 - 1, k0, k0 + 1] {
            if k < 0 {
                continue;
            }
            let p = zero_lattice(omega, k as u32, m as u32);
            let d = (z - p).norm();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((p, d));
            }
        }
    }
    best
}

/// `e^{u} − 1` for complex `u` without cancellation at small `|u|`.
pub fn expm1(u: Complex64) -> Complex64 {
    let (a, b) = (u.re, u.im);
    let s = (0.5 * b).sin();
    let re = a.exp_m1() * b.cos() - 2.0 * s * s;
    let im = a.exp() * b.sin();
    Complex64::new(re, im)
}

/// Principal `log(1 + e^{−iw})`, accurate near the zeros `w ∈ π + 2πℤ`.
pub fn log_one_plus_exp_neg_i(w: Complex64) -> Complex64 {
    // 1 + e^{−iw} = 1 − e^{−iu} with u = w − π − 2πk
    let k = ((w.re - PI) / (2.0 * PI)).round();
    let u = w - PI - 2.0 * PI * k;
    (-expm1(-I * u)).ln()
}

/// `1 − e^{−2πix}` accurately.
fn one_minus_exp_neg_2pi_i(x: f64) -> Complex64 {
    let r = x - x.round();
    -expm1(Complex64::new(0.0, -2.0 * PI * r))
}
