//! The minimal meromorphic solution Υ of the complex Maryland equation
//! `ψ(z+ω) + ψ(z−ω) + λ cot(πz) ψ(z) = E ψ(z)`.
//!
//! Off the real axis Υ is the contour integral
//! `Υ(z) = sin(πz) sin(πz/ω) ∫_γ e^{ipz/ω} X̂(p) dp` with
//! `X̂(p) = σ(p+a)σ(p−a) / (σ(p−ā)σ(p+ā))`, `a = η − il`. The contour is
//! translated sideways past the first poles of X̂ so that the exponential
//! growth of the prefactor is carried by explicit residue terms instead of
//! by cancellation inside the integral.
//!
//! Near the real axis, in `|Re z| < 1+ω`, Υ is an integral along the
//! imaginary axis of a regularized integrand plus a finite residue sum.
//! Further out the equation itself continues Υ.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{OnceLock, RwLock};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{SpectralParams, RESONANCE_TOL};
use crate::quadrature::{
    adaptive_partition, integrate_with, kronrod_nodes, CVec, PathPiece, PathSpec, QuadOptions,
};
use crate::sigma::{gaussian_exponent, zero_lattice, SigmaContext};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Smallest admissible decay rate `Im(τz)/ω` along a contour ray.
pub const DECAY_FLOOR: f64 = 0.01;
/// Distance from the pole set `±(ωk+m)` below which evaluation is refused.
pub const MINSOL_POLE_TOL: f64 = 1e-9;
/// Band `|Im z| ≤ REAL_BAND` handled by the imaginary-axis representation.
const REAL_BAND: f64 = 0.5;
/// Minimal gap between the translated contour and any pole of X̂.
const SHIFT_GAP: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinSolOptions {
    /// Relative accuracy requested from every quadrature.
    pub quad_tol: f64,
    pub quad: QuadOptions,
}

impl Default for MinSolOptions {
    fn default() -> Self {
        MinSolOptions {
            quad_tol: 1e-13,
            quad: QuadOptions::default(),
        }
    }
}

/// Leading coefficients of Υ over the canonical bases at `±i∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticCoeffs {
    pub a_plus: Complex64,
    pub a_minus: Complex64,
    pub b_plus: Complex64,
    pub b_minus: Complex64,
}

/// A simple pole of X̂ with its residue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Pole {
    pub point: Complex64,
    pub residue: Complex64,
}

/// One exponential `coeff · e^{i q z/ω}` of the real-axis residue sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidueTerm {
    pub q: Complex64,
    pub coeff: Complex64,
}

/// Fixed quadrature rule on the imaginary axis with the regularized
/// integrand already evaluated at its nodes.
#[derive(Debug, Clone)]
struct AxisRule {
    t: Vec<f64>,
    /// `w_j · C(i t_j)`.
    wc: Vec<Complex64>,
}

pub struct MinSolContext {
    pub params: SpectralParams,
    pub sigma: SigmaContext,
    pub options: MinSolOptions,
    a: Complex64,
    abar: Complex64,
    /// `A = sinh l sinh(l/ω) sin η sin(η/ω)`.
    reg_factor: f64,
    right_poles: Vec<Pole>,
    left_poles: Vec<Pole>,
    real_terms: Vec<ResidueTerm>,
    coeffs: AsymptoticCoeffs,
    axis_rule: OnceLock<std::result::Result<AxisRule, Error>>,
    cache: RwLock<HashMap<(u64, u64), Complex64>>,
}

impl std::fmt::Debug for MinSolContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MinSolContext")
            .field("params", &self.params)
            .field("options", &self.options)
            .finish_non_exhaustive()
    }
}

impl MinSolContext {
    pub fn new(params: SpectralParams) -> Result<Self> {
        Self::with_options(params, MinSolOptions::default())
    }

    pub fn with_options(params: SpectralParams, options: MinSolOptions) -> Result<Self> {
        params.validate()?;
        let SpectralParams { omega, eta, l, .. } = params;
        if eta.abs() >= PI * (1.0 + omega) {
            return Err(Error::Domain(format!(
                "|eta| = {} must be below pi(1+omega)",
                eta.abs()
            )));
        }
        let sigma = SigmaContext::new(omega)?;
        let a = Complex64::new(eta, -l);
        let abar = a.conj();
        let reg_factor = l.sinh() * (l / omega).sinh() * eta.sin() * (eta / omega).sin();
        let mut ctx = MinSolContext {
            params,
            sigma,
            options,
            a,
            abar,
            reg_factor,
            right_poles: Vec::new(),
            left_poles: Vec::new(),
            real_terms: Vec::new(),
            coeffs: AsymptoticCoeffs {
                a_plus: 0.0.into(),
                a_minus: 0.0.into(),
                b_plus: 0.0.into(),
                b_minus: 0.0.into(),
            },
            axis_rule: OnceLock::new(),
            cache: RwLock::new(HashMap::new()),
        };
        let reach = PI * (1.0 + omega) + eta.abs() + 4.0;
        ctx.right_poles = ctx.enumerate_right_poles(reach)?;
        ctx.left_poles = ctx.enumerate_left_poles(reach)?;
        ctx.real_terms = ctx.build_real_terms();
        ctx.coeffs = ctx.compute_coeffs()?;
        Ok(ctx)
    }

    pub fn omega(&self) -> f64 {
        self.params.omega
    }

    fn sig(&self, z: Complex64) -> Complex64 {
        self.sigma.log_sigma_unchecked(z).exp()
    }

    /// Lattice index pairs `(k, m)` with `2π(ωk + m) < bound`.
    fn lattice_indices(&self, bound: f64) -> Vec<(u32, u32)> {
        let w = self.params.omega;
        let mut out = Vec::new();
        let mut m = 0u32;
        while 2.0 * PI * m as f64 <= bound {
            let mut k = 0u32;
            while 2.0 * PI * (w * k as f64 + m as f64) <= bound {
                out.push((k, m));
                k += 1;
            }
            m += 1;
        }
        out
    }

    /// Zeros of the denominator of X̂: `±ā + ζ_{k,m}`.
    fn enumerate_right_poles(&self, reach: f64) -> Result<Vec<Pole>> {
        let (eta, l) = (self.params.eta, self.params.l);
        let base = PI * (1.0 + self.params.omega);
        let mut out = Vec::new();
        for (k, m) in self.lattice_indices(reach + eta.abs() - base + 1.0) {
            let zeta = Complex64::new(zero_lattice(self.params.omega, k, m), 0.0);
            let r = self.sigma.residue_inv_sigma_at(k, m);
            let two_il = Complex64::new(0.0, 2.0 * l);
            // p = ā + ζ: the factor 1/σ(p − ā) is singular
            let num = self.sig(zeta + 2.0 * eta) * self.sig(zeta + two_il);
            let den = self.sig(zeta + 2.0 * self.abar);
            out.push(Pole {
                point: self.abar + zeta,
                residue: num / den * r,
            });
            // p = −ā + ζ: the factor 1/σ(p + ā) is singular
            let num = self.sig(zeta - two_il) * self.sig(zeta - 2.0 * eta);
            let den = self.sig(zeta - 2.0 * self.abar);
            out.push(Pole {
                point: -self.abar + zeta,
                residue: num / den * r,
            });
        }
        check_poles(&out)?;
        Ok(out)
    }

    /// Poles of the numerator of X̂: `∓a − ζ_{k,m}`.
    fn enumerate_left_poles(&self, reach: f64) -> Result<Vec<Pole>> {
        let (eta, l) = (self.params.eta, self.params.l);
        let base = PI * (1.0 + self.params.omega);
        let mut out = Vec::new();
        for (k, m) in self.lattice_indices(reach + eta.abs() - base + 1.0) {
            let zeta = Complex64::new(zero_lattice(self.params.omega, k, m), 0.0);
            let r = self.sigma.residue_sigma_at_pole(k, m);
            let two_il = Complex64::new(0.0, 2.0 * l);
            // p = −a − ζ: σ(p + a) is singular
            let num = self.sig(-2.0 * self.a - zeta);
            let den = self.sig(-zeta - 2.0 * eta) * self.sig(two_il - zeta);
            out.push(Pole {
                point: -self.a - zeta,
                residue: num / den * r,
            });
            // p = a − ζ: σ(p − a) is singular
            let num = self.sig(2.0 * self.a - zeta);
            let den = self.sig(-two_il - zeta) * self.sig(2.0 * eta - zeta);
            out.push(Pole {
                point: self.a - zeta,
                residue: num / den * r,
            });
        }
        check_poles(&out)?;
        Ok(out)
    }

    /// The residue sum of the real-axis representation: for each shift
    /// `d = s₁πω + s₂π`, the poles of `X̂(· − d)` strictly between the
    /// imaginary axis and its translate by `d`.
    fn build_real_terms(&self) -> Vec<ResidueTerm> {
        let w = self.params.omega;
        let mut out = Vec::new();
        for s1 in [-1.0, 1.0] {
            for s2 in [-1.0, 1.0] {
                let d = s1 * PI * w + s2 * PI;
                let weight = -0.25 * s1 * s2 * d.signum() * 2.0 * PI;
                let poles = if d > 0.0 { &self.left_poles } else { &self.right_poles };
                for pole in poles {
                    let q = pole.point + d;
                    let between = if d > 0.0 {
                        q.re > 0.0 && q.re < d
                    } else {
                        q.re < 0.0 && q.re > d
                    };
                    if between {
                        out.push(ResidueTerm {
                            q,
                            coeff: I * weight * pole.residue,
                        });
                    }
                }
            }
        }
        out
    }

    fn compute_coeffs(&self) -> Result<AsymptoticCoeffs> {
        let zeta0 = zero_lattice(self.params.omega, 0, 0);
        let pick = |poles: &[Pole], target: Complex64| -> Complex64 {
            poles
                .iter()
                .find(|p| (p.point - target).norm() < 1e-9)
                .map(|p| p.residue)
                .expect("first poles are always enumerated")
        };
        let half = I * (PI / 2.0);
        let a_plus = half * pick(&self.right_poles, -self.abar + zeta0);
        let a_minus = half * pick(&self.right_poles, self.abar + zeta0);
        let b_plus = -half * pick(&self.left_poles, self.a - zeta0);
        let b_minus = -half * pick(&self.left_poles, -self.a - zeta0);
        Ok(AsymptoticCoeffs {
            a_plus,
            a_minus,
            b_plus,
            b_minus,
        })
    }

    /// `a±` from the closed form and `b±` from the first left poles.
    pub fn asymptotic_coeffs(&self) -> AsymptoticCoeffs {
        self.coeffs
    }

    pub fn right_poles(&self) -> &[Pole] {
        &self.right_poles
    }

    pub fn left_poles(&self) -> &[Pole] {
        &self.left_poles
    }

    /// Whether η sits on the resonance lattice where `a₋ = b₋ = 0`.
    pub fn is_resonant(&self) -> bool {
        self.params.resonance_distance() < RESONANCE_TOL
    }

    /// `log X̂(p)`.
    pub fn log_xhat(&self, p: Complex64) -> Result<Complex64> {
        let (a, abar) = (self.a, self.abar);
        let d = self.sigma.strip_delta;
        let args = [p + a, p - a, p - abar, p + abar];
        if args.iter().all(|z| z.im >= d) {
            // the four Gaussian exponents cancel to −2ηl/(πω)
            let s = |z: Complex64| self.sigma.log_sigma_series(-z);
            let g = -2.0 * self.params.eta * self.params.l / (PI * self.params.omega);
            return Ok(g - s(args[0]) - s(args[1]) + s(args[2]) + s(args[3]));
        }
        let ls = |z: Complex64| self.sigma.log_sigma_regular(z);
        Ok(ls(args[0])? + ls(args[1])? - ls(args[2])? - ls(args[3])?)
    }

    pub fn xhat(&self, p: Complex64) -> Result<Complex64> {
        Ok(self.log_xhat(p)?.exp())
    }

    /// The regularized integrand
    /// `A X̂(q−π−πω) / ((cos q − cos ā)(cos(q/ω) − cos(ā/ω)))`.
    pub fn regularized_integrand(&self, q: Complex64) -> Result<Complex64> {
        let w = self.params.omega;
        let lx = self.log_xhat(q - PI * (1.0 + w))?;
        let d1 = q.cos() - self.abar.cos();
        let d2 = (q / w).cos() - (self.abar / w).cos();
        Ok(self.reg_factor * lx.exp() / (d1 * d2))
    }

    /// `ln` of the regularized integrand, finite where its value under- or
    /// overflows.
    pub fn log_regularized_integrand(&self, q: Complex64) -> Result<Complex64> {
        let w = self.params.omega;
        let lx = self.log_xhat(q - PI * (1.0 + w))?;
        let f = Complex64::new(self.reg_factor, 0.0).ln();
        Ok(f + lx - ln_cos_diff(q, self.abar) - ln_cos_diff(q / w, self.abar / w))
    }

    // ---- off the real axis -------------------------------------------------

    fn shift_for(&self, upper: bool) -> f64 {
        let base = PI * (1.0 + self.params.omega) + self.params.eta.abs() + 1.0;
        let poles = if upper { &self.right_poles } else { &self.left_poles };
        let mut c = base;
        for _ in 0..100 {
            let signed = if upper { c } else { -c };
            if poles.iter().all(|p| (p.point.re - signed).abs() >= SHIFT_GAP) {
                return signed;
            }
            c += 0.37;
        }
        if upper {
            c
        } else {
            -c
        }
    }

    fn prefactor(&self, z: Complex64) -> Complex64 {
        (PI * z).sin() * (PI * z / self.params.omega).sin()
    }

    /// Υ by the translated contour; requires `Im z ≠ 0`.
    pub fn upsilon(&self, z: Complex64) -> Result<Complex64> {
        if z.im == 0.0 || !z.is_finite() {
            return Err(Error::ContourSelection { z, rate: 0.0 });
        }
        let upper = z.im > 0.0;
        let c = self.shift_for(upper);
        let h = self.params.l + 1.0;
        let path = build_contour(&[z], Complex64::new(c, -h), Complex64::new(c, h), self.params.omega)?;
        let w = self.params.omega;
        // residues crossed on the way from the imaginary axis to Re p = c
        let mut s = Complex64::new(0.0, 0.0);
        if upper {
            for p in self.right_poles.iter().filter(|p| p.point.re < c) {
                s -= 2.0 * PI * I * (I * p.point * z / w).exp() * p.residue;
            }
        } else {
            for p in self.left_poles.iter().filter(|p| p.point.re > c) {
                s += 2.0 * PI * I * (I * p.point * z / w).exp() * p.residue;
            }
        }
        let integral = self.contour_integral(z, &path, s.norm())?;
        Ok(self.prefactor(z) * (integral + s))
    }

    /// Υ by direct integration over `path`, with no residue correction.
    pub fn upsilon_on_path(&self, z: Complex64, path: &PathSpec) -> Result<Complex64> {
        let integral = self.contour_integral(z, path, 0.0)?;
        Ok(self.prefactor(z) * integral)
    }

    fn contour_integral(&self, z: Complex64, path: &PathSpec, scale: f64) -> Result<Complex64> {
        let w = self.params.omega;
        let f = |p: Complex64| -> Result<Complex64> { Ok((I * p * z / w + self.log_xhat(p)?).exp()) };
        // magnitude scale from the integrand at the corners of the path
        let mut m = scale;
        for piece in &path.pieces {
            if let PathPiece::Segment { a, b } = piece {
                for p in [*a, *b, (*a + *b) * 0.5] {
                    m = m.max(f(p)?.norm());
                }
            }
        }
        let tol = self.options.quad_tol * m.max(f64::MIN_POSITIVE);
        Ok(integrate_with(f, path, tol, self.options.quad)?.value)
    }

    // ---- near the real axis ------------------------------------------------

    /// Υ by the imaginary-axis representation, `|Re z| < 1+ω`.
    pub fn upsilon_real(&self, z: Complex64) -> Result<Complex64> {
        let w = self.params.omega;
        if z.re.abs() >= 1.0 + w {
            return Err(Error::Domain(format!(
                "real-axis representation needs |Re z| < 1 + omega, got {z}"
            )));
        }
        let residues = self.real_residue_sum(z);
        if z.re.abs() <= 1.0 && z.im.abs() <= REAL_BAND {
            let rule = self.axis_rule()?;
            let mut s = Complex64::new(0.0, 0.0);
            for (t, wc) in rule.t.iter().zip(&rule.wc) {
                s += (-z * *t / w).exp() * wc;
            }
            return Ok(I * s + residues);
        }
        let f = |p: Complex64| -> Result<Complex64> {
            Ok((I * p * z / w + self.log_regularized_integrand(p)?).exp())
        };
        let path = PathSpec::new(vec![
            PathPiece::Ray {
                origin: 0.0.into(),
                direction: -I,
                outgoing: false,
            },
            PathPiece::Ray {
                origin: 0.0.into(),
                direction: I,
                outgoing: true,
            },
        ])?;
        // the integral is about |f(0)| / decay rate, which vanishes at the strip edge
        let rate = (1.0 + w - z.re.abs()) / w;
        let scale = (f(0.0.into())?.norm() / rate.min(1.0)).max(residues.norm());
        let r = integrate_with(f, &path, self.options.quad_tol * scale, self.options.quad)?;
        Ok(r.value + residues)
    }

    /// `Σ coeff · e^{iqz/ω}` over the real-axis residue terms.
    pub fn real_residue_sum(&self, z: Complex64) -> Complex64 {
        let w = self.params.omega;
        self.real_terms
            .iter()
            .map(|t| t.coeff * (I * t.q * z / w).exp())
            .sum()
    }

    pub fn real_residue_terms(&self) -> &[ResidueTerm] {
        &self.real_terms
    }

    fn axis_rule(&self) -> Result<&AxisRule> {
        self.axis_rule
            .get_or_init(|| self.build_axis_rule())
            .as_ref()
            .map_err(Clone::clone)
    }

    /// Composite Kronrod rule on `[−T, T]` resolving `C(it) e^{−tz/ω}` for
    /// `Re z ∈ {−1, 0, 1}` and `Im z ∈ {0, ½}`.
    fn build_axis_rule(&self) -> Result<AxisRule> {
        let w = self.params.omega;
        let c = |t: f64| self.regularized_integrand(Complex64::new(0.0, t));
        let weights = |t: f64| -> [Complex64; 6] {
            let mut out = [Complex64::new(0.0, 0.0); 6];
            for (i, x) in [-1.0, 0.0, 1.0].into_iter().enumerate() {
                for (j, y) in [0.0, REAL_BAND].into_iter().enumerate() {
                    out[2 * i + j] = (-Complex64::new(x, y) * t / w).exp();
                }
            }
            out
        };
        // truncate where the slowest-decaying weighted integrand is negligible
        let peak = [-1.0, -0.3, 0.0, 0.3, 1.0]
            .iter()
            .map(|&t| c(t).map(|v| v.norm() * (t.abs() / w).exp()))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let mut t_max = 20.0;
        while t_max < 2000.0 {
            let tail = c(t_max)?.norm() * (t_max / w).exp() + c(-t_max)?.norm() * (t_max / w).exp();
            if tail < 1e-18 * peak {
                break;
            }
            t_max *= 1.5;
        }
        let mut g = |t: f64| -> Result<CVec<6>> {
            let v = c(t)?;
            Ok(CVec(weights(t).map(|e| e * v)))
        };
        let (_, mut panels) = adaptive_partition(
            &mut g,
            -t_max,
            t_max,
            0.0,
            self.options.quad_tol * 0.1,
            self.options.quad.max_evals,
        )?;
        // keep panels short enough for the oscillating factor
        panels = panels
            .into_iter()
            .flat_map(|(a, b)| {
                let pieces = ((b - a) / 2.0).ceil().max(1.0) as usize;
                let h = (b - a) / pieces as f64;
                (0..pieces).map(move |i| (a + i as f64 * h, a + (i + 1) as f64 * h))
            })
            .collect();
        let mut t = Vec::with_capacity(panels.len() * 15);
        let mut wc = Vec::with_capacity(panels.len() * 15);
        for (a, b) in panels {
            for (x, wt) in kronrod_nodes(a, b) {
                t.push(x);
                wc.push(c(x)? * wt);
            }
        }
        Ok(AxisRule { t, wc })
    }

    // ---- dispatch and continuation ----------------------------------------

    /// Υ anywhere off its pole set, by whichever representation applies.
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        let key = (z.re.to_bits(), z.im.to_bits());
        if let Some(v) = self.cache.read().ok().and_then(|c| c.get(&key).copied()) {
            return Ok(v);
        }
        let v = self.eval_uncached(z)?;
        if let Ok(mut c) = self.cache.write() {
            c.entry(key).or_insert(v);
        }
        Ok(v)
    }

    fn eval_uncached(&self, z: Complex64) -> Result<Complex64> {
        let w = self.params.omega;
        let (pole, distance) = nearest_pole(z, w);
        if distance < MINSOL_POLE_TOL {
            return Err(Error::MinSolPole { z, pole, distance });
        }
        if z.im.abs() <= REAL_BAND {
            if z.re.abs() <= 1.0 {
                return self.upsilon_real(z);
            }
            return self.continue_by_equation(z);
        }
        match self.upsilon(z) {
            Err(Error::ContourSelection { .. }) if z.re.abs() < 1.0 + w => self.upsilon_real(z),
            r => r,
        }
    }

    /// Extends Υ from `|Re z| ≤ 1` by the Maryland equation, stepping by ω.
    fn continue_by_equation(&self, z: Complex64) -> Result<Complex64> {
        let SpectralParams { omega: w, .. } = self.params;
        let e = self.params.energy();
        let lam = self.params.coupling();
        let dir = if z.re > 1.0 { -1.0 } else { 1.0 };
        // walk towards the base strip until two consecutive points are in it
        let mut steps = 0usize;
        while (z.re + dir * w * steps as f64).abs() > 1.0 {
            steps += 1;
        }
        // points z + dir·w·j for j = steps, steps+1 are in the base strip
        let at = |j: usize| z + dir * w * j as f64;
        // both base points lie in [−1, 1] since ω < 1
        let mut far = self.eval(at(steps + 1))?;
        let mut near = self.eval(at(steps))?;
        for j in (0..steps).rev() {
            // ψ(x) = (E − λ cot(π(x ± ω))) ψ(x ± ω) − ψ(x ± 2ω)
            let mid = at(j + 1);
            let dist = (mid.re - mid.re.round()).hypot(mid.im);
            if dist < MINSOL_POLE_TOL {
                return Err(Error::MinSolPole {
                    z,
                    pole: at(j).re,
                    distance: (mid - mid.re.round()).norm(),
                });
            }
            let cot = crate::cocycle::cot_pi(mid);
            let value = (e - lam * cot) * near - far;
            far = near;
            near = value;
        }
        Ok(near)
    }

    // ---- checks --------------------------------------------------------------

    /// Relative residual of the complex Maryland equation at `z`.
    pub fn maryland_residual(&self, z: Complex64) -> Result<f64> {
        let e = self.params.energy();
        let lam = self.params.coupling();
        let w = self.params.omega;
        let (u0, up, um) = (self.eval(z)?, self.eval(z + w)?, self.eval(z - w)?);
        let cot = crate::cocycle::cot_pi(z);
        let r = up + um + lam * cot * u0 - e * u0;
        let scale = up.norm() + um.norm() + (lam * cot * u0).norm() + (e * u0).norm();
        Ok(r.norm() / scale)
    }

    /// Relative residual of the second equation
    /// `ψ(z+1) + ψ(z−1) + λ₁ cot(πz/ω) ψ(z) = E₁ ψ(z)`.
    pub fn second_equation_residual(&self, z: Complex64) -> Result<f64> {
        let w = self.params.omega;
        let (eta1, l1) = (self.params.eta / w, self.params.l / w);
        let e1 = 2.0 * eta1.cos() * l1.cosh();
        let lam1 = -2.0 * eta1.sin() * l1.sinh();
        let (u0, up, um) = (self.eval(z)?, self.eval(z + 1.0)?, self.eval(z - 1.0)?);
        let cot = crate::cocycle::cot_pi(z / w);
        let r = up + um + lam1 * cot * u0 - e1 * u0;
        let scale = up.norm() + um.norm() + (lam1 * cot * u0).norm() + (e1 * u0).norm();
        Ok(r.norm() / scale)
    }

    /// The two closed forms of `w(Υ(·+1), Υ)`, from `a±` and from `b±`.
    pub fn wronskian_closed_forms(&self) -> (Complex64, Complex64) {
        let SpectralParams { omega: w, eta, l, .. } = self.params;
        let u = Complex64::new(l, -eta);
        let v = Complex64::new(l, eta);
        let c = self.coeffs;
        let a_form = c.a_plus * c.a_minus * ((u / w).exp() - (-u / w).exp()) * (u.exp() - (-u).exp());
        let b_form = c.b_plus * c.b_minus * ((v / w).exp() - (-v / w).exp()) * (v.exp() - (-v).exp());
        (a_form, b_form)
    }

    /// `w(Υ(·+1), Υ)(z)`.
    pub fn shifted_wronskian(&self, z: Complex64) -> Result<Complex64> {
        wronskian(|x| self.eval(x + 1.0), |x| self.eval(x), z, self.params.omega)
    }

    /// The upper-asymptotic prediction `a₊e^{(l−iη)z/ω} + a₋e^{−(l−iη)z/ω}`.
    pub fn upper_asymptotic(&self, z: Complex64) -> Complex64 {
        let u = Complex64::new(self.params.l, -self.params.eta) / self.params.omega;
        self.coeffs.a_plus * (u * z).exp() + self.coeffs.a_minus * (-u * z).exp()
    }

    /// Fits `(a₊, a₋)` from Υ at `iy₁` and `iy₂` by solving the 2×2 system
    /// of the upper asymptotics.
    pub fn fit_upper_coeffs(&self, y1: f64, y2: f64) -> Result<(Complex64, Complex64)> {
        let u = Complex64::new(self.params.l, -self.params.eta) / self.params.omega;
        let (z1, z2) = (Complex64::new(0.0, y1), Complex64::new(0.0, y2));
        let (f1, f2) = (self.eval(z1)?, self.eval(z2)?);
        let (p1, m1, p2, m2) = ((u * z1).exp(), (-u * z1).exp(), (u * z2).exp(), (-u * z2).exp());
        let det = p1 * m2 - m1 * p2;
        Ok(((f1 * m2 - m1 * f2) / det, (p1 * f2 - f1 * p2) / det))
    }

    /// `exp` of the Gaussian exponent at `−ζ₀`, exposed for residue checks.
    pub fn gaussian_at_first_pole(&self) -> Complex64 {
        let z = -Complex64::new(zero_lattice(self.params.omega, 0, 0), 0.0);
        gaussian_exponent(self.params.omega, z).exp()
    }
}

/// Nearest point of `±(ωk+m)`, `k, m ≥ 0`, and the distance to it.
/// `ln(cos q − cos c)`, with the dominant exponential factored out once
/// `|Im q|` is large.
fn ln_cos_diff(q: Complex64, c: Complex64) -> Complex64 {
    if q.im.abs() < 30.0 {
        return (q.cos() - c.cos()).ln();
    }
    // cos q = e^{∓iq}(1 + e^{±2iq})/2 for Im q ≷ 0
    let s = if q.im > 0.0 { I } else { -I };
    let small = (s * q).exp();
    -s * q - std::f64::consts::LN_2 + (1.0 + small * small - 2.0 * c.cos() * small).ln()
}

pub fn nearest_pole(z: Complex64, omega: f64) -> (f64, f64) {
    let x = z.re.abs();
    let mut best = (0.0, f64::INFINITY);
    let mut m = 0.0;
    while m <= x + 1.0 {
        let k = ((x - m) / omega).round().max(0.0);
        for kk in [k, k + 1.0, (k - 1.0).max(0.0)] {
            let p = omega * kk + m;
            let d = Complex64::new(x - p, z.im).norm();
            if d < best.1 {
                best = (p.copysign(z.re), d);
            }
        }
        m += 1.0;
    }
    best
}

fn check_poles(poles: &[Pole]) -> Result<()> {
    for p in poles {
        if !p.residue.is_finite() {
            return Err(Error::NonFinite(format!("residue of X̂ at {}", p.point)));
        }
    }
    Ok(())
}

/// `w(f, g)(z) = f(z) g(z−ω) − f(z−ω) g(z)`.
pub fn wronskian(
    f: impl Fn(Complex64) -> Result<Complex64>,
    g: impl Fn(Complex64) -> Result<Complex64>,
    z: Complex64,
    omega: f64,
) -> Result<Complex64> {
    Ok(f(z)? * g(z - omega)? - f(z - omega)? * g(z)?)
}

/// Admissible ray angles for a contour serving every point of `zs` (all on
/// the same side of ℝ): the upper ray's and the lower ray's open intervals.
pub fn admissible_angles(zs: &[Complex64]) -> Result<((f64, f64), (f64, f64))> {
    let first = zs.first().ok_or_else(|| Error::Domain("no points".into()))?;
    let upper_half = first.im > 0.0;
    let mut up = (f64::NEG_INFINITY, f64::INFINITY);
    let mut down = (f64::NEG_INFINITY, f64::INFINITY);
    for z in zs {
        if z.im == 0.0 || (z.im > 0.0) != upper_half {
            return Err(Error::ContourSelection { z: *z, rate: 0.0 });
        }
        let theta = z.arg();
        // D(z): α ∈ (−θ, π − θ); the upper ray must point up, the lower down
        let (u, d) = if upper_half {
            ((0.0, PI - theta), (-theta, 0.0))
        } else {
            ((-theta, PI), (PI, PI - theta))
        };
        up = (up.0.max(u.0), up.1.min(u.1));
        down = (down.0.max(d.0), down.1.min(d.1));
    }
    if up.0 >= up.1 || down.0 >= down.1 {
        return Err(Error::ContourSelection { z: *first, rate: 0.0 });
    }
    Ok((up, down))
}

/// Contour: incoming ray into `bottom`, segment `bottom → top`, outgoing
/// ray from `top`, with ray angles at the midpoints of the admissible
/// intervals for all of `zs`.
pub fn build_contour(zs: &[Complex64], bottom: Complex64, top: Complex64, omega: f64) -> Result<PathSpec> {
    let (up, down) = admissible_angles(zs)?;
    let tau_up = Complex64::from_polar(1.0, 0.5 * (up.0 + up.1));
    let tau_down = Complex64::from_polar(1.0, 0.5 * (down.0 + down.1));
    for z in zs {
        for tau in [tau_up, tau_down] {
            let rate = (tau * z).im / omega;
            if rate < DECAY_FLOOR {
                return Err(Error::ContourSelection { z: *z, rate });
            }
        }
    }
    PathSpec::new(vec![
        PathPiece::Ray {
            origin: bottom,
            direction: tau_down,
            outgoing: false,
        },
        PathPiece::Segment { a: bottom, b: top },
        PathPiece::Ray {
            origin: top,
            direction: tau_up,
            outgoing: true,
        },
    ])
}

/// The untranslated contour: from `−i∞` to `−2il` along a ray, along the
/// imaginary axis to `2il`, then to infinity along another ray.
pub fn build_gamma(z: Complex64, l: f64, omega: f64) -> Result<PathSpec> {
    build_contour(&[z], Complex64::new(0.0, -2.0 * l), Complex64::new(0.0, 2.0 * l), omega)
}
