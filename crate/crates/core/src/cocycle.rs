//! 2×2 complex matrices, the Maryland transfer matrix and its cocycle.

use std::f64::consts::{LN_2, PI};
use std::ops::Mul;

use num_complex::Complex64;
use serde::Serialize;

use crate::ddouble::DoubleDouble;
use crate::error::{Error, Result};
use crate::params::SpectralParams;

/// Minimal distance of a cotangent argument from ℤ.
pub const POLE_TOL: f64 = 1e-10;

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);
const CI: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mat2C {
    pub a11: Complex64,
    pub a12: Complex64,
    pub a21: Complex64,
    pub a22: Complex64,
}

impl Mat2C {
    pub const IDENTITY: Mat2C = Mat2C {
        a11: C1,
        a12: C0,
        a21: C0,
        a22: C1,
    };

    /// Pauli matrix `σ₂ = [[0, −i], [i, 0]]`.
    pub const SIGMA2: Mat2C = Mat2C {
        a11: C0,
        a12: Complex64::new(0.0, -1.0),
        a21: CI,
        a22: C0,
    };

    pub fn new(a11: Complex64, a12: Complex64, a21: Complex64, a22: Complex64) -> Self {
        Mat2C { a11, a12, a21, a22 }
    }

    pub fn real(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Mat2C::new(a11.into(), a12.into(), a21.into(), a22.into())
    }

    pub fn det(&self) -> Complex64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn transpose(&self) -> Mat2C {
        Mat2C::new(self.a11, self.a21, self.a12, self.a22)
    }

    pub fn inverse(&self) -> Result<Mat2C> {
        let det = self.det();
        let scale = self.max_abs();
        if det.norm() <= f64::EPSILON * scale * scale || !det.is_finite() || det.norm() == 0.0 {
            return Err(Error::SingularMatrix { det });
        }
        let inv = det.inv();
        Ok(Mat2C::new(
            self.a22 * inv,
            -self.a12 * inv,
            -self.a21 * inv,
            self.a11 * inv,
        ))
    }

    pub fn scale(&self, c: Complex64) -> Mat2C {
        Mat2C::new(self.a11 * c, self.a12 * c, self.a21 * c, self.a22 * c)
    }

    pub fn sub(&self, o: &Mat2C) -> Mat2C {
        Mat2C::new(
            self.a11 - o.a11,
            self.a12 - o.a12,
            self.a21 - o.a21,
            self.a22 - o.a22,
        )
    }

    pub fn frobenius(&self) -> f64 {
        (self.a11.norm_sqr() + self.a12.norm_sqr() + self.a21.norm_sqr() + self.a22.norm_sqr())
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.a11
            .norm()
            .max(self.a12.norm())
            .max(self.a21.norm())
            .max(self.a22.norm())
    }

    pub fn is_finite(&self) -> bool {
        self.a11.is_finite() && self.a12.is_finite() && self.a21.is_finite() && self.a22.is_finite()
    }

    pub fn entries(&self) -> [Complex64; 4] {
        [self.a11, self.a12, self.a21, self.a22]
    }

    /// `‖self − other‖_F / ‖other‖_F`.
    pub fn relative_distance(&self, other: &Mat2C) -> f64 {
        self.sub(other).frobenius() / other.frobenius()
    }
}

impl Mul for Mat2C {
    type Output = Mat2C;
    fn mul(self, b: Mat2C) -> Mat2C {
        Mat2C::new(
            self.a11 * b.a11 + self.a12 * b.a21,
            self.a11 * b.a12 + self.a12 * b.a22,
            self.a21 * b.a11 + self.a22 * b.a21,
            self.a21 * b.a12 + self.a22 * b.a22,
        )
    }
}

pub fn mat_mul(a: &Mat2C, b: &Mat2C) -> Mat2C {
    *a * *b
}

pub fn mat_det(a: &Mat2C) -> Complex64 {
    a.det()
}

pub fn mat_inverse(a: &Mat2C) -> Result<Mat2C> {
    a.inverse()
}

/// `σ₂ A⁻¹ σ₂`, which equals `Aᵗ` for unimodular `A`.
pub fn sigma2_conjugate(a: &Mat2C) -> Result<Mat2C> {
    Ok(Mat2C::SIGMA2 * a.inverse()? * Mat2C::SIGMA2)
}

/// A matrix stored as `exp(log_scale) · mat` with the largest entry of
/// `mat` kept in `[1/2, 2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaledMat2C {
    pub mat: Mat2C,
    pub log_scale: f64,
}

impl ScaledMat2C {
    pub fn identity() -> Self {
        ScaledMat2C {
            mat: Mat2C::IDENTITY,
            log_scale: 0.0,
        }
    }

    pub fn from_mat(mat: Mat2C) -> Self {
        let mut s = ScaledMat2C {
            mat,
            log_scale: 0.0,
        };
        s.renormalize();
        s
    }

    /// Pull a power of two out of `mat`; exact in binary floating point.
    pub fn renormalize(&mut self) {
        let m = self.mat.max_abs();
        if m == 0.0 || !m.is_finite() || (0.5..=2.0).contains(&m) {
            return;
        }
        let k = m.log2().round() as i32;
        let f = 2f64.powi(-k);
        self.mat = self.mat.scale(f.into());
        self.log_scale += k as f64 * LN_2;
    }

    /// The represented matrix; overflows to infinity past ~e^709.
    pub fn to_mat(&self) -> Mat2C {
        self.mat.scale(self.log_scale.exp().into())
    }

    pub fn det(&self) -> Complex64 {
        self.mat.det() * (2.0 * self.log_scale).exp()
    }

    /// `log|det|`, computable at any scale.
    pub fn log_abs_det(&self) -> f64 {
        self.mat.det().norm().ln() + 2.0 * self.log_scale
    }

    pub fn mul(&self, o: &ScaledMat2C) -> ScaledMat2C {
        let mut r = ScaledMat2C {
            mat: self.mat * o.mat,
            log_scale: self.log_scale + o.log_scale,
        };
        r.renormalize();
        r
    }

    pub fn mul_mat_left(&self, left: &Mat2C) -> ScaledMat2C {
        self_mul(*left * self.mat, self.log_scale)
    }

    pub fn mul_mat_right(&self, right: &Mat2C) -> ScaledMat2C {
        self_mul(self.mat * *right, self.log_scale)
    }

    /// `‖self − other‖_F / ‖other‖_F`, evaluated at a common scale.
    pub fn relative_distance(&self, other: &ScaledMat2C) -> f64 {
        let shift = self.log_scale - other.log_scale;
        let a = self.mat.scale(shift.exp().into());
        a.relative_distance(&other.mat)
    }
}

fn self_mul(mat: Mat2C, log_scale: f64) -> ScaledMat2C {
    let mut r = ScaledMat2C { mat, log_scale };
    r.renormalize();
    r
}

/// Distance from `z` to the nearest integer and that integer.
fn integer_proximity(z: Complex64) -> (f64, i64) {
    let n = z.re.round();
    ((z - n).norm(), n as i64)
}

/// `cot(πz)` with the argument first reduced modulo 1.
pub fn cot_pi(z: Complex64) -> Complex64 {
    let r = Complex64::new(z.re - z.re.round(), z.im) * PI;
    if r.im.abs() > 20.0 {
        // cot → ∓i as Im → ±∞
        return Complex64::new(0.0, -r.im.signum());
    }
    r.cos() / r.sin()
}

/// `F(z, η, l) = [[E − λ cot(πz), −1], [1, 0]]`.
pub fn transfer_matrix(z: Complex64, eta: f64, l: f64) -> Result<Mat2C> {
    let (dist, n) = integer_proximity(z);
    if dist < POLE_TOL {
        return Err(Error::PotentialPole {
            z,
            lattice: n,
            index: None,
        });
    }
    let e = 2.0 * l.cosh() * eta.cos();
    let lambda = -2.0 * l.sinh() * eta.sin();
    Ok(Mat2C::new(
        e - lambda * cot_pi(z),
        -C1,
        C1,
        C0,
    ))
}

/// `F(z)⁻¹ = [[0, 1], [−1, E − λ cot(πz)]]`.
fn transfer_matrix_inverse(z: Complex64, eta: f64, l: f64) -> Result<Mat2C> {
    let f = transfer_matrix(z, eta, l)?;
    Ok(Mat2C::new(C0, C1, -C1, f.a11))
}

/// Arithmetic backend for long products.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Precision {
    #[default]
    Double,
    /// Double-double accumulation of the (real) product.
    Extended,
}

/// The orbit point `θ + kω` as a complex number.
fn orbit_point(p: &SpectralParams, k: i64) -> Complex64 {
    Complex64::new(p.theta + k as f64 * p.omega, 0.0)
}

fn factor(p: &SpectralParams, k: i64, inverse: bool) -> Result<Mat2C> {
    let z = orbit_point(p, k);
    let f = if inverse {
        transfer_matrix_inverse(z, p.eta, p.l)
    } else {
        transfer_matrix(z, p.eta, p.l)
    };
    f.map_err(|e| match e {
        Error::PotentialPole { z, lattice, .. } => Error::PotentialPole {
            z,
            lattice,
            index: Some(k),
        },
        other => other,
    })
}

/// Fails with [`Error::PotentialPole`] if some `θ + kω`, `k` between 0 and
/// `N` inclusive, lies on the pole set of the potential.
pub fn check_orbit(p: &SpectralParams, n: i64) -> Result<()> {
    for k in n.min(0)..=n.max(0) {
        let x = p.theta + k as f64 * p.omega;
        if (x - x.round()).abs() < POLE_TOL {
            return Err(Error::PotentialPole {
                z: x.into(),
                lattice: x.round() as i64,
                index: Some(k),
            });
        }
    }
    Ok(())
}

/// `P_N(ω, θ, η, l)`: `F(θ+(N−1)ω)⋯F(θ)` for `N ≥ 1`,
/// `F(θ+Nω)⁻¹⋯F(θ−ω)⁻¹` for `N ≤ −1`, identity for `N = 0`.
pub fn cocycle_product(p: &SpectralParams, n: i64) -> Result<ScaledMat2C> {
    cocycle_product_with(p, n, Precision::Double)
}

pub fn cocycle_product_with(p: &SpectralParams, n: i64, precision: Precision) -> Result<ScaledMat2C> {
    match precision {
        Precision::Double => {
            let mut acc = ScaledMat2C::identity();
            for_each_factor(p, n, |f| {
                acc = acc.mul_mat_left(&f);
                Ok(())
            })?;
            Ok(acc)
        }
        Precision::Extended => {
            let mut acc = ScaledMatDD::identity();
            for_each_factor(p, n, |f| {
                if f.entries().iter().any(|c| c.im != 0.0) {
                    return Err(Error::Domain(
                        "extended precision supports real orbits only".into(),
                    ));
                }
                acc.mul_left(&f);
                Ok(())
            })?;
            Ok(acc.to_scaled())
        }
    }
}

/// Visit the factors of `P_N` in multiplication order (each one is applied
/// on the left of the running product).
fn for_each_factor(
    p: &SpectralParams,
    n: i64,
    mut visit: impl FnMut(Mat2C) -> Result<()>,
) -> Result<()> {
    if n > 0 {
        for k in 0..n {
            visit(factor(p, k, false)?)?;
        }
    } else {
        for k in (n..0).rev() {
            visit(factor(p, k, true)?)?;
        }
    }
    Ok(())
}

/// Real 2×2 double-double matrix with a power-of-two scale.
#[derive(Debug, Clone, Copy)]
struct ScaledMatDD {
    m: [DoubleDouble; 4],
    log2_scale: i64,
}

impl ScaledMatDD {
    fn identity() -> Self {
        ScaledMatDD {
            m: [
                DoubleDouble::ONE,
                DoubleDouble::ZERO,
                DoubleDouble::ZERO,
                DoubleDouble::ONE,
            ],
            log2_scale: 0,
        }
    }

    fn mul_left(&mut self, f: &Mat2C) {
        let f = [f.a11.re, f.a12.re, f.a21.re, f.a22.re].map(DoubleDouble::from_f64);
        let m = self.m;
        self.m = [
            f[0] * m[0] + f[1] * m[2],
            f[0] * m[1] + f[1] * m[3],
            f[2] * m[0] + f[3] * m[2],
            f[2] * m[1] + f[3] * m[3],
        ];
        let max = self.m.iter().map(|x| x.hi.abs()).fold(0.0, f64::max);
        if max > 0.0 && !(0.5..=2.0).contains(&max) {
            let k = max.log2().round() as i32;
            self.m = self.m.map(|x| x.ldexp(-k));
            self.log2_scale += k as i64;
        }
    }

    fn to_scaled(self) -> ScaledMat2C {
        let [a, b, c, d] = self.m.map(|x| Complex64::new(x.to_f64(), 0.0));
        let mut s = ScaledMat2C {
            mat: Mat2C::new(a, b, c, d),
            log_scale: self.log2_scale as f64 * LN_2,
        };
        s.renormalize();
        s
    }
}
