//! Adaptive integration along piecewise contours (segments and rays to
//! infinity) and residues by trapezoidal quadrature on small circles.

use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

/// Values that can be integrated: a vector space over ℝ with a norm.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn norm(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn norm(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn norm(&self) -> f64 {
        Complex64::norm(*self)
    }
}

/// A fixed-length vector of complex values, integrated component-wise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CVec<const N: usize>(pub [Complex64; N]);

impl<const N: usize> Add for CVec<N> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        CVec(std::array::from_fn(|i| self.0[i] + o.0[i]))
    }
}

impl<const N: usize> Sub for CVec<N> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        CVec(std::array::from_fn(|i| self.0[i] - o.0[i]))
    }
}

impl<const N: usize> Mul<f64> for CVec<N> {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        CVec(self.0.map(|c| c * s))
    }
}

impl<const N: usize> QuadValue for CVec<N> {
    fn zero() -> Self {
        CVec([Complex64::new(0.0, 0.0); N])
    }
    fn norm(&self) -> f64 {
        self.0.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// Gauss–Kronrod 7/15 abscissae on `[−1, 1]` (non-negative half).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
/// Gauss weights for the nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// The 15 nodes of the Kronrod rule on `[a, b]` with their weights.
pub fn kronrod_nodes(a: f64, b: f64) -> [(f64, f64); 15] {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut out = [(0.0, 0.0); 15];
    for i in 0..7 {
        out[2 * i] = (c - h * XGK[i], h * WGK[i]);
        out[2 * i + 1] = (c + h * XGK[i], h * WGK[i]);
    }
    out[14] = (c, h * WGK[7]);
    out
}

struct Panel<V> {
    a: f64,
    b: f64,
    value: V,
    error: f64,
}

impl<V> PartialEq for Panel<V> {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl<V> Eq for Panel<V> {}
impl<V> PartialOrd for Panel<V> {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl<V> Ord for Panel<V> {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&o.error)
    }
}

fn gk15<V: QuadValue>(f: &mut impl FnMut(f64) -> Result<V>, a: f64, b: f64) -> Result<(V, f64)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for i in 0..7 {
        let s = f(c - h * XGK[i])? + f(c + h * XGK[i])?;
        k = k + s * WGK[i];
        if i % 2 == 1 {
            g = g + s * WG[i / 2];
        }
    }
    let k = k * h;
    let g = g * h;
    let err = (k - g).norm();
    if !err.is_finite() {
        return Err(Error::NonFinite(format!("integrand on [{a}, {b}]")));
    }
    Ok((k, err))
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadOutcome<V> {
    pub value: V,
    pub error: f64,
    pub evals: usize,
}

/// Adaptive Gauss–Kronrod on a real interval. Stops once the summed error
/// estimate is below `max(abs_tol, rel_tol·|I|)`.
pub fn integrate_interval<V: QuadValue>(
    mut f: impl FnMut(f64) -> Result<V>,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_evals: usize,
) -> Result<QuadOutcome<V>> {
    let parts = adaptive_partition(&mut f, a, b, abs_tol, rel_tol, max_evals)?;
    Ok(parts.0)
}

/// Adaptive integration that also returns the final panel boundaries.
pub fn adaptive_partition<V: QuadValue>(
    f: &mut impl FnMut(f64) -> Result<V>,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_evals: usize,
) -> Result<(QuadOutcome<V>, Vec<(f64, f64)>)> {
    let (v, e) = gk15(f, a, b)?;
    let mut evals = 15;
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value: v, error: e });
    let mut total = v;
    let mut total_err = e;
    loop {
        let target = abs_tol.max(rel_tol * total.norm());
        if total_err <= target {
            break;
        }
        if evals + 30 > max_evals {
            return Err(Error::Quadrature {
                achieved: total_err,
                requested: target,
                evals,
            });
        }
        let worst = heap.pop().expect("heap holds at least one panel");
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            // cannot split further in floating point
            return Err(Error::Quadrature {
                achieved: total_err,
                requested: target,
                evals,
            });
        }
        let (v1, e1) = gk15(f, worst.a, m)?;
        let (v2, e2) = gk15(f, m, worst.b)?;
        evals += 30;
        total = total - worst.value + v1 + v2;
        total_err = total_err - worst.error + e1 + e2;
        heap.push(Panel { a: worst.a, b: m, value: v1, error: e1 });
        heap.push(Panel { a: m, b: worst.b, value: v2, error: e2 });
        // resum occasionally so cancellation in the running totals stays small
        if evals % 3000 < 30 {
            total = heap.iter().fold(V::zero(), |s, p| s + p.value);
            total_err = heap.iter().map(|p| p.error).sum();
        }
    }
    let total = heap.iter().fold(V::zero(), |s, p| s + p.value);
    let total_err = heap.iter().map(|p| p.error).sum();
    let mut panels: Vec<(f64, f64)> = heap.into_iter().map(|p| (p.a, p.b)).collect();
    panels.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok((
        QuadOutcome {
            value: total,
            error: total_err,
            evals,
        },
        panels,
    ))
}

/// One piece of a contour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum PathPiece {
    Segment { a: Complex64, b: Complex64 },
    /// `origin + s·direction`, `s ∈ [0, ∞)`; an incoming ray is traversed
    /// from infinity towards its origin.
    Ray {
        origin: Complex64,
        direction: Complex64,
        outgoing: bool,
    },
}

impl PathPiece {
    fn start(&self) -> Option<Complex64> {
        match *self {
            PathPiece::Segment { a, .. } => Some(a),
            PathPiece::Ray { origin, outgoing, .. } => outgoing.then_some(origin),
        }
    }

    fn end(&self) -> Option<Complex64> {
        match *self {
            PathPiece::Segment { b, .. } => Some(b),
            PathPiece::Ray { origin, outgoing, .. } => (!outgoing).then_some(origin),
        }
    }

    fn reversed(&self) -> PathPiece {
        match *self {
            PathPiece::Segment { a, b } => PathPiece::Segment { a: b, b: a },
            PathPiece::Ray {
                origin,
                direction,
                outgoing,
            } => PathPiece::Ray {
                origin,
                direction,
                outgoing: !outgoing,
            },
        }
    }
}

/// A piecewise contour.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSpec {
    pub pieces: Vec<PathPiece>,
}

impl PathSpec {
    pub fn new(pieces: Vec<PathPiece>) -> Result<Self> {
        let p = PathSpec { pieces };
        p.validate()?;
        Ok(p)
    }

    /// Consecutive pieces share endpoints, rays only at the ends, unit
    /// directions.
    pub fn validate(&self) -> Result<()> {
        let n = self.pieces.len();
        for (i, piece) in self.pieces.iter().enumerate() {
            if let PathPiece::Ray {
                direction, outgoing, ..
            } = piece
            {
                if (direction.norm() - 1.0).abs() > 1e-12 {
                    return Err(Error::Domain("ray direction is not unit".into()));
                }
                let ok = (*outgoing && i + 1 == n) || (!*outgoing && i == 0);
                if !ok {
                    return Err(Error::Domain("rays are allowed only at the ends".into()));
                }
            }
        }
        for w in self.pieces.windows(2) {
            match (w[0].end(), w[1].start()) {
                (Some(e), Some(s)) if (e - s).norm() <= 1e-12 * (1.0 + e.norm()) => {}
                _ => return Err(Error::Domain("contour pieces do not connect".into())),
            }
        }
        Ok(())
    }

    pub fn reversed(&self) -> PathSpec {
        PathSpec {
            pieces: self.pieces.iter().rev().map(PathPiece::reversed).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub max_evals: usize,
    /// Rays are cut where `|f| < tol · truncation_guard`.
    pub truncation_guard: f64,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            max_evals: 2_000_000,
            truncation_guard: 1e-3,
        }
    }
}

/// `∫_path f(p) dp` with absolute error target `tol`.
pub fn integrate(
    f: impl Fn(Complex64) -> Result<Complex64>,
    path: &PathSpec,
    tol: f64,
) -> Result<QuadOutcome<Complex64>> {
    integrate_with(f, path, tol, QuadOptions::default())
}

pub fn integrate_with(
    f: impl Fn(Complex64) -> Result<Complex64>,
    path: &PathSpec,
    tol: f64,
    opts: QuadOptions,
) -> Result<QuadOutcome<Complex64>> {
    let n = path.pieces.len().max(1) as f64;
    let piece_tol = tol / n;
    let mut value = Complex64::new(0.0, 0.0);
    let mut error = 0.0;
    let mut evals = 0;
    for piece in &path.pieces {
        let budget = opts.max_evals.saturating_sub(evals);
        let r = match *piece {
            PathPiece::Segment { a, b } => {
                let d = b - a;
                integrate_interval(|s| Ok(f(a + d * s)? * d), 0.0, 1.0, piece_tol, 0.0, budget)?
            }
            PathPiece::Ray {
                origin,
                direction,
                outgoing,
            } => {
                let r = integrate_ray(&f, origin, direction, piece_tol, opts.truncation_guard, budget)?;
                if outgoing {
                    r
                } else {
                    QuadOutcome {
                        value: -r.value,
                        ..r
                    }
                }
            }
        };
        value += r.value;
        error += r.error;
        evals += r.evals;
    }
    Ok(QuadOutcome { value, error, evals })
}

/// `∫_0^∞ f(o + sτ) τ ds` on geometrically growing panels, truncated once
/// the integrand and the extrapolated tail are negligible.
fn integrate_ray(
    f: &impl Fn(Complex64) -> Result<Complex64>,
    origin: Complex64,
    dir: Complex64,
    tol: f64,
    guard: f64,
    max_evals: usize,
) -> Result<QuadOutcome<Complex64>> {
    let g = |s: f64| -> Result<Complex64> { Ok(f(origin + dir * s)? * dir) };
    let mut value = Complex64::new(0.0, 0.0);
    let mut error = 0.0;
    let mut evals = 0;
    let mut lo = 0.0;
    let mut width = 1.0;
    let mut last_mag = g(0.0)?.norm();
    evals += 1;
    // allot most of the tolerance to the first panels, keep a share for the tail
    let panel_tol = tol * 0.25;
    for _ in 0..200 {
        let hi = lo + width;
        let r = integrate_interval(g, lo, hi, panel_tol * width.min(1.0), 0.0, max_evals.saturating_sub(evals))?;
        value += r.value;
        error += r.error;
        evals += r.evals + 1;
        let mag = g(hi)?.norm();
        if mag < tol * guard {
            // geometric tail from the decay between the panel ends
            let tail = if last_mag > mag && mag > 0.0 {
                let rate = (last_mag / mag).ln() / width;
                mag / rate
            } else if mag == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            if tail.is_finite() && tail < tol * guard {
                error += tail;
                return Ok(QuadOutcome { value, error, evals });
            }
        }
        last_mag = mag;
        lo = hi;
        width = (width * 2.0).min(64.0);
        if evals > max_evals {
            break;
        }
    }
    Err(Error::Quadrature {
        achieved: f64::INFINITY,
        requested: tol,
        evals,
    })
}

/// `(1/2πi)∮ f` over the circle `|p − center| = radius`, trapezoid rule
/// with the node count doubled until successive values agree to `tol`
/// (relative to `max(1, |value|)`).
pub fn residue_by_circle(
    f: impl Fn(Complex64) -> Result<Complex64>,
    center: Complex64,
    radius: f64,
    tol: f64,
) -> Result<Complex64> {
    const MAX_NODES: usize = 1 << 16;
    let node = |j: usize, n: usize| -> Result<Complex64> {
        let e = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / n as f64);
        Ok(f(center + e * radius)? * e)
    };
    let mut n = 16;
    let mut sum = Complex64::new(0.0, 0.0);
    for j in 0..n {
        sum += node(j, n)?;
    }
    let mut value = sum * radius / n as f64;
    let mut change = f64::INFINITY;
    while n < MAX_NODES {
        // the doubled rule reuses the old nodes; only odd ones are new
        let m = 2 * n;
        for j in (1..m).step_by(2) {
            sum += node(j, m)?;
        }
        n = m;
        let next = sum * radius / n as f64;
        change = (next - value).norm();
        value = next;
        if change <= tol * value.norm().max(1.0) {
            return Ok(value);
        }
    }
    Err(Error::Residue { center, change })
}

#[cfg(test)]
mod tests {
    use super::*;

    const C0: Complex64 = Complex64::new(0.0, 0.0);

    #[test]
    fn gaussian_on_segment() {
        let path = PathSpec::new(vec![PathPiece::Segment {
            a: Complex64::new(-10.0, 0.0),
            b: Complex64::new(10.0, 0.0),
        }])
        .unwrap();
        let r = integrate(|p| Ok((-p * p).exp()), &path, 1e-13).unwrap();
        assert!((r.value - PI.sqrt()).norm() < 1e-12);
    }

    #[test]
    fn fourier_integral_over_two_rays() {
        let f = |p: Complex64| Ok((Complex64::i() * p).exp() / (p * p + 1.0));
        // real line as two rays from 0; decays only like 1/p², so tilt
        // the rays into the upper half-plane where e^{ip} decays
        let tilt = 0.3f64;
        let path = PathSpec::new(vec![
            PathPiece::Ray {
                origin: C0,
                direction: Complex64::from_polar(1.0, PI - tilt),
                outgoing: false,
            },
            PathPiece::Ray {
                origin: C0,
                direction: Complex64::from_polar(1.0, tilt),
                outgoing: true,
            },
        ])
        .unwrap();
        let r = integrate(f, &path, 1e-12).unwrap();
        let exact = PI / std::f64::consts::E;
        assert!((r.value - exact).norm() < 1e-10, "{}", r.value);
    }

    #[test]
    fn reversed_path_negates() {
        let path = PathSpec::new(vec![
            PathPiece::Segment {
                a: Complex64::new(0.0, -1.0),
                b: Complex64::new(0.0, 1.0),
            },
            PathPiece::Ray {
                origin: Complex64::new(0.0, 1.0),
                direction: Complex64::new(0.0, 1.0),
                outgoing: true,
            },
        ])
        .unwrap();
        let f = |p: Complex64| Ok((Complex64::i() * p).exp());
        let a = integrate(f, &path, 1e-12).unwrap().value;
        let b = integrate(f, &path.reversed(), 1e-12).unwrap().value;
        assert!((a + b).norm() < 2e-12);
    }

    #[test]
    fn deformation_invariance() {
        // e^{ip}/(p−2i)² has its only pole above both contours
        let f = |p: Complex64| Ok((Complex64::i() * p).exp() / ((p - Complex64::new(0.0, 2.0)).powi(2)));
        let path = |h: f64| {
            let a = Complex64::new(0.0, h);
            PathSpec::new(vec![
                PathPiece::Ray {
                    origin: a,
                    direction: Complex64::from_polar(1.0, PI - 0.2),
                    outgoing: false,
                },
                PathPiece::Ray {
                    origin: a,
                    direction: Complex64::from_polar(1.0, 0.2),
                    outgoing: true,
                },
            ])
            .unwrap()
        };
        let a = integrate(f, &path(0.0), 1e-12).unwrap().value;
        let b = integrate(f, &path(1.0), 1e-12).unwrap().value;
        assert!((a - b).norm() < 2e-12);
    }

    #[test]
    fn broken_paths_are_rejected() {
        let bad = PathSpec::new(vec![
            PathPiece::Segment {
                a: C0,
                b: Complex64::new(1.0, 0.0),
            },
            PathPiece::Segment {
                a: Complex64::new(2.0, 0.0),
                b: Complex64::new(3.0, 0.0),
            },
        ]);
        assert!(bad.is_err());
        let bad = PathSpec::new(vec![PathPiece::Ray {
            origin: C0,
            direction: Complex64::new(2.0, 0.0),
            outgoing: true,
        }]);
        assert!(bad.is_err());
    }

    #[test]
    fn simple_residues() {
        let r = residue_by_circle(|p| Ok(p.inv()), C0, 0.1, 1e-13).unwrap();
        assert!((r - 1.0).norm() < 1e-12);
        let r = residue_by_circle(|p| Ok(p.exp() / (p * p)), C0, 0.1, 1e-13).unwrap();
        assert!((r - 1.0).norm() < 1e-12);
    }

    #[test]
    fn trapezoid_converges_geometrically() {
        let f = |p: Complex64| (p * 3.0).exp() / p;
        let approx = |n: usize| {
            let mut s = C0;
            for j in 0..n {
                let e = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / n as f64);
                s += f(e * 0.5) * e * 0.5;
            }
            s / n as f64
        };
        let e1 = (approx(8) - 1.0).norm();
        let e2 = (approx(16) - 1.0).norm();
        let e3 = (approx(32) - 1.0).norm();
        assert!(e2 < 0.1 * e1 && e3 < 0.1 * e2.max(1e-15));
    }

    #[test]
    fn unreachable_tolerance_reports_failure() {
        let r = integrate_interval(|x: f64| Ok(x.sqrt().recip()), 0.0, 1.0, 1e-14, 0.0, 3000);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }
}
