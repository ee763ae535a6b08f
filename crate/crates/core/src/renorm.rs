//! Fundamental solutions, monodromy matrices and the exact renormalization
//! of cocycle products.
//!
//! With `Ψ(z) = [[ψ(z), ψ(z−1)], [ψ(z−ω), ψ(z−1−ω)]]` built from the
//! minimal solution, `Ψ(z+ω) = F(z)Ψ(z)` and
//! `P_N = Ψ({θ+Nω}) σ₂ P_{N₁}(ω₁, θ₁, η₁, l₁) σ₂ Ψ⁻¹(θ)`.

use std::sync::Arc;

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::cocycle::{check_orbit, cocycle_product_with, transfer_matrix, Mat2C, Precision, ScaledMat2C};
use crate::error::{Error, Result};
use crate::minsol::{MinSolContext, MinSolOptions};
use crate::params::{floor_frac, renorm_params, RenormStep, SpectralParams};

/// `|det Ψ| / ‖Ψ‖²_F` below this means Ψ is not fundamental.
pub const SINGULAR_TOL: f64 = 1e-10;
/// Relative error charged to every entry of Ψ in the error estimate.
pub const UPSILON_REL_ERR: f64 = 1e-14;
/// Factor between the measured spread and the predicted error.
pub const ESTIMATE_SAFETY: f64 = 10.0;
/// Largest `l` at which a level's minimal solution is still evaluated.
pub const L_BUDGET: f64 = 60.0;

type PsiFn = dyn Fn(Complex64) -> Result<Mat2C> + Send + Sync;

/// A matrix solution `Ψ` of `Ψ(z+ω) = M(z)Ψ(z)` with constant determinant.
pub struct FundamentalSolution {
    evaluator: Box<PsiFn>,
    pub det_constant: Complex64,
}

impl std::fmt::Debug for FundamentalSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FundamentalSolution")
            .field("det_constant", &self.det_constant)
            .finish_non_exhaustive()
    }
}

impl FundamentalSolution {
    /// Wraps an arbitrary evaluator; `det_constant` is measured at the
    /// first of `references` where Ψ can be evaluated.
    pub fn from_fn(
        evaluator: impl Fn(Complex64) -> Result<Mat2C> + Send + Sync + 'static,
        references: &[f64],
    ) -> Result<Self> {
        let mut last = Error::Domain("no reference point".into());
        for &x in references {
            match evaluator(Complex64::new(x, 0.0)) {
                Ok(m) => {
                    let det = m.det();
                    let norm = m.frobenius();
                    if !det.is_finite() || det.norm() <= SINGULAR_TOL * norm * norm {
                        return Err(Error::SingularFundamental { det });
                    }
                    return Ok(FundamentalSolution {
                        evaluator: Box::new(evaluator),
                        det_constant: det,
                    });
                }
                Err(e) => last = e,
            }
        }
        Err(last)
    }

    /// Ψ from the minimal solution, multiplied by `scale`. The determinant
    /// is the closed form of the Wronskian, which does not suffer the
    /// cancellation of `ψ(z)ψ(z−1−ω) − ψ(z−1)ψ(z−ω)`.
    pub fn from_minsol(ctx: Arc<MinSolContext>, scale: Complex64) -> Result<Self> {
        let (det, _) = ctx.wronskian_closed_forms();
        let det = det * scale * scale;
        if ctx.is_resonant() || !det.is_finite() || det.norm() == 0.0 {
            return Err(Error::SingularFundamental { det });
        }
        Ok(FundamentalSolution {
            evaluator: Box::new(move |z| Ok(psi_at(&ctx, z)?.scale(scale))),
            det_constant: det,
        })
    }

    pub fn psi(&self, z: f64) -> Result<Mat2C> {
        (self.evaluator)(Complex64::new(z, 0.0))
    }

    pub fn psi_complex(&self, z: Complex64) -> Result<Mat2C> {
        (self.evaluator)(z)
    }

    /// `adj Ψ(z) / det_constant`.
    pub fn psi_inverse(&self, z: f64) -> Result<Mat2C> {
        let m = self.psi(z)?;
        Ok(Mat2C::new(m.a22, -m.a12, -m.a21, m.a11).scale(1.0 / self.det_constant))
    }
}

fn psi_at(ctx: &MinSolContext, z: Complex64) -> Result<Mat2C> {
    let w = ctx.omega();
    Ok(Mat2C::new(
        ctx.eval(z)?,
        ctx.eval(z - 1.0)?,
        ctx.eval(z - w)?,
        ctx.eval(z - 1.0 - w)?,
    ))
}

/// `Ψ(z) = [[ψ(z), ψ(z−1)], [ψ(z−ω), ψ(z−1−ω)]]` with ψ the minimal solution.
pub fn psi_matrix(ctx: &MinSolContext, z: f64) -> Result<Mat2C> {
    psi_at(ctx, Complex64::new(z, 0.0))
}

/// `‖Ψ‖_F ‖Ψ⁻¹‖_F`.
pub fn condition_estimate(m: &Mat2C) -> f64 {
    let n = m.frobenius();
    n * n / m.det().norm()
}

/// `M₁(x) = (Ψ(ωx)⁻¹ Ψ(ωx+1))ᵀ`.
pub fn monodromy_matrix(fs: &FundamentalSolution, omega: f64, x: f64) -> Result<Mat2C> {
    if fs.det_constant == Complex64::new(0.0, 0.0) {
        return Err(Error::SingularFundamental { det: fs.det_constant });
    }
    let p = fs.psi_inverse(omega * x)? * fs.psi(omega * x + 1.0)?;
    Ok(p.transpose())
}

/// `M(θ+(N−1)ω)⋯M(θ)` for `N > 0`, `M(θ−ω)⁻¹⋯M(θ+Nω)⁻¹` for `N < 0`.
pub fn matrix_cocycle(m: impl Fn(f64) -> Result<Mat2C>, omega: f64, theta: f64, n: i64) -> Result<ScaledMat2C> {
    let mut acc = ScaledMat2C::identity();
    if n >= 0 {
        for k in 0..n {
            acc = acc.mul_mat_left(&m(theta + k as f64 * omega)?);
        }
    } else {
        for k in (n..0).rev() {
            acc = acc.mul_mat_left(&m(theta + k as f64 * omega)?.inverse()?);
        }
    }
    Ok(acc)
}

/// Boundary data of one renormalization step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RenormOnce {
    pub step: RenormStep,
    /// `Ψ({θ+Nω})`.
    pub left: Mat2C,
    /// `Ψ⁻¹(θ)`.
    pub right: Mat2C,
    /// `κ(Ψ({θ+Nω})) · κ(Ψ(θ))`.
    pub condition: f64,
}

impl RenormOnce {
    pub fn inner(&self) -> (SpectralParams, i64) {
        (self.step.next_params, self.step.n_next)
    }

    /// `left · σ₂ · inner · σ₂ · right`.
    pub fn reconstruct(&self, inner: &ScaledMat2C) -> ScaledMat2C {
        inner
            .mul_mat_left(&(self.left * Mat2C::SIGMA2))
            .mul_mat_right(&(Mat2C::SIGMA2 * self.right))
    }
}

fn boundary_pair(fs: &FundamentalSolution, theta: f64, end: f64) -> Result<(Mat2C, Mat2C, f64)> {
    let left = fs.psi(end)?;
    let right = fs.psi_inverse(theta)?;
    let kappa = |m: &Mat2C| {
        let n = m.frobenius();
        n * n / fs.det_constant.norm()
    };
    Ok((left, right, kappa(&left) * kappa(&fs.psi(theta)?)))
}

/// One step of the renormalization for the Maryland cocycle.
pub fn renormalize_once(p: &SpectralParams, n: i64) -> Result<RenormOnce> {
    check_orbit(p, n)?;
    let ctx = Arc::new(MinSolContext::new(*p)?);
    let fs = FundamentalSolution::from_minsol(ctx, 1.0.into())?;
    renormalize_once_with(&fs, p, n)
}

/// As [`renormalize_once`], with a caller-supplied fundamental solution.
pub fn renormalize_once_with(fs: &FundamentalSolution, p: &SpectralParams, n: i64) -> Result<RenormOnce> {
    let step = renorm_params(p, n)?;
    let (_, end) = floor_frac(p.theta + n as f64 * p.omega);
    let (left, right, condition) = boundary_pair(fs, p.theta, end)?;
    Ok(RenormOnce {
        step,
        left,
        right,
        condition,
    })
}

/// Boundary data of the renormalization of a general cocycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GenericRenorm {
    pub left: Mat2C,
    pub right: Mat2C,
    pub omega1: f64,
    pub theta1: f64,
    pub n1: i64,
}

impl GenericRenorm {
    /// `left · σ₂ · P_{N₁}(M₁, ω₁, θ₁) · σ₂ · right` with `M₁` from `fs`.
    pub fn reconstruct(&self, fs: &FundamentalSolution, omega: f64) -> Result<ScaledMat2C> {
        let inner = matrix_cocycle(|x| monodromy_matrix(fs, omega, x), self.omega1, self.theta1, self.n1)?;
        Ok(inner
            .mul_mat_left(&(self.left * Mat2C::SIGMA2))
            .mul_mat_right(&(Mat2C::SIGMA2 * self.right)))
    }
}

/// Renormalization of `P_N(M, ω, θ)` for a 1-periodic unimodular `M` with
/// fundamental solution `fs`.
pub fn generic_renormalize(fs: &FundamentalSolution, omega: f64, theta: f64, n: i64) -> Result<GenericRenorm> {
    let (floor_orbit, end) = floor_frac(theta + n as f64 * omega);
    let (_, omega1) = floor_frac(1.0 / omega);
    let (_, theta1) = floor_frac(theta / omega);
    let (left, right, _) = boundary_pair(fs, theta, end)?;
    Ok(GenericRenorm {
        left,
        right,
        omega1,
        theta1,
        n1: -floor_orbit,
    })
}

/// `Ψ(θ+Nω) Ψ⁻¹(θ)`.
pub fn psi_transport(fs: &FundamentalSolution, omega: f64, theta: f64, n: i64) -> Result<Mat2C> {
    Ok(fs.psi(theta + n as f64 * omega)? * fs.psi_inverse(theta)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeOptions {
    pub max_depth: usize,
    /// Arithmetic of the terminal product.
    pub precision: Precision,
    /// Largest tolerated predicted relative error of the reconstruction.
    pub error_budget: f64,
    pub minsol: MinSolOptions,
}

impl Default for CascadeOptions {
    fn default() -> Self {
        CascadeOptions {
            max_depth: 64,
            precision: Precision::Double,
            error_budget: 1e-6,
            minsol: MinSolOptions::default(),
        }
    }
}

/// A full chain of renormalizations down to at most one factor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenormChain {
    pub levels: Vec<RenormStep>,
    /// `Ψ_k({θ_k+N_kω_k}) σ₂`.
    pub boundary_left: Vec<ScaledMat2C>,
    /// `σ₂ Ψ_k⁻¹(θ_k)`.
    pub boundary_right: Vec<ScaledMat2C>,
    /// `κ(Ψ_k({θ_k+N_kω_k})) · κ(Ψ_k(θ_k))`.
    pub conditions: Vec<f64>,
    /// Predicted relative error of the reconstruction of `P_{N_k}` at
    /// each level.
    pub error_estimates: Vec<f64>,
    pub terminal_params: SpectralParams,
    pub terminal_n: i64,
    pub terminal_product: ScaledMat2C,
}

impl RenormChain {
    /// Predicted relative error of the reconstructed `P_N`.
    pub fn predicted_error(&self) -> f64 {
        self.error_estimates.first().copied().unwrap_or(f64::EPSILON)
    }
}

/// Number of perturbed reconstructions behind each error estimate.
const ESTIMATE_SAMPLES: usize = 4;

/// Multiplies every entry by `1 + δ` with a random complex `|δ| ≤ rel`.
fn perturb(m: &ScaledMat2C, rel: f64, rng: &mut StdRng) -> ScaledMat2C {
    let r = rel * std::f64::consts::FRAC_1_SQRT_2;
    let e = m.mat.entries().map(|z| z * Complex64::new(1.0 + rng.gen_range(-r..=r), rng.gen_range(-r..=r)));
    ScaledMat2C {
        mat: Mat2C::new(e[0], e[1], e[2], e[3]),
        log_scale: m.log_scale,
    }
}

/// `‖Im P‖_F / ‖P‖_F`; zero in exact arithmetic since every factor of a
/// cocycle with real `θ` is real.
fn imaginary_part(m: &ScaledMat2C) -> f64 {
    let im = m.mat.entries().iter().map(|z| z.im * z.im).sum::<f64>().sqrt();
    im / m.mat.frobenius()
}

fn reconstruct_from(left: &[ScaledMat2C], right: &[ScaledMat2C], terminal: &ScaledMat2C) -> Vec<ScaledMat2C> {
    let mut out = vec![*terminal; left.len()];
    let mut acc = *terminal;
    for k in (0..left.len()).rev() {
        acc = left[k].mul(&acc).mul(&right[k]);
        out[k] = acc;
    }
    out
}

/// Predicted relative error of the reconstruction at each level:
/// [`ESTIMATE_SAFETY`] times the larger of the spread of reconstructions
/// with randomly perturbed inputs (boundary entries by [`UPSILON_REL_ERR`],
/// the terminal product by `4|N|ε`) and the imaginary part of the
/// reconstruction itself.
fn error_estimates(
    left: &[ScaledMat2C],
    right: &[ScaledMat2C],
    terminal: &ScaledMat2C,
    terminal_n: i64,
) -> Vec<f64> {
    let base = reconstruct_from(left, right, terminal);
    let mut est: Vec<f64> = base.iter().map(imaginary_part).collect();
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let term_rel = (terminal_n.unsigned_abs().max(1) as f64) * 4.0 * f64::EPSILON;
    for _ in 0..ESTIMATE_SAMPLES {
        let l: Vec<_> = left.iter().map(|m| perturb(m, UPSILON_REL_ERR, &mut rng)).collect();
        let r: Vec<_> = right.iter().map(|m| perturb(m, UPSILON_REL_ERR, &mut rng)).collect();
        let t = perturb(terminal, term_rel, &mut rng);
        for (k, m) in reconstruct_from(&l, &r, &t).iter().enumerate() {
            est[k] = est[k].max(m.relative_distance(&base[k]));
        }
    }
    est.iter().map(|e| ESTIMATE_SAFETY * e).collect()
}

struct Levels {
    steps: Vec<RenormStep>,
    left: Vec<ScaledMat2C>,
    right: Vec<ScaledMat2C>,
    conditions: Vec<f64>,
    /// Parameters and step count entering each level, plus the final pair.
    entries: Vec<(SpectralParams, i64)>,
    /// Level at which `l` first exceeded [`L_BUDGET`] or the boundary
    /// matrices overflowed.
    exhausted_at: Option<usize>,
}

fn build_levels(p: &SpectralParams, n: i64, opts: &CascadeOptions) -> Result<Levels> {
    check_orbit(p, n)?;
    let mut lv = Levels {
        steps: Vec::new(),
        left: Vec::new(),
        right: Vec::new(),
        conditions: Vec::new(),
        entries: vec![(*p, n)],
        exhausted_at: None,
    };
    let (mut cur, mut cur_n) = (*p, n);
    while cur_n.abs() > 1 && lv.steps.len() < opts.max_depth {
        if cur.l > L_BUDGET {
            lv.exhausted_at = Some(lv.steps.len());
            break;
        }
        let once = match level_step(&cur, cur_n, opts) {
            Err(Error::NonFinite(_)) => {
                lv.exhausted_at = Some(lv.steps.len());
                break;
            }
            r => r?,
        };
        lv.left.push(ScaledMat2C::from_mat(once.left * Mat2C::SIGMA2));
        lv.right.push(ScaledMat2C::from_mat(Mat2C::SIGMA2 * once.right));
        lv.conditions.push(once.condition);
        lv.steps.push(once.step);
        cur = once.step.next_params;
        cur_n = once.step.n_next;
        lv.entries.push((cur, cur_n));
    }
    Ok(lv)
}

fn level_step(p: &SpectralParams, n: i64, opts: &CascadeOptions) -> Result<RenormOnce> {
    let ctx = Arc::new(MinSolContext::with_options(*p, opts.minsol)?);
    let fs = FundamentalSolution::from_minsol(ctx, 1.0.into())?;
    renormalize_once_with(&fs, p, n)
}

/// The chain made of the first `depth` levels, with the remaining product
/// computed directly.
fn assemble(lv: &Levels, depth: usize, opts: &CascadeOptions) -> Result<RenormChain> {
    let (terminal_params, terminal_n) = lv.entries[depth];
    let terminal_product = cocycle_product_with(&terminal_params, terminal_n, opts.precision)?;
    let (left, right) = (&lv.left[..depth], &lv.right[..depth]);
    Ok(RenormChain {
        levels: lv.steps[..depth].to_vec(),
        boundary_left: left.to_vec(),
        boundary_right: right.to_vec(),
        conditions: lv.conditions[..depth].to_vec(),
        error_estimates: error_estimates(left, right, &terminal_product, terminal_n),
        terminal_params,
        terminal_n,
        terminal_product,
    })
}

/// Renormalizes until `|N_k| ≤ 1` or `max_depth` levels, then checks the
/// predicted error of the reconstruction against the budget.
pub fn cascade(p: &SpectralParams, n: i64, opts: &CascadeOptions) -> Result<RenormChain> {
    let lv = build_levels(p, n, opts)?;
    if let Some(level) = lv.exhausted_at {
        return Err(Error::Precision {
            level,
            digits: lv.entries[level].0.l / std::f64::consts::LN_10,
        });
    }
    let chain = assemble(&lv, lv.steps.len(), opts)?;
    let top = chain.predicted_error();
    if !(top <= opts.error_budget) {
        // report the deepest level whose reconstruction is already over budget
        let level = chain
            .error_estimates
            .iter()
            .rposition(|&e| !(e <= opts.error_budget))
            .unwrap_or(0);
        return Err(Error::Precision {
            level,
            digits: (top / f64::EPSILON).log10(),
        });
    }
    Ok(chain)
}

/// Like [`cascade`], but truncated at the deepest level whose predicted
/// reconstruction error fits the budget; the rest of the product is taken
/// directly. Never fails on precision grounds.
pub fn cascade_within_budget(p: &SpectralParams, n: i64, opts: &CascadeOptions) -> Result<RenormChain> {
    let lv = build_levels(p, n, opts)?;
    for depth in (1..=lv.steps.len()).rev() {
        let chain = assemble(&lv, depth, opts)?;
        if chain.predicted_error() <= opts.error_budget {
            return Ok(chain);
        }
    }
    assemble(&lv, 0, opts)
}

/// `L₀ ⋯ L_{K−1} · P_terminal · R_{K−1} ⋯ R₀`.
pub fn cascade_reconstruct(chain: &RenormChain) -> ScaledMat2C {
    reconstruct_from(&chain.boundary_left, &chain.boundary_right, &chain.terminal_product)
        .first()
        .copied()
        .unwrap_or(chain.terminal_product)
}

/// The Maryland transfer matrix as a function of a real argument.
pub fn maryland_matrix(eta: f64, l: f64) -> impl Fn(f64) -> Result<Mat2C> {
    move |x| transfer_matrix(Complex64::new(x, 0.0), eta, l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::cocycle_product;

    const GOLDEN: f64 = 0.618_033_988_749_894_9;

    fn params() -> SpectralParams {
        SpectralParams::new(GOLDEN, 0.3, 1.0, 0.5).unwrap()
    }

    #[test]
    fn zero_steps_reconstruct_the_identity() {
        let p = params();
        let once = renormalize_once(&p, 0).unwrap();
        assert_eq!(once.step.n_next, 0);
        let inner = cocycle_product(&once.step.next_params, 0).unwrap();
        let r = once.reconstruct(&inner);
        assert!(r.relative_distance(&ScaledMat2C::identity()) < 1e-12);
    }

    #[test]
    fn one_step_matches_direct_product() {
        let p = params();
        let once = renormalize_once(&p, 50).unwrap();
        let (inner_p, inner_n) = once.inner();
        let rhs = once.reconstruct(&cocycle_product(&inner_p, inner_n).unwrap());
        let lhs = cocycle_product(&p, 50).unwrap();
        assert!(rhs.relative_distance(&lhs) < 1e-8, "{}", rhs.relative_distance(&lhs));
    }

    #[test]
    fn governing_relation_of_psi() {
        let p = params();
        let ctx = MinSolContext::new(p).unwrap();
        for z in [0.1, 0.35, 0.72] {
            let lhs = psi_matrix(&ctx, z + GOLDEN).unwrap();
            let rhs = transfer_matrix(Complex64::new(z, 0.0), p.eta, p.l).unwrap() * psi_matrix(&ctx, z).unwrap();
            assert!(rhs.relative_distance(&lhs) < 1e-8);
        }
    }

    #[test]
    fn monodromy_is_unimodular() {
        let ctx = Arc::new(MinSolContext::new(params()).unwrap());
        let fs = FundamentalSolution::from_minsol(ctx, 1.0.into()).unwrap();
        let m = monodromy_matrix(&fs, GOLDEN, 0.37).unwrap();
        assert!((m.det() - 1.0).norm() < 1e-9);
    }

    #[test]
    fn cocycle_of_maryland_matrix_matches_cocycle_product() {
        let p = params();
        for n in [-9, 0, 12] {
            let a = matrix_cocycle(maryland_matrix(p.eta, p.l), p.omega, p.theta, n).unwrap();
            let b = cocycle_product(&p, n).unwrap();
            assert!(a.relative_distance(&b) < 1e-13);
        }
    }
}
