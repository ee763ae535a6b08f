use num_complex::Complex64;
use thiserror::Error;

/// Which part of the σ lattice a point is close to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum LatticeKind {
    Zero,
    Pole,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Domain(String),

    #[error("rational frequency: step {step} of the Gauss map produced {value}")]
    RationalFrequency { step: usize, value: f64 },

    #[error("potential pole: cot(pi z) at z = {z} is within tolerance of the integer {lattice} (orbit index {index:?})")]
    PotentialPole {
        z: Complex64,
        lattice: i64,
        index: Option<i64>,
    },

    #[error("singular matrix (det = {det})")]
    SingularMatrix { det: Complex64 },

    #[error("small denominator: |sin(pi n w)| = {value:e} at n = {n}")]
    SmallDenominator { n: usize, value: f64 },

    #[error("{kind:?} of sigma at {point} is within {distance:e} of z = {z}")]
    NearSingularValue {
        z: Complex64,
        kind: LatticeKind,
        point: f64,
        distance: f64,
    },

    #[error("no admissible contour direction for z = {z} (decay rate {rate:e})")]
    ContourSelection { z: Complex64, rate: f64 },

    #[error("quadrature did not converge: error {achieved:e} > {requested:e} after {evals} evaluations")]
    Quadrature {
        achieved: f64,
        requested: f64,
        evals: usize,
    },

    #[error("circle quadrature for the residue at {center} did not stabilise (last change {change:e})")]
    Residue { center: Complex64, change: f64 },

    #[error("minimal solution evaluated at {z}, within {distance:e} of the pole {pole}")]
    MinSolPole { z: Complex64, pole: f64, distance: f64 },

    #[error("fundamental solution is singular: det = {det}")]
    SingularFundamental { det: Complex64 },

    #[error("precision budget exceeded at level {level}: predicted loss of {digits:.1} digits")]
    Precision { level: usize, digits: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, Error>;
