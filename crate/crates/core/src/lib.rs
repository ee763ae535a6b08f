//! Numerics for the Maryland model: transfer-matrix cocycles, the σ special
//! function, the minimal meromorphic solution of the complex Maryland
//! equation, and the exact renormalization of cocycle products.

pub mod cocycle;
pub mod ddouble;
pub mod error;
pub mod minsol;
pub mod params;
pub mod quadrature;
pub mod renorm;
pub mod sigma;
pub mod verify;

pub use cocycle::{cocycle_product, cocycle_product_with, transfer_matrix, Mat2C, Precision, ScaledMat2C};
pub use error::{Error, LatticeKind, Result};
pub use params::{gauss_chain, params_from_energy, renorm_params, RenormStep, SpectralParams};
pub use verify::{run_verification, VerifyConfig, VerifyReport};
