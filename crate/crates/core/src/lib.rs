//! Training three-layer sigmoid networks as convex composite problems
//! `min_θ 𝕃(F(θ))`: a linearized proximal outer loop (plain or with
//! backtracking), an exact Levenberg–Marquardt step for quadratic loss and an
//! ADMM subsolver with closed-form proximity operators for absolute and hinge
//! losses.

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod losses;
pub mod model;
pub mod solvers;
pub mod subsolvers;

pub use error::{Error, Result};
pub use losses::LossKind;
pub use model::{NetworkShape, ParamVector, ResidualEval};

/// Float formatting used by every file this crate writes: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
