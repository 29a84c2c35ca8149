//! Dense real-matrix kernel: ordinary least squares, orthogonality-constrained
//! least squares, NIPALS partial least squares, and projection construction.
//!
//! Everything here is plain `f64`, row-major, and allocation-friendly at the
//! sizes this pipeline uses (dimensions up to a few hundred). Operations are
//! pure functions of their inputs; values are immutable after construction
//! and safe to share across threads.

mod decomp;
mod matrix;
mod ols;
mod pls;
mod projection;

pub use decomp::{cholesky, solve_general, spd_condition, spd_solve, sym_eigen};
pub use matrix::{axpy, dot, norm2, Matrix};
pub use ols::{solve_constrained_ols, solve_ols};
pub use pls::{fit_pls, PlsFit};
pub use projection::{projection_from_basis, Projection};

use thiserror::Error;

/// Condition-number ceiling for Gram matrices; above it they are treated as
/// numerically singular.
pub const GRAM_CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("gram matrix numerically singular (condition {cond:.3e}, limit {limit:.3e})")]
    SingularGram { cond: f64, limit: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("non-finite entry at flat index {0}")]
    NonFinite(usize),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

pub type Result<T> = std::result::Result<T, LinalgError>;
