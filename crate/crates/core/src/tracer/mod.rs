//! Causal tracing: clean/corrupted/restored runs and indirect-effect grids
//! over (layer x token-group x component), with a per-cell bias regression.

mod grid;
mod groups;
mod noise;
mod runs;

pub use grid::{build_grid, CellReport, GridReport, TraceCell, TraceGrid};
pub use groups::{group_positions, TokenGroup, ALL_GROUPS};
pub use noise::{calibrate_noise, NoiseConfig};
pub use runs::{corrupted_run, restored_run, Component, TracePrompt};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("empty lexicon")]
    EmptyLexicon,
    #[error("subject span out of range: {0}")]
    SpanOutOfRange(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Eval(#[from] crate::biaseval::EvalError),
    #[error(transparent)]
    Data(#[from] crate::datagen::DataError),
}

pub type Result<T> = std::result::Result<T, TraceError>;
