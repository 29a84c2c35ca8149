//! Bias and quality metrics: the linear bias regression on generation,
//! mini coreference scoring, likelihood-triplet scoring, and perplexity.

mod coref;
mod observations;
mod perplexity;
mod regression;
mod stereoset;

pub use coref::{eval_coref, make_coref_items, CorefItem, CorefReport, Polarity, PronounGender};
pub use observations::{collect_observations, BiasObservation};
pub use perplexity::{perplexity, unigram_perplexity};
pub use regression::{fit_bias_regression, fit_xy, BiasRegressionFit};
pub use stereoset::{eval_stereoset, icat, make_stereoset_items, StereoItem, StereoReport};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("degenerate design: {0}")]
    DegenerateDesign(String),
    #[error("unknown candidate token: {0}")]
    UnknownCandidateToken(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Linalg(#[from] crate::linalg::LinalgError),
    #[error(transparent)]
    Data(#[from] crate::datagen::DataError),
}

pub type Result<T> = std::result::Result<T, EvalError>;
