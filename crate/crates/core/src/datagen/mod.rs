//! Synthetic data: the profession lexicon, the closed word-level vocabulary,
//! prompt templates, the stereotype-correlated training corpus, the template
//! filter, and the train/test split.

mod corpus;
mod lexicon;
mod split;
mod templates;
mod vocab;

pub use corpus::{generate_corpus, Corpus, CorpusSpec, Sentence, SentenceKind};
pub use lexicon::{build_lexicon, builtin_professions_json, LexiconLoad, ProfessionEntry};
pub use split::{make_split, SplitSpec};
pub use templates::{default_templates, filter_templates, PromptTemplate, TEMPLATE_GAP_THRESHOLD};
pub use vocab::{PronounIds, Vocabulary};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("parse error: {0}")]
    ParseError(String),
    #[error("score out of range for {word:?}: {value}")]
    ScoreOutOfRange { word: String, value: f64 },
    #[error("word not in vocabulary: {0:?}")]
    UnknownWord(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

pub type Result<T> = std::result::Result<T, DataError>;
