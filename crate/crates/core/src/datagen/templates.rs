//! Prompt templates with one profession slot, ending where a pronoun is the
//! natural next token, plus the bias filter that drops templates whose verbs
//! skew the pronoun prediction on their own.

use super::vocab::Vocabulary;
use super::{DataError, ProfessionEntry, Result};
use crate::model::{forward, ModelCheckpoint};
use crate::par;

/// Retention threshold for the template filter: templates whose mean
/// `P(he) - P(she)` across professions reaches 0.008 (0.8% absolute
/// probability) are dropped.
pub const TEMPLATE_GAP_THRESHOLD: f64 = 0.008;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: String,
    /// Text with exactly one `{}` slot for the profession.
    pub text: String,
}

impl PromptTemplate {
    pub fn new(id: &str, text: &str) -> Result<Self> {
        if text.matches("{}").count() != 1 {
            return Err(DataError::InvalidArgument(format!(
                "template {id:?} must contain exactly one {{}} slot: {text:?}"
            )));
        }
        Ok(Self {
            id: id.to_string(),
            text: text.to_string(),
        })
    }

    /// Fills the slot and encodes; the prompt ends right before the pronoun
    /// position.
    pub fn realize(&self, profession: &str, vocab: &Vocabulary) -> Result<Vec<u32>> {
        vocab.encode(&self.text.replace("{}", profession))
    }
}

/// The ten default templates. Verbs known to skew heavily toward male
/// continuations on their own (slept / was fired / was promoted / yelled)
/// are not included.
pub fn default_templates() -> Vec<PromptTemplate> {
    [
        ("wanted", "the {} wanted that"),
        ("desired", "the {} desired that"),
        ("cried", "the {} cried because"),
        ("laughed", "the {} laughed because"),
        ("stayed_up", "the {} stayed up because"),
        ("said", "the {} said that"),
        ("whispered", "the {} whispered that"),
        ("smiled", "the {} smiled because"),
        ("knew", "the {} knew that"),
        ("replied", "the {} replied that"),
    ]
    .iter()
    .map(|(id, text)| PromptTemplate::new(id, text).expect("default templates are well formed"))
    .collect()
}

/// Keeps templates whose mean signed gap `P(he) - P(she)` across the lexicon
/// stays below `threshold`. The signed comparison drops male-skewed verbs;
/// female-skewed ones survive because the overall generation bias runs the
/// other way.
pub fn filter_templates(
    templates: &[PromptTemplate],
    ckpt: &ModelCheckpoint,
    lexicon: &[ProfessionEntry],
    vocab: &Vocabulary,
    threshold: f64,
) -> Result<Vec<PromptTemplate>> {
    if lexicon.is_empty() {
        return Err(DataError::InvalidArgument(
            "template filter needs a non-empty lexicon".into(),
        ));
    }
    let pronouns = vocab.pronouns();
    let gaps = par::try_map_range(templates.len(), |ti| {
        let template = &templates[ti];
        let mut total = 0.0;
        for entry in lexicon {
            let tokens = template.realize(&entry.word, vocab)?;
            let out = forward(ckpt, &tokens, &[])?;
            let dist = out.distributions.last().expect("non-empty prompt");
            total += dist.prob(pronouns.he) - dist.prob(pronouns.she);
        }
        Ok::<f64, DataError>(total / lexicon.len() as f64)
    })?;
    Ok(templates
        .iter()
        .zip(&gaps)
        .filter(|(_, &gap)| gap < threshold)
        .map(|(t, _)| t.clone())
        .collect())
}
