//! Per-(profession, template) pronoun probability observations.

use serde::Serialize;

use super::Result;
use crate::datagen::{ProfessionEntry, PromptTemplate, Vocabulary};
use crate::model::{forward, ModelCheckpoint};
use crate::par;

/// One prompt's pronoun probabilities. `y = p_he - p_she` is the empirical
/// bias score; `p_they` is carried for reporting only.
#[derive(Clone, Debug, Serialize)]
pub struct BiasObservation {
    pub profession: String,
    pub x_f: f64,
    pub x_s: f64,
    pub template_id: String,
    pub y: f64,
    pub p_he: f64,
    pub p_she: f64,
    pub p_they: f64,
}

/// Fills every profession into every template and reads the next-token
/// distribution at the slot position (the prompt's last token). Runs
/// prompts in parallel; output order is (profession, template) row-major.
pub fn collect_observations(
    ckpt: &ModelCheckpoint,
    entries: &[ProfessionEntry],
    templates: &[PromptTemplate],
    vocab: &Vocabulary,
) -> Result<Vec<BiasObservation>> {
    let pronouns = vocab.pronouns();
    let total = entries.len() * templates.len();
    par::try_map_range(total, |idx| {
        let entry = &entries[idx / templates.len()];
        let template = &templates[idx % templates.len()];
        let tokens = template.realize(&entry.word, vocab)?;
        let out = forward(ckpt, &tokens, &[])?;
        let dist = out.distributions.last().expect("non-empty prompt");
        let p_he = dist.prob(pronouns.he);
        let p_she = dist.prob(pronouns.she);
        Ok(BiasObservation {
            profession: entry.word.clone(),
            x_f: entry.x_f,
            x_s: entry.x_s,
            template_id: template.id.clone(),
            y: p_he - p_she,
            p_he,
            p_she,
            p_they: dist.prob(pronouns.they),
        })
    })
}
