//! Stereotype-correlated synthetic corpus.
//!
//! Profession sentences follow `the <profession> <template body> <pronoun>
//! <tail>`. The pronoun is `they` for a fixed 10% of profession sentences;
//! otherwise `he` with probability `clamp(0.5 + 0.5 (s x_s + f x_f), 0.02,
//! 0.98)` and `she` with the complement, so the stereotype and factual
//! channels of the learned bias are independently controllable. A 30% share
//! of the corpus is neutral filler with no profession or pronoun; those
//! sentences double as the KL prompt pool during value optimization.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::templates::PromptTemplate;
use super::vocab::Vocabulary;
use super::{DataError, ProfessionEntry, Result};
use crate::par;
use crate::seed;

pub const FILLER_SHARE: f64 = 0.30;
pub const NEUTRAL_PRONOUN_SHARE: f64 = 0.10;
pub const PRONOUN_CLAMP: (f64, f64) = (0.02, 0.98);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub stereotype_strength: f64,
    pub factual_strength: f64,
    pub n_sentences: usize,
    pub seed: u64,
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.stereotype_strength)
            || !(0.0..=1.0).contains(&self.factual_strength)
        {
            return Err(DataError::InvalidArgument(
                "corpus strengths must lie in [0, 1]".into(),
            ));
        }
        if self.n_sentences == 0 {
            return Err(DataError::InvalidArgument(
                "corpus needs at least one sentence".into(),
            ));
        }
        Ok(())
    }

    /// The probability the formula assigns to `he` (conditional on a gendered
    /// pronoun being drawn).
    pub fn p_he(&self, entry: &ProfessionEntry) -> f64 {
        let raw = 0.5 + 0.5 * (self.stereotype_strength * entry.x_s
            + self.factual_strength * entry.x_f);
        raw.clamp(PRONOUN_CLAMP.0, PRONOUN_CLAMP.1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SentenceKind {
    Profession { word: String },
    Filler,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sentence {
    pub tokens: Vec<u32>,
    pub kind: SentenceKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub sentences: Vec<Sentence>,
}

impl Corpus {
    pub fn token_sequences(&self) -> Vec<Vec<u32>> {
        self.sentences.iter().map(|s| s.tokens.clone()).collect()
    }

    pub fn filler_sentences(&self) -> Vec<&Sentence> {
        self.sentences
            .iter()
            .filter(|s| s.kind == SentenceKind::Filler)
            .collect()
    }

    pub fn profession_sentences(&self) -> Vec<&Sentence> {
        self.sentences
            .iter()
            .filter(|s| matches!(s.kind, SentenceKind::Profession { .. }))
            .collect()
    }

    /// One sentence per line, space-separated word tokens.
    pub fn to_lines(&self, vocab: &Vocabulary) -> String {
        let mut out = String::new();
        for s in &self.sentences {
            out.push_str(&vocab.decode(&s.tokens));
            out.push('\n');
        }
        out
    }

    /// Parses the line format back into token sequences (sentence kinds are
    /// not part of the text format).
    pub fn parse_lines(text: &str, vocab: &Vocabulary) -> Result<Vec<Vec<u32>>> {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| vocab.encode(l))
            .collect()
    }
}

fn pick(rng: &mut ChaCha8Rng, range: std::ops::Range<usize>) -> u32 {
    rng.gen_range(range.start..range.end) as u32
}

fn filler_sentence(rng: &mut ChaCha8Rng, vocab: &Vocabulary) -> Vec<u32> {
    let the = vocab.id("the").unwrap();
    let was = vocab.id("was").unwrap();
    let near = vocab.id("near").unwrap();
    let nouns = vocab.filler_nouns();
    let verbs = vocab.filler_verbs();
    let adjs = vocab.adjectives();
    let advs = vocab.adverbs();
    match rng.gen_range(0..5u8) {
        0 => vec![the, pick(rng, nouns), pick(rng, verbs), pick(rng, advs)],
        1 => vec![the, pick(rng, nouns), was, pick(rng, adjs)],
        2 => vec![the, pick(rng, adjs), pick(rng, nouns), pick(rng, verbs)],
        3 => vec![
            the,
            pick(rng, nouns.clone()),
            pick(rng, verbs),
            near,
            the,
            pick(rng, nouns),
        ],
        _ => vec![
            the,
            pick(rng, nouns.clone()),
            pick(rng, verbs.clone()),
            pick(rng, advs),
            the,
            pick(rng, nouns),
            pick(rng, verbs),
        ],
    }
}

fn tail(rng: &mut ChaCha8Rng, vocab: &Vocabulary) -> Vec<u32> {
    let the = vocab.id("the").unwrap();
    let nouns = vocab.filler_nouns();
    let adjs = vocab.adjectives();
    match rng.gen_range(0..4u8) {
        0 => vec![vocab.id("was").unwrap(), pick(rng, adjs)],
        1 => vec![vocab.id("felt").unwrap(), pick(rng, adjs)],
        2 => vec![vocab.id("saw").unwrap(), the, pick(rng, nouns)],
        _ => vec![vocab.id("needed").unwrap(), the, pick(rng, nouns)],
    }
}

/// Generates the corpus. Each sentence draws from its own seed derived from
/// `(spec.seed, index)`, so generation parallelizes without changing output.
pub fn generate_corpus(
    spec: &CorpusSpec,
    lexicon: &[ProfessionEntry],
    templates: &[PromptTemplate],
    vocab: &Vocabulary,
) -> Result<Corpus> {
    spec.validate()?;
    if lexicon.is_empty() {
        return Err(DataError::InvalidArgument(
            "corpus generation needs a non-empty lexicon".into(),
        ));
    }
    if templates.is_empty() {
        return Err(DataError::InvalidArgument(
            "corpus generation needs at least one template".into(),
        ));
    }
    for entry in lexicon {
        if !vocab.contains(&entry.word) {
            return Err(DataError::UnknownWord(entry.word.clone()));
        }
    }
    let pronouns = vocab.pronouns();

    let sentences = par::try_map_range(spec.n_sentences, |i| {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed::derive_indexed(spec.seed, "sentence", i as u64));
        if rng.gen::<f64>() < FILLER_SHARE {
            return Ok::<Sentence, DataError>(Sentence {
                tokens: filler_sentence(&mut rng, vocab),
                kind: SentenceKind::Filler,
            });
        }
        let entry = &lexicon[rng.gen_range(0..lexicon.len())];
        let template = &templates[rng.gen_range(0..templates.len())];
        let pronoun = if rng.gen::<f64>() < NEUTRAL_PRONOUN_SHARE {
            pronouns.they
        } else if rng.gen::<f64>() < spec.p_he(entry) {
            pronouns.he
        } else {
            pronouns.she
        };
        let mut tokens = template.realize(&entry.word, vocab)?;
        tokens.push(pronoun);
        tokens.extend(tail(&mut rng, vocab));
        Ok(Sentence {
            tokens,
            kind: SentenceKind::Profession {
                word: entry.word.clone(),
            },
        })
    })?;

    Ok(Corpus { sentences })
}
