//! Closed word-level vocabulary.
//!
//! Single-token professions keep the pronoun probability a plain next-token
//! lookup. The word list is fixed apart from the professions, which come
//! from the lexicon, so two runs over the same lexicon always agree on ids.

use std::collections::HashMap;

use super::{DataError, Result};

pub const PRONOUNS: [&str; 3] = ["he", "she", "they"];

/// Function words, template verbs, probe words, and the filler word pool.
/// Order is part of the vocabulary contract; append only.
const BASE_WORDS: &[&str] = &[
    // pronouns
    "he", "she", "they",
    // function words
    "the", "a", "and", "of", "in", "on", "at", "near", "over", "because", "that", "to", "up",
    // template verbs
    "wanted", "desired", "cried", "laughed", "stayed", "said", "whispered", "smiled", "knew",
    "replied",
    // coreference probe words
    "met", "helped", "refers", "was", "late",
    // tail verbs
    "felt", "needed", "saw", "seemed", "looked",
    // filler nouns
    "rain", "hill", "river", "garden", "market", "street", "window", "door", "table", "chair",
    "bread", "coffee", "letter", "book", "road", "train", "city", "village", "forest", "field",
    "song", "story", "meeting", "morning", "evening", "winter", "summer", "light", "shadow",
    "wall", "mountain", "valley", "bridge", "harbor", "island", "kitchen", "office", "school",
    "museum", "library", "station", "airport", "theater", "cinema", "bakery", "workshop",
    "factory", "clinic", "hospital", "court",
    // filler verbs
    "fell", "moved", "opened", "closed", "started", "ended", "changed", "stopped", "turned",
    "appeared", "waited", "arrived", "returned", "continued", "followed", "watched", "grew",
    "shone", "faded", "settled",
    // adjectives
    "quiet", "busy", "bright", "dark", "cold", "warm", "early", "heavy", "empty", "full", "old",
    "new", "long", "short", "green", "blue", "tired", "happy", "calm", "strange",
    // adverbs
    "slowly", "quickly", "quietly", "suddenly", "finally", "often", "rarely", "together",
    "alone", "again",
];

#[derive(Clone, Copy, Debug)]
pub struct PronounIds {
    pub he: u32,
    pub she: u32,
    pub they: u32,
}

#[derive(Clone, Debug)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Base words followed by the professions, in lexicon order. Professions
    /// already present in the base list are not duplicated.
    pub fn build(professions: &[String]) -> Self {
        let mut words = Vec::new();
        let mut index = HashMap::new();
        for w in BASE_WORDS {
            let id = words.len() as u32;
            if index.insert((*w).to_string(), id).is_none() {
                words.push((*w).to_string());
            }
        }
        for p in professions {
            if !index.contains_key(p) {
                let id = words.len() as u32;
                index.insert(p.clone(), id);
                words.push(p.clone());
            }
        }
        Self { words, index }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn require(&self, word: &str) -> Result<u32> {
        self.id(word)
            .ok_or_else(|| DataError::UnknownWord(word.to_string()))
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn pronouns(&self) -> PronounIds {
        PronounIds {
            he: self.id("he").expect("base vocabulary carries 'he'"),
            she: self.id("she").expect("base vocabulary carries 'she'"),
            they: self.id("they").expect("base vocabulary carries 'they'"),
        }
    }

    /// Encodes a whitespace-separated sentence.
    pub fn encode(&self, text: &str) -> Result<Vec<u32>> {
        text.split_whitespace().map(|w| self.require(w)).collect()
    }

    pub fn decode(&self, tokens: &[u32]) -> String {
        tokens
            .iter()
            .map(|&t| self.word(t))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub(crate) fn filler_nouns(&self) -> std::ops::Range<usize> {
        // positions of the noun block inside BASE_WORDS
        let start = BASE_WORDS.iter().position(|w| *w == "rain").unwrap();
        let end = BASE_WORDS.iter().position(|w| *w == "court").unwrap() + 1;
        start..end
    }

    pub(crate) fn filler_verbs(&self) -> std::ops::Range<usize> {
        let start = BASE_WORDS.iter().position(|w| *w == "fell").unwrap();
        let end = BASE_WORDS.iter().position(|w| *w == "settled").unwrap() + 1;
        start..end
    }

    pub(crate) fn adjectives(&self) -> std::ops::Range<usize> {
        let start = BASE_WORDS.iter().position(|w| *w == "quiet").unwrap();
        let end = BASE_WORDS.iter().position(|w| *w == "strange").unwrap() + 1;
        start..end
    }

    pub(crate) fn adverbs(&self) -> std::ops::Range<usize> {
        let start = BASE_WORDS.iter().position(|w| *w == "slowly").unwrap();
        let end = BASE_WORDS.iter().position(|w| *w == "again").unwrap() + 1;
        start..end
    }
}
