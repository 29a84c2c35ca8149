//! Train/test split over the profession lexicon.
//!
//! Every profession with semantically defined gender (`|x_f| > 0.25`) is
//! forced into the test set, so the training side never teaches the editor
//! to remove factual gender. A seeded sample of the remaining professions
//! joins them.

use std::collections::BTreeSet;

use rand::prelude::*;
use rand_chacha::ChaCha20Rng;

use super::ProfessionEntry;
use crate::seed;

/// Threshold on `|x_f|` above which a profession is considered semantically
/// gendered and pinned to the test split.
pub const FACTUAL_TEST_THRESHOLD: f64 = 0.25;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitSpec {
    pub test_words: BTreeSet<String>,
    pub train_words: BTreeSet<String>,
}

impl SplitSpec {
    pub fn test_entries<'a>(&self, lexicon: &'a [ProfessionEntry]) -> Vec<&'a ProfessionEntry> {
        lexicon
            .iter()
            .filter(|e| self.test_words.contains(&e.word))
            .collect()
    }

    pub fn train_entries<'a>(&self, lexicon: &'a [ProfessionEntry]) -> Vec<&'a ProfessionEntry> {
        lexicon
            .iter()
            .filter(|e| self.train_words.contains(&e.word))
            .collect()
    }
}

/// Splits the lexicon: all `|x_f| > 0.25` words to test, plus a seeded
/// `fraction_other_to_test` share of the rest (rounded to nearest).
pub fn make_split(
    lexicon: &[ProfessionEntry],
    fraction_other_to_test: f64,
    master_seed: u64,
) -> SplitSpec {
    let mut test_words = BTreeSet::new();
    let mut others: Vec<&ProfessionEntry> = Vec::new();
    for entry in lexicon {
        if entry.x_f.abs() > FACTUAL_TEST_THRESHOLD {
            test_words.insert(entry.word.clone());
        } else {
            others.push(entry);
        }
    }
    let take = (fraction_other_to_test * others.len() as f64).round() as usize;
    let mut rng = ChaCha20Rng::seed_from_u64(seed::derive(master_seed, "split"));
    let mut indices: Vec<usize> = (0..others.len()).collect();
    indices.shuffle(&mut rng);
    for &i in indices.iter().take(take) {
        test_words.insert(others[i].word.clone());
    }
    let train_words = lexicon
        .iter()
        .filter(|e| !test_words.contains(&e.word))
        .map(|e| e.word.clone())
        .collect();
    SplitSpec {
        test_words,
        train_words,
    }
}
