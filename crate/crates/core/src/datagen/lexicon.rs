//! Profession lexicon: each word carries a factual score `x_f` and a
//! stereotype score `x_s`, both in `[-1, 1]` with positive values for
//! male-associated words.

use serde::{Deserialize, Serialize};

use super::{DataError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfessionEntry {
    pub word: String,
    pub x_f: f64,
    pub x_s: f64,
}

/// Outcome of loading a lexicon file: validated entries plus the words that
/// were rejected (with reasons).
#[derive(Clone, Debug, Default)]
pub struct LexiconLoad {
    pub entries: Vec<ProfessionEntry>,
    pub rejected: Vec<(String, String)>,
}

impl LexiconLoad {
    pub fn words(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.word.clone()).collect()
    }
}

/// Parses a UTF-8 array of `[word, x_f, x_s]` triples.
///
/// Words are lowercased; entries whose word would not map to a single
/// vocabulary token (embedded whitespace) are rejected with a report rather
/// than failing the whole load. Scores outside `[-1, 1]` are an error.
pub fn build_lexicon(text: &str) -> Result<LexiconLoad> {
    let raw: Vec<(String, f64, f64)> =
        serde_json::from_str(text).map_err(|e| DataError::ParseError(e.to_string()))?;
    let mut load = LexiconLoad::default();
    for (word, x_f, x_s) in raw {
        let word = word.to_lowercase();
        if !(-1.0..=1.0).contains(&x_f) {
            return Err(DataError::ScoreOutOfRange { word, value: x_f });
        }
        if !(-1.0..=1.0).contains(&x_s) {
            return Err(DataError::ScoreOutOfRange { word, value: x_s });
        }
        if word.split_whitespace().count() != 1 {
            load.rejected
                .push((word, "not a single token".to_string()));
            continue;
        }
        load.entries.push(ProfessionEntry { word, x_f, x_s });
    }
    Ok(load)
}

/// Built-in profession set in the same array-of-triples shape as the public
/// annotated list: `[word, factual score, stereotype score]`. Twelve words
/// carry semantically defined gender (|x_f| > 0.25) and always land in the
/// test split; the rest are near-neutral with stereotype scores spread over
/// the full range.
pub fn builtin_professions_json() -> &'static str {
    r#"[
["actress", -0.9, -0.8],
["waitress", -0.8, -0.7],
["nun", -1.0, -0.9],
["maid", -0.8, -0.9],
["chairwoman", -0.7, -0.5],
["businesswoman", -0.6, -0.5],
["monk", 0.9, 0.7],
["businessman", 0.6, 0.5],
["councilman", 0.7, 0.4],
["salesman", 0.7, 0.6],
["congressman", 0.8, 0.5],
["policeman", 0.8, 0.7],
["nurse", -0.1, -0.8],
["librarian", -0.1, -0.6],
["secretary", -0.15, -0.7],
["hairdresser", -0.1, -0.75],
["nanny", -0.2, -0.85],
["therapist", 0.0, -0.4],
["teacher", -0.05, -0.35],
["receptionist", -0.1, -0.8],
["housekeeper", -0.2, -0.8],
["cleaner", -0.05, -0.55],
["dancer", -0.1, -0.5],
["designer", 0.0, -0.3],
["singer", 0.0, -0.2],
["cashier", -0.05, -0.45],
["baker", 0.0, -0.25],
["plumber", 0.1, 0.8],
["mechanic", 0.1, 0.85],
["carpenter", 0.1, 0.75],
["engineer", 0.05, 0.7],
["electrician", 0.1, 0.8],
["farmer", 0.1, 0.6],
["guard", 0.05, 0.55],
["architect", 0.05, 0.5],
["driver", 0.05, 0.45],
["pilot", 0.05, 0.65],
["scientist", 0.0, 0.3],
["programmer", 0.05, 0.6],
["surgeon", 0.05, 0.5],
["lawyer", 0.0, 0.35],
["judge", 0.0, 0.25],
["physician", 0.05, 0.4],
["accountant", 0.0, 0.1],
["journalist", 0.0, -0.05],
["photographer", 0.0, 0.15],
["manager", 0.0, 0.2]
]"#
}
