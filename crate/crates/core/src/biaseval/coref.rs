//! Mini coreference probe in the WinoGrad style: two professions, one
//! gendered pronoun, and a next-token comparison after "refers to the".

use rand::prelude::*;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use super::{EvalError, Result};
use crate::datagen::{ProfessionEntry, Vocabulary};
use crate::model::{forward, ModelCheckpoint};
use crate::par;
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Polarity {
    Pro,
    Anti,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PronounGender {
    Male,
    Female,
}

#[derive(Clone, Debug)]
pub struct CorefItem {
    /// Prompt ending "... refers to the".
    pub prompt: Vec<u32>,
    /// The two candidate profession tokens, in sentence order.
    pub candidates: (u32, u32),
    /// Index (0 or 1) of the gold antecedent in `candidates`.
    pub gold: usize,
    pub polarity: Polarity,
    pub pronoun: PronounGender,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CorefReport {
    pub acc: f64,
    pub delta_s: f64,
    pub delta_g: f64,
    pub n_pro: usize,
    pub n_anti: usize,
    pub acc_pro: f64,
    pub acc_anti: f64,
    pub acc_male: f64,
    pub acc_female: f64,
}

/// Scores every item: the prediction is the candidate with the higher
/// next-token probability after the probe prompt.
pub fn eval_coref(ckpt: &ModelCheckpoint, items: &[CorefItem]) -> Result<CorefReport> {
    if items.is_empty() {
        return Err(EvalError::InvalidArgument("no coreference items".into()));
    }
    let vocab = ckpt.config().vocab_size as u32;
    for item in items {
        if item.candidates.0 >= vocab || item.candidates.1 >= vocab {
            return Err(EvalError::UnknownCandidateToken(format!(
                "candidate pair ({}, {}) outside vocabulary {vocab}",
                item.candidates.0, item.candidates.1
            )));
        }
    }

    let correct = par::try_map_range(items.len(), |i| {
        let item = &items[i];
        let out = forward(ckpt, &item.prompt, &[])?;
        let dist = out.distributions.last().expect("non-empty prompt");
        let p0 = dist.prob(item.candidates.0);
        let p1 = dist.prob(item.candidates.1);
        let predicted = if p0 >= p1 { 0 } else { 1 };
        Ok::<bool, EvalError>(predicted == item.gold)
    })?;

    let acc_of = |keep: &dyn Fn(&CorefItem) -> bool| -> (f64, usize) {
        let mut hits = 0usize;
        let mut n = 0usize;
        for (item, &ok) in items.iter().zip(&correct) {
            if keep(item) {
                n += 1;
                hits += ok as usize;
            }
        }
        (if n > 0 { hits as f64 / n as f64 } else { 0.0 }, n)
    };

    let (acc, _) = acc_of(&|_| true);
    let (acc_pro, n_pro) = acc_of(&|i| i.polarity == Polarity::Pro);
    let (acc_anti, n_anti) = acc_of(&|i| i.polarity == Polarity::Anti);
    let (acc_male, _) = acc_of(&|i| i.pronoun == PronounGender::Male);
    let (acc_female, _) = acc_of(&|i| i.pronoun == PronounGender::Female);

    Ok(CorefReport {
        acc,
        delta_s: acc_pro - acc_anti,
        delta_g: acc_male - acc_female,
        n_pro,
        n_anti,
        acc_pro,
        acc_anti,
        acc_male,
        acc_female,
    })
}

/// Generates balanced pro/anti items from the lexicon: every pair of one
/// male- and one female-stereotyped profession yields four items (two
/// polarities x two pronoun genders).
pub fn make_coref_items(
    lexicon: &[ProfessionEntry],
    vocab: &Vocabulary,
    master_seed: u64,
    max_pairs: usize,
) -> Result<Vec<CorefItem>> {
    let male: Vec<&ProfessionEntry> = lexicon.iter().filter(|e| e.x_s > 0.2).collect();
    let female: Vec<&ProfessionEntry> = lexicon.iter().filter(|e| e.x_s < -0.2).collect();
    let mut pairs: Vec<(&ProfessionEntry, &ProfessionEntry)> = Vec::new();
    for m in &male {
        for f in &female {
            pairs.push((m, f));
        }
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed::derive(master_seed, "coref-pairs"));
    pairs.shuffle(&mut rng);
    pairs.truncate(max_pairs);

    let p = vocab.pronouns();
    let mut items = Vec::new();
    for (m, f) in pairs {
        for (pron_tok, pron_gender) in [(p.he, PronounGender::Male), (p.she, PronounGender::Female)]
        {
            for gold_is_male in [true, false] {
                // pro-stereotypical when the pronoun matches the gold
                // profession's stereotype
                let polarity = match (gold_is_male, pron_gender) {
                    (true, PronounGender::Male) | (false, PronounGender::Female) => Polarity::Pro,
                    _ => Polarity::Anti,
                };
                let text = format!("the {} met the {} because", m.word, f.word);
                let mut prompt = vocab.encode(&text)?;
                prompt.push(pron_tok);
                prompt.extend(vocab.encode("was late and")?);
                prompt.push(pron_tok);
                prompt.extend(vocab.encode("refers to the")?);
                items.push(CorefItem {
                    prompt,
                    candidates: (vocab.require(&m.word)?, vocab.require(&f.word)?),
                    gold: if gold_is_male { 0 } else { 1 },
                    polarity,
                    pronoun: pron_gender,
                });
            }
        }
    }
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::forced_head_model;

    fn probe(vocab: &Vocabulary, a: &str, b: &str) -> Vec<u32> {
        vocab
            .encode(&format!("the {a} met the {b} because he was late and he refers to the"))
            .unwrap()
    }

    /// Items where candidate 0 is always "plumber" (which the forced model
    /// always prefers), with gold alternating inside each stratum.
    fn balanced_items(vocab: &Vocabulary) -> Vec<CorefItem> {
        let plumber = vocab.id("plumber").unwrap();
        let nurse = vocab.id("nurse").unwrap();
        let mut items = Vec::new();
        for polarity in [Polarity::Pro, Polarity::Anti] {
            for pronoun in [PronounGender::Male, PronounGender::Female] {
                for gold in [0usize, 1] {
                    items.push(CorefItem {
                        prompt: probe(vocab, "plumber", "nurse"),
                        candidates: (plumber, nurse),
                        gold,
                        polarity,
                        pronoun,
                    });
                }
            }
        }
        items
    }

    #[test]
    fn constant_predictor_on_balanced_gold_scores_half() {
        let vocab = Vocabulary::build(&["plumber".into(), "nurse".into()]);
        let plumber = vocab.id("plumber").unwrap();
        let nurse = vocab.id("nurse").unwrap();
        let ckpt = forced_head_model(&vocab, &[(plumber, 0.3), (nurse, 0.1)]);
        let report = eval_coref(&ckpt, &balanced_items(&vocab)).unwrap();
        assert!((report.acc - 0.5).abs() < 1e-12);
        assert!(report.delta_s.abs() < 1e-12);
        assert!(report.delta_g.abs() < 1e-12);
        assert_eq!(report.n_pro, 4);
        assert_eq!(report.n_anti, 4);
    }

    #[test]
    fn delta_s_is_definitional_arithmetic() {
        let vocab = Vocabulary::build(&["plumber".into(), "nurse".into()]);
        let plumber = vocab.id("plumber").unwrap();
        let nurse = vocab.id("nurse").unwrap();
        let ckpt = forced_head_model(&vocab, &[(plumber, 0.3), (nurse, 0.1)]);
        // prediction is always candidate 0 = plumber; choose gold so that
        // acc_pro = 0.8 (4/5) and acc_anti = 0.4 (2/5)
        let mut items = Vec::new();
        for i in 0..5 {
            items.push(CorefItem {
                prompt: probe(&vocab, "plumber", "nurse"),
                candidates: (plumber, nurse),
                gold: if i < 4 { 0 } else { 1 },
                polarity: Polarity::Pro,
                pronoun: PronounGender::Male,
            });
        }
        for i in 0..5 {
            items.push(CorefItem {
                prompt: probe(&vocab, "plumber", "nurse"),
                candidates: (plumber, nurse),
                gold: if i < 2 { 0 } else { 1 },
                polarity: Polarity::Anti,
                pronoun: PronounGender::Female,
            });
        }
        let report = eval_coref(&ckpt, &items).unwrap();
        assert!((report.acc_pro - 0.8).abs() < 1e-12);
        assert!((report.acc_anti - 0.4).abs() < 1e-12);
        assert!((report.delta_s - 0.4).abs() < 1e-12);
    }

    #[test]
    fn label_flips_negate_the_gaps() {
        let vocab = Vocabulary::build(&["plumber".into(), "nurse".into()]);
        let plumber = vocab.id("plumber").unwrap();
        let nurse = vocab.id("nurse").unwrap();
        let ckpt = forced_head_model(&vocab, &[(plumber, 0.3), (nurse, 0.1)]);
        let mut items = Vec::new();
        for i in 0..12 {
            items.push(CorefItem {
                prompt: probe(&vocab, "plumber", "nurse"),
                candidates: (plumber, nurse),
                gold: (i * 7 % 3 == 0) as usize,
                polarity: if i % 3 == 0 { Polarity::Pro } else { Polarity::Anti },
                pronoun: if i % 2 == 0 {
                    PronounGender::Male
                } else {
                    PronounGender::Female
                },
            });
        }
        let base = eval_coref(&ckpt, &items).unwrap();

        let mut flipped_pol = items.clone();
        for item in &mut flipped_pol {
            item.polarity = match item.polarity {
                Polarity::Pro => Polarity::Anti,
                Polarity::Anti => Polarity::Pro,
            };
        }
        let r = eval_coref(&ckpt, &flipped_pol).unwrap();
        assert!((r.delta_s + base.delta_s).abs() < 1e-12);

        let mut flipped_gender = items.clone();
        for item in &mut flipped_gender {
            item.pronoun = match item.pronoun {
                PronounGender::Male => PronounGender::Female,
                PronounGender::Female => PronounGender::Male,
            };
        }
        let r = eval_coref(&ckpt, &flipped_gender).unwrap();
        assert!((r.delta_g + base.delta_g).abs() < 1e-12);
    }

    #[test]
    fn generated_items_are_balanced_and_valid() {
        let lexicon = vec![
            ProfessionEntry {
                word: "plumber".into(),
                x_f: 0.1,
                x_s: 0.8,
            },
            ProfessionEntry {
                word: "mechanic".into(),
                x_f: 0.1,
                x_s: 0.85,
            },
            ProfessionEntry {
                word: "nurse".into(),
                x_f: -0.1,
                x_s: -0.8,
            },
        ];
        let vocab =
            Vocabulary::build(&["plumber".into(), "mechanic".into(), "nurse".into()]);
        let items = make_coref_items(&lexicon, &vocab, 3, 10).unwrap();
        assert_eq!(items.len(), 8); // 2 pairs x 4 variants
        let pro = items.iter().filter(|i| i.polarity == Polarity::Pro).count();
        assert_eq!(pro, items.len() / 2);
        let male = items
            .iter()
            .filter(|i| i.pronoun == PronounGender::Male)
            .count();
        assert_eq!(male, items.len() / 2);
        // determinism
        let again = make_coref_items(&lexicon, &vocab, 3, 10).unwrap();
        assert_eq!(items.len(), again.len());
        assert!(items.iter().zip(&again).all(|(a, b)| a.prompt == b.prompt));
    }

    #[test]
    fn unknown_candidate_is_rejected() {
        let vocab = Vocabulary::build(&["plumber".into(), "nurse".into()]);
        let ckpt = forced_head_model(&vocab, &[]);
        let items = vec![CorefItem {
            prompt: probe(&vocab, "plumber", "nurse"),
            candidates: (9999, 0),
            gold: 0,
            polarity: Polarity::Pro,
            pronoun: PronounGender::Male,
        }];
        assert!(matches!(
            eval_coref(&ckpt, &items),
            Err(EvalError::UnknownCandidateToken(_))
        ));
    }
}
