//! Perplexity: `exp` of the mean next-token negative log-likelihood over
//! every prediction position of a corpus.

use super::{EvalError, Result};
use crate::model::{forward, ModelCheckpoint};
use crate::par;

pub fn perplexity(ckpt: &ModelCheckpoint, corpus: &[Vec<u32>]) -> Result<f64> {
    if corpus.is_empty() {
        return Err(EvalError::InvalidArgument("empty corpus".into()));
    }
    let per_sentence = par::try_map_range(corpus.len(), |i| {
        let sentence = &corpus[i];
        if sentence.len() < 2 {
            return Err(EvalError::InvalidArgument(format!(
                "sentence {i} has no prediction positions"
            )));
        }
        let out = forward(ckpt, sentence, &[])?;
        let mut nll = 0.0;
        for (pos, &next) in sentence[1..].iter().enumerate() {
            nll -= out.distributions[pos]
                .probabilities[next as usize]
                .max(1e-300)
                .ln();
        }
        Ok::<(f64, usize), EvalError>((nll, sentence.len() - 1))
    })?;
    let total_nll: f64 = per_sentence.iter().map(|(nll, _)| nll).sum();
    let total_positions: usize = per_sentence.iter().map(|(_, c)| c).sum();
    Ok((total_nll / total_positions as f64).exp())
}

/// Unigram-baseline perplexity: the held-out perplexity of the maximum
/// likelihood unigram model estimated on `train`. Used as an oracle when
/// judging trained checkpoints.
pub fn unigram_perplexity(train: &[Vec<u32>], held_out: &[Vec<u32>], vocab_size: usize) -> f64 {
    let mut counts = vec![0.0f64; vocab_size];
    let mut total = 0.0;
    for s in train {
        for &t in s {
            counts[t as usize] += 1.0;
            total += 1.0;
        }
    }
    let mut nll = 0.0;
    let mut positions = 0usize;
    for s in held_out {
        for &t in &s[1..] {
            nll -= (counts[t as usize] / total).max(1e-12).ln();
            positions += 1;
        }
    }
    (nll / positions as f64).exp()
}
