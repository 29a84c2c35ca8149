//! Noise calibration against the profession embeddings.

use serde::{Deserialize, Serialize};

use super::{Result, TraceError};
use crate::datagen::{ProfessionEntry, Vocabulary};
use crate::model::ModelCheckpoint;

/// Corruption noise: i.i.d. Gaussian with standard deviation
/// `multiplier * base_sigma` added to every embedding coordinate of the
/// subject span. `samples` restoration draws are averaged when requested;
/// the default is a single draw per prompt.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub multiplier: f64,
    pub base_sigma: f64,
    pub seed: u64,
    pub samples: usize,
}

pub const DEFAULT_NOISE_MULTIPLIER: f64 = 3.0;

impl NoiseConfig {
    pub fn sigma(&self) -> f64 {
        self.multiplier * self.base_sigma
    }
}

/// Sets `base_sigma` to the empirical standard deviation over all embedding
/// coordinates of the profession tokens; the multiplier defaults to 3.
///
/// Returns a degenerate config (`base_sigma = 0`) when the embeddings carry
/// no spread; callers should treat that as a warning.
pub fn calibrate_noise(
    ckpt: &ModelCheckpoint,
    lexicon: &[ProfessionEntry],
    vocab: &Vocabulary,
    seed: u64,
) -> Result<NoiseConfig> {
    if lexicon.is_empty() {
        return Err(TraceError::EmptyLexicon);
    }
    let embed = ckpt.embed();
    let mut values = Vec::new();
    for entry in lexicon {
        let id = vocab
            .id(&entry.word)
            .ok_or_else(|| TraceError::InvalidArgument(format!(
                "profession {:?} not in vocabulary",
                entry.word
            )))?;
        values.extend_from_slice(embed.row(id as usize));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(NoiseConfig {
        multiplier: DEFAULT_NOISE_MULTIPLIER,
        base_sigma: var.sqrt(),
        seed,
        samples: 1,
    })
}
