//! Architecture configuration.

use serde::{Deserialize, Serialize};

use super::{ModelError, Result};

/// Shape and seed of the toy decoder.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub d_ff: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub max_seq: usize,
    pub seed: u64,
}

impl ModelConfig {
    /// Default desk-scale shape; `vocab_size` must be set to the actual
    /// vocabulary afterwards.
    pub fn desk_default(vocab_size: usize, seed: u64) -> Self {
        Self {
            vocab_size,
            d_model: 64,
            d_ff: 256,
            n_layers: 4,
            n_heads: 4,
            max_seq: 32,
            seed,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0
            || self.d_model == 0
            || self.d_ff == 0
            || self.n_layers == 0
            || self.n_heads == 0
            || self.max_seq == 0
        {
            return Err(ModelError::InvalidArgument(
                "all config counts must be at least 1".into(),
            ));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(ModelError::InvalidArgument(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.d_ff < self.d_model {
            return Err(ModelError::InvalidArgument(format!(
                "d_ff {} smaller than d_model {}",
                self.d_ff, self.d_model
            )));
        }
        Ok(())
    }

    /// Serializes as the key=value lines embedded in the checkpoint header.
    pub fn to_header(&self) -> String {
        format!(
            "vocab_size={}\nd_model={}\nd_ff={}\nn_layers={}\nn_heads={}\nmax_seq={}\nseed={}\n",
            self.vocab_size,
            self.d_model,
            self.d_ff,
            self.n_layers,
            self.n_heads,
            self.max_seq,
            self.seed
        )
    }

    /// Parses the key=value header lines written by [`Self::to_header`].
    pub fn from_header(header: &str) -> Result<Self> {
        let mut cfg = ModelConfig {
            vocab_size: 0,
            d_model: 0,
            d_ff: 0,
            n_layers: 0,
            n_heads: 0,
            max_seq: 0,
            seed: 0,
        };
        for line in header.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ModelError::Format(format!("bad header line: {line:?}")))?;
            let parse_usize = || {
                value
                    .parse::<usize>()
                    .map_err(|_| ModelError::Format(format!("bad value for {key}: {value:?}")))
            };
            match key {
                "vocab_size" => cfg.vocab_size = parse_usize()?,
                "d_model" => cfg.d_model = parse_usize()?,
                "d_ff" => cfg.d_ff = parse_usize()?,
                "n_layers" => cfg.n_layers = parse_usize()?,
                "n_heads" => cfg.n_heads = parse_usize()?,
                "max_seq" => cfg.max_seq = parse_usize()?,
                "seed" => {
                    cfg.seed = value
                        .parse::<u64>()
                        .map_err(|_| ModelError::Format(format!("bad seed: {value:?}")))?
                }
                other => {
                    return Err(ModelError::Format(format!("unknown header key: {other:?}")))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
