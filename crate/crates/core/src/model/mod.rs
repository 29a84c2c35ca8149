//! Desk-scale LLaMA-style causal decoder: forward pass with activation
//! capture/patch hooks, reverse-mode gradients, deterministic training, and
//! left-multiplicative weight edits.
//!
//! The decoder uses RMS-norm, rotary positions, and a gated SiLU MLP
//! (`w_out * (silu(w_gate x) . (w_in x))`), so "the MLP output matrix" has a
//! single unambiguous meaning: `w_out` is the edit target.
//!
//! All arithmetic is f64. Checkpoint tensors are kept on the f32 grid (every
//! stored value is exactly representable as f32) so the 32-bit binary
//! checkpoint format round-trips bit-exactly.

mod backward;
mod checkpoint;
mod config;
mod forward;
mod train;

#[cfg(test)]
mod tests;

pub use backward::{loss_and_grads, BackwardRequest, BackwardResult, Loss};
pub use checkpoint::{apply_weight_edit, ModelCheckpoint, CHECKPOINT_MAGIC};
pub use config::ModelConfig;
pub use forward::{
    forward, forward_cached, ForwardCache, ForwardOutput, HookKind, HookSpec,
    NextTokenDistribution, Site, SiteKind,
};
pub use train::{train, AdamParams, TrainOptions};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("token {index} out of vocabulary (size {vocab})")]
    BadToken { index: u32, vocab: usize },
    #[error("hook out of range: {0}")]
    HookOutOfRange(String),
    #[error("invalid hook: {0}")]
    InvalidHook(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("training diverged at step {step}: loss {loss}")]
    DivergedTraining { step: usize, loss: f64 },
    #[error("checkpoint format error: {0}")]
    Format(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Gradient of the loss with respect to the activation at `site`, with the
/// given hooks applied (a patch at `site` itself is the common case: the
/// returned gradient is then taken with respect to the injected payload).
pub fn grad_wrt_activation(
    ckpt: &ModelCheckpoint,
    tokens: &[u32],
    hooks: &[HookSpec],
    site: Site,
    loss: &Loss,
) -> Result<Vec<f64>> {
    let req = BackwardRequest {
        param_grads: false,
        activation_sites: vec![site],
    };
    let mut res = loss_and_grads(ckpt, tokens, hooks, loss, &req)?;
    Ok(res
        .site_grads
        .remove(&site)
        .expect("requested site gradient missing"))
}
