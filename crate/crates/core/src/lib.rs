//! Desk-scale pipeline for measuring, locating, and removing gender-bias
//! signal in a small causal transformer decoder.
//!
//! The crate is organized around the stages of the pipeline:
//!
//! - [`linalg`]: dense f64 matrix kernel (OLS, orthogonality-constrained OLS,
//!   NIPALS partial least squares, projection construction).
//! - [`model`]: the toy LLaMA-style decoder with forward, reverse-mode
//!   gradients, activation capture/patch hooks, training, and weight edits.
//! - [`datagen`]: profession lexicon, prompt templates, synthetic
//!   stereotype-correlated corpus, train/test splits.
//! - [`biaseval`]: bias regression on generation, mini coreference and
//!   likelihood-triplet scoring, perplexity.
//! - [`tracer`]: causal tracing over clean/corrupted/restored runs.
//! - [`dama`]: the projection-based debiasing edit of MLP output matrices.
//! - [`svg`]: standalone SVG heatmap rendering for trace grids.
//!
//! All numeric state is `f64` in memory. Checkpoint tensors are quantized to
//! the f32 grid at construction boundaries so the binary checkpoint format
//! (32-bit floats) round-trips losslessly.

pub mod biaseval;
pub mod dama;
pub mod datagen;
pub mod linalg;
pub mod model;
pub mod par;
pub mod seed;
pub mod svg;
pub mod tracer;

#[cfg(test)]
pub(crate) mod testutil;
