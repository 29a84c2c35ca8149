//! Shared test fixtures.

use crate::datagen::Vocabulary;
use crate::model::{ModelCheckpoint, ModelConfig};

/// Builds a model whose next-token distribution is the same at every
/// position and equals exactly the requested probabilities.
///
/// All projection weights are zero, so both residual branches contribute
/// nothing and the stream stays at the (constant) embedding. The unembedding
/// rows are set so the logits are `ln p_i`, which softmax maps back to `p`.
/// Tokens not listed share the residual mass uniformly.
pub fn forced_head_model(vocab: &Vocabulary, forced: &[(u32, f64)]) -> ModelCheckpoint {
    let v = vocab.len();
    let cfg = ModelConfig {
        vocab_size: v,
        d_model: 8,
        d_ff: 16,
        n_layers: 2,
        n_heads: 2,
        max_seq: 24,
        seed: 0,
    };
    let mut probs = vec![0.0f64; v];
    let mut assigned = 0.0;
    for &(t, p) in forced {
        probs[t as usize] = p;
        assigned += p;
    }
    let rest = ((1.0 - assigned) / (v - forced.len()) as f64).max(1e-12);
    for (i, p) in probs.iter_mut().enumerate() {
        if !forced.iter().any(|&(t, _)| t as usize == i) {
            *p = rest;
        }
    }

    let mut ckpt = ModelCheckpoint::init(&cfg).unwrap();
    let d = cfg.d_model;
    let n_tensors = ckpt.tensors().len();
    for idx in 0..n_tensors {
        let name = ckpt.tensors()[idx].name.clone();
        let m = &mut ckpt.tensors_mut()[idx].matrix;
        if name == "tok_embed" {
            for val in m.data_mut() {
                *val = 1.0;
            }
        } else if name == "unembed" {
            // x after the final norm is the constant vector with entries
            // 1/sqrt(1 + eps); divide it out so logit_i = ln p_i.
            let c = 1.0 / (1.0 + 1e-6f64).sqrt();
            for t in 0..v {
                let logit = probs[t].ln();
                let row = m.row_mut(t);
                for val in row.iter_mut() {
                    *val = logit / (c * d as f64);
                }
            }
        } else if name.ends_with("norm") {
            // keep the ones from init
        } else {
            for val in m.data_mut() {
                *val = 0.0;
            }
        }
    }
    // keep the forced head on the f32 grid like any other checkpoint
    for t in ckpt.tensors_mut() {
        t.matrix.quantize_f32();
    }
    ckpt
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::forward;

    #[test]
    fn forced_probabilities_are_exact() {
        let vocab = Vocabulary::build(&["plumber".into()]);
        let he = vocab.id("he").unwrap();
        let she = vocab.id("she").unwrap();
        let ckpt = forced_head_model(&vocab, &[(he, 0.6), (she, 0.1)]);
        let tokens = vocab.encode("the plumber wanted that").unwrap();
        let out = forward(&ckpt, &tokens, &[]).unwrap();
        for dist in &out.distributions {
            assert!((dist.prob(he) - 0.6).abs() < 1e-6);
            assert!((dist.prob(she) - 0.1).abs() < 1e-6);
        }
    }
}
