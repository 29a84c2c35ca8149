//! Deterministic next-token training with Adam and linear warmup.

use rand::prelude::*;
use rand_chacha::ChaCha20Rng;

use super::backward::{loss_and_grads, BackwardRequest, Loss};
use super::checkpoint::ModelCheckpoint;
use super::config::ModelConfig;
use super::{ModelError, Result};
use crate::linalg::Matrix;
use crate::par;
use crate::seed;

#[derive(Clone, Copy, Debug)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOptions {
    pub steps: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub warmup_steps: usize,
    pub adam: AdamParams,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            steps: 3000,
            lr: 1e-3,
            batch_size: 16,
            warmup_steps: 100,
            adam: AdamParams::default(),
        }
    }
}

/// Trains a fresh checkpoint on the corpus. Deterministic given
/// `config.seed`: initialization, batch sampling, and the fixed-order batch
/// reduction all derive from it, so two runs produce bit-identical
/// checkpoints. Batch items are evaluated in parallel but reduced in index
/// order.
pub fn train(
    config: &ModelConfig,
    corpus: &[Vec<u32>],
    opts: &TrainOptions,
) -> Result<ModelCheckpoint> {
    config.validate()?;
    if opts.steps == 0 {
        return Err(ModelError::InvalidArgument("steps must be at least 1".into()));
    }
    if opts.batch_size == 0 {
        return Err(ModelError::InvalidArgument(
            "batch_size must be at least 1".into(),
        ));
    }
    if corpus.is_empty() {
        return Err(ModelError::InvalidArgument("empty corpus".into()));
    }
    for (i, sentence) in corpus.iter().enumerate() {
        if sentence.len() < 2 {
            return Err(ModelError::InvalidArgument(format!(
                "sentence {i} has fewer than 2 tokens"
            )));
        }
        if sentence.len() > config.max_seq {
            return Err(ModelError::InvalidArgument(format!(
                "sentence {i} longer than max_seq {}",
                config.max_seq
            )));
        }
        for &t in sentence {
            if t as usize >= config.vocab_size {
                return Err(ModelError::BadToken {
                    index: t,
                    vocab: config.vocab_size,
                });
            }
        }
    }

    let mut ckpt = ModelCheckpoint::init(config)?;
    let mut m: Vec<Matrix> = ckpt
        .tensors()
        .iter()
        .map(|t| Matrix::zeros(t.matrix.rows(), t.matrix.cols()))
        .collect();
    let mut v = m.clone();

    let mut sampler = ChaCha20Rng::seed_from_u64(seed::derive(config.seed, "train-batches"));
    let req = BackwardRequest {
        param_grads: true,
        activation_sites: Vec::new(),
    };

    for step in 0..opts.steps {
        let batch: Vec<usize> = (0..opts.batch_size)
            .map(|_| sampler.gen_range(0..corpus.len()))
            .collect();

        let items = par::try_map_range(batch.len(), |i| {
            let sentence = &corpus[batch[i]];
            let loss = Loss::NextTokenCrossEntropy {
                targets: sentence[1..].to_vec(),
            };
            let res = loss_and_grads(&ckpt, sentence, &[], &loss, &req)?;
            Ok::<_, ModelError>((res, sentence.len() - 1))
        })?;

        let total_positions: usize = items.iter().map(|(_, c)| c).sum();
        let inv_total = 1.0 / total_positions as f64;
        let mut batch_loss = 0.0;
        let mut grads: Vec<Matrix> = ckpt
            .tensors()
            .iter()
            .map(|t| Matrix::zeros(t.matrix.rows(), t.matrix.cols()))
            .collect();
        for (res, count) in &items {
            let weight = *count as f64 * inv_total;
            batch_loss += res.loss * weight;
            let item_grads = res.param_grads.as_ref().expect("param grads requested");
            for (acc, g) in grads.iter_mut().zip(item_grads) {
                for (a, gv) in acc.data_mut().iter_mut().zip(g.data()) {
                    *a += gv * weight;
                }
            }
        }

        if !batch_loss.is_finite() {
            return Err(ModelError::DivergedTraining {
                step,
                loss: batch_loss,
            });
        }

        let t = (step + 1) as f64;
        let warm = if opts.warmup_steps > 0 {
            (t / opts.warmup_steps as f64).min(1.0)
        } else {
            1.0
        };
        let lr = opts.lr * warm;
        let b1 = opts.adam.beta1;
        let b2 = opts.adam.beta2;
        let bias1 = 1.0 - b1.powf(t);
        let bias2 = 1.0 - b2.powf(t);

        for (idx, tensor) in ckpt.tensors_mut().iter_mut().enumerate() {
            let g = grads[idx].data();
            let ms = m[idx].data_mut();
            let vs = v[idx].data_mut();
            let ws = tensor.matrix.data_mut();
            for i in 0..g.len() {
                ms[i] = b1 * ms[i] + (1.0 - b1) * g[i];
                vs[i] = b2 * vs[i] + (1.0 - b2) * g[i] * g[i];
                let mhat = ms[i] / bias1;
                let vhat = vs[i] / bias2;
                ws[i] -= lr * mhat / (vhat.sqrt() + opts.adam.eps);
            }
        }
    }

    // Back onto the f32 grid so the trained checkpoint serializes losslessly.
    for tensor in ckpt.tensors_mut() {
        tensor.matrix.quantize_f32();
    }
    Ok(ckpt)
}
