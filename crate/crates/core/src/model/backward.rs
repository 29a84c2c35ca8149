//! Reverse-mode gradients through the decoder.
//!
//! The backward pass walks the activation cache of a hooked forward run.
//! Patched sites cut the flow: the gradient arriving at a patched activation
//! is recorded (it is the gradient with respect to the injected payload) and
//! nothing propagates below it through that branch, which matches the
//! semantics of injecting a constant.

use std::collections::{BTreeMap, BTreeSet};

use super::checkpoint::ModelCheckpoint;
use super::forward::{
    apply_rope_inverse, copy_cols, forward_cached, silu, silu_prime, ForwardCache, HookSpec,
    Site, SiteKind,
};
use super::{ModelError, Result};
use crate::linalg::Matrix;

/// Differentiable scalar losses over the per-position next-token
/// distributions.
#[derive(Clone, Debug)]
pub enum Loss {
    /// Ignores the distributions entirely; gradient is zero everywhere.
    Constant,
    /// `-log P(token)` at the distribution of `position`.
    Nll { position: usize, token: u32 },
    /// `KL(P_current(. | position) || reference)` over the full vocabulary.
    KlToReference {
        position: usize,
        reference: Vec<f64>,
    },
    /// Mean `-log P(targets[s])` over positions `0..targets.len()`;
    /// `targets` must have length `sequence length - 1`.
    NextTokenCrossEntropy { targets: Vec<u32> },
}

#[derive(Clone, Debug)]
pub struct BackwardRequest {
    /// Compute gradients for every weight tensor (aligned with
    /// `ModelCheckpoint::tensors`).
    pub param_grads: bool,
    /// Activation sites whose incoming gradient should be reported.
    pub activation_sites: Vec<Site>,
}

#[derive(Debug)]
pub struct BackwardResult {
    pub loss: f64,
    pub param_grads: Option<Vec<Matrix>>,
    pub site_grads: BTreeMap<Site, Vec<f64>>,
}

/// Loss value and its gradient with respect to the logits.
fn eval_loss(loss: &Loss, probs: &Matrix, vocab: usize) -> Result<(f64, Matrix)> {
    let seq = probs.rows();
    let mut dlogits = Matrix::zeros(seq, vocab);
    match loss {
        Loss::Constant => Ok((0.0, dlogits)),
        Loss::Nll { position, token } => {
            if *position >= seq {
                return Err(ModelError::InvalidArgument(format!(
                    "loss position {position} out of range {seq}"
                )));
            }
            if *token as usize >= vocab {
                return Err(ModelError::BadToken {
                    index: *token,
                    vocab,
                });
            }
            let p = probs.get(*position, *token as usize);
            let row = dlogits.row_mut(*position);
            row.copy_from_slice(probs.row(*position));
            row[*token as usize] -= 1.0;
            Ok((-p.max(1e-300).ln(), dlogits))
        }
        Loss::KlToReference {
            position,
            reference,
        } => {
            if *position >= seq {
                return Err(ModelError::InvalidArgument(format!(
                    "loss position {position} out of range {seq}"
                )));
            }
            if reference.len() != vocab {
                return Err(ModelError::DimensionMismatch(format!(
                    "reference length {} != vocab {vocab}",
                    reference.len()
                )));
            }
            let p = probs.row(*position);
            // s_i = ln p_i - ln q_i where p_i > 0, else 0.
            let s: Vec<f64> = p
                .iter()
                .zip(reference)
                .map(|(&pi, &qi)| {
                    if pi > 0.0 {
                        pi.ln() - qi.max(1e-300).ln()
                    } else {
                        0.0
                    }
                })
                .collect();
            let value: f64 = p.iter().zip(&s).map(|(&pi, &si)| pi * si).sum();
            let mean_s: f64 = value; // sum p_i s_i
            let row = dlogits.row_mut(*position);
            for ((r, &pi), &si) in row.iter_mut().zip(p).zip(&s) {
                *r = pi * (si - mean_s);
            }
            Ok((value, dlogits))
        }
        Loss::NextTokenCrossEntropy { targets } => {
            if seq < 2 || targets.len() != seq - 1 {
                return Err(ModelError::InvalidArgument(format!(
                    "cross entropy needs sequence length {} to match targets {}",
                    seq,
                    targets.len()
                )));
            }
            let inv = 1.0 / targets.len() as f64;
            let mut total = 0.0;
            for (pos, &target) in targets.iter().enumerate() {
                if target as usize >= vocab {
                    return Err(ModelError::BadToken {
                        index: target,
                        vocab,
                    });
                }
                let p = probs.get(pos, target as usize);
                total -= p.max(1e-300).ln();
                let row = dlogits.row_mut(pos);
                for (r, &pr) in row.iter_mut().zip(probs.row(pos)) {
                    *r = pr * inv;
                }
                row[target as usize] -= inv;
            }
            Ok((total * inv, dlogits))
        }
    }
}

fn rmsnorm_backward(
    dnormed: &Matrix,
    x: &Matrix,
    scale: &Matrix,
    invs: &[f64],
    mut g_scale: Option<&mut Matrix>,
) -> Matrix {
    let d = x.cols();
    let mut dx = Matrix::zeros(x.rows(), d);
    for s in 0..x.rows() {
        let r = invs[s];
        let xr = x.row(s);
        let dy = dnormed.row(s);
        let mut inner = 0.0;
        for i in 0..d {
            inner += dy[i] * scale.get(0, i) * xr[i];
        }
        let coef = r * r * r / d as f64 * inner;
        let dx_row = dx.row_mut(s);
        for i in 0..d {
            dx_row[i] = dy[i] * scale.get(0, i) * r - coef * xr[i];
        }
        if let Some(g) = g_scale.as_deref_mut() {
            let g_row = g.row_mut(0);
            for i in 0..d {
                g_row[i] += dy[i] * xr[i] * r;
            }
        }
    }
    dx
}

fn add_into_cols(dst: &mut Matrix, lo: usize, src: &Matrix) {
    for r in 0..dst.rows() {
        let row = &mut dst.row_mut(r)[lo..lo + src.cols()];
        for (d, s) in row.iter_mut().zip(src.row(r)) {
            *d += s;
        }
    }
}

/// Records requested site gradients and zeroes rows of patched sites.
fn record_and_cut(
    kind: SiteKind,
    layer: usize,
    grads: &mut Matrix,
    requested: &BTreeSet<Site>,
    patched: &BTreeSet<Site>,
    out: &mut BTreeMap<Site, Vec<f64>>,
) {
    for token in 0..grads.rows() {
        let site = Site::new(kind, layer, token);
        if requested.contains(&site) {
            out.insert(site, grads.row(token).to_vec());
        }
        if patched.contains(&site) {
            for v in grads.row_mut(token) {
                *v = 0.0;
            }
        }
    }
}

/// Runs a hooked forward pass and accumulates the requested gradients.
pub fn loss_and_grads(
    ckpt: &ModelCheckpoint,
    tokens: &[u32],
    hooks: &[HookSpec],
    loss: &Loss,
    req: &BackwardRequest,
) -> Result<BackwardResult> {
    let (_, cache) = forward_cached(ckpt, tokens, hooks)?;
    backward_from_cache(ckpt, &cache, loss, req)
}

pub(crate) fn backward_from_cache(
    ckpt: &ModelCheckpoint,
    cache: &ForwardCache,
    loss: &Loss,
    req: &BackwardRequest,
) -> Result<BackwardResult> {
    let cfg = ckpt.config();
    let seq = cache.tokens.len();
    let d = cfg.d_model;
    let head_dim = cfg.head_dim();
    let scale = 1.0 / (head_dim as f64).sqrt();

    let requested: BTreeSet<Site> = req.activation_sites.iter().copied().collect();
    for site in &requested {
        if site.layer >= cfg.n_layers || site.token >= seq {
            return Err(ModelError::HookOutOfRange(format!(
                "gradient site {site:?} out of range"
            )));
        }
    }
    let mut site_grads = BTreeMap::new();

    let (loss_value, dlogits) = eval_loss(loss, &cache.probs, cfg.vocab_size)?;

    let mut grads: Option<Vec<Matrix>> = if req.param_grads {
        Some(
            ckpt.tensors()
                .iter()
                .map(|t| Matrix::zeros(t.matrix.rows(), t.matrix.cols()))
                .collect(),
        )
    } else {
        None
    };

    // Unembedding and final norm.
    let mut dx = dlogits.matmul(ckpt.unembed());
    if let Some(g) = grads.as_mut() {
        let gu = dlogits.matmul_at(&cache.final_normed);
        g[ModelCheckpoint::unembed_index(cfg.n_layers)] = gu;
    }
    let x_last = cache
        .layers
        .last()
        .map(|l| &l.x_out)
        .unwrap_or(&cache.embedded);
    dx = {
        let g_scale = grads
            .as_mut()
            .map(|g| &mut g[ModelCheckpoint::final_norm_index(cfg.n_layers)]);
        rmsnorm_backward(&dx, x_last, ckpt.final_norm(), &cache.inv_rms_f, g_scale)
    };

    let rope = {
        // Same table the forward pass used.
        let pairs = head_dim / 2;
        (0..seq)
            .map(|pos| {
                (0..pairs)
                    .map(|i| {
                        let theta = 10000f64.powf(-2.0 * i as f64 / head_dim as f64);
                        let angle = pos as f64 * theta;
                        (angle.cos(), angle.sin())
                    })
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>()
    };

    for l in (0..cfg.n_layers).rev() {
        let lc = &cache.layers[l];

        // dx currently holds dL/d x_out[l].
        record_and_cut(
            SiteKind::LayerOut,
            l,
            &mut dx,
            &requested,
            &cache.patched,
            &mut site_grads,
        );

        // x_out = x_mid + mlp_proj
        let mut dmlp_proj = dx.clone();
        record_and_cut(
            SiteKind::MlpOut,
            l,
            &mut dmlp_proj,
            &requested,
            &cache.patched,
            &mut site_grads,
        );

        let mut dinner = dmlp_proj.matmul(ckpt.w_out(l));
        if let Some(g) = grads.as_mut() {
            let gw = dmlp_proj.matmul_at(&lc.inner);
            g[ModelCheckpoint::w_out_index(l)] = g[ModelCheckpoint::w_out_index(l)].add(&gw);
        }
        for token in 0..seq {
            let site = Site::new(SiteKind::MlpInner, l, token);
            if requested.contains(&site) {
                site_grads.insert(site, dinner.row(token).to_vec());
            }
        }

        // inner = silu(gate) . up
        let mut dgate = Matrix::zeros(seq, cfg.d_ff);
        let mut dup = Matrix::zeros(seq, cfg.d_ff);
        for s in 0..seq {
            let di = dinner.row(s);
            let gr = lc.gate.row(s);
            let ur = lc.up.row(s);
            let dg = dgate.row_mut(s);
            for i in 0..cfg.d_ff {
                dg[i] = di[i] * ur[i] * silu_prime(gr[i]);
            }
            let du = dup.row_mut(s);
            for i in 0..cfg.d_ff {
                du[i] = di[i] * silu(gr[i]);
            }
        }
        dinner = Matrix::zeros(0, 0); // no longer needed
        let _ = dinner;

        if let Some(g) = grads.as_mut() {
            let gg = dgate.matmul_at(&lc.normed_m);
            g[ModelCheckpoint::w_gate_index(l)] = g[ModelCheckpoint::w_gate_index(l)].add(&gg);
            let gi = dup.matmul_at(&lc.normed_m);
            g[ModelCheckpoint::w_in_index(l)] = g[ModelCheckpoint::w_in_index(l)].add(&gi);
        }
        let dnormed_m = dgate.matmul(ckpt.w_gate(l)).add(&dup.matmul(ckpt.w_in(l)));
        let dmid_from_norm = {
            let g_scale = grads
                .as_mut()
                .map(|g| &mut g[ModelCheckpoint::mlp_norm_index(l)]);
            rmsnorm_backward(&dnormed_m, &lc.x_mid, ckpt.mlp_norm(l), &lc.inv_rms_m, g_scale)
        };
        // dL/d x_mid: residual path plus the norm path.
        dx = dx.add(&dmid_from_norm);

        // x_mid = x_in + attn_proj
        let mut dattn_proj = dx.clone();
        record_and_cut(
            SiteKind::AttnOut,
            l,
            &mut dattn_proj,
            &requested,
            &cache.patched,
            &mut site_grads,
        );

        if let Some(g) = grads.as_mut() {
            let gw = dattn_proj.matmul_at(&lc.mix);
            g[ModelCheckpoint::wo_index(l)] = g[ModelCheckpoint::wo_index(l)].add(&gw);
        }
        let dmix = dattn_proj.matmul(ckpt.wo(l));

        let mut dq = Matrix::zeros(seq, d);
        let mut dk = Matrix::zeros(seq, d);
        let mut dv = Matrix::zeros(seq, d);
        for h in 0..cfg.n_heads {
            let lo = h * head_dim;
            let hi = lo + head_dim;
            let p = &lc.probs[h];
            let dmix_h = copy_cols(&dmix, lo, hi);
            let v_h = copy_cols(&lc.v, lo, hi);
            let q_h = copy_cols(&lc.q, lo, hi);
            let k_h = copy_cols(&lc.k, lo, hi);

            let dv_h = p.matmul_at(&dmix_h);
            let dp = dmix_h.matmul_bt(&v_h);
            // softmax backward per causal row
            let mut dscores = Matrix::zeros(seq, seq);
            for s in 0..seq {
                let mut inner = 0.0;
                for t in 0..=s {
                    inner += p.get(s, t) * dp.get(s, t);
                }
                for t in 0..=s {
                    dscores.set(s, t, p.get(s, t) * (dp.get(s, t) - inner));
                }
            }
            let dq_h = dscores.matmul(&k_h).scale(scale);
            let dk_h = dscores.matmul_at(&q_h).scale(scale);
            add_into_cols(&mut dq, lo, &dq_h);
            add_into_cols(&mut dk, lo, &dk_h);
            add_into_cols(&mut dv, lo, &dv_h);
        }
        apply_rope_inverse(&mut dq, &rope, cfg.n_heads, head_dim);
        apply_rope_inverse(&mut dk, &rope, cfg.n_heads, head_dim);

        if let Some(g) = grads.as_mut() {
            let gq = dq.matmul_at(&lc.normed_a);
            g[ModelCheckpoint::wq_index(l)] = g[ModelCheckpoint::wq_index(l)].add(&gq);
            let gk = dk.matmul_at(&lc.normed_a);
            g[ModelCheckpoint::wk_index(l)] = g[ModelCheckpoint::wk_index(l)].add(&gk);
            let gv = dv.matmul_at(&lc.normed_a);
            g[ModelCheckpoint::wv_index(l)] = g[ModelCheckpoint::wv_index(l)].add(&gv);
        }
        let dnormed_a = dq
            .matmul(ckpt.wq(l))
            .add(&dk.matmul(ckpt.wk(l)))
            .add(&dv.matmul(ckpt.wv(l)));
        let din_from_norm = {
            let g_scale = grads
                .as_mut()
                .map(|g| &mut g[ModelCheckpoint::attn_norm_index(l)]);
            rmsnorm_backward(&dnormed_a, &lc.x_in, ckpt.attn_norm(l), &lc.inv_rms_a, g_scale)
        };
        dx = dx.add(&din_from_norm);
    }

    record_and_cut(
        SiteKind::Embedding,
        0,
        &mut dx,
        &requested,
        &cache.patched,
        &mut site_grads,
    );
    if let Some(g) = grads.as_mut() {
        let ge = &mut g[ModelCheckpoint::embed_index()];
        for (s, &t) in cache.tokens.iter().enumerate() {
            let row = ge.row_mut(t as usize);
            for (r, v) in row.iter_mut().zip(dx.row(s)) {
                *r += v;
            }
        }
    }

    Ok(BackwardResult {
        loss: loss_value,
        param_grads: grads,
        site_grads,
    })
}
