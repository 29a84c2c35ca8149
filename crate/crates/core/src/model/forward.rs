//! Forward pass with activation capture and patch hooks.
//!
//! Hook semantics: a patch at `mlp_out` replaces the MLP branch output before
//! the residual addition; `attn_out` is analogous for the attention branch;
//! `layer_out` replaces the residual-stream value after the whole block;
//! `embedding` replaces a token embedding before layer 0. `mlp_inner` (the
//! gated activation feeding `w_out`) is capture-only. Capture hooks record
//! post-replacement values, so capturing never changes a run.

use std::collections::{BTreeMap, BTreeSet};

use super::checkpoint::ModelCheckpoint;
use super::{ModelError, Result};
use crate::linalg::Matrix;

const RMS_EPS: f64 = 1e-6;
const ROPE_BASE: f64 = 10000.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SiteKind {
    Embedding,
    AttnOut,
    MlpOut,
    LayerOut,
    /// Gated MLP activation (`silu(w_gate x) . (w_in x)`, dimension `d_ff`);
    /// capture-only.
    MlpInner,
}

impl SiteKind {
    pub fn label(self) -> &'static str {
        match self {
            SiteKind::Embedding => "embedding",
            SiteKind::AttnOut => "attn_out",
            SiteKind::MlpOut => "mlp_out",
            SiteKind::LayerOut => "layer_out",
            SiteKind::MlpInner => "mlp_inner",
        }
    }
}

/// An activation location: `(kind, layer, token)`. For `Embedding` the layer
/// must be 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Site {
    pub kind: SiteKind,
    pub layer: usize,
    pub token: usize,
}

impl Site {
    pub fn new(kind: SiteKind, layer: usize, token: usize) -> Self {
        Self { kind, layer, token }
    }
}

#[derive(Clone, Debug)]
pub enum HookKind {
    Capture,
    Patch(Vec<f64>),
}

#[derive(Clone, Debug)]
pub struct HookSpec {
    pub site: Site,
    pub kind: HookKind,
}

impl HookSpec {
    pub fn capture(site: Site) -> Self {
        Self {
            site,
            kind: HookKind::Capture,
        }
    }

    pub fn patch(site: Site, payload: Vec<f64>) -> Self {
        Self {
            site,
            kind: HookKind::Patch(payload),
        }
    }
}

/// Distribution over the vocabulary for the next token after a prefix.
#[derive(Clone, Debug)]
pub struct NextTokenDistribution {
    pub probabilities: Vec<f64>,
    pub context_length: usize,
}

impl NextTokenDistribution {
    pub fn prob(&self, token: u32) -> f64 {
        self.probabilities[token as usize]
    }
}

#[derive(Clone, Debug)]
pub struct ForwardOutput {
    /// One next-token distribution per input position.
    pub distributions: Vec<NextTokenDistribution>,
    /// Post-replacement values of every captured site.
    pub captures: BTreeMap<Site, Vec<f64>>,
}

/// Per-layer intermediate activations kept for the backward pass.
#[derive(Clone, Debug)]
pub(crate) struct LayerCache {
    pub x_in: Matrix,
    pub normed_a: Matrix,
    pub inv_rms_a: Vec<f64>,
    pub q: Matrix,
    pub k: Matrix,
    pub v: Matrix,
    pub probs: Vec<Matrix>,
    pub mix: Matrix,
    pub x_mid: Matrix,
    pub normed_m: Matrix,
    pub inv_rms_m: Vec<f64>,
    pub gate: Matrix,
    pub up: Matrix,
    pub inner: Matrix,
    pub x_out: Matrix,
}

/// Full activation record of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    pub(crate) tokens: Vec<u32>,
    pub(crate) embedded: Matrix,
    pub(crate) layers: Vec<LayerCache>,
    pub(crate) final_normed: Matrix,
    pub(crate) inv_rms_f: Vec<f64>,
    pub(crate) probs: Matrix,
    pub(crate) patched: BTreeSet<Site>,
}

impl ForwardCache {
    pub fn probabilities(&self) -> &Matrix {
        &self.probs
    }
}

struct HookPlan<'a> {
    patches: BTreeMap<Site, &'a [f64]>,
    captures: BTreeSet<Site>,
}

fn plan_hooks<'a>(
    ckpt: &ModelCheckpoint,
    seq_len: usize,
    hooks: &'a [HookSpec],
) -> Result<HookPlan<'a>> {
    let cfg = ckpt.config();
    let mut patches = BTreeMap::new();
    let mut captures = BTreeSet::new();
    for hook in hooks {
        let site = hook.site;
        if site.layer >= cfg.n_layers {
            return Err(ModelError::HookOutOfRange(format!(
                "layer {} out of range ({} layers)",
                site.layer, cfg.n_layers
            )));
        }
        if site.kind == SiteKind::Embedding && site.layer != 0 {
            return Err(ModelError::InvalidHook(
                "embedding hooks must use layer 0".into(),
            ));
        }
        if site.token >= seq_len {
            return Err(ModelError::HookOutOfRange(format!(
                "token {} out of range (sequence length {})",
                site.token, seq_len
            )));
        }
        match &hook.kind {
            HookKind::Capture => {
                captures.insert(site);
            }
            HookKind::Patch(payload) => {
                if site.kind == SiteKind::MlpInner {
                    return Err(ModelError::InvalidHook(
                        "mlp_inner is a capture-only site".into(),
                    ));
                }
                if payload.len() != cfg.d_model {
                    return Err(ModelError::InvalidHook(format!(
                        "patch payload has length {}, expected d_model {}",
                        payload.len(),
                        cfg.d_model
                    )));
                }
                if patches.insert(site, payload.as_slice()).is_some() {
                    return Err(ModelError::InvalidHook(format!(
                        "duplicate patch at {:?}",
                        site
                    )));
                }
            }
        }
    }
    Ok(HookPlan { patches, captures })
}

impl<'a> HookPlan<'a> {
    /// Applies patches then captures for one site kind/layer over all tokens.
    fn apply(
        &self,
        kind: SiteKind,
        layer: usize,
        values: &mut Matrix,
        out: &mut BTreeMap<Site, Vec<f64>>,
        patched: &mut BTreeSet<Site>,
    ) {
        for token in 0..values.rows() {
            let site = Site::new(kind, layer, token);
            if let Some(payload) = self.patches.get(&site) {
                values.row_mut(token).copy_from_slice(payload);
                patched.insert(site);
            }
            if self.captures.contains(&site) {
                out.insert(site, values.row(token).to_vec());
            }
        }
    }
}

fn rmsnorm(x: &Matrix, scale: &Matrix) -> (Matrix, Vec<f64>) {
    let d = x.cols();
    let mut out = Matrix::zeros(x.rows(), d);
    let mut invs = Vec::with_capacity(x.rows());
    for s in 0..x.rows() {
        let row = x.row(s);
        let ms = row.iter().map(|v| v * v).sum::<f64>() / d as f64;
        let inv = 1.0 / (ms + RMS_EPS).sqrt();
        invs.push(inv);
        let out_row = out.row_mut(s);
        for i in 0..d {
            out_row[i] = row[i] * scale.get(0, i) * inv;
        }
    }
    (out, invs)
}

/// Rotation table: `(cos, sin)` for each `(position, pair)`.
fn rope_table(seq_len: usize, head_dim: usize) -> Vec<Vec<(f64, f64)>> {
    let pairs = head_dim / 2;
    (0..seq_len)
        .map(|pos| {
            (0..pairs)
                .map(|i| {
                    let theta = ROPE_BASE.powf(-2.0 * i as f64 / head_dim as f64);
                    let angle = pos as f64 * theta;
                    (angle.cos(), angle.sin())
                })
                .collect()
        })
        .collect()
}

fn apply_rope(m: &mut Matrix, table: &[Vec<(f64, f64)>], n_heads: usize, head_dim: usize) {
    let pairs = head_dim / 2;
    for s in 0..m.rows() {
        let row = m.row_mut(s);
        for h in 0..n_heads {
            let base = h * head_dim;
            for i in 0..pairs {
                let (c, sn) = table[s][i];
                let a = row[base + 2 * i];
                let b = row[base + 2 * i + 1];
                row[base + 2 * i] = a * c - b * sn;
                row[base + 2 * i + 1] = a * sn + b * c;
            }
        }
    }
}

pub(crate) fn apply_rope_inverse(
    m: &mut Matrix,
    table: &[Vec<(f64, f64)>],
    n_heads: usize,
    head_dim: usize,
) {
    let pairs = head_dim / 2;
    for s in 0..m.rows() {
        let row = m.row_mut(s);
        for h in 0..n_heads {
            let base = h * head_dim;
            for i in 0..pairs {
                let (c, sn) = table[s][i];
                let a = row[base + 2 * i];
                let b = row[base + 2 * i + 1];
                row[base + 2 * i] = a * c + b * sn;
                row[base + 2 * i + 1] = -a * sn + b * c;
            }
        }
    }
}

pub(crate) fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

pub(crate) fn silu_prime(x: f64) -> f64 {
    let sig = 1.0 / (1.0 + (-x).exp());
    sig * (1.0 + x * (1.0 - sig))
}

fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(logits.rows(), logits.cols());
    for r in 0..logits.rows() {
        let row = logits.row(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let out_row = out.row_mut(r);
        let mut sum = 0.0;
        for (o, v) in out_row.iter_mut().zip(row) {
            let e = (v - max).exp();
            *o = e;
            sum += e;
        }
        let inv = 1.0 / sum;
        for o in out_row.iter_mut() {
            *o *= inv;
        }
    }
    out
}

pub(crate) fn copy_cols(m: &Matrix, lo: usize, hi: usize) -> Matrix {
    let mut out = Matrix::zeros(m.rows(), hi - lo);
    for r in 0..m.rows() {
        out.row_mut(r).copy_from_slice(&m.row(r)[lo..hi]);
    }
    out
}

/// Runs the decoder and returns distributions plus captured activations.
pub fn forward(
    ckpt: &ModelCheckpoint,
    tokens: &[u32],
    hooks: &[HookSpec],
) -> Result<ForwardOutput> {
    let (out, _) = forward_cached(ckpt, tokens, hooks)?;
    Ok(out)
}

/// Like [`forward`] but also returns the full activation cache used by the
/// backward pass.
pub fn forward_cached(
    ckpt: &ModelCheckpoint,
    tokens: &[u32],
    hooks: &[HookSpec],
) -> Result<(ForwardOutput, ForwardCache)> {
    let cfg = ckpt.config();
    if tokens.is_empty() {
        return Err(ModelError::InvalidArgument("empty token sequence".into()));
    }
    if tokens.len() > cfg.max_seq {
        return Err(ModelError::InvalidArgument(format!(
            "sequence length {} exceeds max_seq {}",
            tokens.len(),
            cfg.max_seq
        )));
    }
    for &t in tokens {
        if t as usize >= cfg.vocab_size {
            return Err(ModelError::BadToken {
                index: t,
                vocab: cfg.vocab_size,
            });
        }
    }
    let plan = plan_hooks(ckpt, tokens.len(), hooks)?;

    let seq = tokens.len();
    let d = cfg.d_model;
    let head_dim = cfg.head_dim();
    let scale = 1.0 / (head_dim as f64).sqrt();
    let rope = rope_table(seq, head_dim);

    let mut captures = BTreeMap::new();
    let mut patched = BTreeSet::new();

    let embed = ckpt.embed();
    let mut x = Matrix::zeros(seq, d);
    for (s, &t) in tokens.iter().enumerate() {
        x.row_mut(s).copy_from_slice(embed.row(t as usize));
    }
    plan.apply(SiteKind::Embedding, 0, &mut x, &mut captures, &mut patched);
    let embedded = x.clone();

    let mut layers = Vec::with_capacity(cfg.n_layers);
    for l in 0..cfg.n_layers {
        let x_in = x.clone();
        let (normed_a, inv_rms_a) = rmsnorm(&x_in, ckpt.attn_norm(l));
        let mut q = normed_a.matmul_bt(ckpt.wq(l));
        let mut k = normed_a.matmul_bt(ckpt.wk(l));
        let v = normed_a.matmul_bt(ckpt.wv(l));
        apply_rope(&mut q, &rope, cfg.n_heads, head_dim);
        apply_rope(&mut k, &rope, cfg.n_heads, head_dim);

        let mut probs = Vec::with_capacity(cfg.n_heads);
        let mut mix = Matrix::zeros(seq, d);
        for h in 0..cfg.n_heads {
            let lo = h * head_dim;
            let hi = lo + head_dim;
            let mut p = Matrix::zeros(seq, seq);
            for s in 0..seq {
                let qs = &q.row(s)[lo..hi];
                // causal: attend to positions <= s only
                let mut max = f64::NEG_INFINITY;
                let mut scores = Vec::with_capacity(s + 1);
                for t in 0..=s {
                    let kt = &k.row(t)[lo..hi];
                    let sc = crate::linalg::dot(qs, kt) * scale;
                    max = max.max(sc);
                    scores.push(sc);
                }
                let mut sum = 0.0;
                for sc in &mut scores {
                    *sc = (*sc - max).exp();
                    sum += *sc;
                }
                let inv = 1.0 / sum;
                for (t, sc) in scores.iter().enumerate() {
                    p.set(s, t, sc * inv);
                }
                // mix for this head
                let mix_row = &mut mix.row_mut(s)[lo..hi];
                for t in 0..=s {
                    let w = p.get(s, t);
                    let vt = &v.row(t)[lo..hi];
                    for (m, vv) in mix_row.iter_mut().zip(vt) {
                        *m += w * vv;
                    }
                }
            }
            probs.push(p);
        }

        let mut attn_proj = mix.matmul_bt(ckpt.wo(l));
        plan.apply(SiteKind::AttnOut, l, &mut attn_proj, &mut captures, &mut patched);
        let x_mid = x_in.add(&attn_proj);

        let (normed_m, inv_rms_m) = rmsnorm(&x_mid, ckpt.mlp_norm(l));
        let gate = normed_m.matmul_bt(ckpt.w_gate(l));
        let up = normed_m.matmul_bt(ckpt.w_in(l));
        let mut inner = Matrix::zeros(seq, cfg.d_ff);
        for s in 0..seq {
            let g = gate.row(s);
            let u = up.row(s);
            let out = inner.row_mut(s);
            for i in 0..cfg.d_ff {
                out[i] = silu(g[i]) * u[i];
            }
        }
        // capture-only site
        for token in 0..seq {
            let site = Site::new(SiteKind::MlpInner, l, token);
            if plan.captures.contains(&site) {
                captures.insert(site, inner.row(token).to_vec());
            }
        }

        let mut mlp_proj = inner.matmul_bt(ckpt.w_out(l));
        plan.apply(SiteKind::MlpOut, l, &mut mlp_proj, &mut captures, &mut patched);
        let mut x_out = x_mid.add(&mlp_proj);
        plan.apply(SiteKind::LayerOut, l, &mut x_out, &mut captures, &mut patched);

        layers.push(LayerCache {
            x_in,
            normed_a,
            inv_rms_a,
            q,
            k,
            v,
            probs,
            mix,
            x_mid,
            normed_m,
            inv_rms_m,
            gate,
            up,
            inner,
            x_out: x_out.clone(),
        });
        x = x_out;
    }

    let (final_normed, inv_rms_f) = rmsnorm(&x, ckpt.final_norm());
    let logits = final_normed.matmul_bt(ckpt.unembed());
    let probs = softmax_rows(&logits);

    let distributions = (0..seq)
        .map(|s| NextTokenDistribution {
            probabilities: probs.row(s).to_vec(),
            context_length: s + 1,
        })
        .collect();

    Ok((
        ForwardOutput {
            distributions,
            captures,
        },
        ForwardCache {
            tokens: tokens.to_vec(),
            embedded,
            layers,
            final_normed,
            inv_rms_f,
            probs,
            patched,
        },
    ))
}
