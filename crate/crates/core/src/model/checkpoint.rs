//! Checkpoint: named weight tensors plus the binary DMK1 file format.
//!
//! File layout (all integers little-endian):
//!
//! ```text
//! magic "DMK1"
//! u32 header_len, then header_len bytes of UTF-8 key=value config lines
//! per tensor:
//!   u16 name_len, name bytes
//!   u8 rank, rank x u32 dims
//!   row-major f32 data
//! ```
//!
//! Tensors are written in construction order and the reader preserves file
//! order, so write -> read -> write is byte-identical. In-memory values are
//! kept on the f32 grid, so read -> write is also lossless.

use std::io::{Read, Write};
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha20Rng;

use super::config::ModelConfig;
use super::{ModelError, Result};
use crate::linalg::Matrix;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"DMK1";

/// A named tensor. Rank is 1 for norm scales (stored as a 1 x d matrix in
/// memory) and 2 for everything else.
#[derive(Clone, Debug)]
pub struct NamedTensor {
    pub name: String,
    pub rank: u8,
    pub matrix: Matrix,
}

/// Architecture config plus the ordered tensor map.
#[derive(Clone, Debug)]
pub struct ModelCheckpoint {
    config: ModelConfig,
    tensors: Vec<NamedTensor>,
}

fn tensor_specs(cfg: &ModelConfig) -> Vec<(String, u8, usize, usize)> {
    let d = cfg.d_model;
    let ff = cfg.d_ff;
    let mut specs = vec![("tok_embed".to_string(), 2, cfg.vocab_size, d)];
    for l in 0..cfg.n_layers {
        specs.push((format!("layers.{l}.attn_norm"), 1, 1, d));
        specs.push((format!("layers.{l}.attn.wq"), 2, d, d));
        specs.push((format!("layers.{l}.attn.wk"), 2, d, d));
        specs.push((format!("layers.{l}.attn.wv"), 2, d, d));
        specs.push((format!("layers.{l}.attn.wo"), 2, d, d));
        specs.push((format!("layers.{l}.mlp_norm"), 1, 1, d));
        specs.push((format!("layers.{l}.mlp.w_gate"), 2, ff, d));
        specs.push((format!("layers.{l}.mlp.w_in"), 2, ff, d));
        specs.push((format!("layers.{l}.mlp.w_out"), 2, d, ff));
    }
    specs.push(("final_norm".to_string(), 1, 1, d));
    specs.push(("unembed".to_string(), 2, cfg.vocab_size, d));
    specs
}

const TENSORS_PER_LAYER: usize = 9;

impl ModelCheckpoint {
    /// Fresh checkpoint with seeded Gaussian init (std 0.02 for projections
    /// and embeddings, ones for norm scales), quantized to the f32 grid.
    pub fn init(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
        let tensors = tensor_specs(config)
            .into_iter()
            .map(|(name, rank, rows, cols)| {
                let mut matrix = if rank == 1 {
                    Matrix::from_fn(rows, cols, |_, _| 1.0)
                } else {
                    Matrix::from_fn(rows, cols, |_, _| crate::seed::gaussian(&mut rng) * 0.02)
                };
                matrix.quantize_f32();
                NamedTensor { name, rank, matrix }
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            tensors,
        })
    }

    /// Builds from explicit tensors, validating the name/shape map against
    /// the config. Tensor values are quantized to the f32 grid.
    pub fn from_tensors(config: &ModelConfig, mut tensors: Vec<NamedTensor>) -> Result<Self> {
        config.validate()?;
        let specs = tensor_specs(config);
        if tensors.len() != specs.len() {
            return Err(ModelError::Format(format!(
                "expected {} tensors, got {}",
                specs.len(),
                tensors.len()
            )));
        }
        for (tensor, (name, rank, rows, cols)) in tensors.iter_mut().zip(specs) {
            if tensor.name != name {
                return Err(ModelError::Format(format!(
                    "tensor order mismatch: expected {name:?}, got {:?}",
                    tensor.name
                )));
            }
            if tensor.rank != rank
                || tensor.matrix.rows() != rows
                || tensor.matrix.cols() != cols
            {
                return Err(ModelError::Format(format!(
                    "tensor {name:?} has shape {}x{} (rank {}), expected {rows}x{cols} (rank {rank})",
                    tensor.matrix.rows(),
                    tensor.matrix.cols(),
                    tensor.rank
                )));
            }
            tensor.matrix.quantize_f32();
        }
        Ok(Self {
            config: config.clone(),
            tensors,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn tensors(&self) -> &[NamedTensor] {
        &self.tensors
    }

    pub fn tensor(&self, name: &str) -> Option<&Matrix> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .map(|t| &t.matrix)
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors
            .iter()
            .map(|t| t.matrix.rows() * t.matrix.cols())
            .sum()
    }

    // Fixed-order index accessors for the hot paths.
    pub(crate) fn embed(&self) -> &Matrix {
        &self.tensors[0].matrix
    }
    pub(crate) fn attn_norm(&self, l: usize) -> &Matrix {
        &self.tensors[1 + l * TENSORS_PER_LAYER].matrix
    }
    pub(crate) fn wq(&self, l: usize) -> &Matrix {
        &self.tensors[2 + l * TENSORS_PER_LAYER].matrix
    }
    pub(crate) fn wk(&self, l: usize) -> &Matrix {
        &self.tensors[3 + l * TENSORS_PER_LAYER].matrix
    }
    pub(crate) fn wv(&self, l: usize) -> &Matrix {
        &self.tensors[4 + l * TENSORS_PER_LAYER].matrix
    }
    pub(crate) fn wo(&self, l: usize) -> &Matrix {
        &self.tensors[5 + l * TENSORS_PER_LAYER].matrix
    }
    pub(crate) fn mlp_norm(&self, l: usize) -> &Matrix {
        &self.tensors[6 + l * TENSORS_PER_LAYER].matrix
    }
    pub(crate) fn w_gate(&self, l: usize) -> &Matrix {
        &self.tensors[7 + l * TENSORS_PER_LAYER].matrix
    }
    pub(crate) fn w_in(&self, l: usize) -> &Matrix {
        &self.tensors[8 + l * TENSORS_PER_LAYER].matrix
    }
    pub(crate) fn w_out(&self, l: usize) -> &Matrix {
        &self.tensors[9 + l * TENSORS_PER_LAYER].matrix
    }
    pub(crate) fn final_norm(&self) -> &Matrix {
        &self.tensors[1 + self.config.n_layers * TENSORS_PER_LAYER].matrix
    }
    pub(crate) fn unembed(&self) -> &Matrix {
        &self.tensors[2 + self.config.n_layers * TENSORS_PER_LAYER].matrix
    }

    // Construction-order tensor indices, used to align gradient and
    // optimizer state vectors with the tensor list.
    pub(crate) fn embed_index() -> usize {
        0
    }
    pub(crate) fn attn_norm_index(l: usize) -> usize {
        1 + l * TENSORS_PER_LAYER
    }
    pub(crate) fn wq_index(l: usize) -> usize {
        2 + l * TENSORS_PER_LAYER
    }
    pub(crate) fn wk_index(l: usize) -> usize {
        3 + l * TENSORS_PER_LAYER
    }
    pub(crate) fn wv_index(l: usize) -> usize {
        4 + l * TENSORS_PER_LAYER
    }
    pub(crate) fn wo_index(l: usize) -> usize {
        5 + l * TENSORS_PER_LAYER
    }
    pub(crate) fn mlp_norm_index(l: usize) -> usize {
        6 + l * TENSORS_PER_LAYER
    }
    pub(crate) fn w_gate_index(l: usize) -> usize {
        7 + l * TENSORS_PER_LAYER
    }
    pub(crate) fn w_in_index(l: usize) -> usize {
        8 + l * TENSORS_PER_LAYER
    }
    pub(crate) fn w_out_index(l: usize) -> usize {
        9 + l * TENSORS_PER_LAYER
    }
    pub(crate) fn final_norm_index(n_layers: usize) -> usize {
        1 + n_layers * TENSORS_PER_LAYER
    }
    pub(crate) fn unembed_index(n_layers: usize) -> usize {
        2 + n_layers * TENSORS_PER_LAYER
    }

    pub(crate) fn tensors_mut(&mut self) -> &mut Vec<NamedTensor> {
        &mut self.tensors
    }

    /// Bitwise equality of config and all tensor data.
    pub fn bit_equal(&self, other: &ModelCheckpoint) -> bool {
        self.config == other.config
            && self.tensors.len() == other.tensors.len()
            && self.tensors.iter().zip(&other.tensors).all(|(a, b)| {
                a.name == b.name
                    && a.rank == b.rank
                    && a.matrix.rows() == b.matrix.rows()
                    && a.matrix.cols() == b.matrix.cols()
                    && a.matrix
                        .data()
                        .iter()
                        .zip(b.matrix.data())
                        .all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }

    /// Serializes to the DMK1 byte format.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        let header = self.config.to_header();
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.push(t.rank);
            if t.rank == 1 {
                out.extend_from_slice(&(t.matrix.cols() as u32).to_le_bytes());
            } else {
                out.extend_from_slice(&(t.matrix.rows() as u32).to_le_bytes());
                out.extend_from_slice(&(t.matrix.cols() as u32).to_le_bytes());
            }
            for v in t.matrix.data() {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
        out
    }

    /// Parses the DMK1 byte format.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Cursor { bytes, pos: 0 };
        let magic = r.take(4)?;
        if magic != CHECKPOINT_MAGIC {
            return Err(ModelError::Format(format!(
                "bad magic {:?}, expected {:?}",
                &magic[..],
                CHECKPOINT_MAGIC
            )));
        }
        let header_len = r.u32()? as usize;
        let header = std::str::from_utf8(r.take(header_len)?)
            .map_err(|e| ModelError::Format(format!("header not UTF-8: {e}")))?;
        let config = ModelConfig::from_header(header)?;

        let mut tensors = Vec::new();
        while !r.done() {
            let name_len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|e| ModelError::Format(format!("tensor name not UTF-8: {e}")))?
                .to_string();
            let rank = r.u8()?;
            if rank == 0 || rank > 2 {
                return Err(ModelError::Format(format!(
                    "tensor {name:?} has unsupported rank {rank}"
                )));
            }
            let (rows, cols) = if rank == 1 {
                (1usize, r.u32()? as usize)
            } else {
                (r.u32()? as usize, r.u32()? as usize)
            };
            let count = rows * cols;
            let mut data = Vec::with_capacity(count);
            for _ in 0..count {
                data.push(f64::from(r.f32()?));
            }
            let matrix = Matrix::new(rows, cols, data)
                .map_err(|e| ModelError::Format(format!("tensor {name:?}: {e}")))?;
            tensors.push(NamedTensor { name, rank, matrix });
        }
        Self::from_tensors(&config, tensors)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

/// New checkpoint with `w_out[layer] := left_factor * w_out[layer]`; every
/// other tensor, all names, and all shapes are unchanged.
pub fn apply_weight_edit(
    ckpt: &ModelCheckpoint,
    layer: usize,
    left_factor: &Matrix,
) -> Result<ModelCheckpoint> {
    let d = ckpt.config().d_model;
    if layer >= ckpt.config().n_layers {
        return Err(ModelError::InvalidArgument(format!(
            "layer {layer} out of range ({} layers)",
            ckpt.config().n_layers
        )));
    }
    if left_factor.rows() != d || left_factor.cols() != d {
        return Err(ModelError::DimensionMismatch(format!(
            "left factor is {}x{}, expected {d}x{d}",
            left_factor.rows(),
            left_factor.cols()
        )));
    }
    let mut edited = ckpt.clone();
    let idx = ModelCheckpoint::w_out_index(layer);
    let mut new_w = left_factor.matmul(&edited.tensors[idx].matrix);
    new_w.quantize_f32();
    edited.tensors[idx].matrix = new_w;
    Ok(edited)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(ModelError::Format(format!(
                "truncated file: wanted {} bytes at offset {}, have {}",
                n,
                self.pos,
                self.bytes.len()
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}
