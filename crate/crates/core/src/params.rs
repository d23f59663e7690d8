//! Learnable tensors of the residual head.
//!
//! The same struct doubles as the gradient record and the AdamW moment
//! buffers, so everything that walks the parameters goes through
//! [`ModelParams::tensors`] / [`ModelParams::tensors_mut`], which fix a single
//! canonical order:
//!
//! ```text
//! for each block: w_query, w_key, w_value, w_out, ln_scale, ln_shift
//! mlp_w1, mlp_b1, mlp_w2, mlp_b2, alpha
//! ```

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Matrix, Result};

/// One residual self-attention block.
///
/// Head `h` uses columns `h*d_h .. (h+1)*d_h` of the query, key and value
/// projections (`d_h = d / heads`); `w_out` mixes the concatenated heads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockParams {
    pub w_query: Matrix,
    pub w_key: Matrix,
    pub w_value: Matrix,
    pub w_out: Matrix,
    pub ln_scale: Vec<f64>,
    pub ln_shift: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub dim: usize,
    pub head_count: usize,
    pub blocks: Vec<BlockParams>,
    /// `d x d`, applied as `x * mlp_w1 + mlp_b1`.
    pub mlp_w1: Matrix,
    pub mlp_b1: Vec<f64>,
    /// Output layer weights, `d x 1` stored flat.
    pub mlp_w2: Vec<f64>,
    pub mlp_b2: f64,
    /// Residual gate on the listwise delta.
    pub alpha: f64,
}

/// Seeded initialisation with a single attention block.
pub fn init_params(dim: usize, head_count: usize, seed: u64) -> Result<ModelParams> {
    ModelParams::init(dim, head_count, 1, seed)
}

impl ModelParams {
    /// Projection and MLP weights are uniform on `[-1/sqrt(d), 1/sqrt(d)]`,
    /// biases zero, LayerNorm scale one and shift zero, `alpha` zero.
    pub fn init(dim: usize, head_count: usize, block_count: usize, seed: u64) -> Result<Self> {
        check_heads(dim, head_count)?;
        if block_count == 0 {
            return Err(Error::InvalidConfig("block_count must be >= 1".into()));
        }
        let bound = 1.0 / libm::sqrt(dim as f64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = |rows: usize, cols: usize| {
            let data = (0..rows * cols)
                .map(|_| rng.random_range(-bound..=bound))
                .collect();
            Matrix::from_vec(rows, cols, data)
        };
        let blocks = (0..block_count)
            .map(|_| BlockParams {
                w_query: uniform(dim, dim),
                w_key: uniform(dim, dim),
                w_value: uniform(dim, dim),
                w_out: uniform(dim, dim),
                ln_scale: vec![1.0; dim],
                ln_shift: vec![0.0; dim],
            })
            .collect();
        let mlp_w1 = uniform(dim, dim);
        let mlp_w2 = uniform(dim, 1).as_slice().to_vec();
        Ok(Self {
            dim,
            head_count,
            blocks,
            mlp_w1,
            mlp_b1: vec![0.0; dim],
            mlp_w2,
            mlp_b2: 0.0,
            alpha: 0.0,
        })
    }

    /// Same shapes, every entry zero.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    #[inline]
    pub fn head_dim(&self) -> usize {
        self.dim / self.head_count
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// All tensors in canonical order, with stable names.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = Vec::new();
        for (b, blk) in self.blocks.iter().enumerate() {
            out.push((format!("block{b}.w_query"), blk.w_query.as_slice()));
            out.push((format!("block{b}.w_key"), blk.w_key.as_slice()));
            out.push((format!("block{b}.w_value"), blk.w_value.as_slice()));
            out.push((format!("block{b}.w_out"), blk.w_out.as_slice()));
            out.push((format!("block{b}.ln_scale"), &blk.ln_scale));
            out.push((format!("block{b}.ln_shift"), &blk.ln_shift));
        }
        out.push(("mlp_w1".into(), self.mlp_w1.as_slice()));
        out.push(("mlp_b1".into(), &self.mlp_b1));
        out.push(("mlp_w2".into(), &self.mlp_w2));
        out.push(("mlp_b2".into(), core::slice::from_ref(&self.mlp_b2)));
        out.push(("alpha".into(), core::slice::from_ref(&self.alpha)));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = Vec::new();
        for (b, blk) in self.blocks.iter_mut().enumerate() {
            out.push((format!("block{b}.w_query"), blk.w_query.as_mut_slice()));
            out.push((format!("block{b}.w_key"), blk.w_key.as_mut_slice()));
            out.push((format!("block{b}.w_value"), blk.w_value.as_mut_slice()));
            out.push((format!("block{b}.w_out"), blk.w_out.as_mut_slice()));
            out.push((format!("block{b}.ln_scale"), &mut blk.ln_scale));
            out.push((format!("block{b}.ln_shift"), &mut blk.ln_shift));
        }
        out.push(("mlp_w1".into(), self.mlp_w1.as_mut_slice()));
        out.push(("mlp_b1".into(), &mut self.mlp_b1));
        out.push(("mlp_w2".into(), &mut self.mlp_w2));
        out.push(("mlp_b2".into(), core::slice::from_mut(&mut self.mlp_b2)));
        out.push(("alpha".into(), core::slice::from_mut(&mut self.alpha)));
        out
    }

    /// Expected length of each tensor, in canonical order.
    pub fn tensor_lengths(dim: usize, block_count: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for _ in 0..block_count {
            out.extend_from_slice(&[dim * dim, dim * dim, dim * dim, dim * dim, dim, dim]);
        }
        out.extend_from_slice(&[dim * dim, dim, dim, 1, 1]);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Checks shapes against `dim`/`head_count` and that every entry is finite.
    pub fn validate(&self) -> Result<()> {
        check_heads(self.dim, self.head_count)?;
        if self.blocks.is_empty() {
            return Err(Error::ShapeMismatch("no attention blocks".into()));
        }
        let expected = Self::tensor_lengths(self.dim, self.blocks.len());
        for ((name, t), want) in self.tensors().into_iter().zip(expected) {
            if t.len() != want {
                return Err(Error::ShapeMismatch(format!(
                    "{name}: {} entries, expected {want}",
                    t.len()
                )));
            }
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(name));
            }
        }
        for blk in &self.blocks {
            for m in [&blk.w_query, &blk.w_key, &blk.w_value, &blk.w_out] {
                if m.shape() != (self.dim, self.dim) {
                    return Err(Error::ShapeMismatch("projection is not d x d".into()));
                }
            }
        }
        if self.mlp_w1.shape() != (self.dim, self.dim) {
            return Err(Error::ShapeMismatch("mlp_w1 is not d x d".into()));
        }
        Ok(())
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }
}

fn check_heads(dim: usize, heads: usize) -> Result<()> {
    if dim == 0 || heads == 0 || !dim.is_multiple_of(heads) {
        return Err(Error::IndivisibleHeads { dim, heads });
    }
    Ok(())
}
