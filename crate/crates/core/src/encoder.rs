//! Forward pass of the residual listwise head.
//!
//! ```text
//! for each block:  H <- LayerNorm(H + MHSA(H))          (post-norm)
//! delta_i  = w2 . relu(H[i] W1 + b1) + b2
//! final_i  = point_i + alpha * delta_i
//! ```
//!
//! There is no positional encoding and no masking, so the map from rows of `H`
//! to deltas is permutation equivariant. Every intermediate needed by
//! [`crate::training::backward`] is kept in a [`ForwardCache`].

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::params::BlockParams;
use crate::tensor::dot;
use crate::{CandidateList, Error, Matrix, ModelParams, Result};

pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct AttentionCache {
    pub(crate) query: Matrix,
    pub(crate) key: Matrix,
    pub(crate) value: Matrix,
    /// Softmax weights, one `N x N` matrix per head.
    pub(crate) weights: Vec<Matrix>,
    /// Head outputs concatenated, before the output projection.
    pub(crate) concat: Matrix,
}

impl AttentionCache {
    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }
}

#[derive(Debug, Clone)]
pub struct LayerNormCache {
    pub(crate) mean: Vec<f64>,
    /// `1 / sqrt(var + eps)` per row.
    pub(crate) rstd: Vec<f64>,
    pub(crate) normalized: Matrix,
}

impl LayerNormCache {
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Rows before the affine scale/shift.
    pub fn normalized(&self) -> &Matrix {
        &self.normalized
    }
}

#[derive(Debug, Clone)]
pub struct BlockCache {
    pub(crate) input: Matrix,
    pub(crate) attention: AttentionCache,
    pub(crate) norm: LayerNormCache,
    pub(crate) output: Matrix,
}

impl BlockCache {
    pub fn attention(&self) -> &AttentionCache {
        &self.attention
    }

    pub fn norm(&self) -> &LayerNormCache {
        &self.norm
    }

    pub fn output(&self) -> &Matrix {
        &self.output
    }
}

/// Everything the backward pass needs, plus the outputs.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub(crate) dim: usize,
    pub(crate) head_count: usize,
    pub(crate) blocks: Vec<BlockCache>,
    pub(crate) hidden_pre: Matrix,
    pub(crate) hidden: Matrix,
    pub(crate) deltas: Vec<f64>,
    pub(crate) scores: Vec<f64>,
}

impl ForwardCache {
    pub fn blocks(&self) -> &[BlockCache] {
        &self.blocks
    }

    /// `H_ctx` after the last block.
    pub fn context(&self) -> &Matrix {
        &self.blocks.last().expect("at least one block").output
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

fn check_input(h: &Matrix, dim: usize) -> Result<()> {
    if h.rows() == 0 {
        return Err(Error::EmptyList);
    }
    if h.cols() != dim {
        return Err(Error::ShapeMismatch(format!(
            "input has {} columns, model expects {dim}",
            h.cols()
        )));
    }
    Ok(())
}

/// In-place numerically stable softmax of one row.
fn softmax_row(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = libm::exp(*v - max);
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Multi-head scaled dot-product self-attention, heads concatenated and
/// passed through `w_out`.
pub fn mhsa_forward(h: &Matrix, block: &BlockParams, head_count: usize) -> Result<(Matrix, AttentionCache)> {
    let dim = block.w_query.rows();
    check_input(h, dim)?;
    if head_count == 0 || !dim.is_multiple_of(head_count) {
        return Err(Error::IndivisibleHeads { dim, heads: head_count });
    }
    let n = h.rows();
    let dh = dim / head_count;
    let scale = 1.0 / libm::sqrt(dh as f64);

    let query = h.matmul(&block.w_query);
    let key = h.matmul(&block.w_key);
    let value = h.matmul(&block.w_value);
    let mut concat = Matrix::zeros(n, dim);
    let mut weights = Vec::with_capacity(head_count);
    for head in 0..head_count {
        let cols = head * dh..(head + 1) * dh;
        let mut w = Matrix::zeros(n, n);
        for i in 0..n {
            let qi = &query.row(i)[cols.clone()];
            let row = w.row_mut(i);
            for (j, r) in row.iter_mut().enumerate() {
                *r = dot(qi, &key.row(j)[cols.clone()]) * scale;
            }
            softmax_row(row);
        }
        for i in 0..n {
            let out = &mut concat.row_mut(i)[cols.clone()];
            for (j, &a) in w.row(i).iter().enumerate() {
                for (o, &v) in out.iter_mut().zip(&value.row(j)[cols.clone()]) {
                    *o += a * v;
                }
            }
        }
        weights.push(w);
    }
    let out = concat.matmul(&block.w_out);
    Ok((
        out,
        AttentionCache {
            query,
            key,
            value,
            weights,
            concat,
        },
    ))
}

fn normalize_row(x: &[f64], out: &mut [f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let rstd = 1.0 / libm::sqrt(var + LAYER_NORM_EPS);
    for (o, v) in out.iter_mut().zip(x) {
        *o = (v - mean) * rstd;
    }
    (mean, rstd)
}

/// `(x - mean) / sqrt(var + eps) * scale + shift`, population variance.
pub fn layer_norm(x: &[f64], scale: &[f64], shift: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    normalize_row(x, &mut out);
    for ((o, g), b) in out.iter_mut().zip(scale).zip(shift) {
        *o = *o * g + b;
    }
    out
}

/// `LayerNorm(H + MHSA(H))`, row-wise.
pub fn residual_block_forward(h: &Matrix, block: &BlockParams, head_count: usize) -> Result<(Matrix, BlockCache)> {
    let (attn, attention) = mhsa_forward(h, block, head_count)?;
    let mut residual = h.clone();
    residual.add_assign(&attn);
    let (n, d) = residual.shape();
    let mut normalized = Matrix::zeros(n, d);
    let mut output = Matrix::zeros(n, d);
    let mut mean = Vec::with_capacity(n);
    let mut rstd = Vec::with_capacity(n);
    for i in 0..n {
        let (m, r) = normalize_row(residual.row(i), normalized.row_mut(i));
        mean.push(m);
        rstd.push(r);
        let xhat = normalized.row(i);
        for (k, o) in output.row_mut(i).iter_mut().enumerate() {
            *o = xhat[k] * block.ln_scale[k] + block.ln_shift[k];
        }
    }
    Ok((
        output.clone(),
        BlockCache {
            input: h.clone(),
            attention,
            norm: LayerNormCache {
                mean,
                rstd,
                normalized,
            },
            output,
        },
    ))
}

/// Per-row two-layer MLP; returns `(pre-activation, activation, deltas)`.
fn mlp_forward(context: &Matrix, params: &ModelParams) -> Result<(Matrix, Matrix, Vec<f64>)> {
    check_input(context, params.dim)?;
    let mut pre = context.matmul(&params.mlp_w1);
    for i in 0..pre.rows() {
        for (v, b) in pre.row_mut(i).iter_mut().zip(&params.mlp_b1) {
            *v += b;
        }
    }
    let mut hidden = pre.clone();
    for v in hidden.as_mut_slice() {
        *v = v.max(0.0);
    }
    let deltas = (0..hidden.rows())
        .map(|i| dot(hidden.row(i), &params.mlp_w2) + params.mlp_b2)
        .collect();
    Ok((pre, hidden, deltas))
}

/// Scalar delta score for every row of `H_ctx`.
pub fn delta_head(context: &Matrix, params: &ModelParams) -> Result<Vec<f64>> {
    mlp_forward(context, params).map(|(_, _, d)| d)
}

/// `point + alpha * delta`, elementwise.
pub fn score_aggregate(point: &[f64], deltas: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if point.len() != deltas.len() {
        return Err(Error::LengthMismatch {
            left: point.len(),
            right: deltas.len(),
        });
    }
    Ok(point.iter().zip(deltas).map(|(p, d)| p + alpha * d).collect())
}

/// Full forward pass on an embedding matrix and its point scores.
pub fn forward_parts(h: &Matrix, point: &[f64], params: &ModelParams) -> Result<(Vec<f64>, ForwardCache)> {
    check_input(h, params.dim)?;
    if point.len() != h.rows() {
        return Err(Error::LengthMismatch {
            left: point.len(),
            right: h.rows(),
        });
    }
    let mut blocks = Vec::with_capacity(params.blocks.len());
    let mut x = h.clone();
    for block in &params.blocks {
        let (out, cache) = residual_block_forward(&x, block, params.head_count)?;
        x = out;
        blocks.push(cache);
    }
    let (hidden_pre, hidden, deltas) = mlp_forward(&x, params)?;
    let scores = score_aggregate(point, &deltas, params.alpha)?;
    Ok((
        scores.clone(),
        ForwardCache {
            dim: params.dim,
            head_count: params.head_count,
            blocks,
            hidden_pre,
            hidden,
            deltas,
            scores,
        },
    ))
}

/// Final scores for a list, with the activation cache.
pub fn forward(list: &CandidateList, params: &ModelParams) -> Result<(Vec<f64>, ForwardCache)> {
    if list.dim != params.dim {
        return Err(Error::ShapeMismatch(format!(
            "list dimension {} vs model dimension {}",
            list.dim, params.dim
        )));
    }
    forward_parts(&list.embeddings(), &list.point_scores(), params)
}
