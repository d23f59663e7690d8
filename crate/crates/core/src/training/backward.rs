//! Reverse-mode gradients of the residual head.
//!
//! Embeddings and point scores are constants: gradients stop at the input of
//! the first attention block and are never taken with respect to `point`.

use alloc::format;
use alloc::vec;

use crate::encoder::{BlockCache, ForwardCache};
use crate::params::BlockParams;
use crate::tensor::dot;
use crate::{Error, Matrix, ModelParams, Result};

/// Gradient of the loss with respect to every parameter, given
/// `dL/d final_scores`. The result has the same shape as `params`.
pub fn backward(cache: &ForwardCache, grad_scores: &[f64], params: &ModelParams) -> Result<ModelParams> {
    if cache.dim != params.dim || cache.head_count != params.head_count {
        return Err(Error::CacheMismatch(format!(
            "cache built for d={} heads={}, params have d={} heads={}",
            cache.dim, cache.head_count, params.dim, params.head_count
        )));
    }
    if cache.blocks.len() != params.blocks.len() {
        return Err(Error::CacheMismatch(format!(
            "cache has {} blocks, params have {}",
            cache.blocks.len(),
            params.blocks.len()
        )));
    }
    let n = cache.len();
    if grad_scores.len() != n {
        return Err(Error::CacheMismatch(format!(
            "{} score gradients for a cache of {n} items",
            grad_scores.len()
        )));
    }
    let d = params.dim;
    let mut grads = params.zeros_like();

    // final = point + alpha * delta
    grads.alpha = dot(grad_scores, &cache.deltas);
    let d_delta: alloc::vec::Vec<f64> = grad_scores.iter().map(|g| g * params.alpha).collect();

    // delta = relu(ctx W1 + b1) . w2 + b2
    grads.mlp_b2 = d_delta.iter().sum();
    let mut d_pre = Matrix::zeros(n, d);
    for i in 0..n {
        let hid = cache.hidden.row(i);
        for (gw, &h) in grads.mlp_w2.iter_mut().zip(hid) {
            *gw += d_delta[i] * h;
        }
        let pre = cache.hidden_pre.row(i);
        for (k, dp) in d_pre.row_mut(i).iter_mut().enumerate() {
            if pre[k] > 0.0 {
                *dp = d_delta[i] * params.mlp_w2[k];
            }
        }
    }
    let context = cache.context();
    grads.mlp_w1 = context.t_matmul(&d_pre);
    grads.mlp_b1 = d_pre.column_sums();
    let mut d_out = d_pre.matmul_t(&params.mlp_w1);

    for b in (0..params.blocks.len()).rev() {
        let need_input = b > 0;
        let (d_in, gblk) = block_backward(&cache.blocks[b], &params.blocks[b], params.head_count, &d_out, need_input);
        grads.blocks[b] = gblk;
        if let Some(d_in) = d_in {
            d_out = d_in;
        }
    }
    Ok(grads)
}

/// Backward through `LayerNorm(X + MHSA(X))`. Returns `dL/dX` when asked for,
/// and the block's parameter gradients.
fn block_backward(
    cache: &BlockCache,
    block: &BlockParams,
    head_count: usize,
    d_out: &Matrix,
    need_input: bool,
) -> (Option<Matrix>, BlockParams) {
    let (n, d) = d_out.shape();
    let xhat = &cache.norm.normalized;

    // LayerNorm affine
    let mut d_scale = vec![0.0; d];
    let d_shift = d_out.column_sums();
    let mut d_resid = Matrix::zeros(n, d);
    for i in 0..n {
        let go = d_out.row(i);
        let xh = xhat.row(i);
        let mut dxhat = vec![0.0; d];
        for k in 0..d {
            d_scale[k] += go[k] * xh[k];
            dxhat[k] = go[k] * block.ln_scale[k];
        }
        let mean_dx = dxhat.iter().sum::<f64>() / d as f64;
        let mean_dx_xh = dot(&dxhat, xh) / d as f64;
        let rstd = cache.norm.rstd[i];
        for (k, r) in d_resid.row_mut(i).iter_mut().enumerate() {
            *r = rstd * (dxhat[k] - mean_dx - xh[k] * mean_dx_xh);
        }
    }

    // output projection
    let att = &cache.attention;
    let d_w_out = att.concat.t_matmul(&d_resid);
    let d_concat = d_resid.matmul_t(&block.w_out);

    let dh = d / head_count;
    let scale = 1.0 / libm::sqrt(dh as f64);
    let mut d_query = Matrix::zeros(n, d);
    let mut d_key = Matrix::zeros(n, d);
    let mut d_value = Matrix::zeros(n, d);
    for head in 0..head_count {
        let cols = head * dh..(head + 1) * dh;
        let w = &att.weights[head];
        // dA = dO_h V_h^T ; dV_h = A^T dO_h
        let mut d_logits = Matrix::zeros(n, n);
        for i in 0..n {
            let g = &d_concat.row(i)[cols.clone()];
            let mut row_dot = 0.0;
            for j in 0..n {
                let da = dot(g, &att.value.row(j)[cols.clone()]);
                d_logits[(i, j)] = da;
                row_dot += da * w[(i, j)];
                let a = w[(i, j)];
                for (dv, &gk) in d_value.row_mut(j)[cols.clone()].iter_mut().zip(g) {
                    *dv += a * gk;
                }
            }
            // softmax backward, then the 1/sqrt(d_h) scaling
            for j in 0..n {
                d_logits[(i, j)] = w[(i, j)] * (d_logits[(i, j)] - row_dot) * scale;
            }
        }
        for i in 0..n {
            for j in 0..n {
                let s = d_logits[(i, j)];
                if s == 0.0 {
                    continue;
                }
                let kj = &att.key.row(j)[cols.clone()];
                for (dq, &kv) in d_query.row_mut(i)[cols.clone()].iter_mut().zip(kj) {
                    *dq += s * kv;
                }
                let qi = &att.query.row(i)[cols.clone()];
                for (dk, &qv) in d_key.row_mut(j)[cols.clone()].iter_mut().zip(qi) {
                    *dk += s * qv;
                }
            }
        }
    }

    let x = &cache.input;
    let grads = BlockParams {
        w_query: x.t_matmul(&d_query),
        w_key: x.t_matmul(&d_key),
        w_value: x.t_matmul(&d_value),
        w_out: d_w_out,
        ln_scale: d_scale,
        ln_shift: d_shift,
    };

    let d_input = need_input.then(|| {
        let mut dx = d_resid.clone();
        dx.add_assign(&d_query.matmul_t(&block.w_query));
        dx.add_assign(&d_key.matmul_t(&block.w_key));
        dx.add_assign(&d_value.matmul_t(&block.w_value));
        dx
    });
    (d_input, grads)
}
