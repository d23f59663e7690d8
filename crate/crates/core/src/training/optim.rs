//! AdamW with decoupled weight decay and bias-corrected moments.

use alloc::format;
use serde::{Deserialize, Serialize};

use crate::{Error, ModelParams, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl AdamW {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
        }
    }

    /// One update of a flat tensor. `step` is the 1-based step number after
    /// incrementing.
    ///
    /// ```text
    /// p <- p * (1 - lr * wd)              (when `decay`)
    /// m <- b1 m + (1 - b1) g
    /// v <- b2 v + (1 - b2) g^2
    /// p <- p - lr * m_hat / (sqrt(v_hat) + eps)
    /// ```
    pub fn update_slice(&self, params: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64], step: u64, decay: bool) {
        let bc1 = 1.0 - libm::pow(self.beta1, step as f64);
        let bc2 = 1.0 - libm::pow(self.beta2, step as f64);
        let shrink = if decay { 1.0 - self.lr * self.weight_decay } else { 1.0 };
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
            *p *= shrink;
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.lr * m_hat / (libm::sqrt(v_hat) + self.eps);
        }
    }
}

/// First and second moments shaped like the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub first: ModelParams,
    pub second: ModelParams,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            first: params.zeros_like(),
            second: params.zeros_like(),
            step: 0,
        }
    }
}

/// Tensors exempt from weight decay. The residual gate is excluded so decay
/// does not pull the model back toward the pointwise ranking.
fn decays(name: &str) -> bool {
    name != "alpha"
}

/// One AdamW step over every parameter tensor.
pub fn adamw_step(params: &mut ModelParams, grads: &ModelParams, state: &mut OptimizerState, opt: &AdamW) -> Result<()> {
    let p_lens: alloc::vec::Vec<usize> = params.tensors().iter().map(|(_, t)| t.len()).collect();
    for other in [grads, &state.first, &state.second] {
        let lens: alloc::vec::Vec<usize> = other.tensors().iter().map(|(_, t)| t.len()).collect();
        if lens != p_lens {
            return Err(Error::ShapeMismatch(format!(
                "optimizer tensors {lens:?} vs parameters {p_lens:?}"
            )));
        }
    }
    state.step += 1;
    let step = state.step;
    let grads = grads.tensors();
    let firsts = state.first.tensors_mut();
    let seconds = state.second.tensors_mut();
    for ((((name, p), (_, g)), (_, m)), (_, v)) in params
        .tensors_mut()
        .into_iter()
        .zip(grads)
        .zip(firsts)
        .zip(seconds)
    {
        opt.update_slice(p, g, m, v, step, decays(&name));
    }
    Ok(())
}
