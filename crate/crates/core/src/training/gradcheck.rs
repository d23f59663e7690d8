//! Central finite-difference check of the analytic gradients.
//!
//! The pair weights depend on the ranking and are piecewise constant, so both
//! the analytic and the numeric side use weights frozen at the unperturbed
//! scores.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::backward::backward;
use super::loss::{grad_with_weights, lambda_weights, loss_with_weights, LambdaWeights};
use crate::encoder::forward;
use crate::{CandidateList, ModelParams, Result, ReviewItem};

/// Magnitudes below this are compared absolutely rather than relatively.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub coordinates: usize,
    pub max_rel_error: f64,
    /// Tensor name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    pub step: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// End-to-end loss with the supplied weights held fixed.
pub fn frozen_loss(params: &ModelParams, list: &CandidateList, weights: &LambdaWeights) -> Result<f64> {
    let (scores, _) = forward(list, params)?;
    loss_with_weights(&scores, &list.labels(), weights)
}

/// Analytic gradient with the supplied weights held fixed.
pub fn analytic_gradients(params: &ModelParams, list: &CandidateList, weights: &LambdaWeights) -> Result<ModelParams> {
    let (scores, cache) = forward(list, params)?;
    let g = grad_with_weights(&scores, &list.labels(), weights)?;
    backward(&cache, &g, params)
}

pub fn grad_check(params: &ModelParams, list: &CandidateList, step: f64, tolerance: f64) -> Result<GradCheckReport> {
    grad_check_with(params, list, step, tolerance, analytic_gradients)
}

/// Like [`grad_check`] with a caller-supplied analytic gradient.
pub fn grad_check_with<F>(params: &ModelParams, list: &CandidateList, step: f64, tolerance: f64, analytic: F) -> Result<GradCheckReport>
where
    F: Fn(&ModelParams, &CandidateList, &LambdaWeights) -> Result<ModelParams>,
{
    list.validate()?;
    let (scores, _) = forward(list, params)?;
    let weights = lambda_weights(&list.labels(), &scores)?;
    let grads = analytic(params, list, &weights)?;

    let shapes: Vec<(String, usize)> = params.tensors().into_iter().map(|(n, t)| (n, t.len())).collect();
    let flat_grads: Vec<&[f64]> = grads.tensors().into_iter().map(|(_, t)| t).collect();
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        coordinates: 0,
        max_rel_error: 0.0,
        worst: None,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
        step,
        tolerance,
        passed: true,
    };
    for (t, (name, len)) in shapes.iter().enumerate() {
        for idx in 0..*len {
            let original = params.tensors()[t].1[idx];
            set(&mut probe, t, idx, original + step);
            let plus = frozen_loss(&probe, list, &weights)?;
            set(&mut probe, t, idx, original - step);
            let minus = frozen_loss(&probe, list, &weights)?;
            set(&mut probe, t, idx, original);

            let numeric = (plus - minus) / (2.0 * step);
            let a = flat_grads[t].get(idx).copied().unwrap_or(f64::NAN);
            let denom = a.abs().max(numeric.abs()).max(REL_ERROR_FLOOR);
            let err = (a - numeric).abs() / denom;
            report.coordinates += 1;
            if !(err <= report.max_rel_error) {
                report.max_rel_error = err;
                report.worst = Some((name.clone(), idx));
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    report.passed = report.max_rel_error <= tolerance;
    Ok(report)
}

fn set(params: &mut ModelParams, tensor: usize, idx: usize, value: f64) {
    params.tensors_mut()[tensor].1[idx] = value;
}

/// A small seeded instance with every parameter active: non-zero `alpha` and
/// LayerNorm affine away from its identity start.
pub fn gradcheck_instance(seed: u64, n: usize, dim: usize, heads: usize) -> Result<(ModelParams, CandidateList)> {
    let mut params = ModelParams::init(dim, heads, 1, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    params.alpha = rng.random_range(0.5..1.5);
    params.mlp_b2 = rng.random_range(-0.5..0.5);
    for blk in &mut params.blocks {
        for v in blk.ln_scale.iter_mut() {
            *v = rng.random_range(0.5..1.5);
        }
        for v in blk.ln_shift.iter_mut() {
            *v = rng.random_range(-0.5..0.5);
        }
    }
    for v in params.mlp_b1.iter_mut() {
        *v = rng.random_range(-0.2..0.2);
    }
    let items = (0..n)
        .map(|i| ReviewItem {
            id: format!("r{i}"),
            text: None,
            embedding: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            point_score: rng.random_range(0.0..1.0),
            label: libm::round(rng.random_range(0.0..5.0) * 10.0) / 10.0,
        })
        .collect();
    let list = CandidateList {
        group_id: format!("gradcheck-{seed}"),
        query: None,
        dim,
        items,
    };
    Ok((params, list))
}
