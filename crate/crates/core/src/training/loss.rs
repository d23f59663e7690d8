//! NDCG-weighted pairwise logistic loss.
//!
//! For every pair with `y_i > y_j`:
//!
//! ```text
//! Delta_ij = |(gain(y_i) - gain(y_j)) * (disc(r_i) - disc(r_j))| / IDCG
//! l_ij     = log(1 + exp(-(s_i - s_j)))
//! L        = sum_ij 1[y_i > y_j] * Delta_ij * l_ij
//! ```
//!
//! `r` are the 1-indexed ranks of the current scores and IDCG runs over the
//! whole list. The weights are constants for differentiation: the gradient
//! only flows through `l_ij`.

use crate::metrics::{compute_ranks, disc, gain, idcg, RankMap};
use crate::{Error, Matrix, Result};
use alloc::vec;
use alloc::vec::Vec;

/// Pair weights for one list, computed from one ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaWeights {
    /// `delta[(i, j)]` is `Delta_ij` when `y_i > y_j`, otherwise zero.
    pub delta: Matrix,
    pub ranks: RankMap,
    pub idcg: f64,
    /// Every label is zero, so every weight is zero. Not an error.
    pub zero_idcg: bool,
}

impl LambdaWeights {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.delta[(i, j)]
    }

    pub fn len(&self) -> usize {
        self.delta.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.rows() == 0
    }
}

fn check_pair(scores: &[f64], labels: &[f64]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    Ok(())
}

pub fn lambda_weights(labels: &[f64], scores: &[f64]) -> Result<LambdaWeights> {
    check_pair(scores, labels)?;
    let n = labels.len();
    let ranks = compute_ranks(scores)?;
    let mut delta = Matrix::zeros(n, n);
    if n == 0 {
        return Ok(LambdaWeights { delta, ranks, idcg: 0.0, zero_idcg: true });
    }
    let ideal = idcg(labels, n)?;
    if ideal <= 0.0 {
        return Ok(LambdaWeights { delta, ranks, idcg: ideal, zero_idcg: true });
    }
    let gains = labels.iter().map(|&y| gain(y)).collect::<Result<Vec<_>>>()?;
    let discs = ranks.ranks.iter().map(|&r| disc(r)).collect::<Result<Vec<_>>>()?;
    for i in 0..n {
        for j in 0..n {
            if labels[i] > labels[j] {
                delta[(i, j)] = ((gains[i] - gains[j]) * (discs[i] - discs[j])).abs() / ideal;
            }
        }
    }
    Ok(LambdaWeights { delta, ranks, idcg: ideal, zero_idcg: false })
}

/// `log(1 + exp(x))` without overflow.
#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Number of ordered pairs with `y_i > y_j`.
pub fn valid_pair_count(labels: &[f64]) -> usize {
    let mut count = 0;
    for (i, a) in labels.iter().enumerate() {
        for b in &labels[i + 1..] {
            if a != b {
                count += 1;
            }
        }
    }
    count
}

/// Loss with the weights supplied (held fixed).
pub fn loss_with_weights(scores: &[f64], labels: &[f64], weights: &LambdaWeights) -> Result<f64> {
    check_pair(scores, labels)?;
    if weights.len() != scores.len() {
        return Err(Error::LengthMismatch { left: weights.len(), right: scores.len() });
    }
    let n = scores.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if labels[i] > labels[j] {
                total += weights.get(i, j) * softplus(-(scores[i] - scores[j]));
            }
        }
    }
    Ok(total)
}

/// Loss with weights from the ranking induced by `scores` themselves.
pub fn rlpo_loss(scores: &[f64], labels: &[f64]) -> Result<f64> {
    let w = lambda_weights(labels, scores)?;
    loss_with_weights(scores, labels, &w)
}

/// `dL/ds` with the supplied weights held fixed.
pub fn grad_with_weights(scores: &[f64], labels: &[f64], weights: &LambdaWeights) -> Result<Vec<f64>> {
    check_pair(scores, labels)?;
    if weights.len() != scores.len() {
        return Err(Error::LengthMismatch { left: weights.len(), right: scores.len() });
    }
    let n = scores.len();
    let mut grad = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            if labels[i] > labels[j] {
                let c = weights.get(i, j) * sigmoid(-(scores[i] - scores[j]));
                grad[i] -= c;
                grad[j] += c;
            }
        }
    }
    Ok(grad)
}

/// `dL/ds`, weights from the current ranking and treated as constants.
pub fn loss_grad_scores(scores: &[f64], labels: &[f64]) -> Result<Vec<f64>> {
    let w = lambda_weights(labels, scores)?;
    grad_with_weights(scores, labels, &w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_item_weights() {
        let w = lambda_weights(&[1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(w.ranks.ranks, vec![1, 2]);
        assert_eq!(w.idcg, 1.0);
        let expected = 1.0 - 1.0 / 3f64.log2();
        assert!((w.get(0, 1) - expected).abs() < 1e-15);
        assert!((w.get(0, 1) - 0.369070).abs() < 1e-6);
        assert_eq!(w.get(1, 0), 0.0);
    }

    #[test]
    fn equal_labels_get_zero_weight() {
        let w = lambda_weights(&[2.0, 2.0, 1.0], &[0.1, 0.9, 0.5]).unwrap();
        assert_eq!(w.get(0, 1), 0.0);
        assert_eq!(w.get(1, 0), 0.0);
        assert!(w.get(0, 2) > 0.0);
    }

    #[test]
    fn all_zero_labels_flagged() {
        let w = lambda_weights(&[0.0, 0.0, 0.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!(w.zero_idcg);
        assert!(w.delta.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn loss_examples() {
        assert_eq!(rlpo_loss(&[0.3, 0.1, 0.9], &[2.0, 2.0, 2.0]).unwrap(), 0.0);
        let expected = (1.0 - 1.0 / 3f64.log2()) * core::f64::consts::LN_2;
        let got = rlpo_loss(&[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.255820).abs() < 1e-6);
        let far = rlpo_loss(&[800.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!(far >= 0.0 && far < 1e-300);
    }

    #[test]
    fn tied_scores_split_gradient() {
        let g = loss_grad_scores(&[0.0, 0.0], &[1.0, 0.0]).unwrap();
        let delta = 1.0 - 1.0 / 3f64.log2();
        assert!((g[0] + delta / 2.0).abs() < 1e-15);
        assert!((g[1] - delta / 2.0).abs() < 1e-15);
        assert_eq!(loss_grad_scores(&[1.0, 5.0], &[3.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn softplus_and_sigmoid_are_stable() {
        assert_eq!(softplus(-1000.0), 0.0);
        assert_eq!(softplus(1000.0), 1000.0);
        assert!((softplus(0.0) - core::f64::consts::LN_2).abs() < 1e-16);
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
    }

    #[test]
    fn pair_count() {
        assert_eq!(valid_pair_count(&[1.0, 1.0, 0.0]), 2);
        assert_eq!(valid_pair_count(&[1.0]), 0);
    }
}
