//! Ranking-quality and agreement metrics.
//!
//! | Metric | Range | Ties |
//! |--------|-------|------|
//! | NDCG@k | [0, 1] | predicted ties broken by ascending index |
//! | Spearman rho | [-1, 1] | fractional (average) ranks |
//! | Kendall tau-b | [-1, 1] | tau-b denominator |
//! | Pairwise accuracy | [0, 1] | score ties count one half |
//!
//! Gain is `2^y - 1` and discount is `1 / log2(k + 1)` with `k` 1-indexed.
//! A list whose ideal DCG is zero has NDCG 1 by convention.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest label accepted by the exponential gain.
pub const MAX_EXP_LABEL: f64 = 64.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainKind {
    /// `2^y - 1`
    #[default]
    Exponential,
    /// `y`
    Linear,
}

impl GainKind {
    pub fn apply(self, y: f64) -> Result<f64> {
        match self {
            GainKind::Exponential => gain(y),
            GainKind::Linear if y.is_finite() => Ok(y),
            GainKind::Linear => Err(Error::LabelOutOfRange(y)),
        }
    }
}

/// `2^y - 1`
pub fn gain(y: f64) -> Result<f64> {
    if !y.is_finite() || y > MAX_EXP_LABEL {
        return Err(Error::LabelOutOfRange(y));
    }
    Ok(libm::exp2(y) - 1.0)
}

/// `1 / log2(k + 1)` for a 1-indexed position `k`.
pub fn disc(k: usize) -> Result<f64> {
    if k < 1 {
        return Err(Error::InvalidRank(k));
    }
    Ok(1.0 / libm::log2(k as f64 + 1.0))
}

/// 1-indexed positions of each item under a descending sort of its scores.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankMap {
    /// `ranks[i]` is the position of item `i`.
    pub ranks: Vec<usize>,
}

impl RankMap {
    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    /// Item indices in rank order (the inverse permutation).
    pub fn order(&self) -> Vec<usize> {
        let mut order = vec![0; self.ranks.len()];
        for (i, &r) in self.ranks.iter().enumerate() {
            order[r - 1] = i;
        }
        order
    }
}

/// Indices sorted by descending value, equal values in ascending index order.
pub(crate) fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    // stable sort keeps ascending index among equal values
    idx.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap_or(Ordering::Equal));
    idx
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what.into()));
    }
    Ok(())
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

pub fn compute_ranks(scores: &[f64]) -> Result<RankMap> {
    check_finite(scores, "scores")?;
    let mut ranks = vec![0; scores.len()];
    for (pos, i) in descending_order(scores).into_iter().enumerate() {
        ranks[i] = pos + 1;
    }
    Ok(RankMap { ranks })
}

fn dcg_of_order(order: &[usize], labels: &[f64], k: usize, gain_kind: GainKind) -> Result<f64> {
    let mut total = 0.0;
    for (pos, &i) in order.iter().take(k).enumerate() {
        total += gain_kind.apply(labels[i])? * disc(pos + 1)?;
    }
    Ok(total)
}

/// Ideal DCG over the top `min(k, N)` positions.
pub fn idcg(labels: &[f64], k: usize) -> Result<f64> {
    idcg_with(labels, k, GainKind::Exponential)
}

pub fn idcg_with(labels: &[f64], k: usize, gain_kind: GainKind) -> Result<f64> {
    if k < 1 {
        return Err(Error::InvalidRank(k));
    }
    check_finite(labels, "labels")?;
    dcg_of_order(&descending_order(labels), labels, k, gain_kind)
}

pub fn ndcg_at_k(scores: &[f64], labels: &[f64], k: usize) -> Result<f64> {
    ndcg_at_k_with(scores, labels, k, GainKind::Exponential)
}

pub fn ndcg_at_k_with(scores: &[f64], labels: &[f64], k: usize, gain_kind: GainKind) -> Result<f64> {
    check_lengths(scores, labels)?;
    let ideal = idcg_with(labels, k, gain_kind)?;
    let order = compute_ranks(scores)?.order();
    let dcg = dcg_of_order(&order, labels, k, gain_kind)?;
    if ideal == 0.0 {
        return Ok(1.0);
    }
    Ok(dcg / ideal)
}

/// Average ranks (1-indexed, ascending by value); tied values share the mean
/// of the positions they occupy.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(Ordering::Equal));
    let mut out = vec![0.0; values.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &idx[start..end] {
            out[i] = avg;
        }
        start = end;
    }
    out
}

/// Spearman's rho: Pearson correlation of the fractional ranks.
pub fn spearman_rho(scores: &[f64], labels: &[f64]) -> Result<f64> {
    check_lengths(scores, labels)?;
    if scores.len() < 2 {
        return Err(Error::DegenerateInput("need at least two items"));
    }
    check_finite(scores, "scores")?;
    check_finite(labels, "labels")?;
    let a = fractional_ranks(scores);
    let b = fractional_ranks(labels);
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(&b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::DegenerateInput("all ranks tied"));
    }
    Ok((cov / libm::sqrt(va * vb)).clamp(-1.0, 1.0))
}

/// Kendall's tau-b.
pub fn kendall_tau(scores: &[f64], labels: &[f64]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let n = scores.len();
    if n < 2 {
        return Err(Error::DegenerateInput("need at least two items"));
    }
    check_finite(scores, "scores")?;
    check_finite(labels, "labels")?;
    let (mut concordant, mut discordant, mut ties_s, mut ties_l) = (0u64, 0u64, 0u64, 0u64);
    for i in 0..n {
        for j in i + 1..n {
            let ds = scores[i] - scores[j];
            let dl = labels[i] - labels[j];
            if ds == 0.0 {
                ties_s += 1;
            }
            if dl == 0.0 {
                ties_l += 1;
            }
            let prod = ds * dl;
            if prod > 0.0 {
                concordant += 1;
            } else if prod < 0.0 {
                discordant += 1;
            }
        }
    }
    let pairs = (n * (n - 1) / 2) as u64;
    if ties_s == pairs || ties_l == pairs {
        return Err(Error::DegenerateInput("all values tied"));
    }
    let denom = libm::sqrt(((pairs - ties_s) as f64) * ((pairs - ties_l) as f64));
    Ok(((concordant as f64 - discordant as f64) / denom).clamp(-1.0, 1.0))
}

/// Fraction of label-distinct pairs that the scores order the same way.
pub fn pairwise_accuracy(scores: &[f64], labels: &[f64]) -> Result<f64> {
    check_lengths(scores, labels)?;
    check_finite(scores, "scores")?;
    check_finite(labels, "labels")?;
    let n = scores.len();
    let (mut hits, mut total) = (0.0, 0usize);
    for i in 0..n {
        for j in i + 1..n {
            let dl = labels[i] - labels[j];
            if dl == 0.0 {
                continue;
            }
            total += 1;
            let ds = scores[i] - scores[j];
            if ds == 0.0 {
                hits += 0.5;
            } else if (ds > 0.0) == (dl > 0.0) {
                hits += 1.0;
            }
        }
    }
    if total == 0 {
        return Err(Error::NoValidPairs);
    }
    Ok(hits / total as f64)
}
