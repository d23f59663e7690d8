//! Scoring lists and turning scores into an [`EvalReport`].

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::metrics::{kendall_tau, ndcg_at_k_with, pairwise_accuracy, spearman_rho, GainKind};
use crate::types::ListReport;
use crate::{encoder, CandidateList, Error, EvalReport, ModelParams, Result};

/// Anything that assigns one score per item of a list.
pub trait ListScorer {
    fn score_list(&self, list: &CandidateList) -> Result<Vec<f64>>;
}

/// The upstream scores as they are.
#[derive(Debug, Clone, Copy, Default)]
pub struct Pointwise;

impl ListScorer for Pointwise {
    fn score_list(&self, list: &CandidateList) -> Result<Vec<f64>> {
        Ok(list.point_scores())
    }
}

/// Ranks by the labels themselves; NDCG is 1 by construction.
#[derive(Debug, Clone, Copy, Default)]
pub struct LabelOracle;

impl ListScorer for LabelOracle {
    fn score_list(&self, list: &CandidateList) -> Result<Vec<f64>> {
        Ok(list.labels())
    }
}

impl ListScorer for ModelParams {
    fn score_list(&self, list: &CandidateList) -> Result<Vec<f64>> {
        encoder::forward(list, self).map(|(s, _)| s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub cutoffs: Vec<usize>,
    pub gain: GainKind,
    /// Skip the correlation metrics.
    pub ndcg_only: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            cutoffs: vec![1, 3, 10],
            gain: GainKind::Exponential,
            ndcg_only: false,
        }
    }
}

/// NDCG@k for every cutoff plus Spearman, Kendall tau-b and pairwise
/// accuracy. Correlations that are undefined for this list are left out.
pub fn list_metrics(scores: &[f64], labels: &[f64], opts: &EvalOptions) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for &k in &opts.cutoffs {
        out.insert(format!("ndcg@{k}"), ndcg_at_k_with(scores, labels, k, opts.gain)?);
    }
    if opts.ndcg_only {
        return Ok(out);
    }
    let optional = [
        ("spearman", spearman_rho(scores, labels)),
        ("kendall", kendall_tau(scores, labels)),
        ("pairwise_accuracy", pairwise_accuracy(scores, labels)),
    ];
    for (name, value) in optional {
        match value {
            Ok(v) => {
                out.insert(name.to_string(), v);
            }
            Err(Error::DegenerateInput(_) | Error::NoValidPairs) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Scores every list with `score` and collects the metrics.
pub fn evaluate<F>(lists: &[CandidateList], opts: &EvalOptions, mut score: F) -> Result<EvalReport>
where
    F: FnMut(&CandidateList) -> Result<Vec<f64>>,
{
    let per_list = lists
        .iter()
        .map(|list| {
            let scores = score(list)?;
            Ok(ListReport {
                group_id: list.group_id.clone(),
                metrics: list_metrics(&scores, &list.labels(), opts)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_lists(per_list))
}

pub fn evaluate_scorer<S: ListScorer + ?Sized>(lists: &[CandidateList], opts: &EvalOptions, scorer: &S) -> Result<EvalReport> {
    evaluate(lists, opts, |l| scorer.score_list(l))
}
