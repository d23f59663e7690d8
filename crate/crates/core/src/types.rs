//! Candidate lists, training configuration and evaluation reports.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::metrics::GainKind;
use crate::{Error, Matrix, Result};

/// One candidate review.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    pub embedding: Vec<f64>,
    /// Score from the upstream pointwise model.
    pub point_score: f64,
    /// Ground-truth utility, nominally in `[0, 10]`.
    pub label: f64,
}

/// All candidates for one product. Item order carries no meaning to the model;
/// it only breaks ties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateList {
    pub group_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<String>,
    pub dim: usize,
    pub items: Vec<ReviewItem>,
}

impl CandidateList {
    /// Checks the list invariants: non-empty, every embedding of length `dim`,
    /// unique ids, finite numbers.
    pub fn validate(&self) -> Result<()> {
        if self.items.is_empty() {
            return Err(Error::EmptyList);
        }
        if self.dim == 0 {
            return Err(Error::ShapeMismatch("dim must be positive".to_string()));
        }
        let mut seen = BTreeSet::new();
        for item in &self.items {
            if item.embedding.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    item: item.id.clone(),
                    expected: self.dim,
                    found: item.embedding.len(),
                });
            }
            if !seen.insert(item.id.as_str()) {
                return Err(Error::DuplicateId(item.id.clone()));
            }
            if !item.point_score.is_finite() {
                return Err(Error::NonFinite(format!("point_score of {:?}", item.id)));
            }
            if !item.label.is_finite() {
                return Err(Error::NonFinite(format!("label of {:?}", item.id)));
            }
            if item.embedding.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("embedding of {:?}", item.id)));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.items.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// The `N x d` embedding matrix `H`.
    pub fn embeddings(&self) -> Matrix {
        let mut data = Vec::with_capacity(self.items.len() * self.dim);
        for item in &self.items {
            data.extend_from_slice(&item.embedding);
        }
        Matrix::from_vec(self.items.len(), self.dim, data)
    }

    pub fn point_scores(&self) -> Vec<f64> {
        self.items.iter().map(|i| i.point_score).collect()
    }

    pub fn labels(&self) -> Vec<f64> {
        self.items.iter().map(|i| i.label).collect()
    }

    /// A new list holding the items at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> CandidateList {
        CandidateList {
            group_id: self.group_id.clone(),
            query: self.query.clone(),
            dim: self.dim,
            items: indices.iter().map(|&i| self.items[i].clone()).collect(),
        }
    }
}

/// Hyper-parameters for [`crate::training::fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub head_count: usize,
    /// Number of stacked attention blocks; one in the reference architecture.
    pub block_count: usize,
    pub seed: u64,
    pub k_min: usize,
    pub k_max: usize,
    pub lists_per_batch: usize,
    /// Cross-validation folds; 1 means a single split or no split at all.
    pub folds: usize,
    pub eval_cutoffs: Vec<usize>,
    /// Divide each list's loss by its number of label-distinct pairs.
    pub normalize_by_pairs: bool,
    /// Gain used by validation NDCG. Training always uses the exponential gain.
    pub eval_gain: GainKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-5,
            weight_decay: 0.01,
            epochs: 3,
            head_count: 4,
            block_count: 1,
            seed: 0,
            k_min: 2,
            k_max: 50,
            lists_per_batch: 1,
            folds: 10,
            eval_cutoffs: vec![1, 3, 10],
            normalize_by_pairs: false,
            eval_gain: GainKind::Exponential,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight_decay must be >= 0, got {}", self.weight_decay));
        }
        if self.k_min < 1 || self.k_min > self.k_max {
            return bad(format!(
                "need 1 <= k_min <= k_max, got {}..{}",
                self.k_min, self.k_max
            ));
        }
        if self.folds == 0 {
            return bad("folds must be >= 1".to_string());
        }
        if self.head_count == 0 || self.block_count == 0 || self.lists_per_batch == 0 {
            return bad("head_count, block_count and lists_per_batch must be positive".to_string());
        }
        if self.eval_cutoffs.contains(&0) {
            return bad("eval cutoffs must be >= 1".to_string());
        }
        Ok(())
    }
}

/// Metric values for one list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListReport {
    pub group_id: String,
    pub metrics: BTreeMap<String, f64>,
}

/// Per-list metrics with their means. A metric that is undefined on a list
/// (Spearman on an all-tied list, say) is absent from that list's map and the
/// mean runs over the lists where it is defined.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_list: Vec<ListReport>,
    pub aggregate: BTreeMap<String, f64>,
    pub list_count: usize,
}

impl EvalReport {
    pub fn from_lists(per_list: Vec<ListReport>) -> Self {
        let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for list in &per_list {
            for (name, &value) in &list.metrics {
                let e = sums.entry(name.clone()).or_insert((0.0, 0));
                e.0 += value;
                e.1 += 1;
            }
        }
        let aggregate = sums
            .into_iter()
            .map(|(k, (s, n))| (k, s / n as f64))
            .collect();
        Self {
            list_count: per_list.len(),
            per_list,
            aggregate,
        }
    }

    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.aggregate.get(metric).copied()
    }

    /// Checks every value against its metric's range.
    pub fn check_ranges(&self) -> Result<()> {
        let all = self
            .per_list
            .iter()
            .flat_map(|l| l.metrics.iter())
            .chain(self.aggregate.iter());
        for (name, &v) in all {
            let (lo, hi) = metric_range(name);
            if !(v >= lo - 1e-12 && v <= hi + 1e-12) {
                return Err(Error::InvalidConfig(format!("{name} = {v} outside [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

fn metric_range(name: &str) -> (f64, f64) {
    if name.starts_with("spearman") || name.starts_with("kendall") {
        (-1.0, 1.0)
    } else {
        (0.0, 1.0)
    }
}
