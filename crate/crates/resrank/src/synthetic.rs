//! Synthetic candidate lists with planted list-level effects.
//!
//! Each group draws `clusters_per_group` random unit directions. Every item
//! belongs to one cluster and its embedding is the normalised cluster
//! direction plus small isotropic jitter. An item's intrinsic utility `u` is
//! uniform on `[1, 10]`; its label decays geometrically with its position
//! inside its cluster (ordered by `u`), so near-duplicates of an idea lose
//! value. The point score only sees `min(u, cap)` plus Gaussian noise: it is
//! blind to redundancy and saturates above the cap.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use resrank_core::eval::{evaluate_scorer, EvalOptions, LabelOracle, Pointwise};
use resrank_core::{CandidateList, EvalReport, ReviewItem};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub groups: usize,
    pub items_per_group: usize,
    pub dim: usize,
    pub clusters_per_group: usize,
    /// Label multiplier per step down inside a cluster, in `(0, 1)`.
    pub redundancy_decay: f64,
    /// Standard deviation of the point-score noise.
    pub score_noise: f64,
    /// Point scores saturate at this value.
    pub compression_cap: f64,
    /// Standard deviation of the per-coordinate embedding jitter.
    pub jitter: f64,
    /// Reserve the last embedding coordinate for `u / 10`.
    pub utility_channel: bool,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            groups: 200,
            items_per_group: 30,
            dim: 16,
            clusters_per_group: 4,
            redundancy_decay: 0.6,
            score_noise: 0.3,
            compression_cap: 8.0,
            jitter: 0.1,
            utility_channel: true,
            seed: 42,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.groups == 0 || self.items_per_group == 0 || self.dim == 0 {
            return bad("groups, items_per_group and dim must be positive");
        }
        if self.clusters_per_group == 0 || self.clusters_per_group > self.items_per_group {
            return bad("need 1 <= clusters_per_group <= items_per_group");
        }
        if !(self.redundancy_decay > 0.0 && self.redundancy_decay < 1.0) {
            return bad("redundancy_decay must lie in (0, 1)");
        }
        if !(self.score_noise >= 0.0 && self.score_noise.is_finite()) {
            return bad("score_noise must be >= 0");
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return bad("jitter must be >= 0");
        }
        if !self.compression_cap.is_finite() {
            return bad("compression_cap must be finite");
        }
        Ok(())
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Deterministic in `config`: all draws come from one seeded generator in a
/// fixed order.
pub fn synthetic_generate(config: &SyntheticConfig) -> Result<Vec<CandidateList>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = Normal::new(0.0, config.score_noise).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let (n, d, c) = (config.items_per_group, config.dim, config.clusters_per_group);

    let mut lists = Vec::with_capacity(config.groups);
    for g in 0..config.groups {
        let de = if config.utility_channel { d - 1 } else { d };
        let directions: Vec<Vec<f64>> = (0..c)
            .map(|_| {
                let mut v: Vec<f64> = (0..de).map(|_| StandardNormal.sample(&mut rng)).collect();
                normalize(&mut v);
                v
            })
            .collect();
        // every cluster gets at least one item
        let cluster: Vec<usize> = (0..n).map(|i| if i < c { i } else { rng.random_range(0..c) }).collect();
        let utility: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..=10.0)).collect();
        let embeddings: Vec<Vec<f64>> = cluster
            .iter()
            .zip(&utility)
            .map(|(&k, &u)| {
                let mut v: Vec<f64> = directions[k]
                    .iter()
                    .map(|x| {
                        let j: f64 = StandardNormal.sample(&mut rng);
                        x + config.jitter * j
                    })
                    .collect();
                normalize(&mut v);
                if config.utility_channel {
                    v.push(u / 10.0);
                }
                v
            })
            .collect();
        let noise_draws: Vec<f64> = (0..n).map(|_| noise.sample(&mut rng)).collect();

        let mut labels = vec![0.0; n];
        for k in 0..c {
            let mut members: Vec<usize> = (0..n).filter(|&i| cluster[i] == k).collect();
            members.sort_by(|&a, &b| utility[b].total_cmp(&utility[a]).then(a.cmp(&b)));
            for (pos, &i) in members.iter().enumerate() {
                labels[i] = utility[i] * config.redundancy_decay.powi(pos as i32);
            }
        }

        let mut items: Vec<ReviewItem> = (0..n)
            .map(|i| ReviewItem {
                id: format!("g{g}-r{i}"),
                text: None,
                embedding: embeddings[i].clone(),
                point_score: utility[i].min(config.compression_cap) + noise_draws[i],
                label: labels[i],
            })
            .collect();
        items.shuffle(&mut rng);
        lists.push(CandidateList {
            group_id: format!("g{g}"),
            query: None,
            dim: d,
            items,
        });
    }
    Ok(lists)
}

/// NDCG of the point scores next to the NDCG of the labels themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub pointwise: EvalReport,
    pub oracle: EvalReport,
}

impl OracleReport {
    pub fn pointwise_ndcg(&self, k: usize) -> f64 {
        self.pointwise.mean(&format!("ndcg@{k}")).unwrap_or(f64::NAN)
    }

    pub fn oracle_ndcg(&self, k: usize) -> f64 {
        self.oracle.mean(&format!("ndcg@{k}")).unwrap_or(f64::NAN)
    }
}

pub fn oracle_ndcg(dataset: &[CandidateList], cutoffs: &[usize]) -> Result<OracleReport> {
    let opts = EvalOptions {
        cutoffs: cutoffs.to_vec(),
        ndcg_only: true,
        ..EvalOptions::default()
    };
    Ok(OracleReport {
        pointwise: evaluate_scorer(dataset, &opts, &Pointwise)?,
        oracle: evaluate_scorer(dataset, &opts, &LabelOracle)?,
    })
}
