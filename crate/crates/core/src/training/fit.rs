//! The training loop.
//!
//! Each epoch visits the training lists in a seeded shuffled order. For every
//! list a size `K` is drawn, the first `K` items of a seeded shuffle are kept,
//! and the pair weights are recomputed from the current final scores before the
//! gradient is taken. Gradients are averaged over `lists_per_batch` lists and
//! applied with one AdamW step. With a fixed seed the whole run is
//! bit-for-bit reproducible.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::backward::backward;
use super::loss::{grad_with_weights, lambda_weights, loss_with_weights, valid_pair_count};
use super::optim::{adamw_step, AdamW, OptimizerState};
use super::sampling::{sample_list_size, subsample_indices};
use crate::encoder::forward;
use crate::eval::{evaluate, EvalOptions};
use crate::{CandidateList, Error, ModelParams, Result, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub mean_loss: f64,
    /// Mean NDCG@k on the validation lists, keyed by `k`; empty without
    /// validation data.
    pub validation_ndcg: BTreeMap<usize, f64>,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub seed: u64,
    pub config: TrainConfig,
    pub epochs: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn alpha_trajectory(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.alpha).collect()
    }
}

/// Parameters, optimiser state and the sampling RNG of one training run.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub params: ModelParams,
    pub state: OptimizerState,
    optimizer: AdamW,
    config: TrainConfig,
    rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(dim: usize, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let params = ModelParams::init(dim, config.head_count, config.block_count, config.seed)?;
        Ok(Self::from_params(params, config))
    }

    pub fn from_params(params: ModelParams, config: &TrainConfig) -> Self {
        Self {
            state: OptimizerState::new(&params),
            params,
            optimizer: AdamW::new(config.learning_rate, config.weight_decay),
            config: config.clone(),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
        }
    }

    /// Loss and parameter gradient for one (already sub-sampled) list, with the
    /// pair weights frozen at the current scores.
    fn list_step(&self, list: &CandidateList) -> Result<(f64, ModelParams)> {
        let labels = list.labels();
        let (scores, cache) = forward(list, &self.params)?;
        let weights = lambda_weights(&labels, &scores)?;
        let mut loss = loss_with_weights(&scores, &labels, &weights)?;
        let mut grad = grad_with_weights(&scores, &labels, &weights)?;
        if self.config.normalize_by_pairs {
            let pairs = valid_pair_count(&labels);
            if pairs > 0 {
                let inv = 1.0 / pairs as f64;
                loss *= inv;
                grad.iter_mut().for_each(|g| *g *= inv);
            }
        }
        Ok((loss, backward(&cache, &grad, &self.params)?))
    }

    /// One pass over `train`; returns the mean per-list loss.
    pub fn run_epoch(&mut self, train: &[CandidateList], epoch: usize) -> Result<f64> {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut self.rng);
        let mut total = 0.0;
        for batch in order.chunks(self.config.lists_per_batch) {
            let mut acc = self.params.zeros_like();
            let scale = 1.0 / batch.len() as f64;
            for &li in batch {
                let list = &train[li];
                let k = sample_list_size(&mut self.rng, self.config.k_min, self.config.k_max, list.len());
                let idx = subsample_indices(&mut self.rng, list.len(), k);
                let sub = list.select(&idx);
                let diverged = || Error::NonFiniteLoss {
                    epoch,
                    group: list.group_id.clone(),
                };
                // Inputs were validated up front, so non-finite values here
                // come from the parameters.
                let (loss, grad) = match self.list_step(&sub) {
                    Err(Error::NonFinite(_)) => return Err(diverged()),
                    other => other?,
                };
                if !loss.is_finite() {
                    return Err(diverged());
                }
                total += loss;
                acc.add_scaled(&grad, scale);
            }
            adamw_step(&mut self.params, &acc, &mut self.state, &self.optimizer)?;
        }
        Ok(if train.is_empty() { 0.0 } else { total / train.len() as f64 })
    }

    fn validation_ndcg(&self, validation: &[CandidateList]) -> Result<BTreeMap<usize, f64>> {
        if validation.is_empty() {
            return Ok(BTreeMap::new());
        }
        let opts = EvalOptions {
            cutoffs: self.config.eval_cutoffs.clone(),
            gain: self.config.eval_gain,
            ndcg_only: true,
        };
        let report = evaluate(validation, &opts, |l| forward(l, &self.params).map(|(s, _)| s))?;
        Ok(self
            .config
            .eval_cutoffs
            .iter()
            .filter_map(|&k| report.mean(&format!("ndcg@{k}")).map(|v| (k, v)))
            .collect())
    }

    pub fn train(&mut self, train: &[CandidateList], validation: &[CandidateList]) -> Result<TrainLog> {
        let mut epochs = Vec::with_capacity(self.config.epochs);
        for epoch in 1..=self.config.epochs {
            let mean_loss = self.run_epoch(train, epoch)?;
            epochs.push(EpochRecord {
                epoch,
                mean_loss,
                validation_ndcg: self.validation_ndcg(validation)?,
                alpha: self.params.alpha,
            });
        }
        Ok(TrainLog {
            seed: self.config.seed,
            config: self.config.clone(),
            epochs,
        })
    }
}

fn common_dim(lists: &[CandidateList]) -> Result<usize> {
    let first = lists
        .first()
        .ok_or_else(|| Error::InvalidConfig("training set is empty".into()))?;
    for l in lists {
        l.validate()?;
        if l.dim != first.dim {
            return Err(Error::ShapeMismatch(format!(
                "list {:?} has dimension {}, expected {}",
                l.group_id, l.dim, first.dim
            )));
        }
    }
    Ok(first.dim)
}

/// Train a fresh head on `train`, logging validation NDCG on `validation`
/// after every epoch.
pub fn fit(train: &[CandidateList], validation: &[CandidateList], config: &TrainConfig) -> Result<(ModelParams, TrainLog)> {
    let (params, _, log) = fit_with_state(train, validation, config)?;
    Ok((params, log))
}

/// [`fit`], also returning the optimiser state.
pub fn fit_with_state(
    train: &[CandidateList],
    validation: &[CandidateList],
    config: &TrainConfig,
) -> Result<(ModelParams, OptimizerState, TrainLog)> {
    let dim = common_dim(train)?;
    for l in validation {
        l.validate()?;
        if l.dim != dim {
            return Err(Error::ShapeMismatch(format!(
                "validation list {:?} has dimension {}, expected {dim}",
                l.group_id, l.dim
            )));
        }
    }
    let mut trainer = Trainer::new(dim, config)?;
    let log = trainer.train(train, validation)?;
    Ok((trainer.params, trainer.state, log))
}
