//! Cross-validated training runs and fixed-K evaluation, shared by the CLI
//! and the test harness.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use resrank_core::eval::{list_metrics, EvalOptions, ListScorer, Pointwise};
use resrank_core::training::{fit_with_state, holdout_split, kfold_split, subsample_indices, Fold, OptimizerState, TrainLog};
use resrank_core::types::ListReport;
use resrank_core::{CandidateList, EvalReport, ModelParams, TrainConfig};
use serde::Serialize;

use crate::checkpoint::{save_checkpoint, Checkpoint};
use crate::trainlog::save_train_log;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitPlan {
    /// Rotate through `config.folds` group folds.
    KFold,
    /// One seeded split holding out this fraction of groups.
    Holdout(f64),
    /// Train on everything; nothing held out.
    Full,
}

#[derive(Debug, Clone)]
pub struct FoldRun {
    pub fold: usize,
    pub split: Fold,
    pub params: ModelParams,
    pub state: OptimizerState,
    pub log: TrainLog,
    /// Held-out metrics of the trained model and of the point scores.
    pub model: EvalReport,
    pub pointwise: EvalReport,
}

pub fn group_ids(lists: &[CandidateList]) -> Vec<String> {
    lists.iter().map(|l| l.group_id.clone()).collect()
}

pub fn splits(lists: &[CandidateList], plan: SplitPlan, config: &TrainConfig) -> Result<Vec<Fold>> {
    let ids = group_ids(lists);
    Ok(match plan {
        SplitPlan::KFold => kfold_split(&ids, config.folds, config.seed)?,
        SplitPlan::Holdout(f) => vec![holdout_split(&ids, f, config.seed)?],
        SplitPlan::Full => vec![Fold {
            train: ids.into_iter().collect::<BTreeSet<_>>().into_iter().collect(),
            test: Vec::new(),
        }],
    })
}

/// Lists whose group is in `ids`, in dataset order.
pub fn select_groups(lists: &[CandidateList], ids: &[String]) -> Vec<CandidateList> {
    let wanted: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
    lists.iter().filter(|l| wanted.contains(l.group_id.as_str())).cloned().collect()
}

pub fn train_fold(lists: &[CandidateList], fold: usize, split: Fold, config: &TrainConfig) -> Result<FoldRun> {
    let train = select_groups(lists, &split.train);
    let test = select_groups(lists, &split.test);
    let (params, state, log) = fit_with_state(&train, &test, config)?;
    let opts = EvalOptions {
        cutoffs: config.eval_cutoffs.clone(),
        gain: config.eval_gain,
        ndcg_only: false,
    };
    Ok(FoldRun {
        fold,
        model: evaluate_lists(&test, &opts, &params, false)?,
        pointwise: evaluate_lists(&test, &opts, &Pointwise, false)?,
        split,
        params,
        state,
        log,
    })
}

/// Trains one model per split. Folds run one after another so the whole run
/// is reproducible from `config.seed`.
pub fn run_train(lists: &[CandidateList], config: &TrainConfig, plan: SplitPlan) -> Result<Vec<FoldRun>> {
    splits(lists, plan, config)?
        .into_iter()
        .enumerate()
        .map(|(i, split)| train_fold(lists, i, split, config))
        .collect()
}

pub fn fold_stem(run: &FoldRun, plan: SplitPlan) -> String {
    match plan {
        SplitPlan::KFold => format!("fold-{:02}", run.fold),
        _ => "model".to_string(),
    }
}

/// Writes `<stem>.ckpt`, `<stem>.log.jsonl` and `<stem>.split.json` for every
/// run and returns the checkpoint paths.
pub fn write_runs(dir: &Path, runs: &[FoldRun], plan: SplitPlan) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
    let mut out = Vec::new();
    for run in runs {
        let stem = fold_stem(run, plan);
        let ckpt = dir.join(format!("{stem}.ckpt"));
        save_checkpoint(
            &Checkpoint {
                params: run.params.clone(),
                optimizer: Some(run.state.clone()),
                seed: run.log.seed,
                config: Some(run.log.config.clone()),
            },
            &ckpt,
        )?;
        save_train_log(dir.join(format!("{stem}.log.jsonl")), &run.log)?;
        let split_path = dir.join(format!("{stem}.split.json"));
        let json = serde_json::to_vec_pretty(&run.split).expect("split serializes");
        std::fs::write(&split_path, json).map_err(|source| Error::Io { path: split_path, source })?;
        out.push(ckpt);
    }
    Ok(out)
}

pub fn load_split(path: &Path) -> Result<Fold> {
    let bytes = std::fs::read(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Caps every list at `k` items, keeping a seeded random subset in shuffled
/// order. Labels play no part in which items survive.
pub fn truncate_lists(lists: &[CandidateList], k: usize, seed: u64) -> Vec<CandidateList> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    lists
        .iter()
        .map(|l| l.select(&subsample_indices(&mut rng, l.len(), k)))
        .collect()
}

/// Scores every list; with `parallel` the lists are scored concurrently but
/// results still come back in list order.
pub fn score_lists<S>(lists: &[CandidateList], scorer: &S, parallel: bool) -> Result<Vec<Vec<f64>>>
where
    S: ListScorer + Sync + ?Sized,
{
    let score = |l: &CandidateList| scorer.score_list(l).map_err(Error::from);
    if parallel {
        lists.par_iter().map(score).collect()
    } else {
        lists.iter().map(score).collect()
    }
}

pub fn evaluate_lists<S>(lists: &[CandidateList], opts: &EvalOptions, scorer: &S, parallel: bool) -> Result<EvalReport>
where
    S: ListScorer + Sync + ?Sized,
{
    let scores = score_lists(lists, scorer, parallel)?;
    let per_list = lists
        .iter()
        .zip(&scores)
        .map(|(l, s)| {
            Ok(ListReport {
                group_id: l.group_id.clone(),
                metrics: list_metrics(s, &l.labels(), opts)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_lists(per_list))
}

/// Metrics for one list-size cap.
#[derive(Debug, Clone, Serialize)]
pub struct SizedReport {
    /// `None` means the lists were used whole.
    pub max_list_size: Option<usize>,
    pub model: EvalReport,
    pub pointwise: EvalReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bm25: Option<EvalReport>,
}

pub fn evaluate_sizes<S>(
    lists: &[CandidateList],
    sizes: &[Option<usize>],
    opts: &EvalOptions,
    model: &S,
    bm25: Option<&resrank_core::bm25::Bm25>,
    seed: u64,
    parallel: bool,
) -> Result<Vec<SizedReport>>
where
    S: ListScorer + Sync + ?Sized,
{
    sizes
        .iter()
        .map(|&k| {
            let capped;
            let view = match k {
                Some(k) => {
                    capped = truncate_lists(lists, k, seed);
                    &capped[..]
                }
                None => lists,
            };
            Ok(SizedReport {
                max_list_size: k,
                model: evaluate_lists(view, opts, model, parallel)?,
                pointwise: evaluate_lists(view, opts, &Pointwise, parallel)?,
                bm25: bm25.map(|b| evaluate_lists(view, opts, b, parallel)).transpose()?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{synthetic_generate, SyntheticConfig};

    fn data() -> Vec<CandidateList> {
        synthetic_generate(&SyntheticConfig {
            groups: 12,
            items_per_group: 9,
            dim: 8,
            ..SyntheticConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn truncation_keeps_whole_items() {
        let lists = data();
        let cut = truncate_lists(&lists, 5, 3);
        for (a, b) in lists.iter().zip(&cut) {
            assert_eq!(b.len(), 5);
            assert!(b.items.iter().all(|it| a.items.contains(it)));
        }
        assert_eq!(cut, truncate_lists(&lists, 5, 3));
        assert!(truncate_lists(&lists, 50, 3).iter().all(|l| l.len() == 9));
    }

    #[test]
    fn parallel_scoring_matches_sequential() {
        let lists = data();
        let p = resrank_core::init_params(8, 2, 1).unwrap();
        let mut p = p;
        p.alpha = 0.7;
        assert_eq!(score_lists(&lists, &p, true).unwrap(), score_lists(&lists, &p, false).unwrap());
    }

    #[test]
    fn folds_cover_every_group_once() {
        let lists = data();
        let cfg = TrainConfig { folds: 4, ..TrainConfig::default() };
        let folds = splits(&lists, SplitPlan::KFold, &cfg).unwrap();
        let mut seen: Vec<String> = folds.iter().flat_map(|f| f.test.clone()).collect();
        seen.sort();
        let mut all = group_ids(&lists);
        all.sort();
        assert_eq!(seen, all);
    }
}
