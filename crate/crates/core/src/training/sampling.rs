//! List-size sampling, seeded sub-sampling and group-level splits.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Uniform list size in `[k_min, min(k_max, available)]`. When fewer than
/// `k_min` items are available the whole list is used.
pub fn sample_list_size<R: Rng + ?Sized>(rng: &mut R, k_min: usize, k_max: usize, available: usize) -> usize {
    let hi = k_max.min(available);
    if hi <= k_min {
        return hi;
    }
    rng.random_range(k_min..=hi)
}

/// The first `k` indices of a seeded shuffle of `0..n`.
pub fn subsample_indices<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.truncate(k.min(n));
    idx
}

/// Group ids for training and for testing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

fn distinct_shuffled<S: AsRef<str>>(group_ids: &[S], seed: u64) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut groups: Vec<String> = group_ids
        .iter()
        .map(|g| g.as_ref())
        .filter(|g| seen.insert(*g))
        .map(ToString::to_string)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    groups.shuffle(&mut rng);
    groups
}

/// Seeded shuffle of the distinct groups, then a contiguous partition into
/// `folds` test sets whose sizes differ by at most one.
pub fn kfold_split<S: AsRef<str>>(group_ids: &[S], folds: usize, seed: u64) -> Result<Vec<Fold>> {
    if folds < 2 {
        return Err(Error::InvalidConfig(format!("folds must be >= 2, got {folds}")));
    }
    let groups = distinct_shuffled(group_ids, seed);
    if groups.len() < folds {
        return Err(Error::TooFewGroups { groups: groups.len(), folds });
    }
    let base = groups.len() / folds;
    let extra = groups.len() % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let size = base + usize::from(f < extra);
        let end = start + size;
        let test = groups[start..end].to_vec();
        let train = groups[..start].iter().chain(&groups[end..]).cloned().collect();
        out.push(Fold { train, test });
        start = end;
    }
    Ok(out)
}

/// A single seeded train/test split holding out `fraction` of the groups
/// (at least one group on each side).
pub fn holdout_split<S: AsRef<str>>(group_ids: &[S], fraction: f64, seed: u64) -> Result<Fold> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig(format!("holdout fraction must be in (0, 1), got {fraction}")));
    }
    let groups = distinct_shuffled(group_ids, seed);
    if groups.len() < 2 {
        return Err(Error::TooFewGroups { groups: groups.len(), folds: 2 });
    }
    let n_test = (libm::round(groups.len() as f64 * fraction) as usize).clamp(1, groups.len() - 1);
    Ok(Fold {
        test: groups[..n_test].to_vec(),
        train: groups[n_test..].to_vec(),
    })
}
