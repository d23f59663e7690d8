//! Brute-force reference implementations used by the integration tests.
//! Everything here is written from the textbook definitions, sharing no code
//! with the library.
#![allow(dead_code)]

pub fn gain(y: f64) -> f64 {
    2f64.powf(y) - 1.0
}

/// Discount for 0-based position `p`.
pub fn discount(p: usize) -> f64 {
    1.0 / ((p + 2) as f64).log2()
}

/// 1-based ranks: one plus the number of items that beat item `i`, where a
/// higher score wins and equal scores go to the lower index.
pub fn ranks_by_count(scores: &[f64]) -> Vec<usize> {
    (0..scores.len())
        .map(|i| {
            1 + (0..scores.len())
                .filter(|&j| scores[j] > scores[i] || (scores[j] == scores[i] && j < i))
                .count()
        })
        .collect()
}

/// Items in rank order.
pub fn order_by_count(scores: &[f64]) -> Vec<usize> {
    let ranks = ranks_by_count(scores);
    let mut order = vec![0; scores.len()];
    for (i, r) in ranks.into_iter().enumerate() {
        order[r - 1] = i;
    }
    order
}

pub fn dcg(order: &[usize], labels: &[f64], k: usize) -> f64 {
    order.iter().take(k).enumerate().map(|(p, &i)| gain(labels[i]) * discount(p)).sum()
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for slot in 0..=p.len() {
            let mut q = p.clone();
            q.insert(slot, n - 1);
            out.push(q);
        }
    }
    out
}

/// Largest DCG@k over every permutation, for each `k` in `ks`.
pub fn idcg_enumerated(labels: &[f64], ks: &[usize]) -> Vec<f64> {
    use std::sync::OnceLock;
    static TABLES: [OnceLock<Vec<Vec<usize>>>; 9] = [const { OnceLock::new() }; 9];
    let owned;
    let perms = match TABLES.get(labels.len()) {
        Some(cell) => cell.get_or_init(|| permutations(labels.len())),
        None => {
            owned = permutations(labels.len());
            &owned
        }
    };
    let gains: Vec<f64> = labels.iter().map(|&y| gain(y)).collect();
    let discounts: Vec<f64> = (0..labels.len()).map(discount).collect();
    let mut best = vec![0.0f64; ks.len()];
    let mut prefix = vec![0.0f64; labels.len() + 1];
    for p in perms {
        for (pos, &i) in p.iter().enumerate() {
            prefix[pos + 1] = prefix[pos] + gains[i] * discounts[pos];
        }
        for (b, &k) in best.iter_mut().zip(ks) {
            *b = b.max(prefix[k.min(labels.len())]);
        }
    }
    best
}

pub fn ndcg_with_ideal(scores: &[f64], labels: &[f64], k: usize, ideal: f64) -> f64 {
    if ideal == 0.0 {
        return 1.0;
    }
    dcg(&order_by_count(scores), labels, k) / ideal
}

/// Average ranks (ascending; ties share the mean of their positions).
pub fn fractional_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&xi| {
            let below = x.iter().filter(|&&v| v < xi).count() as f64;
            let equal = x.iter().filter(|&&v| v == xi).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    (va > 0.0 && vb > 0.0).then(|| cov / (va * vb).sqrt())
}

pub fn spearman(scores: &[f64], labels: &[f64]) -> Option<f64> {
    if scores.len() < 2 {
        return None;
    }
    pearson(&fractional_ranks(scores), &fractional_ranks(labels))
}

/// Kendall tau-b from pair counts.
pub fn kendall_b(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    let (mut conc, mut disc, mut tx, mut ty, mut total) = (0f64, 0f64, 0f64, 0f64, 0f64);
    for i in 0..n {
        for j in i + 1..n {
            total += 1.0;
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 {
                tx += 1.0;
            }
            if dy == 0.0 {
                ty += 1.0;
            }
            if dx * dy > 0.0 {
                conc += 1.0;
            } else if dx * dy < 0.0 {
                disc += 1.0;
            }
        }
    }
    let denom = ((total - tx) * (total - ty)).sqrt();
    (denom > 0.0).then(|| (conc - disc) / denom)
}

/// Share of label-distinct pairs ordered like the labels; a score tie counts half.
pub fn pairwise_accuracy(scores: &[f64], labels: &[f64]) -> Option<f64> {
    let (mut hit, mut pairs) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] > labels[j] {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    hit += 1.0;
                } else if scores[i] == scores[j] {
                    hit += 0.5;
                }
            }
        }
    }
    (pairs > 0.0).then(|| hit / pairs)
}

/// |NDCG(current order) - NDCG(order with items i and j swapped)|, full list.
pub fn swap_delta(scores: &[f64], labels: &[f64], i: usize, j: usize) -> f64 {
    let n = labels.len();
    let ideal = idcg_sorted(labels);
    if ideal == 0.0 {
        return 0.0;
    }
    let order = order_by_count(scores);
    let mut swapped = order.clone();
    let pi = order.iter().position(|&x| x == i).unwrap();
    let pj = order.iter().position(|&x| x == j).unwrap();
    swapped.swap(pi, pj);
    ((dcg(&order, labels, n) - dcg(&swapped, labels, n)) / ideal).abs()
}

/// Ideal DCG over the full list by sorting labels (used where enumeration is
/// too slow; checked against enumeration separately).
pub fn idcg_sorted(labels: &[f64]) -> f64 {
    let mut sorted = labels.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sorted.iter().enumerate().map(|(p, &y)| gain(y) * discount(p)).sum()
}

/// Plain AdamW on a scalar, decoupled decay applied to the old value.
pub struct ScalarAdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub wd: f64,
    m: f64,
    v: f64,
    t: i32,
}

impl ScalarAdamW {
    pub fn new(lr: f64, wd: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, wd, m: 0.0, v: 0.0, t: 0 }
    }

    pub fn step(&mut self, x: f64, g: f64) -> f64 {
        self.t += 1;
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * g;
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * g * g;
        let m_hat = self.m / (1.0 - self.beta1.powi(self.t));
        let v_hat = self.v / (1.0 - self.beta2.powi(self.t));
        x - self.lr * self.wd * x - self.lr * m_hat / (v_hat.sqrt() + self.eps)
    }
}

use rand::Rng;

/// Random scores and labels of length 1..=max_n. About a third of the draws
/// use coarse values so ties show up in both sequences.
pub fn random_instance<R: Rng>(rng: &mut R, max_n: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rng.random_range(1..=max_n);
    let coarse = rng.random_bool(0.35);
    let mut draw = |hi: f64| {
        let v: f64 = rng.random_range(0.0..hi);
        if coarse {
            v.round()
        } else {
            v
        }
    };
    let scores = (0..n).map(|_| draw(3.0)).collect();
    let labels = (0..n).map(|_| draw(5.0)).collect();
    (scores, labels)
}
