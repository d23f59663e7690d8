//! Forward-pass structure and score-level gradients.

mod oracle;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resrank_core::encoder::forward;
use resrank_core::training::{lambda_weights, loss_grad_scores, loss_with_weights};
use resrank_core::{CandidateList, ModelParams, ReviewItem};

fn random_list(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> CandidateList {
    CandidateList {
        group_id: "g".into(),
        query: None,
        dim,
        items: (0..n)
            .map(|i| ReviewItem {
                id: format!("r{i}"),
                text: None,
                embedding: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
                point_score: rng.random_range(0.0..10.0),
                label: rng.random_range(0.0..5.0),
            })
            .collect(),
    }
}

#[test]
fn deltas_are_permutation_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..100 {
        let n = rng.random_range(1..=20);
        let blocks = 1 + trial % 2;
        let mut params = ModelParams::init(8, 2, blocks, trial as u64).unwrap();
        params.alpha = 0.8;
        params.mlp_b1.iter_mut().for_each(|b| *b = rng.random_range(-0.2..0.2));
        let list = random_list(&mut rng, n, 8);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let (_, base) = forward(&list, &params).unwrap();
        let (_, moved) = forward(&list.select(&perm), &params).unwrap();
        for (p, &src) in perm.iter().enumerate() {
            assert!((moved.deltas()[p] - base.deltas()[src]).abs() <= 1e-9);
        }
    }
}

#[test]
fn fresh_model_reproduces_point_scores() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for seed in 0..50 {
        let params = ModelParams::init(16, 4, 1, seed).unwrap();
        let list = random_list(&mut rng, 1 + seed as usize % 30, 16);
        let (s, _) = forward(&list, &params).unwrap();
        assert_eq!(s, list.point_scores());
    }
}

#[test]
fn score_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let h = 1e-6;
    for _ in 0..200 {
        let (s, y) = oracle::random_instance(&mut rng, 10);
        let w = lambda_weights(&y, &s).unwrap();
        let g = loss_grad_scores(&s, &y).unwrap();
        for i in 0..s.len() {
            let mut up = s.clone();
            let mut down = s.clone();
            up[i] += h;
            down[i] -= h;
            let fd = (loss_with_weights(&up, &y, &w).unwrap() - loss_with_weights(&down, &y, &w).unwrap()) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-7 * (1.0 + g[i].abs()), "{fd} vs {}", g[i]);
        }
        assert!(g.iter().sum::<f64>().abs() <= 1e-12);
    }
}
