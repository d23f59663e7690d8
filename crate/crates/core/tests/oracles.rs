//! Library metrics, pair weights and optimiser steps against brute force.

mod oracle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resrank_core::metrics::{compute_ranks, idcg, kendall_tau, ndcg_at_k, pairwise_accuracy, spearman_rho};
use resrank_core::training::{lambda_weights, AdamW};

const TOL: f64 = 1e-12;

fn agree(lib: resrank_core::Result<f64>, reference: Option<f64>, what: &str) {
    match (lib, reference) {
        (Ok(a), Some(b)) => assert!((a - b).abs() <= TOL, "{what}: {a} vs {b}"),
        (Err(_), None) => {}
        (a, b) => panic!("{what}: library {a:?}, oracle {b:?}"),
    }
}

#[test]
fn metrics_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let (s, y) = oracle::random_instance(&mut rng, 8);
        let n = s.len();
        let ks: Vec<usize> = vec![1, 3, 5, n, n + 2];
        let ideals = oracle::idcg_enumerated(&y, &ks);
        for (&k, &ideal) in ks.iter().zip(&ideals) {
            assert!((idcg(&y, k).unwrap() - ideal).abs() <= TOL);
            agree(ndcg_at_k(&s, &y, k), Some(oracle::ndcg_with_ideal(&s, &y, k, ideal)), "ndcg");
        }
        agree(spearman_rho(&s, &y), oracle::spearman(&s, &y), "spearman");
        agree(kendall_tau(&s, &y), oracle::kendall_b(&s, &y), "kendall");
        agree(pairwise_accuracy(&s, &y), oracle::pairwise_accuracy(&s, &y), "pairwise");
        assert_eq!(compute_ranks(&s).unwrap().ranks, oracle::ranks_by_count(&s));
    }
}

#[test]
fn lambda_weights_equal_swap_deltas() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..300 {
        let (s, y) = oracle::random_instance(&mut rng, 12);
        let w = lambda_weights(&y, &s).unwrap();
        for i in 0..s.len() {
            for j in 0..s.len() {
                let expected = if y[i] > y[j] { oracle::swap_delta(&s, &y, i, j) } else { 0.0 };
                assert!((w.get(i, j) - expected).abs() <= TOL, "({i},{j}): {} vs {expected}", w.get(i, j));
            }
        }
    }
}

#[test]
fn sorted_ideal_agrees_with_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..200 {
        let (_, y) = oracle::random_instance(&mut rng, 7);
        let e = oracle::idcg_enumerated(&y, &[y.len()])[0];
        assert!((oracle::idcg_sorted(&y) - e).abs() <= TOL);
    }
}

#[test]
fn adamw_follows_reference_on_quadratic() {
    for (lr, wd) in [(0.1, 0.0), (0.05, 0.01), (1e-3, 0.1)] {
        let opt = AdamW::new(lr, wd);
        let mut reference = oracle::ScalarAdamW::new(lr, wd);
        let (a, c) = (3.0, -1.5);
        let (mut x, mut x_ref) = ([2.0f64], 2.0f64);
        let (mut m, mut v) = ([0.0], [0.0]);
        for t in 1..=10u64 {
            let g = [a * (x[0] - c)];
            opt.update_slice(&mut x, &g, &mut m, &mut v, t, true);
            x_ref = reference.step(x_ref, a * (x_ref - c));
            assert!((x[0] - x_ref).abs() <= TOL, "step {t}: {} vs {x_ref}", x[0]);
        }
    }
}

#[test]
fn rank_ties_break_by_index() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..100 {
        let s: Vec<f64> = (0..20).map(|_| rng.random_range(0..4) as f64).collect();
        assert_eq!(compute_ranks(&s).unwrap().ranks, oracle::ranks_by_count(&s));
    }
}
