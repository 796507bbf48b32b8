#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tensorgen::{BinaryDataset, NaiveBayesModel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Weights at least `w_min`, probabilities uniform in `[lo, hi]`.
pub fn random_model(g: &mut ChaCha8Rng, k: usize, d: usize, w_min: f64, lo: f64, hi: f64) -> NaiveBayesModel {
    let raw: Vec<f64> = (0..k).map(|_| -g.random::<f64>().max(1e-300).ln()).collect();
    let total: f64 = raw.iter().sum();
    let free = 1.0 - w_min * k as f64;
    let weights: Vec<f64> = raw.iter().map(|x| w_min + free * x / total).collect();
    let p = DMatrix::from_fn(d, k, |_, _| g.random_range(lo..hi));
    NaiveBayesModel::new(BinaryDataset::default_names(d), weights, p).unwrap()
}

/// `k` components with disjoint blocks of signature features on top of a
/// low background rate.
pub fn block_model(k: usize, d: usize, seed: u64) -> NaiveBayesModel {
    let mut g = rng(seed);
    let block = d / k;
    let p = DMatrix::from_fn(d, k, |i, j| {
        if i / block == j {
            g.random_range(0.6..0.8)
        } else {
            g.random_range(0.03..0.05)
        }
    });
    let raw: Vec<f64> = (0..k).map(|_| g.random_range(0.5..1.5)).collect();
    let total: f64 = raw.iter().sum();
    NaiveBayesModel::new(
        BinaryDataset::default_names(d),
        raw.iter().map(|x| x / total).collect(),
        p,
    )
    .unwrap()
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for at in 0..=p.len() {
            let mut q = p.clone();
            q.insert(at, k - 1);
            out.push(q);
        }
    }
    out
}

/// Max-abs errors `(weights, probabilities)` under the permutation of
/// `fitted`'s components that minimises the probability error.
pub fn matched_errors(truth: &NaiveBayesModel, fitted: &NaiveBayesModel) -> (f64, f64) {
    assert_eq!(truth.k(), fitted.k());
    let k = truth.k();
    let (pt, pf) = (truth.cond_probs(), fitted.cond_probs());
    let mut best = (f64::INFINITY, f64::INFINITY);
    for perm in permutations(k) {
        let mut ep: f64 = 0.0;
        let mut ew: f64 = 0.0;
        for (j, &q) in perm.iter().enumerate() {
            for i in 0..truth.d() {
                ep = ep.max((pt[(i, j)] - pf[(i, q)]).abs());
            }
            ew = ew.max((truth.weights()[j] - fitted.weights()[q]).abs());
        }
        if ep < best.1 {
            best = (ew, ep);
        }
    }
    best
}
