mod common;

use common::*;
use nalgebra::DMatrix;
use rand::Rng;
use tensorgen::em::{em_refine, EmOptions};
use tensorgen::{BinaryDataset, NaiveBayesModel};

#[test]
fn objective_trace_never_decreases() {
    let mut g = rng(31);
    for trial in 0..100 {
        let k = g.random_range(1..=5);
        let d = g.random_range(2..=15);
        let n = g.random_range(50..=500);
        let k_source = g.random_range(1..=4);
        let source = random_model(&mut g, k_source, d, 0.05, 0.02, 0.98);
        let data = source.sample(n, trial).unwrap();
        let init = random_model(&mut g, k, d, 0.01, 0.01, 0.99);
        let opts = EmOptions {
            max_iters: 50,
            rel_tol: 0.0,
            ..EmOptions::default()
        };
        let (_, report) = em_refine(&init, &data, &opts).unwrap();
        assert_eq!(report.loglik_trace.len(), report.iterations_run);
        for w in report.loglik_trace.windows(2) {
            assert!(w[1] - w[0] >= -1e-8, "trial {trial}: {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn output_is_an_approximate_fixed_point() {
    let mut g = rng(32);
    let truth = random_model(&mut g, 3, 10, 0.1, 0.1, 0.9);
    let data = truth.sample(2_000, 1).unwrap();
    let init = random_model(&mut g, 3, 10, 0.1, 0.1, 0.9);
    let opts = EmOptions::default();
    let (fitted, report) = em_refine(&init, &data, &opts).unwrap();
    assert!(report.converged);
    let last = *report.loglik_trace.last().unwrap();
    let one = EmOptions {
        max_iters: 1,
        ..opts
    };
    let (again, r2) = em_refine(&fitted, &data, &one).unwrap();
    assert!(r2.loglik_trace[0] - last < opts.rel_tol * last.abs());
    let ll = fitted.log_likelihood(&data).unwrap();
    assert!(again.log_likelihood(&data).unwrap() - ll < opts.rel_tol * ll.abs());
}

#[test]
fn permuting_initial_components_permutes_output() {
    let mut g = rng(33);
    let truth = random_model(&mut g, 3, 8, 0.1, 0.1, 0.9);
    let data = truth.sample(1_000, 2).unwrap();
    let init = random_model(&mut g, 3, 8, 0.1, 0.1, 0.9);
    let perm = [2, 0, 1];
    let opts = EmOptions {
        max_iters: 20,
        ..EmOptions::default()
    };
    let (a, ra) = em_refine(&init, &data, &opts).unwrap();
    let (b, rb) = em_refine(&init.permute_components(&perm), &data, &opts).unwrap();
    let a_perm = a.permute_components(&perm);
    assert!((a_perm.cond_probs() - b.cond_probs()).amax() < 1e-10);
    for (x, y) in a_perm.weights().iter().zip(b.weights()) {
        assert!((x - y).abs() < 1e-10);
    }
    assert_eq!(ra.iterations_run, rb.iterations_run);
}

#[test]
fn two_opposite_rows_match_grid_search_optimum() {
    let rows: Vec<[u8; 2]> = (0..20).map(|i| if i % 2 == 0 { [1, 1] } else { [0, 0] }).collect();
    let data = BinaryDataset::from_rows(BinaryDataset::default_names(2), &rows).unwrap();
    let init = NaiveBayesModel::new(
        BinaryDataset::default_names(2),
        vec![0.4, 0.6],
        DMatrix::from_row_slice(2, 2, &[0.8, 0.3, 0.7, 0.2]),
    )
    .unwrap();
    let (fitted, _) = em_refine(&init, &data, &EmOptions::default()).unwrap();

    // family: weights (w, 1-w), columns (a, a) and (b, b)
    let mut best = f64::NEG_INFINITY;
    let grid: Vec<f64> = (0..=50).map(|i| i as f64 / 50.0).collect();
    for &w in &grid[1..50] {
        for &a in &grid {
            for &b in &grid {
                let m = NaiveBayesModel::new(
                    BinaryDataset::default_names(2),
                    vec![w, 1.0 - w],
                    DMatrix::from_row_slice(2, 2, &[a, b, a, b]),
                )
                .unwrap();
                best = best.max(m.log_likelihood(&data).unwrap());
            }
        }
    }
    let ll = fitted.log_likelihood(&data).unwrap();
    assert!(ll >= best - 1e-3, "{ll} vs grid {best}");
    assert!((fitted.weights()[0] - 0.5).abs() < 1e-3);
    let p = fitted.cond_probs();
    for i in 0..2 {
        assert!(p[(i, 0)] > 0.999 && p[(i, 1)] < 0.001, "{p}");
    }
}

#[test]
fn dimension_mismatch_is_rejected() {
    let init = NaiveBayesModel::new(
        BinaryDataset::default_names(3),
        vec![1.0],
        DMatrix::from_element(3, 1, 0.5),
    )
    .unwrap();
    let data = BinaryDataset::from_fn(BinaryDataset::default_names(2), 5, |i, _| i % 2 == 0).unwrap();
    assert!(em_refine(&init, &data, &EmOptions::default()).is_err());
}

#[test]
fn thread_count_does_not_change_result() {
    let mut g = rng(34);
    let truth = random_model(&mut g, 4, 12, 0.1, 0.1, 0.9);
    let data = truth.sample(5_000, 3).unwrap();
    let init = random_model(&mut g, 4, 12, 0.1, 0.1, 0.9);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| em_refine(&init, &data, &EmOptions::default()).unwrap())
    };
    let (a, ra) = run(1);
    let (b, rb) = run(4);
    assert!((a.cond_probs() - b.cond_probs()).amax() < 1e-10);
    assert_eq!(ra.iterations_run, rb.iterations_run);
}
