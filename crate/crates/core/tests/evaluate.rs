mod common;

use common::*;
use rand::seq::SliceRandom;
use rand::Rng;
use tensorgen::dataset::split_holdout;
use tensorgen::evaluate::{
    classifier_two_sample_test, fit_forest, median_bandwidth, mmd_unbiased, Bandwidth, ForestSettings,
};
use tensorgen::model::fit_baseline;
use tensorgen::{fit_model, BinaryDataset, FitOptions};

/// Direct U-statistic over explicit 0/1 vectors.
fn naive_mmd(a: &[Vec<u8>], b: &[Vec<u8>], sigma: f64) -> f64 {
    let k = |x: &[u8], y: &[u8]| {
        let sq: f64 = x.iter().zip(y).map(|(&p, &q)| (p as f64 - q as f64).powi(2)).sum();
        (-sq / (2.0 * sigma * sigma)).exp()
    };
    let (m, n) = (a.len() as f64, b.len() as f64);
    let mut xx = 0.0;
    for i in 0..a.len() {
        for j in 0..a.len() {
            if i != j {
                xx += k(&a[i], &a[j]);
            }
        }
    }
    let mut yy = 0.0;
    for i in 0..b.len() {
        for j in 0..b.len() {
            if i != j {
                yy += k(&b[i], &b[j]);
            }
        }
    }
    let xy: f64 = a.iter().flat_map(|x| b.iter().map(move |y| k(x, y))).sum();
    xx / (m * (m - 1.0)) + yy / (n * (n - 1.0)) - 2.0 * xy / (m * n)
}

fn naive_median(a: &[Vec<u8>], b: &[Vec<u8>]) -> f64 {
    let pooled: Vec<&Vec<u8>> = a.iter().chain(b).collect();
    let mut dist = Vec::new();
    for i in 0..pooled.len() {
        for j in i + 1..pooled.len() {
            let sq: f64 = pooled[i].iter().zip(pooled[j]).map(|(&p, &q)| (p as f64 - q as f64).powi(2)).sum();
            dist.push(sq.sqrt());
        }
    }
    dist.sort_by(f64::total_cmp);
    let n = dist.len();
    let med = if n % 2 == 1 { dist[n / 2] } else { 0.5 * (dist[n / 2 - 1] + dist[n / 2]) };
    if med > 0.0 {
        med
    } else {
        1.0
    }
}

fn random_rows(g: &mut rand_chacha::ChaCha8Rng, n: usize, d: usize, p: f64) -> Vec<Vec<u8>> {
    (0..n).map(|_| (0..d).map(|_| g.random_bool(p) as u8).collect()).collect()
}

fn dataset(rows: &[Vec<u8>]) -> BinaryDataset {
    BinaryDataset::from_rows(BinaryDataset::default_names(rows[0].len()), rows).unwrap()
}

#[test]
fn mmd_matches_naive_oracle() {
    let mut g = rng(41);
    for _ in 0..10 {
        let d = g.random_range(1..=70);
        let (m, n) = (g.random_range(2..60), g.random_range(2..60));
        let a = random_rows(&mut g, m, d, 0.3);
        let b = random_rows(&mut g, n, d, 0.45);
        let sigma = naive_median(&a, &b);
        assert!((median_bandwidth(&dataset(&a), &dataset(&b)) - sigma).abs() < 1e-12);
        let got = mmd_unbiased(&dataset(&a), &dataset(&b), Bandwidth::Median).unwrap();
        assert!((got - naive_mmd(&a, &b, sigma)).abs() < 1e-12);
        let got = mmd_unbiased(&dataset(&a), &dataset(&b), Bandwidth::Fixed(0.7)).unwrap();
        assert!((got - naive_mmd(&a, &b, 0.7)).abs() < 1e-12);
    }
}

#[test]
fn mmd_closed_form_and_errors() {
    let zeros = BinaryDataset::from_fn(BinaryDataset::default_names(4), 6, |_, _| false).unwrap();
    let ones = BinaryDataset::from_fn(BinaryDataset::default_names(4), 9, |_, _| true).unwrap();
    let v = mmd_unbiased(&zeros, &ones, Bandwidth::Fixed(1.0)).unwrap();
    assert!((v - (2.0 - 2.0 * (-2.0f64).exp())).abs() < 1e-12);
    assert!(mmd_unbiased(&zeros, &ones, Bandwidth::Fixed(0.0)).is_err());
    assert!(mmd_unbiased(&zeros, &ones, Bandwidth::Fixed(-1.0)).is_err());
    let one_row = zeros.select_rows(&[0]).unwrap();
    assert!(mmd_unbiased(&one_row, &ones, Bandwidth::Median).is_err());
    let narrow = BinaryDataset::from_fn(BinaryDataset::default_names(3), 6, |_, _| false).unwrap();
    assert!(mmd_unbiased(&narrow, &ones, Bandwidth::Median).is_err());
}

#[test]
fn mmd_is_symmetric_and_order_invariant() {
    let mut g = rng(42);
    // big enough that the median heuristic subsamples
    let a = random_rows(&mut g, 1_700, 30, 0.2);
    let b = random_rows(&mut g, 900, 30, 0.25);
    let (da, db) = (dataset(&a), dataset(&b));
    let ab = mmd_unbiased(&da, &db, Bandwidth::Median).unwrap();
    assert_eq!(ab, mmd_unbiased(&db, &da, Bandwidth::Median).unwrap());
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.shuffle(&mut g);
    let shuffled = da.select_rows(&order).unwrap();
    assert_eq!(ab, mmd_unbiased(&shuffled, &db, Bandwidth::Median).unwrap());
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| mmd_unbiased(&da, &db, Bandwidth::Median).unwrap());
    assert_eq!(ab, single);
}

#[test]
fn mmd_of_same_distribution_halves_is_small() {
    let mut g = rng(43);
    let truth = random_model(&mut g, 3, 20, 0.1, 0.1, 0.9);
    let data = truth.sample(10_000, 7).unwrap();
    let first: Vec<usize> = (0..5_000).collect();
    let second: Vec<usize> = (5_000..10_000).collect();
    let (a, b) = (data.select_rows(&first).unwrap(), data.select_rows(&second).unwrap());
    let sigma = median_bandwidth(&a, &b);
    let observed = mmd_unbiased(&a, &b, Bandwidth::Fixed(sigma)).unwrap();
    assert!(observed.abs() < 0.01);

    // spread of the statistic under random relabelling of the pooled rows
    let mut null = Vec::new();
    for _ in 0..10 {
        let mut idx: Vec<usize> = (0..10_000).collect();
        idx.shuffle(&mut g);
        let x = data.select_rows(&idx[..5_000]).unwrap();
        let y = data.select_rows(&idx[5_000..]).unwrap();
        null.push(mmd_unbiased(&x, &y, Bandwidth::Fixed(sigma)).unwrap());
    }
    let mean = null.iter().sum::<f64>() / null.len() as f64;
    let sd = (null.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (null.len() - 1) as f64).sqrt();
    assert!(observed.abs() <= 5.0 * sd, "{observed} vs null sd {sd}");
}

#[test]
fn forest_fits_separable_labels() {
    let mut g = rng(44);
    let rows = random_rows(&mut g, 300, 10, 0.5);
    let data = dataset(&rows);
    let labels: Vec<bool> = rows.iter().map(|r| r[0] == 1).collect();
    let f = fit_forest(&data, &labels, &ForestSettings::default()).unwrap();
    assert_eq!(f.predict(&data), labels);
}

#[test]
fn forest_on_independent_labels_is_at_chance() {
    let mut g = rng(45);
    let mut total = 0.0;
    for seed in 0..10 {
        let rows = random_rows(&mut g, 1_000, 10, 0.4);
        let labels: Vec<bool> = (0..1_000).map(|_| g.random_bool(0.5)).collect();
        let data = dataset(&rows);
        let train: Vec<usize> = (0..700).collect();
        let test: Vec<usize> = (700..1_000).collect();
        let settings = ForestSettings {
            n_trees: 50,
            seed,
            ..ForestSettings::default()
        };
        let f = fit_forest(
            &data.select_rows(&train).unwrap(),
            &labels[..700],
            &settings,
        )
        .unwrap();
        let pred = f.predict(&data.select_rows(&test).unwrap());
        let acc = pred.iter().zip(&labels[700..]).filter(|(p, l)| p == l).count() as f64 / 300.0;
        assert!((0.4..=0.6).contains(&acc), "seed {seed}: {acc}");
        total += acc;
    }
    assert!((total / 10.0 - 0.5).abs() < 0.05);
}

#[test]
fn forest_is_thread_count_independent() {
    let mut g = rng(46);
    let rows = random_rows(&mut g, 400, 12, 0.3);
    let labels: Vec<bool> = rows.iter().map(|r| r[0] + r[3] + r[5] >= 2 || g.random_bool(0.1)).collect();
    let data = dataset(&rows);
    let settings = ForestSettings {
        n_trees: 30,
        seed: 9,
        ..ForestSettings::default()
    };
    let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    let a = pool(1).install(|| fit_forest(&data, &labels, &settings).unwrap());
    let b = pool(4).install(|| fit_forest(&data, &labels, &settings).unwrap());
    assert_eq!(a, b);
    assert_eq!(a.predict(&data), b.predict(&data));
}

fn shuffled_copy_accuracy(real: &BinaryDataset, settings: &ForestSettings) -> f64 {
    let n = real.n_rows();
    let mut total = 0.0;
    for seed in 0..10u64 {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng(seed));
        let synth = real.select_rows(&order).unwrap();
        total += classifier_two_sample_test(real, &synth, settings, 0.3, seed).unwrap().accuracy;
    }
    total / 10.0
}

#[test]
fn shuffled_copy_is_indistinguishable() {
    // few features, so every pattern occurs many times on both sides
    let mut g = rng(47);
    let truth = random_model(&mut g, 2, 4, 0.2, 0.1, 0.9);
    let real = truth.sample(3_000, 1).unwrap();
    let settings = ForestSettings {
        n_trees: 50,
        ..ForestSettings::default()
    };
    let mean = shuffled_copy_accuracy(&real, &settings);
    assert!((mean - 0.5).abs() <= 0.05, "{mean}");
}

#[test]
fn shuffled_copy_of_unique_rows_is_anti_predicted() {
    // Each real test row's twin sits in the synthetic training rows with
    // probability 1 - test_fraction, so a memorising forest predicts the
    // wrong class.
    let mut g = rng(48);
    let truth = random_model(&mut g, 3, 40, 0.1, 0.2, 0.8);
    let real = truth.sample(1_000, 1).unwrap();
    let settings = ForestSettings {
        n_trees: 50,
        ..ForestSettings::default()
    };
    assert!(shuffled_copy_accuracy(&real, &settings) < 0.4);
}

#[test]
fn zeros_versus_ones_is_separable() {
    let real = BinaryDataset::from_fn(BinaryDataset::default_names(5), 100, |_, _| false).unwrap();
    let synth = BinaryDataset::from_fn(BinaryDataset::default_names(5), 150, |_, _| true).unwrap();
    let r = classifier_two_sample_test(&real, &synth, &ForestSettings::default(), 0.3, 1).unwrap();
    assert_eq!((r.accuracy, r.recall, r.specificity), (1.0, 1.0, 1.0));
}

#[test]
fn mismatched_features_are_named() {
    let a = BinaryDataset::from_fn(vec!["x".into(), "y".into()], 20, |i, _| i % 2 == 0).unwrap();
    let b = BinaryDataset::from_fn(vec!["x".into(), "z".into()], 20, |i, _| i % 3 == 0).unwrap();
    let err = classifier_two_sample_test(&a, &b, &ForestSettings::default(), 0.3, 0).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains('y') && msg.contains('z'), "{msg}");
}

#[test]
fn mixture_beats_baseline_on_correlated_two_component_data() {
    let p = nalgebra::DMatrix::from_fn(20, 2, |i, j| if (i < 10) == (j == 0) { 0.8 } else { 0.1 });
    let truth = tensorgen::NaiveBayesModel::new(BinaryDataset::default_names(20), vec![0.5, 0.5], p).unwrap();
    let settings = ForestSettings {
        n_trees: 100,
        ..ForestSettings::default()
    };
    let (mut base_acc, mut mix_acc) = (0.0, 0.0);
    for seed in 0..10u64 {
        let data = truth.sample(5_000, seed).unwrap();
        let (train, holdout) = split_holdout(&data, 0.2, seed).unwrap();
        let m = holdout.n_rows();
        let base = fit_baseline(&train).sample(m, seed).unwrap();
        let (model, _) = fit_model(&train, 10, &FitOptions::seeded(seed)).unwrap();
        let synth = model.sample(m, seed).unwrap();
        base_acc += classifier_two_sample_test(&holdout, &base, &settings, 0.3, seed).unwrap().accuracy;
        mix_acc += classifier_two_sample_test(&holdout, &synth, &settings, 0.3, seed).unwrap().accuracy;
    }
    assert!(mix_acc < base_acc, "mixture {} vs baseline {}", mix_acc / 10.0, base_acc / 10.0);
}
