//! Real-vs-synthetic comparison: the unbiased MMD statistic and a classifier
//! two-sample test with a random forest distinguisher.

mod forest;
mod mmd;

pub use forest::{fit_forest, tree_stream, DecisionTree, FeaturesPerSplit, Forest, ForestSettings};
pub use mmd::{median_bandwidth, mmd_checked, mmd_unbiased, Bandwidth, MEDIAN_SUBSAMPLE};

use rand::seq::SliceRandom;

use crate::dataset::{ensure_same_features, BinaryDataset};
use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_TEST_FRACTION: f64 = 0.3;
pub const MIN_ROWS: usize = 10;

/// Counts on the test split. Positive means synthetic.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl Confusion {
    pub fn from_predictions(truth: &[bool], predicted: &[bool]) -> Self {
        let mut c = Confusion::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            match (t, p) {
                (true, true) => c.tp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fp += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn specificity(&self) -> f64 {
        ratio(self.tn, self.tn + self.fp)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub recall: f64,
    pub precision: f64,
    pub specificity: f64,
    pub mmd: f64,
    pub distinguisher: String,
    pub seed: u64,
}

impl EvalReport {
    pub const CSV_HEADER: &'static str = "accuracy,recall,precision,specificity,mmd,seed,distinguisher";

    pub fn from_confusion(c: &Confusion, mmd: f64, distinguisher: String, seed: u64) -> Self {
        EvalReport {
            accuracy: c.accuracy(),
            recall: c.recall(),
            precision: c.precision(),
            specificity: c.specificity(),
            mmd,
            distinguisher,
            seed,
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.accuracy, self.recall, self.precision, self.specificity, self.mmd, self.seed, self.distinguisher
        )
    }

    pub fn to_csv(&self) -> String {
        format!("{}\n{}\n", Self::CSV_HEADER, self.csv_row())
    }
}

/// `n` sorted row indices out of `0..total`, chosen uniformly.
fn subsample_indices(total: usize, n: usize, seed: u64, stream: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..total).collect();
    if n < total {
        let mut g = rng::stream(rng::derive_seed(seed, rng::tags::SUBSAMPLE), stream);
        idx.shuffle(&mut g);
        idx.truncate(n);
        idx.sort_unstable();
    }
    idx
}

/// Per-class split of `0..n` into (train, test); `round(test_fraction · n)`
/// rows go to test.
fn stratum(n: usize, test_fraction: f64, seed: u64, class: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let n_test = (test_fraction * n as f64).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::invalid(format!(
            "test fraction {test_fraction} leaves an empty train or test part for a class of {n} rows"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(rng::derive_seed(seed, rng::tags::STRATIFY), class));
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

/// Classifier two-sample test with the MMD bandwidth chosen by the median
/// heuristic.
pub fn classifier_two_sample_test(
    real: &BinaryDataset,
    synth: &BinaryDataset,
    settings: &ForestSettings,
    test_fraction: f64,
    seed: u64,
) -> Result<EvalReport> {
    classifier_two_sample_test_with(real, synth, settings, test_fraction, seed, Bandwidth::Median)
}

pub fn classifier_two_sample_test_with(
    real: &BinaryDataset,
    synth: &BinaryDataset,
    settings: &ForestSettings,
    test_fraction: f64,
    seed: u64,
    bandwidth: Bandwidth,
) -> Result<EvalReport> {
    ensure_same_features(real, synth)?;
    if real.n_rows() < MIN_ROWS || synth.n_rows() < MIN_ROWS {
        return Err(Error::invalid(format!(
            "two-sample test needs at least {MIN_ROWS} rows per side, got {} real and {} synthetic",
            real.n_rows(),
            synth.n_rows()
        )));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!("test fraction {test_fraction} outside (0, 1)")));
    }
    let n = real.n_rows().min(synth.n_rows());
    let real_sub = real.select_rows(&subsample_indices(real.n_rows(), n, seed, 0))?;
    let synth_sub = synth.select_rows(&subsample_indices(synth.n_rows(), n, seed, 1))?;

    // stratified: the same split sizes for both classes
    let (real_train, real_test) = stratum(n, test_fraction, seed, 0)?;
    let (synth_train, synth_test) = stratum(n, test_fraction, seed, 1)?;
    let part = |r: &[usize], s: &[usize]| -> Result<(BinaryDataset, Vec<bool>)> {
        let data = real_sub.select_rows(r)?.concat(&synth_sub.select_rows(s)?)?;
        let mut labels = vec![false; r.len()];
        labels.resize(r.len() + s.len(), true);
        Ok((data, labels))
    };
    let (train, train_labels) = part(&real_train, &synth_train)?;
    let (test, test_labels) = part(&real_test, &synth_test)?;

    let forest_settings = ForestSettings {
        seed: rng::derive_seed(settings.seed, seed),
        ..*settings
    };
    let forest = fit_forest(&train, &train_labels, &forest_settings)?;
    let confusion = Confusion::from_predictions(&test_labels, &forest.predict(&test));
    let mmd = mmd_unbiased(real, synth, bandwidth)?;
    Ok(EvalReport::from_confusion(&confusion, mmd, settings.describe(), seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_built_confusion() {
        let c = Confusion {
            tp: 30,
            tn: 40,
            fp: 10,
            fn_: 20,
        };
        assert!((c.accuracy() - 0.7).abs() < 1e-15);
        assert!((c.recall() - 0.6).abs() < 1e-15);
        assert!((c.precision() - 0.75).abs() < 1e-15);
        assert!((c.specificity() - 0.8).abs() < 1e-15);
        let truth = [true, true, false, false, true];
        let pred = [true, false, false, true, true];
        let c = Confusion::from_predictions(&truth, &pred);
        assert_eq!((c.tp, c.tn, c.fp, c.fn_), (2, 1, 1, 1));
    }

    #[test]
    fn zero_denominators_report_zero() {
        let c = Confusion {
            tp: 0,
            tn: 5,
            fp: 0,
            fn_: 0,
        };
        assert_eq!(c.recall(), 0.0);
        assert_eq!(c.precision(), 0.0);
        assert_eq!(c.specificity(), 1.0);
    }

    #[test]
    fn separable_sides() {
        let names = BinaryDataset::default_names(4);
        let real = BinaryDataset::from_fn(names.clone(), 60, |_, _| false).unwrap();
        let synth = BinaryDataset::from_fn(names, 60, |_, _| true).unwrap();
        let settings = ForestSettings {
            n_trees: 20,
            ..ForestSettings::default()
        };
        let r = classifier_two_sample_test(&real, &synth, &settings, 0.3, 3).unwrap();
        assert_eq!((r.accuracy, r.recall, r.specificity, r.precision), (1.0, 1.0, 1.0, 1.0));
        assert!(r.mmd > 0.0);
    }

    #[test]
    fn small_inputs_rejected() {
        let names = BinaryDataset::default_names(2);
        let a = BinaryDataset::from_fn(names.clone(), 5, |i, _| i % 2 == 0).unwrap();
        let b = BinaryDataset::from_fn(names, 50, |i, _| i % 2 == 0).unwrap();
        assert!(classifier_two_sample_test(&a, &b, &ForestSettings::default(), 0.3, 0).is_err());
    }

    #[test]
    fn csv_row_column_order() {
        let r = EvalReport {
            accuracy: 0.5,
            recall: 0.25,
            precision: 0.75,
            specificity: 1.0,
            mmd: -0.01,
            distinguisher: "x".into(),
            seed: 7,
        };
        assert_eq!(r.csv_row(), "0.5,0.25,0.75,1,-0.01,7,x");
    }
}
