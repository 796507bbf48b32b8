//! Unbiased squared MMD with a Gaussian kernel on 0/1 vectors.
//!
//! For binary rows `‖x − y‖²` is the Hamming distance, so every kernel sum
//! reduces to a histogram of integer distances. Histograms are exact, which
//! makes the statistic independent of row order, argument order and thread
//! count.

use rayon::prelude::*;

use crate::dataset::{ensure_same_features, BinaryDataset};
use crate::error::{Error, Result};

/// Rows per side used by the median heuristic, pooled.
pub const MEDIAN_SUBSAMPLE: usize = 2000;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum Bandwidth {
    /// Median pairwise Euclidean distance of the pooled sample.
    #[default]
    Median,
    Fixed(f64),
}

impl std::fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Bandwidth::Median => f.write_str("median"),
            Bandwidth::Fixed(s) => write!(f, "{s}"),
        }
    }
}

impl std::str::FromStr for Bandwidth {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "median" {
            return Ok(Bandwidth::Median);
        }
        s.parse::<f64>()
            .map(Bandwidth::Fixed)
            .map_err(|_| format!("bandwidth must be `median` or a positive number, got {s:?}"))
    }
}

#[inline]
fn hamming(a: &[u64], b: &[u64]) -> usize {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones() as usize).sum()
}

fn add_hist(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

/// Histogram of Hamming distances over unordered pairs `i < j` of `rows`.
fn within_hist(rows: &[&[u64]], d: usize) -> Vec<u64> {
    (0..rows.len())
        .into_par_iter()
        .fold(
            || vec![0u64; d + 1],
            |mut h, i| {
                for j in i + 1..rows.len() {
                    h[hamming(rows[i], rows[j])] += 1;
                }
                h
            },
        )
        .reduce(|| vec![0u64; d + 1], add_hist)
}

fn cross_hist(a: &[&[u64]], b: &[&[u64]], d: usize) -> Vec<u64> {
    a.par_iter()
        .fold(
            || vec![0u64; d + 1],
            |mut h, x| {
                for y in b {
                    h[hamming(x, y)] += 1;
                }
                h
            },
        )
        .reduce(|| vec![0u64; d + 1], add_hist)
}

fn rows_of(data: &BinaryDataset) -> Vec<&[u64]> {
    (0..data.n_rows()).map(|i| data.row_words(i)).collect()
}

fn quota(own: usize, other: usize) -> usize {
    if own + other <= MEDIAN_SUBSAMPLE {
        own
    } else {
        own.min((MEDIAN_SUBSAMPLE / 2).max(MEDIAN_SUBSAMPLE.saturating_sub(other)))
    }
}

/// Evenly spaced rows of the canonically sorted sample.
fn canonical_subsample(data: &BinaryDataset, q: usize) -> Vec<&[u64]> {
    let mut rows = rows_of(data);
    rows.sort_unstable();
    let n = rows.len();
    (0..q).map(|i| rows[i * n / q]).collect()
}

/// Median heuristic bandwidth over a pooled subsample of at most
/// [`MEDIAN_SUBSAMPLE`] rows. Falls back to 1 when the median distance is 0.
pub fn median_bandwidth(a: &BinaryDataset, b: &BinaryDataset) -> f64 {
    let (na, nb) = (a.n_rows(), b.n_rows());
    let mut pooled = canonical_subsample(a, quota(na, nb));
    pooled.extend(canonical_subsample(b, quota(nb, na)));
    let hist = within_hist(&pooled, a.n_cols());
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return 1.0;
    }
    // 0-based ranks of the middle element(s)
    let lo = (total - 1) / 2;
    let hi = total / 2;
    let at = |rank: u64| {
        let mut seen = 0;
        for (h, &c) in hist.iter().enumerate() {
            seen += c;
            if seen > rank {
                return (h as f64).sqrt();
            }
        }
        unreachable!("rank below total count")
    };
    let median = 0.5 * (at(lo) + at(hi));
    if median > 0.0 {
        median
    } else {
        1.0
    }
}

fn kernel_mean(hist: &[u64], table: &[f64], pairs: f64) -> f64 {
    hist.iter()
        .zip(table)
        .map(|(&c, &k)| c as f64 * k)
        .sum::<f64>()
        / pairs
}

/// `MMD²_u` between the row distributions of `a` and `b`. May be negative.
pub fn mmd_unbiased(a: &BinaryDataset, b: &BinaryDataset, bandwidth: Bandwidth) -> Result<f64> {
    if a.n_cols() != b.n_cols() {
        return Err(Error::DimensionMismatch {
            expected: a.n_cols(),
            found: b.n_cols(),
        });
    }
    let (m, n) = (a.n_rows(), b.n_rows());
    if m < 2 || n < 2 {
        return Err(Error::invalid("MMD needs at least two rows per sample"));
    }
    let sigma = match bandwidth {
        Bandwidth::Median => median_bandwidth(a, b),
        Bandwidth::Fixed(s) if s > 0.0 && s.is_finite() => s,
        Bandwidth::Fixed(s) => return Err(Error::invalid(format!("bandwidth {s} must be > 0"))),
    };
    let d = a.n_cols();
    let table: Vec<f64> = (0..=d)
        .map(|h| (-(h as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let (ra, rb) = (rows_of(a), rows_of(b));
    let (m, n) = (m as f64, n as f64);
    let taa = kernel_mean(&within_hist(&ra, d), &table, m * (m - 1.0) / 2.0);
    let tbb = kernel_mean(&within_hist(&rb, d), &table, n * (n - 1.0) / 2.0);
    let tab = kernel_mean(&cross_hist(&ra, &rb, d), &table, m * n);
    Ok((taa + tbb) - 2.0 * tab)
}

/// As [`mmd_unbiased`], additionally requiring identical feature names.
pub fn mmd_checked(a: &BinaryDataset, b: &BinaryDataset, bandwidth: Bandwidth) -> Result<f64> {
    ensure_same_features(a, b)?;
    mmd_unbiased(a, b, bandwidth)
}
