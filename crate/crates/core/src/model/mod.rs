//! The naive Bayes mixture over binary features, the first-moment baseline,
//! and sampling from both.

mod nbm;

pub use nbm::{read_nbm, write_nbm, NbmFile};

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::dataset::{ensure_same_features, BinaryDataset};
use crate::error::{Error, Result};
use crate::rng;

const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Rows per block in parallel reductions. Fixed so sums do not depend on the
/// number of threads.
pub(crate) const ROW_BLOCK: usize = 512;

/// Mixture of `k` product-Bernoulli components.
///
/// `cond_probs[(i, j)]` is the probability that feature `i` is 1 given latent
/// state `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct NaiveBayesModel {
    feature_names: Vec<String>,
    weights: Vec<f64>,
    cond_probs: DMatrix<f64>,
}

impl NaiveBayesModel {
    pub fn new(
        feature_names: Vec<String>,
        weights: Vec<f64>,
        cond_probs: DMatrix<f64>,
    ) -> Result<Self> {
        let k = weights.len();
        let d = feature_names.len();
        if k == 0 || d == 0 {
            return Err(Error::invalid("a model needs k >= 1 and d >= 1"));
        }
        if cond_probs.shape() != (d, k) {
            return Err(Error::invalid(format!(
                "conditional probability matrix is {:?}, expected ({d}, {k})",
                cond_probs.shape()
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::invalid("mixing weights must be non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::invalid(format!("mixing weights sum to {total}")));
        }
        if cond_probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("conditional probabilities must lie in [0, 1]"));
        }
        Ok(NaiveBayesModel {
            feature_names,
            weights,
            cond_probs,
        })
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn d(&self) -> usize {
        self.feature_names.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cond_probs(&self) -> &DMatrix<f64> {
        &self.cond_probs
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Marginal probability of each feature, `Σ_j ω_j P[i][j]`.
    pub fn marginals(&self) -> Vec<f64> {
        (0..self.d())
            .map(|i| {
                (0..self.k())
                    .map(|j| self.weights[j] * self.cond_probs[(i, j)])
                    .sum()
            })
            .collect()
    }

    /// Reorders components: component `j` of the result is component
    /// `perm[j]` of `self`.
    pub fn permute_components(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.k());
        let weights = perm.iter().map(|&j| self.weights[j]).collect();
        let cond_probs = DMatrix::from_fn(self.d(), self.k(), |i, j| self.cond_probs[(i, perm[j])]);
        NaiveBayesModel {
            feature_names: self.feature_names.clone(),
            weights,
            cond_probs,
        }
    }

    /// Draws `m` rows. Row `r` uses its own stream (see [`crate::rng`]), so
    /// the output is identical for any number of threads.
    pub fn sample(&self, m: usize, seed: u64) -> Result<BinaryDataset> {
        if m == 0 {
            return Err(Error::invalid("sample size must be at least 1"));
        }
        let seed = rng::derive_seed(seed, rng::tags::SAMPLE);
        let wpr = self.d().div_ceil(64);
        let last_live = self.weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
        let bits: Vec<u64> = (0..m)
            .into_par_iter()
            .flat_map_iter(|r| {
                let mut g = rng::stream(seed, r as u64);
                let u: f64 = g.random();
                let mut acc = 0.0;
                let mut state = last_live;
                for (j, &w) in self.weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        state = j;
                        break;
                    }
                }
                let col = self.cond_probs.column(state);
                let mut row = vec![0u64; wpr];
                for (i, &p) in col.iter().enumerate() {
                    if g.random::<f64>() < p {
                        row[i / 64] |= 1 << (i % 64);
                    }
                }
                row
            })
            .collect();
        Ok(BinaryDataset::from_packed(self.feature_names.clone(), bits))
    }

    /// `Σ_rows log Σ_j ω_j Π_i P[i][j]^{x_i} (1 − P[i][j])^{1 − x_i}`.
    ///
    /// Returns `f64::NEG_INFINITY` when some row has probability zero under
    /// the model, which happens only with boundary probabilities.
    pub fn log_likelihood(&self, data: &BinaryDataset) -> Result<f64> {
        ensure_dims(self, data)?;
        let scorer = ComponentScorer::new(self);
        let n = data.n_rows();
        let blocks: Vec<f64> = (0..n.div_ceil(ROW_BLOCK))
            .into_par_iter()
            .map(|b| {
                let mut buf = vec![0.0; self.k()];
                let mut s = 0.0;
                for r in b * ROW_BLOCK..((b + 1) * ROW_BLOCK).min(n) {
                    scorer.joint_log_probs(data, r, &mut buf);
                    s += log_sum_exp(&buf);
                }
                s
            })
            .collect();
        Ok(blocks.iter().sum())
    }
}

pub(crate) fn ensure_dims(model: &NaiveBayesModel, data: &BinaryDataset) -> Result<()> {
    if model.d() != data.n_cols() {
        return Err(Error::DimensionMismatch {
            expected: model.d(),
            found: data.n_cols(),
        });
    }
    Ok(())
}

/// Precomputed logarithms for scoring rows against every component.
pub(crate) struct ComponentScorer {
    k: usize,
    /// `log ω_j + Σ_i log(1 − P[i][j])`; only used on the interior path.
    base: Vec<f64>,
    /// Row-major `d × k` of `log P − log(1 − P)`; interior path.
    logit: Vec<f64>,
    /// Row-major `d × k` of `log P` and `log(1 − P)`; boundary path.
    log_p: Vec<f64>,
    log_q: Vec<f64>,
    log_w: Vec<f64>,
    interior: bool,
}

impl ComponentScorer {
    pub(crate) fn new(model: &NaiveBayesModel) -> Self {
        let (d, k) = (model.d(), model.k());
        let p = model.cond_probs();
        let interior = p.iter().all(|&x| x > 0.0 && x < 1.0);
        let log_w: Vec<f64> = model.weights().iter().map(|w| w.ln()).collect();
        let mut log_p = vec![0.0; d * k];
        let mut log_q = vec![0.0; d * k];
        for i in 0..d {
            for j in 0..k {
                log_p[i * k + j] = p[(i, j)].ln();
                log_q[i * k + j] = (-p[(i, j)]).ln_1p();
            }
        }
        let mut base = log_w.clone();
        let mut logit = vec![0.0; d * k];
        if interior {
            for i in 0..d {
                for j in 0..k {
                    base[j] += log_q[i * k + j];
                    logit[i * k + j] = log_p[i * k + j] - log_q[i * k + j];
                }
            }
        }
        ComponentScorer {
            k,
            base,
            logit,
            log_p,
            log_q,
            log_w,
            interior,
        }
    }

    /// Fills `out[j]` with `log ω_j + log Pr[row | Y = j]`.
    #[inline]
    pub(crate) fn joint_log_probs(&self, data: &BinaryDataset, row: usize, out: &mut [f64]) {
        let k = self.k;
        if self.interior {
            out.copy_from_slice(&self.base);
            for i in data.row_ones(row) {
                let l = &self.logit[i * k..(i + 1) * k];
                for j in 0..k {
                    out[j] += l[j];
                }
            }
        } else {
            out.copy_from_slice(&self.log_w);
            for i in 0..data.n_cols() {
                let src = if data.get(row, i) { &self.log_p } else { &self.log_q };
                for j in 0..k {
                    out[j] += src[i * k + j];
                }
            }
        }
    }
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Independent per-feature Bernoulli model at the empirical frequencies.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineModel {
    feature_names: Vec<String>,
    freqs: Vec<f64>,
}

impl BaselineModel {
    pub fn new(feature_names: Vec<String>, freqs: Vec<f64>) -> Result<Self> {
        if feature_names.is_empty() || feature_names.len() != freqs.len() {
            return Err(Error::invalid("baseline needs one frequency per feature"));
        }
        if freqs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("baseline frequencies must lie in [0, 1]"));
        }
        Ok(BaselineModel {
            feature_names,
            freqs,
        })
    }

    pub fn fit(data: &BinaryDataset) -> Self {
        BaselineModel {
            feature_names: data.feature_names().to_vec(),
            freqs: data.column_means(),
        }
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn d(&self) -> usize {
        self.freqs.len()
    }

    pub fn sample(&self, m: usize, seed: u64) -> Result<BinaryDataset> {
        if m == 0 {
            return Err(Error::invalid("sample size must be at least 1"));
        }
        let seed = rng::derive_seed(seed, rng::tags::BASELINE);
        let wpr = self.d().div_ceil(64);
        let bits: Vec<u64> = (0..m)
            .into_par_iter()
            .flat_map_iter(|r| {
                let mut g = rng::stream(seed, r as u64);
                let mut row = vec![0u64; wpr];
                for (i, &p) in self.freqs.iter().enumerate() {
                    if g.random::<f64>() < p {
                        row[i / 64] |= 1 << (i % 64);
                    }
                }
                row
            })
            .collect();
        Ok(BinaryDataset::from_packed(self.feature_names.clone(), bits))
    }

    /// The same distribution as a one-component mixture.
    pub fn as_mixture(&self) -> NaiveBayesModel {
        NaiveBayesModel {
            feature_names: self.feature_names.clone(),
            weights: vec![1.0],
            cond_probs: DMatrix::from_column_slice(self.d(), 1, &self.freqs),
        }
    }

    pub fn log_likelihood(&self, data: &BinaryDataset) -> Result<f64> {
        self.as_mixture().log_likelihood(data)
    }
}

pub fn fit_baseline(data: &BinaryDataset) -> BaselineModel {
    BaselineModel::fit(data)
}

/// Errors unless the model's feature names match the dataset's.
pub fn ensure_model_matches(model: &NaiveBayesModel, data: &BinaryDataset) -> Result<()> {
    ensure_dims(model, data)?;
    let probe = BinaryDataset::from_fn(model.feature_names.clone(), 1, |_, _| false)?;
    ensure_same_features(&probe, data)
}
