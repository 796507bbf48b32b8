//! Parameter recovery from completed moments: whitening of the second
//! moment, the robust tensor power method on the whitened third moment, and
//! unwhitening of the recovered eigenpairs.
//!
//! With `M2 = Σ ω_j μ_j μ_jᵀ` and `M3 = Σ ω_j μ_j⊗μ_j⊗μ_j`, a whitening map
//! `W` (`Wᵀ M2 W = I`) turns `M3(W, W, W)` into `Σ λ_j v_j⊗v_j⊗v_j` with
//! orthonormal `v_j = √ω_j Wᵀ μ_j` and `λ_j = 1/√ω_j`.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::dataset::BinaryDataset;
use crate::error::{Error, Result};
use crate::linalg::{norm, sym_eigen, Tensor3};
use crate::model::NaiveBayesModel;
use crate::moments::{self, complete_low_rank, estimate_moments, CompletionOptions, MomentSet};
use crate::rng;

/// Eigenvalues at or below this fraction of the largest count as zero.
pub const RANK_TOL: f64 = 1e-10;
pub const PROB_FLOOR: f64 = 1e-6;
pub const WEIGHT_FLOOR: f64 = 1e-6;
pub const DEFAULT_RESTARTS: usize = 10;
pub const DEFAULT_POWER_ITERS: usize = 100;
pub const DEFAULT_POWER_TOL: f64 = 1e-10;
const SYMMETRY_TOL: f64 = 1e-8;
const MIN_EIGENVALUE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct WhiteningMap {
    /// `d × k`, satisfies `wᵀ M2 w = I_k`.
    pub w: DMatrix<f64>,
    /// `k × d`, undoes `w` on the range of `M2`.
    pub pseudo_inverse: DMatrix<f64>,
    /// The retained eigenvalues of `M2`, descending.
    pub eigenvalues: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenPair {
    pub eigenvalue: f64,
    pub eigenvector: Vec<f64>,
}

pub fn whiten(m2: &DMatrix<f64>, k: usize) -> Result<WhiteningMap> {
    let d = m2.nrows();
    if m2.ncols() != d {
        return Err(Error::invalid("second moment must be square"));
    }
    if k == 0 || k > d {
        return Err(Error::invalid(format!("k = {k} must lie in 1..={d}")));
    }
    if m2.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("second moment has missing entries"));
    }
    let asym = (m2 - m2.transpose()).amax();
    if asym > 1e-12 * m2.amax().max(1.0) {
        return Err(Error::invalid(format!("second moment is not symmetric ({asym:e})")));
    }
    let eig = sym_eigen(m2)?;
    let tol = RANK_TOL * eig.values[0].abs().max(f64::MIN_POSITIVE);
    let rank = eig.values.iter().filter(|&&v| v > tol).count();
    if rank < k {
        return Err(Error::RankDeficient { k, rank });
    }
    let values: Vec<f64> = eig.values[..k].to_vec();
    let w = DMatrix::from_fn(d, k, |i, j| eig.vectors[(i, j)] / values[j].sqrt());
    let pseudo_inverse = DMatrix::from_fn(k, d, |j, i| eig.vectors[(i, j)] * values[j].sqrt());
    Ok(WhiteningMap {
        w,
        pseudo_inverse,
        eigenvalues: values,
    })
}

/// Whitened third moment computed from rows, with the repeated-index
/// entries replaced by the completed values in `correction`.
///
/// `T = (1/N) Σ (wᵀx)⊗³ − W-image(raw fibers − completed fibers)`, where the
/// raw fibers are the binary-data values `m2[a][c]` and `m1[a]`.
pub fn whitened_third_moment(
    data: &BinaryDataset,
    map: &WhiteningMap,
    correction: &MomentSet,
) -> Result<Tensor3> {
    let d = data.n_cols();
    for found in [map.w.nrows(), correction.d()] {
        if found != d {
            return Err(Error::DimensionMismatch { expected: d, found });
        }
    }
    let completed = correction
        .fibers()
        .ok_or_else(|| Error::invalid("third-moment fibers have not been completed"))?;
    let discrepancy = correction.raw_fibers() - completed;
    let mut t = moments::data_third_moment(data, &map.w);
    let image = moments::repeated_image(&discrepancy, &map.w);
    for (x, r) in t.as_mut_slice().iter_mut().zip(image.as_slice()) {
        *x -= r;
    }
    Ok(t)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerOptions {
    pub restarts: usize,
    pub iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for PowerOptions {
    fn default() -> Self {
        PowerOptions {
            restarts: DEFAULT_RESTARTS,
            iters: DEFAULT_POWER_ITERS,
            tol: DEFAULT_POWER_TOL,
            seed: 0,
        }
    }
}

fn power_iterate(t: &Tensor3, mut v: Vec<f64>, iters: usize, tol: f64) -> (f64, Vec<f64>) {
    for _ in 0..iters {
        let mut next = t.contract_two(&v);
        let nn = norm(&next);
        if nn == 0.0 || !nn.is_finite() {
            break;
        }
        next.iter_mut().for_each(|x| *x /= nn);
        let step = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        v = next;
        if step < tol {
            break;
        }
    }
    let lambda = t.contract_three(&v);
    // odd order: (−λ, −v) is the same rank-one term
    if lambda < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
        (-lambda, v)
    } else {
        (lambda, v)
    }
}

/// Robust tensor power method with deflation; returns `t.dim()` eigenpairs
/// in extraction order.
pub fn tensor_power_method(t: &Tensor3, opts: &PowerOptions) -> Result<Vec<EigenPair>> {
    let asym = t.max_asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(Error::NonSymmetricTensor(asym));
    }
    let k = t.dim();
    let restarts = opts.restarts.max(1);
    let seed = rng::derive_seed(opts.seed, rng::tags::POWER);
    let mut residual = t.clone();
    let mut pairs = Vec::with_capacity(k);
    for component in 0..k {
        let candidates: Vec<(f64, Vec<f64>)> = (0..restarts)
            .into_par_iter()
            .map(|r| {
                let mut g = rng::stream(seed, (component * restarts + r) as u64);
                let mut v: Vec<f64> = (0..k).map(|_| g.random_range(-1.0..1.0)).collect();
                let n = norm(&v);
                v.iter_mut().for_each(|x| *x /= n);
                power_iterate(&residual, v, opts.iters, opts.tol)
            })
            .collect();
        // first index wins ties
        let mut best = 0;
        for (i, c) in candidates.iter().enumerate() {
            if c.0 > candidates[best].0 {
                best = i;
            }
        }
        let (lambda, v) = &candidates[best];
        if !(*lambda > MIN_EIGENVALUE) {
            return Err(Error::DeflationFailure { component });
        }
        let (lambda, v) = power_iterate(&residual, v.clone(), opts.iters, opts.tol);
        if !(lambda > MIN_EIGENVALUE) {
            return Err(Error::DeflationFailure { component });
        }
        residual.add_outer(-lambda, &v, &v, &v);
        pairs.push(EigenPair {
            eigenvalue: lambda,
            eigenvector: v,
        });
    }
    Ok(pairs)
}

/// Unwhitens eigenpairs into a model: `ω_j = 1/λ_j²`,
/// `P[·][j] = λ_j · pseudo_inverseᵀ v_j`, then clips probabilities to
/// `[1e-6, 1 − 1e-6]` and weights to at least `1e-6` before renormalising.
pub fn recover_parameters(
    pairs: &[EigenPair],
    map: &WhiteningMap,
    feature_names: Vec<String>,
) -> Result<NaiveBayesModel> {
    let k = pairs.len();
    let d = map.pseudo_inverse.ncols();
    if k == 0 || map.pseudo_inverse.nrows() != k {
        return Err(Error::DimensionMismatch {
            expected: map.pseudo_inverse.nrows(),
            found: k,
        });
    }
    if feature_names.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: feature_names.len(),
        });
    }
    let mut p = DMatrix::zeros(d, k);
    let mut w = Vec::with_capacity(k);
    for (j, pair) in pairs.iter().enumerate() {
        let lambda = pair.eigenvalue;
        w.push((1.0 / (lambda * lambda)).max(WEIGHT_FLOOR));
        for i in 0..d {
            let raw: f64 = (0..k)
                .map(|t| map.pseudo_inverse[(t, i)] * pair.eigenvector[t])
                .sum::<f64>()
                * lambda;
            p[(i, j)] = sanitize_prob(raw);
        }
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    NaiveBayesModel::new(feature_names, w, p)
}

fn sanitize_prob(x: f64) -> f64 {
    if x.is_nan() {
        0.5
    } else {
        x.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SpectralOptions {
    pub completion: CompletionOptions,
    pub power: PowerOptions,
}

/// Moments → completion → whitening → power method → recovery, on data.
pub fn fit_spectral(data: &BinaryDataset, k: usize, opts: &SpectralOptions) -> Result<NaiveBayesModel> {
    let raw = estimate_moments(data).map_err(|e| e.in_stage("moments"))?;
    let completed =
        complete_low_rank(&raw, k, &opts.completion).map_err(|e| e.in_stage("completion"))?;
    let map = whiten(completed.m2_matrix(), k).map_err(|e| e.in_stage("whitening"))?;
    let t = whitened_third_moment(data, &map, &completed).map_err(|e| e.in_stage("third moment"))?;
    let pairs = tensor_power_method(&t, &opts.power).map_err(|e| e.in_stage("power method"))?;
    recover_parameters(&pairs, &map, data.feature_names().to_vec())
        .map_err(|e| e.in_stage("recovery"))
}

/// The same pipeline on a given moment set, using its own third moment.
pub fn fit_spectral_from_moments(
    moments: &MomentSet,
    feature_names: Vec<String>,
    k: usize,
    opts: &SpectralOptions,
) -> Result<NaiveBayesModel> {
    let completed =
        complete_low_rank(moments, k, &opts.completion).map_err(|e| e.in_stage("completion"))?;
    let map = whiten(completed.m2_matrix(), k).map_err(|e| e.in_stage("whitening"))?;
    let t = completed
        .whitened_third_moment(&map.w)
        .map_err(|e| e.in_stage("third moment"))?;
    let pairs = tensor_power_method(&t, &opts.power).map_err(|e| e.in_stage("power method"))?;
    recover_parameters(&pairs, &map, feature_names).map_err(|e| e.in_stage("recovery"))
}
