//! Expectation-Maximization for Bernoulli mixtures.
//!
//! The M-step adds `α` pseudo-counts to both outcomes of every feature, which
//! is the posterior mode under a symmetric `Beta(1 + α, 1 + α)` prior. EM
//! therefore ascends the smoothed objective
//! `LL + α Σ_{i,j} [ln P[i][j] + ln(1 − P[i][j])]`, and that is what the
//! trace records; with `α = 0` it is the plain log-likelihood.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::dataset::BinaryDataset;
use crate::error::Result;
use crate::model::{ensure_dims, log_sum_exp, ComponentScorer, NaiveBayesModel, ROW_BLOCK};

pub const DEFAULT_MAX_ITERS: usize = 100;
pub const DEFAULT_REL_TOL: f64 = 1e-6;
pub const DEFAULT_SMOOTHING: f64 = 1e-4;
/// Components with less total responsibility keep their column.
pub const EMPTY_MASS: f64 = 1e-8;
pub const EMPTY_WEIGHT_FLOOR: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmOptions {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub smoothing: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            max_iters: DEFAULT_MAX_ITERS,
            rel_tol: DEFAULT_REL_TOL,
            smoothing: DEFAULT_SMOOTHING,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EmReport {
    pub iterations_run: usize,
    /// Objective after each iteration.
    pub loglik_trace: Vec<f64>,
    pub converged: bool,
    /// Components that were empty in at least one M-step, ascending.
    pub empty_components: Vec<usize>,
}

struct Stats {
    objective: f64,
    /// Σ_n r_{n,j}
    mass: Vec<f64>,
    /// Row-major d × k of Σ_n r_{n,j} x_{n,i}
    hits: Vec<f64>,
}

fn e_step(model: &NaiveBayesModel, data: &BinaryDataset, smoothing: f64) -> Stats {
    let (d, k, n) = (model.d(), model.k(), data.n_rows());
    let scorer = ComponentScorer::new(model);
    let blocks: Vec<Stats> = (0..n.div_ceil(ROW_BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut s = Stats {
                objective: 0.0,
                mass: vec![0.0; k],
                hits: vec![0.0; d * k],
            };
            let mut lp = vec![0.0; k];
            for r in b * ROW_BLOCK..((b + 1) * ROW_BLOCK).min(n) {
                scorer.joint_log_probs(data, r, &mut lp);
                let z = log_sum_exp(&lp);
                s.objective += z;
                if z == f64::NEG_INFINITY {
                    lp.iter_mut().for_each(|x| *x = 1.0 / k as f64);
                } else {
                    lp.iter_mut().for_each(|x| *x = (*x - z).exp());
                }
                for j in 0..k {
                    s.mass[j] += lp[j];
                }
                for i in data.row_ones(r) {
                    let h = &mut s.hits[i * k..(i + 1) * k];
                    for j in 0..k {
                        h[j] += lp[j];
                    }
                }
            }
            s
        })
        .collect();
    let mut total = Stats {
        objective: 0.0,
        mass: vec![0.0; k],
        hits: vec![0.0; d * k],
    };
    for b in blocks {
        total.objective += b.objective;
        for (a, x) in total.mass.iter_mut().zip(b.mass) {
            *a += x;
        }
        for (a, x) in total.hits.iter_mut().zip(b.hits) {
            *a += x;
        }
    }
    if smoothing > 0.0 {
        let penalty: f64 = model
            .cond_probs()
            .iter()
            .map(|&p| p.ln() + (-p).ln_1p())
            .sum();
        total.objective += smoothing * penalty;
    }
    total
}

fn m_step(
    model: &NaiveBayesModel,
    stats: &Stats,
    n: usize,
    smoothing: f64,
    empty: &mut Vec<usize>,
) -> Result<NaiveBayesModel> {
    let (d, k) = (model.d(), model.k());
    let mut weights = Vec::with_capacity(k);
    let mut p = model.cond_probs().clone();
    for j in 0..k {
        let mass = stats.mass[j];
        if mass < EMPTY_MASS {
            if !empty.contains(&j) {
                empty.push(j);
            }
            weights.push((mass / n as f64).max(EMPTY_WEIGHT_FLOOR));
            continue;
        }
        weights.push(mass / n as f64);
        for i in 0..d {
            p[(i, j)] = (stats.hits[i * k + j] + smoothing) / (mass + 2.0 * smoothing);
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    NaiveBayesModel::new(model.feature_names().to_vec(), weights, clamp_unit(p))
}

fn clamp_unit(mut p: DMatrix<f64>) -> DMatrix<f64> {
    p.iter_mut().for_each(|x| *x = x.clamp(0.0, 1.0));
    p
}

/// Runs at most `opts.max_iters` EM iterations from `model`, stopping once
/// the relative objective improvement falls below `opts.rel_tol`.
pub fn em_refine(
    model: &NaiveBayesModel,
    data: &BinaryDataset,
    opts: &EmOptions,
) -> Result<(NaiveBayesModel, EmReport)> {
    ensure_dims(model, data)?;
    let mut report = EmReport::default();
    if opts.max_iters == 0 {
        return Ok((model.clone(), report));
    }
    let n = data.n_rows();
    let mut current = model.clone();
    let mut stats = e_step(&current, data, opts.smoothing);
    for _ in 0..opts.max_iters {
        let next = m_step(&current, &stats, n, opts.smoothing, &mut report.empty_components)?;
        let next_stats = e_step(&next, data, opts.smoothing);
        let gain = next_stats.objective - stats.objective;
        report.loglik_trace.push(next_stats.objective);
        report.iterations_run += 1;
        current = next;
        stats = next_stats;
        if gain.abs() < opts.rel_tol * stats.objective.abs() {
            report.converged = true;
            break;
        }
    }
    report.empty_components.sort_unstable();
    Ok((current, report))
}
