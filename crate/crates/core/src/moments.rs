//! Low-order moments of binary data and completion of their repeated-index
//! entries.
//!
//! For binary features `E[X_a X_a] = E[X_a]`, so the diagonal of the second
//! moment and every third-moment entry with a repeated index carry no
//! information about the mixture's low-rank structure. Those entries start
//! out missing and are filled by [`complete_low_rank`]:
//!
//! * the second-moment diagonal by alternating projection onto rank-`k`
//!   symmetric matrices;
//! * the third-moment fibers `m3[a][a][c]` from the rank-`k` eigenbasis `U`
//!   of the completed second moment: the core tensor `G = m3(U, U, U)` is
//!   fitted by least squares against the distinct-index entries only, and
//!   the fibers are read back from `G(u_a, u_a, u_c)`.
//!
//! The third moment is materialised only for `d ≤ DENSE_MAX_D`. Above that
//! the set keeps the sparse rows and evaluates contractions directly.

use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::dataset::BinaryDataset;
use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, Tensor3};
use crate::model::{NaiveBayesModel, ROW_BLOCK};

pub const DENSE_MAX_D: usize = 128;
pub const DEFAULT_COMPLETION_ITERS: usize = 500;
pub const DEFAULT_COMPLETION_TOL: f64 = 1e-10;

/// Provenance of a group of moment entries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntryState {
    /// Not usable; the raw empirical value does not follow the model.
    Missing,
    /// Filled in by completion.
    Filled,
    /// Known exactly (population moments of a given model).
    Observed,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ThirdMomentStorage {
    /// Dense when `d ≤ DENSE_MAX_D`, implicit otherwise.
    #[default]
    Auto,
    Dense,
    Implicit,
}

#[derive(Clone, Debug)]
struct SparseRows {
    offsets: Vec<usize>,
    indices: Vec<u32>,
}

impl SparseRows {
    fn from_data(data: &BinaryDataset) -> Self {
        let mut offsets = Vec::with_capacity(data.n_rows() + 1);
        let mut indices = Vec::new();
        offsets.push(0);
        for i in 0..data.n_rows() {
            indices.extend(data.row_ones(i).map(|j| j as u32));
            offsets.push(indices.len());
        }
        SparseRows { offsets, indices }
    }

    fn n_rows(&self) -> usize {
        self.offsets.len() - 1
    }

    fn row(&self, i: usize) -> &[u32] {
        &self.indices[self.offsets[i]..self.offsets[i + 1]]
    }
}

#[derive(Clone, Debug)]
enum ThirdMoment {
    /// `d³` values; positions with a repeated index are unused.
    Dense(Arc<Vec<f64>>),
    Implicit(Arc<SparseRows>),
}

/// First, second and third moments with per-group validity.
#[derive(Clone, Debug)]
pub struct MomentSet {
    d: usize,
    /// Zero for population moments computed from a model.
    n_samples: usize,
    m1: Vec<f64>,
    /// Diagonal holds NaN while missing.
    m2: DMatrix<f64>,
    m2_diag: EntryState,
    m3: ThirdMoment,
    /// `fibers[(a, c)] = m3[a][a][c]`, with `m3[a][a][a]` on the diagonal.
    fibers: Option<DMatrix<f64>>,
    fiber_state: EntryState,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompletionOptions {
    pub iters: usize,
    pub tol: f64,
}

impl Default for CompletionOptions {
    fn default() -> Self {
        CompletionOptions {
            iters: DEFAULT_COMPLETION_ITERS,
            tol: DEFAULT_COMPLETION_TOL,
        }
    }
}

#[inline]
fn idx3(d: usize, a: usize, b: usize, c: usize) -> usize {
    (a * d + b) * d + c
}

struct Counts {
    m1: Vec<u64>,
    m2: Vec<u64>,
    m3: Vec<u64>,
}

impl Counts {
    fn new(d: usize, dense3: bool) -> Self {
        Counts {
            m1: vec![0; d],
            m2: vec![0; d * d],
            m3: if dense3 { vec![0; d * d * d] } else { Vec::new() },
        }
    }

    fn merge(mut self, other: Counts) -> Counts {
        for (a, b) in self.m1.iter_mut().zip(other.m1) {
            *a += b;
        }
        for (a, b) in self.m2.iter_mut().zip(other.m2) {
            *a += b;
        }
        for (a, b) in self.m3.iter_mut().zip(other.m3) {
            *a += b;
        }
        self
    }
}

pub fn estimate_moments(data: &BinaryDataset) -> Result<MomentSet> {
    estimate_moments_with(data, ThirdMomentStorage::Auto)
}

/// Empirical moments. All distinct-index entries are exact averages over
/// rows; integer counts make the result independent of thread count.
pub fn estimate_moments_with(
    data: &BinaryDataset,
    storage: ThirdMomentStorage,
) -> Result<MomentSet> {
    let n = data.n_rows();
    if n < 3 {
        return Err(Error::invalid(format!(
            "third-order moments need at least 3 rows, got {n}"
        )));
    }
    let d = data.n_cols();
    let dense = match storage {
        ThirdMomentStorage::Auto => d <= DENSE_MAX_D,
        ThirdMomentStorage::Dense => true,
        ThirdMomentStorage::Implicit => false,
    };
    let rows = SparseRows::from_data(data);
    let counts = (0..n.div_ceil(ROW_BLOCK))
        .into_par_iter()
        .fold(
            || Counts::new(d, dense),
            |mut acc, b| {
                for r in b * ROW_BLOCK..((b + 1) * ROW_BLOCK).min(n) {
                    let ones = rows.row(r);
                    for (x, &a) in ones.iter().enumerate() {
                        let a = a as usize;
                        acc.m1[a] += 1;
                        for (y, &bb) in ones.iter().enumerate().skip(x + 1) {
                            let bb = bb as usize;
                            acc.m2[a * d + bb] += 1;
                            if dense {
                                for &c in &ones[y + 1..] {
                                    acc.m3[idx3(d, a, bb, c as usize)] += 1;
                                }
                            }
                        }
                    }
                }
                acc
            },
        )
        .reduce(|| Counts::new(d, dense), Counts::merge);

    let nf = n as f64;
    let m1: Vec<f64> = counts.m1.iter().map(|&c| c as f64 / nf).collect();
    let mut m2 = DMatrix::from_element(d, d, f64::NAN);
    for a in 0..d {
        for b in a + 1..d {
            let v = counts.m2[a * d + b] as f64 / nf;
            m2[(a, b)] = v;
            m2[(b, a)] = v;
        }
    }
    let m3 = if dense {
        let mut t = vec![f64::NAN; d * d * d];
        for a in 0..d {
            for b in a + 1..d {
                for c in b + 1..d {
                    let v = counts.m3[idx3(d, a, b, c)] as f64 / nf;
                    for (x, y, z) in [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)] {
                        t[idx3(d, x, y, z)] = v;
                    }
                }
            }
        }
        ThirdMoment::Dense(Arc::new(t))
    } else {
        ThirdMoment::Implicit(Arc::new(rows))
    };
    Ok(MomentSet {
        d,
        n_samples: n,
        m1,
        m2,
        m2_diag: EntryState::Missing,
        m3,
        fibers: None,
        fiber_state: EntryState::Missing,
    })
}

impl MomentSet {
    /// Population moments of `model`, with the repeated-index entries
    /// missing as they would be for binary data.
    pub fn from_model(model: &NaiveBayesModel) -> Result<Self> {
        let d = model.d();
        if d > DENSE_MAX_D {
            return Err(Error::invalid(format!(
                "population third moment needs d <= {DENSE_MAX_D}, got {d}"
            )));
        }
        let (w, p) = (model.weights(), model.cond_probs());
        let k = model.k();
        let m1 = model.marginals();
        let mut m2 = DMatrix::from_element(d, d, f64::NAN);
        for a in 0..d {
            for b in 0..d {
                if a != b {
                    m2[(a, b)] = (0..k).map(|j| w[j] * p[(a, j)] * p[(b, j)]).sum();
                }
            }
        }
        let mut t = vec![f64::NAN; d * d * d];
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    if a != b && b != c && a != c {
                        t[idx3(d, a, b, c)] =
                            (0..k).map(|j| w[j] * p[(a, j)] * p[(b, j)] * p[(c, j)]).sum();
                    }
                }
            }
        }
        Ok(MomentSet {
            d,
            n_samples: 0,
            m1,
            m2,
            m2_diag: EntryState::Missing,
            m3: ThirdMoment::Dense(Arc::new(t)),
            fibers: None,
            fiber_state: EntryState::Missing,
        })
    }

    /// Population moments of `model` with every entry, including repeated
    /// indices, taken from the mixture formula.
    pub fn from_model_full(model: &NaiveBayesModel) -> Result<Self> {
        let mut m = Self::from_model(model)?;
        let (w, p, k, d) = (model.weights(), model.cond_probs(), model.k(), model.d());
        for a in 0..d {
            m.m2[(a, a)] = (0..k).map(|j| w[j] * p[(a, j)] * p[(a, j)]).sum();
        }
        let f = DMatrix::from_fn(d, d, |a, c| {
            (0..k).map(|j| w[j] * p[(a, j)] * p[(a, j)] * p[(c, j)]).sum()
        });
        m.m2_diag = EntryState::Observed;
        m.fibers = Some(f);
        m.fiber_state = EntryState::Observed;
        Ok(m)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn m1(&self) -> &[f64] {
        &self.m1
    }

    pub fn m2(&self, a: usize, b: usize) -> Option<f64> {
        if a == b && self.m2_diag == EntryState::Missing {
            None
        } else {
            Some(self.m2[(a, b)])
        }
    }

    /// The second moment; the diagonal is NaN while missing.
    pub fn m2_matrix(&self) -> &DMatrix<f64> {
        &self.m2
    }

    pub fn m2_diagonal_state(&self) -> EntryState {
        self.m2_diag
    }

    pub fn fiber_state(&self) -> EntryState {
        self.fiber_state
    }

    /// Completed or observed `m3[a][a][c]` values, if any.
    pub fn fibers(&self) -> Option<&DMatrix<f64>> {
        self.fibers.as_ref()
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.m3, ThirdMoment::Dense(_))
    }

    /// `m3[a][b][c]`, or `None` when the entry is missing or not
    /// materialised.
    pub fn m3(&self, a: usize, b: usize, c: usize) -> Option<f64> {
        let fiber = if a == b {
            Some((a, c))
        } else if a == c {
            Some((a, b))
        } else if b == c {
            Some((b, a))
        } else {
            None
        };
        match (fiber, &self.m3) {
            (Some(rc), _) => self.fibers.as_ref().map(|f| f[rc]),
            (None, ThirdMoment::Dense(t)) => Some(t[idx3(self.d, a, b, c)]),
            (None, ThirdMoment::Implicit(_)) => None,
        }
    }

    /// What binary data says about `m3[a][a][c]`: `m2[a][c]` off the
    /// diagonal and `m1[a]` on it.
    pub fn raw_fibers(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.d, self.d, |a, c| {
            if a == c {
                self.m1[a]
            } else {
                self.m2[(a, c)]
            }
        })
    }

    /// `Σ m3[a][b][c] u_a ⊗ u_b ⊗ u_c` over distinct `a, b, c`, where `u_a`
    /// is row `a` of `basis`.
    pub(crate) fn distinct_projection(&self, basis: &DMatrix<f64>) -> Tensor3 {
        match &self.m3 {
            ThirdMoment::Dense(t) => dense_distinct_projection(self.d, t, basis),
            ThirdMoment::Implicit(rows) => {
                let mut out = rows_third_moment(rows, basis);
                let image = repeated_image(&self.raw_fibers(), basis);
                for (o, r) in out.as_mut_slice().iter_mut().zip(image.as_slice()) {
                    *o -= r;
                }
                out
            }
        }
    }

    /// The completed third moment contracted with `w` on every mode.
    /// Requires the repeated-index fibers to be filled or observed.
    pub fn whitened_third_moment(&self, w: &DMatrix<f64>) -> Result<Tensor3> {
        if w.nrows() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: w.nrows(),
            });
        }
        let fibers = self
            .fibers
            .as_ref()
            .ok_or_else(|| Error::invalid("third-moment fibers have not been completed"))?;
        let mut t = self.distinct_projection(w);
        t.add_assign(&repeated_image(fibers, w));
        Ok(t)
    }

    /// CSV dump of `m1` and `m2` as `kind,a,b,value`; missing entries have
    /// an empty value.
    pub fn write_debug_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "kind,a,b,value")?;
        for (a, v) in self.m1.iter().enumerate() {
            writeln!(out, "m1,{a},,{v}")?;
        }
        for a in 0..self.d {
            for b in 0..self.d {
                match self.m2(a, b) {
                    Some(v) => writeln!(out, "m2,{a},{b},{v}")?,
                    None => writeln!(out, "m2,{a},{b},")?,
                }
            }
        }
        Ok(())
    }
}

fn dense_distinct_projection(d: usize, t: &[f64], u: &DMatrix<f64>) -> Tensor3 {
    let k = u.ncols();
    // first mode: t1[a][b][r] = Σ_c t[a][b][c] u[c][r], distinct a, b, c only
    let t1: Vec<Vec<f64>> = (0..d)
        .into_par_iter()
        .map(|a| {
            let mut out = vec![0.0; d * k];
            for b in 0..d {
                if b == a {
                    continue;
                }
                let fiber = &t[idx3(d, a, b, 0)..idx3(d, a, b, 0) + d];
                let dst = &mut out[b * k..(b + 1) * k];
                for (c, &v) in fiber.iter().enumerate() {
                    if c == a || c == b || v == 0.0 {
                        continue;
                    }
                    for (r, x) in dst.iter_mut().enumerate() {
                        *x += v * u[(c, r)];
                    }
                }
            }
            out
        })
        .collect();
    // second mode: t2[a][q][r] = Σ_b u[b][q] t1[a][b][r]
    let t2: Vec<Vec<f64>> = t1
        .par_iter()
        .map(|t1a| {
            let mut out = vec![0.0; k * k];
            for b in 0..d {
                for q in 0..k {
                    let ubq = u[(b, q)];
                    for r in 0..k {
                        out[q * k + r] += ubq * t1a[b * k + r];
                    }
                }
            }
            out
        })
        .collect();
    let mut res = Tensor3::zeros(k);
    for (a, t2a) in t2.iter().enumerate() {
        for p in 0..k {
            let uap = u[(a, p)];
            for qr in 0..k * k {
                res.as_mut_slice()[p * k * k + qr] += uap * t2a[qr];
            }
        }
    }
    res
}

/// `(1/N) Σ_rows y ⊗ y ⊗ y` with `y = basisᵀ x`.
fn rows_third_moment(rows: &SparseRows, basis: &DMatrix<f64>) -> Tensor3 {
    let k = basis.ncols();
    let n = rows.n_rows();
    let blocks: Vec<Tensor3> = (0..n.div_ceil(ROW_BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = Tensor3::zeros(k);
            let mut y = vec![0.0; k];
            for r in b * ROW_BLOCK..((b + 1) * ROW_BLOCK).min(n) {
                y.iter_mut().for_each(|v| *v = 0.0);
                for &i in rows.row(r) {
                    for (t, v) in y.iter_mut().enumerate() {
                        *v += basis[(i as usize, t)];
                    }
                }
                acc.add_outer(1.0, &y, &y, &y);
            }
            acc
        })
        .collect();
    let mut total = Tensor3::zeros(k);
    for b in &blocks {
        total.add_assign(b);
    }
    total.scale(1.0 / n as f64);
    total
}

/// `(1/N) Σ_rows y ⊗ y ⊗ y` with `y = basisᵀ x`, straight from data.
pub(crate) fn data_third_moment(data: &BinaryDataset, basis: &DMatrix<f64>) -> Tensor3 {
    rows_third_moment(&SparseRows::from_data(data), basis)
}

/// Contribution of the repeated-index entries described by `fibers` to the
/// full contraction `Σ m3[a][b][c] w_a ⊗ w_b ⊗ w_c`.
pub(crate) fn repeated_image(fibers: &DMatrix<f64>, w: &DMatrix<f64>) -> Tensor3 {
    let (d, k) = w.shape();
    let h = fibers * w;
    let mut out = Tensor3::zeros(k);
    let mut wa = vec![0.0; k];
    let mut ha = vec![0.0; k];
    for a in 0..d {
        for t in 0..k {
            wa[t] = w[(a, t)];
            ha[t] = h[(a, t)];
        }
        out.add_outer(1.0, &wa, &wa, &ha);
        out.add_outer(1.0, &ha, &wa, &wa);
        out.add_outer(1.0, &wa, &ha, &wa);
        out.add_outer(-2.0 * fibers[(a, a)], &wa, &wa, &wa);
    }
    out
}

fn distinct_perms(t: [usize; 3]) -> Vec<[usize; 3]> {
    let [p, q, r] = t;
    let mut v = vec![
        [p, q, r],
        [p, r, q],
        [q, p, r],
        [q, r, p],
        [r, p, q],
        [r, q, p],
    ];
    v.sort_unstable();
    v.dedup();
    v
}

/// Least-squares symmetric core `G` such that `G(u_a, u_b, u_c)` matches
/// the distinct-index third moment, given its projection `proj`.
///
/// The normal operator restricted to distinct indices is
/// `I − (A + B + C) + 2·D` where `A, B, C` collect the pairs of equal indices
/// and `D` the all-equal ones; in the symmetric basis `E_s` its matrix is
/// `diag(|orbit|) − 3 Σ_a ⟨E_s(u_a, u_a, ·), E_t(u_a, u_a, ·)⟩ + 2 Σ_a E_s(u_a³) E_t(u_a³)`.
fn fit_core(u: &DMatrix<f64>, proj: &Tensor3) -> Tensor3 {
    let (d, k) = u.shape();
    let mut triples = Vec::new();
    for p in 0..k {
        for q in p..k {
            for r in q..k {
                triples.push([p, q, r]);
            }
        }
    }
    let s = triples.len();
    let orbits: Vec<Vec<[usize; 3]>> = triples.iter().map(|&t| distinct_perms(t)).collect();
    let mut gm = DMatrix::<f64>::zeros(s, d * k);
    let mut hm = DMatrix::<f64>::zeros(s, d);
    for (si, orbit) in orbits.iter().enumerate() {
        for a in 0..d {
            for &[x, y, z] in orbit {
                gm[(si, a * k + z)] += u[(a, x)] * u[(a, y)];
            }
            let [p, q, r] = triples[si];
            hm[(si, a)] = orbit.len() as f64 * u[(a, p)] * u[(a, q)] * u[(a, r)];
        }
    }
    let mut normal: DMatrix<f64> = &gm * gm.transpose() * -3.0 + &hm * hm.transpose() * 2.0;
    let mut rhs = nalgebra::DVector::<f64>::zeros(s);
    for (si, orbit) in orbits.iter().enumerate() {
        normal[(si, si)] += orbit.len() as f64;
        let [p, q, r] = triples[si];
        rhs[si] = orbit.len() as f64 * proj.get(p, q, r);
    }
    let svd = normal.svd(true, true);
    let cutoff = 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    let g = svd
        .solve(&rhs, cutoff)
        .expect("svd was computed with both factors");
    let mut core = Tensor3::zeros(k);
    for (si, orbit) in orbits.iter().enumerate() {
        for &[x, y, z] in orbit {
            *core.get_mut(x, y, z) = g[si];
        }
    }
    core
}

/// Fills the missing or previously filled entries of `moments`; observed
/// entries, including every distinct-index entry, are returned unchanged.
pub fn complete_low_rank(
    moments: &MomentSet,
    k: usize,
    opts: &CompletionOptions,
) -> Result<MomentSet> {
    let d = moments.d;
    if k == 0 || k > d {
        return Err(Error::invalid(format!("k = {k} must lie in 1..={d}")));
    }
    let mut out = moments.clone();
    if out.m2_diag != EntryState::Observed {
        if out.m2_diag == EntryState::Missing {
            for a in 0..d {
                out.m2[(a, a)] = out.m1[a] * out.m1[a];
            }
        }
        for _ in 0..opts.iters {
            let eig = sym_eigen(&out.m2)?;
            let next: Vec<f64> = (0..d)
                .map(|a| {
                    (0..k)
                        .map(|j| eig.values[j] * eig.vectors[(a, j)] * eig.vectors[(a, j)])
                        .sum::<f64>()
                        .clamp(0.0, 1.0)
                })
                .collect();
            let change = (0..d).map(|a| (next[a] - out.m2[(a, a)]).abs()).fold(0.0, f64::max);
            // a converged input is left bit-identical, so completion is idempotent
            if change < opts.tol {
                break;
            }
            for (a, v) in next.into_iter().enumerate() {
                out.m2[(a, a)] = v;
            }
        }
        out.m2_diag = EntryState::Filled;
    }
    if out.fiber_state != EntryState::Observed {
        let eig = sym_eigen(&out.m2)?;
        let basis = eig.vectors.columns(0, k).into_owned();
        let core = fit_core(&basis, &out.distinct_projection(&basis));
        let mut ga = DMatrix::zeros(d, k);
        for a in 0..d {
            let ua: Vec<f64> = basis.row(a).iter().copied().collect();
            for (t, v) in core.contract_two(&ua).into_iter().enumerate() {
                ga[(a, t)] = v;
            }
        }
        let fibers = (ga * basis.transpose()).map(|x| x.clamp(0.0, 1.0));
        out.fibers = Some(fibers);
        out.fiber_state = EntryState::Filled;
    }
    Ok(out)
}
