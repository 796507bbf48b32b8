//! Dense helpers shared by the moment and spectral code.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

const EIGEN_EPS: f64 = 1e-14;
const EIGEN_MAX_SWEEPS: usize = 10_000;

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order.
pub(crate) struct SortedEigen {
    pub values: Vec<f64>,
    /// Column `j` pairs with `values[j]`.
    pub vectors: DMatrix<f64>,
}

pub(crate) fn sym_eigen(m: &DMatrix<f64>) -> Result<SortedEigen> {
    let eig = SymmetricEigen::try_new(m.clone(), EIGEN_EPS, EIGEN_MAX_SWEEPS)
        .ok_or(Error::EigenFailure)?;
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    // stable on ties so the order only depends on the input
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(SortedEigen { values, vectors })
}

/// Dense `k × k × k` tensor, index `(i, j, l)` stored at `(i·k + j)·k + l`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    k: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(k: usize) -> Self {
        Tensor3 {
            k,
            data: vec![0.0; k * k * k],
        }
    }

    pub fn from_fn(k: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(k);
        for i in 0..k {
            for j in 0..k {
                for l in 0..k {
                    t.data[(i * k + j) * k + l] = f(i, j, l);
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, l: usize) -> f64 {
        self.data[(i * self.k + j) * self.k + l]
    }

    #[inline]
    pub fn get_mut(&mut self, i: usize, j: usize, l: usize) -> &mut f64 {
        &mut self.data[(i * self.k + j) * self.k + l]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `self += scale · a ⊗ b ⊗ c`.
    pub fn add_outer(&mut self, scale: f64, a: &[f64], b: &[f64], c: &[f64]) {
        let k = self.k;
        for i in 0..k {
            let si = scale * a[i];
            if si == 0.0 {
                continue;
            }
            for j in 0..k {
                let sij = si * b[j];
                let row = &mut self.data[(i * k + j) * k..(i * k + j + 1) * k];
                for (x, &cl) in row.iter_mut().zip(c) {
                    *x += sij * cl;
                }
            }
        }
    }

    /// `T(I, v, v)`.
    pub fn contract_two(&self, v: &[f64]) -> Vec<f64> {
        let k = self.k;
        (0..k)
            .map(|i| {
                let mut s = 0.0;
                for j in 0..k {
                    let row = &self.data[(i * k + j) * k..(i * k + j + 1) * k];
                    let inner: f64 = row.iter().zip(v).map(|(a, b)| a * b).sum();
                    s += v[j] * inner;
                }
                s
            })
            .collect()
    }

    /// `T(v, v, v)`.
    pub fn contract_three(&self, v: &[f64]) -> f64 {
        self.contract_two(v).iter().zip(v).map(|(a, b)| a * b).sum()
    }

    /// Largest absolute difference between entries related by an index
    /// permutation.
    pub fn max_asymmetry(&self) -> f64 {
        let k = self.k;
        let mut worst: f64 = 0.0;
        for i in 0..k {
            for j in 0..k {
                for l in 0..k {
                    let x = self.get(i, j, l);
                    for y in [
                        self.get(i, l, j),
                        self.get(j, i, l),
                        self.get(j, l, i),
                        self.get(l, i, j),
                        self.get(l, j, i),
                    ] {
                        worst = worst.max((x - y).abs());
                    }
                }
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &Tensor3) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor3) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub(crate) fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_descending() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 4.0, 0.0, 0.0, 0.0, 2.0]);
        let e = sym_eigen(&m).unwrap();
        assert_eq!(e.values, vec![4.0, 2.0, 1.0]);
        assert!((e.vectors[(1, 0)].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn contractions() {
        let mut t = Tensor3::zeros(2);
        t.add_outer(2.0, &[1.0, 0.0], &[1.0, 0.0], &[1.0, 0.0]);
        assert_eq!(t.contract_two(&[1.0, 0.0]), vec![2.0, 0.0]);
        assert!((t.contract_three(&[0.6, 0.8]) - 0.432).abs() < 1e-15);
        assert_eq!(t.max_asymmetry(), 0.0);
        *t.get_mut(0, 1, 0) = 0.5;
        assert_eq!(t.max_asymmetry(), 0.5);
    }
}
