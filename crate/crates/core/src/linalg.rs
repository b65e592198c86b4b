//! Small dense square matrices.
//!
//! Everything here is sized by the number of users (tens at most), so plain
//! row-major storage and textbook elimination are enough.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::NotSquare);
        }
        Ok(Self {
            dim,
            data: rows.concat(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn principal_submatrix(&self, indices: &[usize]) -> Matrix {
        Matrix::from_fn(indices.len(), |a, b| self.get(indices[a], indices[b]))
    }

    pub fn max_abs(&self) -> f64 {
        self.data
            .iter()
            .fold(0.0, |m, v| f64::max(m, libm::fabs(*v)))
    }

    /// In-place LU with partial pivoting. Returns the permutation sign or
    /// `None` on an exactly zero pivot column.
    fn lu(&self) -> (Vec<f64>, Vec<usize>, Option<f64>) {
        let n = self.dim;
        let mut a = self.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let (piv_row, piv_val) =
                (k..n)
                    .map(|i| (i, libm::fabs(a[i * n + k])))
                    .fold(
                        (k, -1.0),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if piv_val == 0.0 {
                return (a, perm, None);
            }
            if piv_row != k {
                for j in 0..n {
                    a.swap(k * n + j, piv_row * n + j);
                }
                perm.swap(k, piv_row);
                sign = -sign;
            }
            let pivot = a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] / pivot;
                a[i * n + k] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        a[i * n + j] -= f * a[k * n + j];
                    }
                }
            }
        }
        (a, perm, Some(sign))
    }

    pub fn determinant(&self) -> f64 {
        let n = self.dim;
        match self.lu() {
            (lu, _, Some(sign)) => (0..n).fold(sign, |d, i| d * lu[i * n + i]),
            _ => 0.0,
        }
    }

    /// Solves `self * x = b`. `None` when the matrix is singular.
    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        let n = self.dim;
        assert_eq!(b.len(), n);
        let (lu, perm, sign) = self.lu();
        sign?;
        let mut x: Vec<f64> = perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= lu[i * n + j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= lu[i * n + j] * x[j];
            }
            x[i] /= lu[i * n + i];
        }
        x.iter().all(|v| v.is_finite()).then_some(x)
    }
}
