//! Dense symmetric matrices of dimension 1 or 2, the only sizes the
//! observation models use.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major symmetric `dim × dim` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> SymMatrix<T> {
    pub fn from_row_major(dim: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != dim * dim || dim == 0 {
            return Err(Error::InvalidParams(format!(
                "matrix of dimension {dim} needs {} entries, got {}",
                dim * dim,
                data.len()
            )));
        }
        let m = Self { dim, data };
        if !m.is_symmetric() {
            return Err(Error::DegenerateCovariance);
        }
        Ok(m)
    }

    pub fn identity(dim: usize) -> Self {
        let mut data = vec![T::zero(); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = T::one();
        }
        Self { dim, data }
    }

    pub fn diagonal(values: &[T]) -> Self {
        let dim = values.len();
        let mut m = Self {
            dim,
            data: vec![T::zero(); dim * dim],
        };
        for (i, &v) in values.iter().enumerate() {
            m.data[i * dim + i] = v;
        }
        m
    }

    /// Builds the matrix from an outer-product accumulator, symmetrising
    /// rounding noise in the off-diagonal.
    pub(crate) fn from_accumulator(dim: usize, mut data: Vec<T>) -> Self {
        let half = T::lit(0.5);
        for i in 0..dim {
            for j in (i + 1)..dim {
                let s = (data[i * dim + j] + data[j * dim + i]) * half;
                data[i * dim + j] = s;
                data[j * dim + i] = s;
            }
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.dim + j]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn scale(&self, factor: T) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&v| v * factor).collect(),
        }
    }

    fn is_symmetric(&self) -> bool {
        let scale = self
            .data
            .iter()
            .fold(T::zero(), |acc, v| acc.max(v.abs()))
            .max(T::one());
        let tol = T::epsilon() * T::lit(64.0) * scale;
        (0..self.dim).all(|i| {
            (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol)
        }) && self.data.iter().all(|v| v.is_finite())
    }

    /// Lower Cholesky factor, or `None` when the matrix is not positive definite.
    pub fn cholesky(&self) -> Option<Vec<T>> {
        let n = self.dim;
        let mut l = vec![T::zero(); n * n];
        for j in 0..n {
            let mut diag = self.get(j, j);
            for k in 0..j {
                diag = diag - l[j * n + k] * l[j * n + k];
            }
            if !(diag > T::zero()) {
                return None;
            }
            let ljj = diag.sqrt();
            l[j * n + j] = ljj;
            for i in (j + 1)..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s = s - l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / ljj;
            }
        }
        Some(l)
    }

    /// Eigenvalues in ascending order with matching unit eigenvectors (columns).
    pub fn symmetric_eigen(&self) -> (Vec<T>, Vec<[T; 2]>) {
        match self.dim {
            1 => (vec![self.data[0]], vec![[T::one(), T::zero()]]),
            2 => {
                let (a, b, d) = (self.get(0, 0), self.get(0, 1), self.get(1, 1));
                let half = T::lit(0.5);
                let mean = (a + d) * half;
                let r = (((a - d) * half).powi(2) + b * b).sqrt();
                let (lo, hi) = (mean - r, mean + r);
                if b == T::zero() {
                    return if a <= d {
                        (vec![a, d], vec![[T::one(), T::zero()], [T::zero(), T::one()]])
                    } else {
                        (vec![d, a], vec![[T::zero(), T::one()], [T::one(), T::zero()]])
                    };
                }
                let vec_for = |lambda: T| {
                    let (x, y) = (b, lambda - a);
                    let n = (x * x + y * y).sqrt();
                    [x / n, y / n]
                };
                (vec![lo, hi], vec![vec_for(lo), vec_for(hi)])
            }
            _ => unreachable!("observation dimension is 1 or 2"),
        }
    }

    /// Raises every eigenvalue below `floor` to `floor`. Returns the clamped
    /// matrix and whether any eigenvalue was raised.
    pub fn clamp_eigenvalues(&self, floor: T) -> (Self, bool) {
        let (values, vectors) = self.symmetric_eigen();
        if values.iter().all(|&v| v >= floor) {
            return (self.clone(), false);
        }
        let n = self.dim;
        let mut data = vec![T::zero(); n * n];
        for (lambda, v) in values.iter().zip(&vectors) {
            let lambda = lambda.max(floor);
            for i in 0..n {
                for j in 0..n {
                    data[i * n + j] = data[i * n + j] + lambda * v[i] * v[j];
                }
            }
        }
        (Self::from_accumulator(n, data), true)
    }
}

/// Solves `L z = r` for lower-triangular `L` (row-major) in place.
pub(crate) fn forward_substitute<T: Scalar>(l: &[T], dim: usize, r: &mut [T]) {
    for i in 0..dim {
        let mut s = r[i];
        for k in 0..i {
            s = s - l[i * dim + k] * r[k];
        }
        r[i] = s / l[i * dim + i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_rejects_rank_deficient() {
        let m = SymMatrix::from_row_major(2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(m.cholesky().is_none());
        let m = SymMatrix::<f64>::from_row_major(2, vec![4.0, 2.0, 2.0, 3.0]).unwrap();
        let l = m.cholesky().unwrap();
        assert!((l[0] - 2.0).abs() < 1e-15);
        assert!((l[2] - 1.0).abs() < 1e-15);
        assert!((l[3] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn asymmetric_matrix_rejected() {
        assert!(SymMatrix::from_row_major(2, vec![1.0, 0.5, 0.0, 1.0]).is_err());
    }

    #[test]
    fn eigen_reconstructs_matrix() {
        let m = SymMatrix::from_row_major(2, vec![2.0, 0.7, 0.7, 0.5]).unwrap();
        let (vals, vecs) = m.symmetric_eigen();
        assert!(vals[0] <= vals[1]);
        for i in 0..2 {
            for j in 0..2 {
                let r: f64 = (0..2).map(|k| vals[k] * vecs[k][i] * vecs[k][j]).sum();
                assert!((r - m.get(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn clamp_raises_small_eigenvalue_only() {
        let m = SymMatrix::<f64>::from_row_major(2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let (c, clamped) = m.clamp_eigenvalues(1e-4);
        assert!(clamped);
        let (vals, _) = c.symmetric_eigen();
        assert!((vals[0] - 1e-4).abs() < 1e-12);
        assert!((vals[1] - 2.0).abs() < 1e-12);
        let (same, clamped) = SymMatrix::identity(2).clamp_eigenvalues(1e-4);
        assert!(!clamped);
        assert_eq!(same, SymMatrix::<f64>::identity(2));
    }
}
