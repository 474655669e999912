//! Small symmetric information matrices with parameter labels.
//!
//! Matrices here are at most 4×4, so inversion is plain Gauss-Jordan with
//! partial pivoting and eigenvalues come from cyclic Jacobi rotations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Relative eigenvalue threshold (against the trace) below which a block is singular.
pub const SINGULAR_RTOL: f64 = 1e-12;

/// Labels for the four-parameter vector (centroid, separation).
pub const THETA_LABELS: [&str; 4] = ["xbar", "ybar", "dx", "dy"];
/// Labels for the separation vector.
pub const ETA_LABELS: [&str; 2] = ["dx", "dy"];

/// Symmetric Fisher-information matrix, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherMatrix<T> {
    labels: Vec<String>,
    values: Vec<T>,
}

impl<T: Real> FisherMatrix<T> {
    /// Builds a matrix from row-major values; the result is symmetrized.
    pub fn new(labels: &[&str], values: Vec<T>) -> Self {
        let n = labels.len();
        assert_eq!(values.len(), n * n, "values must be n×n");
        let mut m = Self {
            labels: labels.iter().map(|s| s.to_string()).collect(),
            values,
        };
        m.symmetrize();
        m
    }

    pub fn zeros(labels: &[&str]) -> Self {
        let n = labels.len();
        Self::new(labels, vec![T::zero(); n * n])
    }

    pub fn from_diagonal(labels: &[&str], diag: &[T]) -> Self {
        let n = labels.len();
        assert_eq!(diag.len(), n);
        let mut v = vec![T::zero(); n * n];
        for (i, d) in diag.iter().enumerate() {
            v[i * n + i] = *d;
        }
        Self::new(labels, v)
    }

    fn symmetrize(&mut self) {
        let n = self.dim();
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = (self.values[i * n + j] + self.values[j * n + i]) / lit(2.0);
                self.values[i * n + j] = avg;
                self.values[j * n + i] = avg;
            }
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.dim() + j]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> T {
        self.diagonal().into_iter().sum()
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            labels: self.labels.clone(),
            values: self.values.iter().map(|v| *v * factor).collect(),
        }
    }

    /// Principal sub-matrix on the given indices.
    pub fn sub_block(&self, idx: &[usize]) -> Self {
        let labels: Vec<&str> = idx.iter().map(|&i| self.labels[i].as_str()).collect();
        let mut v = Vec::with_capacity(idx.len() * idx.len());
        for &i in idx {
            for &j in idx {
                v.push(self.get(i, j));
            }
        }
        Self::new(&labels, v)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Eigenvalues in ascending order (cyclic Jacobi).
    pub fn eigenvalues(&self) -> Vec<T> {
        let mut e = symmetric_eigenvalues(self.dim(), self.values.clone());
        e.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        e
    }

    /// PSD within `-rtol·|trace|` on the smallest eigenvalue.
    pub fn is_psd(&self, rtol: T) -> bool {
        let floor = -rtol * self.trace().abs();
        self.eigenvalues().first().is_none_or(|&e| e >= floor)
    }

    fn check_nonsingular(&self) -> Result<()> {
        let tr = self.trace().abs();
        let threshold = lit::<T>(SINGULAR_RTOL) * tr;
        let min = self.eigenvalues().first().copied().unwrap_or(T::zero());
        if !(tr > T::zero()) || min <= threshold {
            return Err(Error::Singular {
                min_eigenvalue: min.as_f64(),
                threshold: threshold.as_f64(),
            });
        }
        Ok(())
    }

    /// Inverse matrix. Fails when the smallest eigenvalue is below `1e-12·trace`.
    pub fn inverse(&self) -> Result<Self> {
        self.check_nonsingular()?;
        let n = self.dim();
        let inv = gauss_jordan_inverse(n, &self.values).ok_or(Error::Singular {
            min_eigenvalue: 0.0,
            threshold: 0.0,
        })?;
        Ok(Self {
            labels: self.labels.clone(),
            values: inv,
        }
        .tap_symmetrize())
    }

    fn tap_symmetrize(mut self) -> Self {
        self.symmetrize();
        self
    }
}

/// Inverse of a dense row-major `n×n` matrix, `None` when a pivot vanishes.
pub(crate) fn gauss_jordan_inverse<T: Real>(n: usize, a: &[T]) -> Option<Vec<T>> {
    let mut m = a.to_vec();
    let mut inv = vec![T::zero(); n * n];
    for i in 0..n {
        inv[i * n + i] = T::one();
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&r, &s| {
            m[r * n + col]
                .abs()
                .partial_cmp(&m[s * n + col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if m[pivot * n + col] == T::zero() {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                m.swap(pivot * n + k, col * n + k);
                inv.swap(pivot * n + k, col * n + k);
            }
        }
        let p = m[col * n + col];
        for k in 0..n {
            m[col * n + k] = m[col * n + k] / p;
            inv[col * n + k] = inv[col * n + k] / p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[r * n + col];
            if f == T::zero() {
                continue;
            }
            for k in 0..n {
                m[r * n + k] = m[r * n + k] - f * m[col * n + k];
                inv[r * n + k] = inv[r * n + k] - f * inv[col * n + k];
            }
        }
    }
    Some(inv)
}

/// Eigenvalues of a symmetric row-major matrix by cyclic Jacobi sweeps.
pub(crate) fn symmetric_eigenvalues<T: Real>(n: usize, mut a: Vec<T>) -> Vec<T> {
    let eps = T::epsilon();
    for _sweep in 0..64 {
        let mut off = T::zero();
        let mut scale = T::zero();
        for i in 0..n {
            for j in 0..n {
                let v = a[i * n + j] * a[i * n + j];
                if i == j {
                    scale = scale + v;
                } else {
                    off = off + v;
                }
            }
        }
        if off <= eps * eps * (scale + off) || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (lit::<T>(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}
