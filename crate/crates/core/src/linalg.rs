//! Small dense matrices and rank-3 arrays.
//!
//! Dimensions here are tiny (the chart dimension, or its square), so the
//! routines favour clarity over blocking or vectorisation.

use std::ops::{Index, IndexMut};

use serde::Serialize;

use crate::error::{FinslerError, Result};
use crate::scalar::Real;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self {
            rows: r,
            cols: c,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn diagonal(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape");
        Self::from_fn(self.rows, other.cols, |i, j| {
            (0..self.cols).fold(T::zero(), |acc, k| acc + self[(i, k)] * other[(k, j)])
        })
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "mul_vec shape");
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    /// `u^T M v`.
    pub fn bilinear(&self, u: &[T], v: &[T]) -> T {
        let mv = self.mul_vec(v);
        u.iter()
            .zip(&mv)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m + v * v).sqrt()
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).fold(T::zero(), |acc, i| acc + self[(i, i)])
    }

    pub fn symmetry_defect(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn symmetrized(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| {
            (self[(i, j)] + self[(j, i)]) * T::lit(0.5)
        })
    }

    fn lu(&self) -> Result<(Self, Vec<usize>, bool)> {
        if !self.is_square() {
            return Err(FinslerError::DimensionMismatch {
                expected: self.rows,
                found: self.cols,
            });
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut odd = false;
        let scale = self.max_abs().max(T::min_positive_value());
        for k in 0..n {
            let (p, pivot) =
                (k..n)
                    .map(|i| (i, a[(i, k)].abs()))
                    .fold(
                        (k, T::zero()),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if pivot <= scale * T::unit_roundoff() {
                return Err(FinslerError::InvalidArgument("singular matrix".into()));
            }
            if p != k {
                for j in 0..n {
                    a.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                odd = !odd;
            }
            for i in k + 1..n {
                let f = a[(i, k)] / a[(k, k)];
                a[(i, k)] = f;
                for j in k + 1..n {
                    let t = a[(k, j)];
                    a[(i, j)] -= f * t;
                }
            }
        }
        Ok((a, perm, odd))
    }

    pub fn determinant(&self) -> T {
        match self.lu() {
            Ok((lu, _, odd)) => {
                let d = (0..self.rows).fold(T::one(), |acc, i| acc * lu[(i, i)]);
                if odd {
                    -d
                } else {
                    d
                }
            }
            Err(_) => T::zero(),
        }
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        let (lu, perm, _) = self.lu()?;
        Ok(lu_solve(&lu, &perm, b))
    }

    pub fn inverse(&self) -> Result<Self> {
        let (lu, perm, _) = self.lu()?;
        let n = self.rows;
        let mut inv = Self::zeros(n, n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = T::zero());
            e[j] = T::one();
            let col = lu_solve(&lu, &perm, &e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        Ok(inv)
    }

    /// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
    /// Eigenvalues ascend; eigenvectors are the columns of the returned matrix.
    pub fn symmetric_eigen(&self) -> (Vec<T>, Self) {
        assert!(self.is_square(), "symmetric_eigen on non-square matrix");
        let n = self.rows;
        let mut a = self.symmetrized();
        let mut v = Self::identity(n);
        for _sweep in 0..100 {
            let off = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .fold(T::zero(), |acc, (i, j)| acc + a[(i, j)] * a[(i, j)]);
            let eps = T::unit_roundoff();
            if off <= eps * eps * a.frobenius().powi(2) || off == T::zero() {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let g = T::lit(100.0) * apq.abs();
                    let (app, aqq) = (a[(p, p)].abs(), a[(q, q)].abs());
                    if app + g == app && aqq + g == aqq {
                        a[(p, q)] = T::zero();
                        a[(q, p)] = T::zero();
                        continue;
                    }
                    let h = a[(q, q)] - a[(p, p)];
                    let t = if h.abs() + g == h.abs() {
                        apq / h
                    } else {
                        let theta = h / (T::lit(2.0) * apq);
                        theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt())
                    };
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            a[(i, i)]
                .partial_cmp(&a[(j, j)])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let values = order.iter().map(|&i| a[(i, i)]).collect();
        let vectors = Self::from_fn(n, n, |r, c| v[(r, order[c])]);
        (values, vectors)
    }

    pub fn min_eigenvalue(&self) -> T {
        self.symmetric_eigen().0[0]
    }

    pub fn cast<U: Real>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
        }
    }
}

fn lu_solve<T: Real>(lu: &Matrix<T>, perm: &[usize], b: &[T]) -> Vec<T> {
    let n = lu.rows;
    let mut x: Vec<T> = perm.iter().map(|&p| b[p]).collect();
    for i in 0..n {
        for k in 0..i {
            let t = x[k];
            x[i] -= lu[(i, k)] * t;
        }
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            let t = x[k];
            x[i] -= lu[(i, k)] * t;
        }
        x[i] /= lu[(i, i)];
    }
    x
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Cube array indexed `[(i, j, k)]`; connection coefficients `Γ^i_jk` use the
/// first slot for the upper index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tensor3<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> Tensor3<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    data.push(f(i, j, k));
                }
            }
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn from_slice(n: usize, data: &[T]) -> Self {
        assert_eq!(data.len(), n * n * n, "Tensor3 length");
        Self {
            n,
            data: data.to_vec(),
        }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_fn(self.n, |i, j, k| self[(i, j, k)] + other[(i, j, k)])
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::from_fn(self.n, |i, j, k| self[(i, j, k)] - other[(i, j, k)])
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    /// `Γ^i_jk a^j b^k`.
    pub fn contract(&self, a: &[T], b: &[T]) -> Vec<T> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let mut acc = T::zero();
                for j in 0..n {
                    for k in 0..n {
                        acc += self[(i, j, k)] * a[j] * b[k];
                    }
                }
                acc
            })
            .collect()
    }

    /// `T^i_j = Γ^i_jk v^k`.
    pub fn contract_last(&self, v: &[T]) -> Matrix<T> {
        let n = self.n;
        Matrix::from_fn(n, n, |i, j| {
            (0..n).fold(T::zero(), |acc, k| acc + self[(i, j, k)] * v[k])
        })
    }

    /// Symmetrisation in the last two slots.
    pub fn symmetric_part(&self) -> Self {
        Self::from_fn(self.n, |i, j, k| {
            (self[(i, j, k)] + self[(i, k, j)]) * T::lit(0.5)
        })
    }

    /// Antisymmetrisation in the last two slots.
    pub fn antisymmetric_part(&self) -> Self {
        Self::from_fn(self.n, |i, j, k| {
            (self[(i, j, k)] - self[(i, k, j)]) * T::lit(0.5)
        })
    }

    /// Coordinate torsion `Γ^i_jk - Γ^i_kj`.
    pub fn torsion(&self) -> Self {
        Self::from_fn(self.n, |i, j, k| self[(i, j, k)] - self[(i, k, j)])
    }

    /// Largest deviation from total symmetry of a fully covariant array.
    pub fn total_symmetry_defect(&self) -> T {
        let n = self.n;
        let mut worst = T::zero();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let v = self[(i, j, k)];
                    for w in [
                        self[(i, k, j)],
                        self[(j, i, k)],
                        self[(j, k, i)],
                        self[(k, i, j)],
                        self[(k, j, i)],
                    ] {
                        worst = worst.max((v - w).abs());
                    }
                }
            }
        }
        worst
    }

    /// Raises the first index: `g^{il} A_ljk`.
    pub fn raise_first(&self, g_inv: &Matrix<T>) -> Self {
        let n = self.n;
        Self::from_fn(n, |i, j, k| {
            (0..n).fold(T::zero(), |acc, l| acc + g_inv[(i, l)] * self[(l, j, k)])
        })
    }

    /// Lowers the first index: `g_il Γ^l_jk`.
    pub fn lower_first(&self, g: &Matrix<T>) -> Self {
        self.raise_first(g)
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<T>>> {
        let n = self.n;
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|k| self[(i, j, k)]).collect())
                    .collect()
            })
            .collect()
    }
}

impl<T> Index<(usize, usize, usize)> for Tensor3<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j, k): (usize, usize, usize)) -> &T {
        &self.data[(i * self.n + j) * self.n + k]
    }
}

impl<T> IndexMut<(usize, usize, usize)> for Tensor3<T> {
    #[inline]
    fn index_mut(&mut self, (i, j, k): (usize, usize, usize)) -> &mut T {
        &mut self.data[(i * self.n + j) * self.n + k]
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&u, &v)| acc + u * v)
}

pub fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub fn max_abs_diff<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |m, (&u, &v)| m.max((u - v).abs()))
}
