//! Small dense linear algebra over [`Scalar`]: Cholesky, LU with partial
//! pivoting, triangular inversion, a one-sided Jacobi SVD and an orthonormal
//! complement. Sized for site systems (tens of unknowns) and desk-scale
//! covariance matrices (a few thousand rows).

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
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

    pub fn from_rows(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `self^T x`.
    pub fn tr_mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o = *o + a * xi;
            }
        }
        out
    }

    pub fn mul(&self, other: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for (o, &b) in out.row_mut(i).iter_mut().zip(other.row(k)) {
                    *o = *o + a * b;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix<T> {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    /// Induced 1-norm (maximum absolute column sum).
    pub fn norm1(&self) -> T {
        (0..self.cols)
            .map(|j| (0..self.rows).fold(T::zero(), |s, i| s + self[(i, j)].abs()))
            .fold(T::zero(), T::max)
    }
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

/// Lower Cholesky factor `L` with `A + jitter*I = L L^T`.
#[derive(Clone, Debug)]
pub struct Cholesky<T> {
    l: Matrix<T>,
}

impl<T: Scalar> Cholesky<T> {
    /// Factors a symmetric positive definite matrix; only the lower triangle
    /// of `a` is read. `jitter` is added to the diagonal.
    pub fn new(a: &Matrix<T>, jitter: T) -> Result<Self> {
        let n = a.rows();
        assert_eq!(n, a.cols(), "Cholesky needs a square matrix");
        let mut l = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let s = dot(&l.row(i)[..j], &l.row(j)[..j]);
                if i == j {
                    let d = a[(i, i)] + jitter - s;
                    // Pivots at roundoff level mean the matrix is singular
                    // to working precision.
                    let floor = T::epsilon() * T::lit(n as f64) * a[(i, i)].abs();
                    if !(d > floor) || !d.is_finite() {
                        return Err(Error::Factorization {
                            index: i,
                            pivot: d.as_f64(),
                            jitter: jitter.as_f64(),
                        });
                    }
                    l[(i, i)] = d.sqrt();
                } else {
                    l[(i, j)] = (a[(i, j)] - s) / l[(j, j)];
                }
            }
        }
        Ok(Self { l })
    }

    pub fn l(&self) -> &Matrix<T> {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    /// `L z` for a vector of i.i.d. standard normals `z` gives a draw with covariance `A`.
    pub fn lower_mul(&self, z: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(z.len(), n);
        (0..n).map(|i| dot(&self.l.row(i)[..=i], &z[..=i])).collect()
    }

    pub fn solve_lower(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut y = b.to_vec();
        for i in 0..n {
            let s = dot(&self.l.row(i)[..i], &y[..i]);
            y[i] = (y[i] - s) / self.l[(i, i)];
        }
        y
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut x = self.solve_lower(b);
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s = s - self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
    rcond: T,
}

impl<T: Scalar> Lu<T> {
    /// Factors `a` and estimates its reciprocal 1-norm condition number.
    /// Fails if a pivot vanishes or the estimate is below `min_rcond`.
    pub fn new(a: &Matrix<T>, min_rcond: T) -> Result<Self> {
        let n = a.rows();
        assert_eq!(n, a.cols(), "LU needs a square matrix");
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pivot > T::zero()) {
                return Err(Error::SingularSystem { rcond: 0.0 });
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
            }
            let d = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f != T::zero() {
                    for j in k + 1..n {
                        let u = lu[(k, j)];
                        lu[(i, j)] = lu[(i, j)] - f * u;
                    }
                }
            }
        }
        let mut out = Self {
            lu,
            perm,
            rcond: T::zero(),
        };
        // Explicit inverse norm: exact for the small systems this is used on.
        let mut inv_norm = T::zero();
        for j in 0..n {
            let mut e = vec![T::zero(); n];
            e[j] = T::one();
            let col = out.solve(&e);
            inv_norm = inv_norm.max(col.iter().fold(T::zero(), |s, &x| s + x.abs()));
        }
        out.rcond = T::one() / (a.norm1() * inv_norm);
        if !(out.rcond >= min_rcond) {
            return Err(Error::SingularSystem {
                rcond: out.rcond.as_f64(),
            });
        }
        Ok(out)
    }

    pub fn rcond(&self) -> T {
        self.rcond
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.rows();
        assert_eq!(b.len(), n);
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s = dot(&self.lu.row(i)[..i], &x[..i]);
            x[i] = x[i] - s;
        }
        for i in (0..n).rev() {
            let s = dot(&self.lu.row(i)[i + 1..], &x[i + 1..]);
            x[i] = (x[i] - s) / self.lu[(i, i)];
        }
        x
    }
}

/// Inverse of a nonsingular lower-triangular matrix (also lower triangular).
pub fn lower_triangular_inverse<T: Scalar>(l: &Matrix<T>) -> Matrix<T> {
    let n = l.rows();
    let mut inv = Matrix::zeros(n, n);
    for j in 0..n {
        inv[(j, j)] = T::one() / l[(j, j)];
        for i in j + 1..n {
            let mut s = T::zero();
            for k in j..i {
                s = s + l[(i, k)] * inv[(k, j)];
            }
            inv[(i, j)] = -s / l[(i, i)];
        }
    }
    inv
}

/// Singular values (descending) of a tall `m x n` matrix by one-sided Jacobi
/// rotations, which keeps small singular values accurate relative to the
/// largest.
pub fn singular_values<T: Scalar>(a: &Matrix<T>) -> Vec<T> {
    let n = a.cols();
    // Work on columns.
    let mut cols: Vec<Vec<T>> = (0..n)
        .map(|j| (0..a.rows()).map(|i| a[(i, j)]).collect())
        .collect();
    let tol = T::epsilon();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == T::zero() || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                for (x, y) in left[p].iter_mut().zip(right[0].iter_mut()) {
                    let (xp, xq) = (*x, *y);
                    *x = c * xp - s * xq;
                    *y = s * xp + c * xq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<T> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sv
}

/// Orthonormal basis of the complement of `b` (an `n x (n-1)` matrix), from
/// the Householder reflector that maps `b` onto a coordinate axis.
pub fn orthogonal_complement<T: Scalar>(b: &[T]) -> Matrix<T> {
    let n = b.len();
    let norm = dot(b, b).sqrt();
    let mut v = b.to_vec();
    let sign = if b[0] >= T::zero() { T::one() } else { -T::one() };
    v[0] = v[0] + sign * norm;
    let vv = dot(&v, &v);
    // H = I - 2 v v^T / (v^T v); columns 1..n span b's complement.
    Matrix::from_fn(n, n - 1, |i, j| {
        let col = j + 1;
        let delta = if i == col { T::one() } else { T::zero() };
        if vv == T::zero() {
            delta
        } else {
            delta - T::lit(2.0) * v[i] * v[col] / vv
        }
    })
}
