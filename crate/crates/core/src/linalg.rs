//! Dense complex matrices and the spectral machinery used for operator norms.
//!
//! Row-major storage. The only decomposition needed by the crate is the
//! largest singular value, obtained from the Hermitian Gram matrix either by a
//! cyclic complex Jacobi sweep (small problems) or by power iteration.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_traits::{One, Zero};

use crate::scalar::{cr, czero, Real, C};

/// Gram dimension up to which the full Jacobi eigendecomposition is used.
pub const FULL_DECOMPOSITION_LIMIT: usize = 512;
/// Relative tolerance of the power-iteration fallback.
pub const POWER_ITERATION_TOL: f64 = 1e-10;
/// Iteration cap of the power-iteration fallback.
pub const POWER_ITERATION_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T: Real> {
    rows: usize,
    cols: usize,
    data: Vec<C<T>>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![czero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C<T>>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data has wrong length");
        Self { rows, cols, data }
    }

    pub fn diagonal(diag: &[C<T>]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    pub fn scalar(n: usize, c: C<T>) -> Self {
        Self::identity(n).scale(c)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[C<T>] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C<T>] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scale(&self, c: C<T>) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| *z * c).collect(),
        }
    }

    /// Conjugate transpose.
    pub fn conj_transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matvec(&self, v: &[C<T>]) -> Vec<C<T>> {
        assert_eq!(v.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(czero(), |acc, (a, b)| acc + *a * *b)
            })
            .collect()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d = *d + a * *b;
                }
            }
        }
        out
    }

    /// Kronecker product `self ⊗ other` in row-major factor order.
    pub fn kron(&self, other: &Self) -> Self {
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        Self::from_fn(rows, cols, |i, j| {
            self[(i / other.rows, j / other.cols)] * other[(i % other.rows, j % other.cols)]
        })
    }

    /// `diag(left) · self · diag(right)` for real diagonals.
    pub fn scale_rows_cols(&self, left: &[T], right: &[T]) -> Self {
        assert_eq!(left.len(), self.rows);
        assert_eq!(right.len(), self.cols);
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] * (left[i] * right[j]))
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, z| m.max(z.norm()))
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> T {
        if self.rows == 0 || self.cols == 0 {
            return T::zero();
        }
        let gram = if self.cols <= self.rows {
            self.conj_transpose().matmul(self)
        } else {
            self.matmul(&self.conj_transpose())
        };
        let top = if gram.rows <= FULL_DECOMPOSITION_LIMIT {
            hermitian_eigenvalues(&gram)
                .into_iter()
                .fold(T::zero(), |m, e| m.max(e))
        } else {
            power_iteration_top(&gram)
        };
        top.max(T::zero()).sqrt()
    }
}

impl<T: Real> Index<(usize, usize)> for Matrix<T> {
    type Output = C<T>;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C<T> {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Real> Add for &Matrix<T> {
    type Output = Matrix<T>;
    fn add(self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.shape(), rhs.shape(), "matrix add shape mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| *a + *b).collect(),
        }
    }
}

impl<T: Real> Sub for &Matrix<T> {
    type Output = Matrix<T>;
    fn sub(self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.shape(), rhs.shape(), "matrix sub shape mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| *a - *b).collect(),
        }
    }
}

impl<T: Real> Mul for &Matrix<T> {
    type Output = Matrix<T>;
    fn mul(self, rhs: &Matrix<T>) -> Matrix<T> {
        self.matmul(rhs)
    }
}

/// Eigenvalues of a Hermitian matrix by cyclic complex Jacobi rotations.
pub fn hermitian_eigenvalues<T: Real>(h: &Matrix<T>) -> Vec<T> {
    assert_eq!(h.rows, h.cols, "eigenvalues need a square matrix");
    let n = h.rows;
    let mut a = h.clone();
    // symmetrize against roundoff in the Gram product
    for i in 0..n {
        a[(i, i)] = cr(a[(i, i)].re);
        for j in (i + 1)..n {
            let avg = (a[(i, j)] + a[(j, i)].conj()).scale(T::lit(0.5));
            a[(i, j)] = avg;
            a[(j, i)] = avg.conj();
        }
    }
    let eps = T::epsilon();
    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut diag = T::zero();
        for i in 0..n {
            diag = diag + a[(i, i)].norm_sqr();
            for j in (i + 1)..n {
                off = off + a[(i, j)].norm_sqr();
            }
        }
        if off <= eps * eps * diag.max(T::min_positive_value()) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag <= T::min_positive_value() {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                if mag <= eps * T::lit(1e-3) * (app.abs() + aqq.abs()) {
                    a[(p, q)] = czero();
                    a[(q, p)] = czero();
                    continue;
                }
                let phase = apq / cr(mag);
                let tau = (aqq - app) / (T::lit(2.0) * mag);
                let t = if tau >= T::zero() {
                    T::one() / (tau + (T::one() + tau * tau).sqrt())
                } else {
                    -T::one() / (-tau + (T::one() + tau * tau).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                // U = diag(1, conj(phase)) · [[c, s], [-s, c]] restricted to (p, q)
                let u_pp = cr(c);
                let u_pq = cr(s);
                let u_qp = phase.conj() * cr(-s);
                let u_qq = phase.conj() * cr(c);
                // A <- A U
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * u_pp + akq * u_qp;
                    a[(k, q)] = akp * u_pq + akq * u_qq;
                }
                // A <- U^H A
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = u_pp.conj() * apk + u_qp.conj() * aqk;
                    a[(q, k)] = u_pq.conj() * apk + u_qq.conj() * aqk;
                }
                a[(p, q)] = czero();
                a[(q, p)] = czero();
                a[(p, p)] = cr(a[(p, p)].re);
                a[(q, q)] = cr(a[(q, q)].re);
            }
        }
    }
    (0..n).map(|i| a[(i, i)].re).collect()
}

/// Largest eigenvalue of a positive semidefinite Hermitian matrix.
pub fn power_iteration_top<T: Real>(h: &Matrix<T>) -> T {
    let n = h.rows;
    // deterministic, generic start vector with support on every coordinate
    let mut v: Vec<C<T>> = (0..n)
        .map(|i| cr(T::one() + T::lit(((i * 7919) % 97) as f64 / 97.0)))
        .collect();
    let norm = |v: &[C<T>]| v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
    let nv = norm(&v);
    v.iter_mut().for_each(|z| *z = *z / cr(nv));
    let tol = T::lit(POWER_ITERATION_TOL);
    let mut lambda = T::zero();
    for _ in 0..POWER_ITERATION_CAP {
        let w = h.matvec(&v);
        let nw = norm(&w);
        if nw <= T::min_positive_value() {
            return T::zero();
        }
        let next = nw;
        v = w.into_iter().map(|z| z / cr(nw)).collect();
        if (next - lambda).abs() <= tol * next {
            return next;
        }
        lambda = next;
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;

    fn c(re: f64, im: f64) -> C<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn identity_has_unit_norm() {
        assert!((Matrix::<f64>::identity(7).spectral_norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn hermitian_two_by_two() {
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3
        let m = Matrix::from_row_major(2, 2, vec![c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]);
        let mut ev = hermitian_eigenvalues(&m);
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn rank_one_norm_is_product_of_lengths() {
        let u = [c(1.0, 1.0), c(0.0, 2.0), c(-1.0, 0.5)];
        let v = [c(0.5, 0.0), c(1.0, -1.0)];
        let m = Matrix::from_fn(3, 2, |i, j| u[i] * v[j].conj());
        let nu: f64 = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let nv: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!((m.spectral_norm() - nu * nv).abs() < 1e-13);
    }

    #[test]
    fn power_iteration_agrees_with_jacobi() {
        let m = Matrix::from_fn(6, 6, |i, j| c(((i * 3 + j * 5) % 7) as f64 - 3.0, ((i + 2 * j) % 3) as f64));
        let gram = m.conj_transpose().matmul(&m);
        let jac = hermitian_eigenvalues(&gram).into_iter().fold(0.0, f64::max);
        let pow = power_iteration_top(&gram);
        assert!((jac - pow).abs() <= 1e-8 * jac);
    }

    #[test]
    fn kron_shapes_and_entries() {
        let a = Matrix::from_row_major(1, 2, vec![c(1.0, 0.0), c(2.0, 0.0)]);
        let b = Matrix::from_row_major(2, 1, vec![c(3.0, 0.0), c(0.0, 1.0)]);
        let k = a.kron(&b);
        assert_eq!(k.shape(), (2, 2));
        assert_eq!(k[(1, 1)], c(0.0, 2.0));
    }

    #[test]
    fn f32_norm_runs() {
        let m = Matrix::<f32>::identity(3).scale(Complex::new(2.0, 0.0));
        assert!((m.spectral_norm() - 2.0).abs() < 1e-5);
    }
}
