//! Small dense matrices.
//!
//! The parameter ODEs only ever touch `d × d` matrices with `d` of order one,
//! so a plain row-major container with LU and Jacobi eigensolvers covers
//! everything needed without pulling in a full linear-algebra stack.

use std::ops::{Index, IndexMut};

use num_complex::Complex;

use crate::error::GwptError;
use crate::scalar::{Elem, Real};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<E> {
    rows: usize,
    cols: usize,
    data: Vec<E>,
}

pub type RMat<T> = Mat<T>;
pub type CMat<T> = Mat<Complex<T>>;

impl<E: Copy> Mat<E> {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<E>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix data length mismatch");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> E) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[E] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [E] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[E] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn map<F: Copy>(&self, f: impl Fn(E) -> F) -> Mat<F> {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }
}

impl<E> Index<(usize, usize)> for Mat<E> {
    type Output = E;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &E {
        &self.data[i * self.cols + j]
    }
}

impl<E> IndexMut<(usize, usize)> for Mat<E> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut E {
        &mut self.data[i * self.cols + j]
    }
}

impl<E> Mat<E> {
    pub fn zeros<T: Real>(rows: usize, cols: usize) -> Self
    where
        E: Elem<T>,
    {
        Self { rows, cols, data: vec![E::zero(); rows * cols] }
    }

    pub fn identity<T: Real>(n: usize) -> Self
    where
        E: Elem<T>,
    {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = E::one();
        }
        m
    }

    pub fn diag<T: Real>(values: &[E]) -> Self
    where
        E: Elem<T>,
    {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn matmul<T: Real>(&self, other: &Self) -> Self
    where
        E: Elem<T>,
    {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec<T: Real>(&self, v: &[E]) -> Vec<E>
    where
        E: Elem<T>,
    {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        (0..self.rows).map(|i| self.row(i).iter().zip(v).fold(E::zero(), |acc, (&a, &x)| acc + a * x)).collect()
    }

    pub fn add<T: Real>(&self, other: &Self) -> Self
    where
        E: Elem<T>,
    {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub<T: Real>(&self, other: &Self) -> Self
    where
        E: Elem<T>,
    {
        self.zip_with(other, |a, b| a - b)
    }

    /// `self + s·other`.
    pub fn add_scaled<T: Real>(&self, other: &Self, s: T) -> Self
    where
        E: Elem<T>,
    {
        self.zip_with(other, |a, b| a + b.scale(s))
    }

    pub fn scale<T: Real>(&self, s: T) -> Self
    where
        E: Elem<T>,
    {
        self.map(|a| a.scale(s))
    }

    pub fn mul_elem<T: Real>(&self, s: E) -> Self
    where
        E: Elem<T>,
    {
        self.map(|a| a * s)
    }

    fn zip_with<T: Real>(&self, other: &Self, f: impl Fn(E, E) -> E) -> Self
    where
        E: Elem<T>,
    {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn conj<T: Real>(&self) -> Self
    where
        E: Elem<T>,
    {
        self.map(|a| a.conj())
    }

    /// Conjugate transpose.
    pub fn adjoint<T: Real>(&self) -> Self
    where
        E: Elem<T>,
    {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn trace<T: Real>(&self) -> E
    where
        E: Elem<T>,
    {
        (0..self.rows.min(self.cols)).fold(E::zero(), |acc, i| acc + self[(i, i)])
    }

    /// Induced ∞-norm: maximum absolute row sum.
    pub fn norm_inf<T: Real>(&self) -> T
    where
        E: Elem<T>,
    {
        (0..self.rows).map(|i| self.row(i).iter().fold(T::zero(), |acc, &a| acc + a.modulus())).fold(T::zero(), T::max)
    }

    /// Largest entry modulus.
    pub fn max_abs<T: Real>(&self) -> T
    where
        E: Elem<T>,
    {
        self.data.iter().fold(T::zero(), |acc, &a| acc.max(a.modulus()))
    }

    pub fn is_finite<T: Real>(&self) -> bool
    where
        E: Elem<T>,
    {
        self.data.iter().all(|&a| a.modulus().is_finite())
    }

    /// LU factorisation with partial pivoting.
    pub fn lu<T: Real>(&self) -> Result<Lu<E>, GwptError>
    where
        E: Elem<T>,
    {
        assert!(self.is_square(), "LU of a non-square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign_flip = false;
        let scale = self.max_abs().max(T::min_positive_value());
        for k in 0..n {
            let (p, pivot_mag) =
                (k..n)
                    .map(|i| (i, a[(i, k)].modulus()))
                    .fold((k, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pivot_mag > scale * T::epsilon() * T::lit(16.0)) {
                return Err(GwptError::Singular { what: "LU pivot" });
            }
            if p != k {
                for j in 0..n {
                    a.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign_flip = !sign_flip;
            }
            let pivot = a[(k, k)];
            for i in (k + 1)..n {
                let factor = a[(i, k)] / pivot;
                a[(i, k)] = factor;
                for j in (k + 1)..n {
                    let akj = a[(k, j)];
                    a[(i, j)] -= factor * akj;
                }
            }
        }
        Ok(Lu { lu: a, perm, sign_flip })
    }

    pub fn inverse<T: Real>(&self) -> Result<Self, GwptError>
    where
        E: Elem<T>,
    {
        self.lu()?.inverse()
    }

    pub fn det<T: Real>(&self) -> E
    where
        E: Elem<T>,
    {
        match self.lu() {
            Ok(lu) => lu.det(),
            Err(_) => E::zero(),
        }
    }
}

/// Result of [`Mat::lu`].
#[derive(Clone, Debug)]
pub struct Lu<E> {
    lu: Mat<E>,
    perm: Vec<usize>,
    sign_flip: bool,
}

impl<E> Lu<E> {
    pub fn solve<T: Real>(&self, b: &[E]) -> Vec<E>
    where
        E: Elem<T>,
    {
        let n = self.lu.rows;
        let mut x: Vec<E> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let l = self.lu[(i, j)];
                let xj = x[j];
                x[i] -= l * xj;
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                let u = self.lu[(i, j)];
                let xj = x[j];
                x[i] -= u * xj;
            }
            x[i] = x[i] / self.lu[(i, i)];
        }
        x
    }

    pub fn det<T: Real>(&self) -> E
    where
        E: Elem<T>,
    {
        let mut d = E::one();
        for i in 0..self.lu.rows {
            d *= self.lu[(i, i)];
        }
        if self.sign_flip {
            -d
        } else {
            d
        }
    }

    pub fn inverse<T: Real>(&self) -> Result<Mat<E>, GwptError>
    where
        E: Elem<T>,
    {
        let n = self.lu.rows;
        let mut inv = Mat::zeros(n, n);
        let mut e = vec![E::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = E::zero());
            e[j] = E::one();
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        if inv.is_finite() {
            Ok(inv)
        } else {
            Err(GwptError::Singular { what: "matrix inverse" })
        }
    }
}

/// Promotes a real matrix to a complex one.
pub fn complexify<T: Real>(m: &RMat<T>) -> CMat<T> {
    m.map(|x| Complex::new(x, T::zero()))
}

pub fn real_part<T: Real>(m: &CMat<T>) -> RMat<T> {
    m.map(|z| z.re)
}

pub fn imag_part<T: Real>(m: &CMat<T>) -> RMat<T> {
    m.map(|z| z.im)
}

/// ‖A − Aᵀ‖_∞ for any matrix (complex entries compared without conjugation).
pub fn symmetry_residual<T: Real, E: Elem<T>>(m: &Mat<E>) -> T {
    m.sub(&m.transpose()).norm_inf()
}

/// ‖A − A*‖_∞.
pub fn hermiticity_residual<T: Real, E: Elem<T>>(m: &Mat<E>) -> T {
    m.sub(&m.adjoint()).norm_inf()
}

/// Eigen-decomposition of a real symmetric matrix by cyclic Jacobi sweeps.
///
/// Returns eigenvalues (ascending) and the orthogonal matrix whose columns are
/// the matching eigenvectors.
pub fn symmetric_eigen<T: Real>(m: &RMat<T>) -> (Vec<T>, RMat<T>) {
    assert!(m.is_square());
    let n = m.rows();
    let mut a = m.clone();
    let mut v = RMat::<T>::identity(n);
    let tol = T::epsilon() * T::lit(0.5);
    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .fold(T::zero(), |acc, (i, j)| acc + a[(i, j)] * a[(i, j)]);
        let diag: T = (0..n).fold(T::zero(), |acc, i| acc + a[(i, i)] * a[(i, i)]);
        if off <= tol * tol * diag.max(T::min_positive_value()) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
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
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = RMat::from_fn(n, n, |i, j| v[(i, order[j])]);
    (values, vectors)
}

/// Principal square root of a symmetric positive-definite matrix.
pub fn spd_sqrt<T: Real>(m: &RMat<T>) -> Result<RMat<T>, GwptError> {
    let sym = symmetry_residual(m);
    if sym > T::lit(1e-10) * m.norm_inf().max(T::one()) {
        return Err(GwptError::NotSpd { what: "matrix is not symmetric" });
    }
    let (values, vectors) = symmetric_eigen(m);
    if values.iter().any(|&l| !(l > T::zero())) {
        return Err(GwptError::NotSpd { what: "non-positive eigenvalue" });
    }
    let root = RMat::diag(&values.iter().map(|l| l.sqrt()).collect::<Vec<_>>());
    let out = vectors.matmul(&root).matmul(&vectors.transpose());
    // symmetrise away rounding
    Ok(out.add(&out.transpose()).scale(T::lit(0.5)))
}

/// Determinant of a real SPD matrix via its eigenvalues (always positive).
pub fn spd_det<T: Real>(m: &RMat<T>) -> T {
    let (values, _) = symmetric_eigen(m);
    values.iter().fold(T::one(), |acc, &l| acc * l)
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}
