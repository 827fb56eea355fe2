//! External potentials `V : ℝ^d → ℝ` with analytic derivatives.
//!
//! The Galerkin matrix needs the second-order Taylor remainder
//! `V₂(s; q) = V(q+s) − V(q) − ∇V(q)·s − ½ sᵀ∇∇V(q) s` at shifts of size
//! `O(√ε)`, where the naive difference cancels catastrophically. Every
//! built-in potential therefore supplies a remainder evaluated without
//! cancellation.

use std::fmt;
use std::sync::Arc;

use crate::error::{GwptError, Result};
use crate::linalg::{dot, RMat};
use crate::scalar::Real;

/// Maximum polynomial degree accepted by [`BuiltinPotential::polynomial`].
pub const MAX_POLY_DEGREE: usize = 8;

/// Below this shift the trig remainders switch to their power series.
const SERIES_SWITCH: f64 = 0.1;

/// A smooth real potential with gradient and Hessian.
pub trait Potential<T: Real>: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[T]) -> T;

    fn gradient(&self, x: &[T]) -> Vec<T>;

    /// Symmetric Hessian matrix.
    fn hessian(&self, x: &[T]) -> RMat<T>;

    /// `V₂(s; q)` computed without cancellation, when available.
    fn exact_remainder2(&self, _q: &[T], _s: &[T]) -> Option<T> {
        None
    }

    /// One-dimensional factors when `V(x) = Σ_j v_j(x_j)`.
    fn axis_terms(&self) -> Option<Vec<Arc<dyn Potential<T>>>> {
        None
    }

    fn name(&self) -> String {
        "custom".to_string()
    }
}

/// Second-order Taylor remainder, using the exact form when the potential
/// provides one.
pub fn taylor_remainder2<T: Real>(v: &dyn Potential<T>, q: &[T], s: &[T]) -> T {
    v.exact_remainder2(q, s).unwrap_or_else(|| naive_remainder2(v, q, s))
}

/// `V(q+s) − V(q) − ∇V(q)·s − ½ sᵀ∇∇V(q)s` evaluated literally.
pub fn naive_remainder2<T: Real>(v: &dyn Potential<T>, q: &[T], s: &[T]) -> T {
    let shifted: Vec<T> = q.iter().zip(s).map(|(&a, &b)| a + b).collect();
    let grad = v.gradient(q);
    let hs = v.hessian(q).matvec(s);
    v.value(&shifted) - v.value(q) - dot(&grad, s) - T::lit(0.5) * dot(s, &hs)
}

/// `cos s − 1 + s²/2`.
pub fn rem_cos<T: Real>(s: T) -> T {
    if s.abs() < T::lit(SERIES_SWITCH) {
        // s⁴/4! − s⁶/6! + … through s¹⁴; truncation < 1e-17 relative at the switch
        let s2 = s * s;
        let mut term = s2 * s2 / T::lit(24.0);
        let mut sum = term;
        for m in 3..=7u32 {
            let (a, b) = (2 * m - 1, 2 * m);
            term = -term * s2 / T::lit((a * b) as f64);
            sum += term;
        }
        sum
    } else {
        s.cos() - T::one() + T::lit(0.5) * s * s
    }
}

/// `sin s − s`.
pub fn rem_sin<T: Real>(s: T) -> T {
    if s.abs() < T::lit(SERIES_SWITCH) {
        let s2 = s * s;
        let mut term = -s2 * s / T::lit(6.0);
        let mut sum = term;
        for m in 2..=7u32 {
            let (a, b) = (2 * m, 2 * m + 1);
            term = -term * s2 / T::lit((a * b) as f64);
            sum += term;
        }
        sum
    } else {
        s.sin() - s
    }
}

/// The potentials used by the bundled experiments.
///
/// All variants are sums of identical one-dimensional terms over the axes.
#[derive(Clone, Debug, PartialEq)]
pub enum BuiltinPotential<T> {
    /// `V(x) = Σ_j (1 − cos x_j)`.
    Cosine { dim: usize },
    /// `V(x) = ½|x|²`.
    Harmonic { dim: usize },
    /// `V(x) = Σ_j Σ_m a_m x_j^m`.
    Polynomial { dim: usize, coeffs: Vec<T> },
}

impl<T: Real> BuiltinPotential<T> {
    /// `1 − cos x` on the line.
    pub fn cosine1d() -> Self {
        BuiltinPotential::Cosine { dim: 1 }
    }

    /// `2 − cos x − cos y` on the plane.
    pub fn cosine2d() -> Self {
        BuiltinPotential::Cosine { dim: 2 }
    }

    pub fn harmonic(dim: usize) -> Self {
        BuiltinPotential::Harmonic { dim }
    }

    /// Per-axis polynomial with coefficients in ascending powers.
    pub fn polynomial(dim: usize, coeffs: Vec<T>) -> Result<Self> {
        let mut coeffs = coeffs;
        while coeffs.len() > 1 && coeffs.last() == Some(&T::zero()) {
            coeffs.pop();
        }
        if coeffs.len() > MAX_POLY_DEGREE + 1 {
            return Err(GwptError::InvalidArgument(format!(
                "polynomial degree {} exceeds {MAX_POLY_DEGREE}",
                coeffs.len() - 1
            )));
        }
        if dim == 0 {
            return Err(GwptError::InvalidArgument("dimension must be at least 1".into()));
        }
        Ok(BuiltinPotential::Polynomial { dim, coeffs })
    }

    fn axis_value(&self, x: T) -> T {
        match self {
            BuiltinPotential::Cosine { .. } => T::one() - x.cos(),
            BuiltinPotential::Harmonic { .. } => T::lit(0.5) * x * x,
            BuiltinPotential::Polynomial { coeffs, .. } => horner(coeffs, x),
        }
    }

    fn axis_d1(&self, x: T) -> T {
        match self {
            BuiltinPotential::Cosine { .. } => x.sin(),
            BuiltinPotential::Harmonic { .. } => x,
            BuiltinPotential::Polynomial { coeffs, .. } => horner(&derivative(coeffs), x),
        }
    }

    fn axis_d2(&self, x: T) -> T {
        match self {
            BuiltinPotential::Cosine { .. } => x.cos(),
            BuiltinPotential::Harmonic { .. } => T::one(),
            BuiltinPotential::Polynomial { coeffs, .. } => horner(&derivative(&derivative(coeffs)), x),
        }
    }

    fn axis_remainder(&self, q: T, s: T) -> T {
        match self {
            BuiltinPotential::Cosine { .. } => -q.cos() * rem_cos(s) + q.sin() * rem_sin(s),
            BuiltinPotential::Harmonic { .. } => T::zero(),
            BuiltinPotential::Polynomial { coeffs, .. } => {
                // Taylor coefficients at q, then the tail from order 3
                let shifted = taylor_shift(coeffs, q);
                let tail: Vec<T> =
                    shifted.iter().enumerate().map(|(m, &c)| if m < 3 { T::zero() } else { c }).collect();
                horner(&tail, s)
            }
        }
    }

    fn with_dim(&self, dim: usize) -> Self {
        match self {
            BuiltinPotential::Cosine { .. } => BuiltinPotential::Cosine { dim },
            BuiltinPotential::Harmonic { .. } => BuiltinPotential::Harmonic { dim },
            BuiltinPotential::Polynomial { coeffs, .. } => BuiltinPotential::Polynomial { dim, coeffs: coeffs.clone() },
        }
    }
}

impl<T: Real> Potential<T> for BuiltinPotential<T> {
    fn dim(&self) -> usize {
        match self {
            BuiltinPotential::Cosine { dim }
            | BuiltinPotential::Harmonic { dim }
            | BuiltinPotential::Polynomial { dim, .. } => *dim,
        }
    }

    fn value(&self, x: &[T]) -> T {
        x.iter().fold(T::zero(), |acc, &xi| acc + self.axis_value(xi))
    }

    fn gradient(&self, x: &[T]) -> Vec<T> {
        x.iter().map(|&xi| self.axis_d1(xi)).collect()
    }

    fn hessian(&self, x: &[T]) -> RMat<T> {
        RMat::diag(&x.iter().map(|&xi| self.axis_d2(xi)).collect::<Vec<_>>())
    }

    fn exact_remainder2(&self, q: &[T], s: &[T]) -> Option<T> {
        Some(q.iter().zip(s).fold(T::zero(), |acc, (&qi, &si)| acc + self.axis_remainder(qi, si)))
    }

    fn axis_terms(&self) -> Option<Vec<Arc<dyn Potential<T>>>> {
        let one: Arc<dyn Potential<T>> = Arc::new(self.with_dim(1));
        Some(vec![one; self.dim()])
    }

    fn name(&self) -> String {
        match self {
            BuiltinPotential::Cosine { dim: 1 } => "cosine1d".into(),
            BuiltinPotential::Cosine { dim: 2 } => "cosine2d".into(),
            BuiltinPotential::Cosine { dim } => format!("cosine{dim}d"),
            BuiltinPotential::Harmonic { .. } => "harmonic".into(),
            BuiltinPotential::Polynomial { .. } => "polynomial".into(),
        }
    }
}

impl<T: Real> fmt::Display for BuiltinPotential<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&Potential::name(self))
    }
}

type ScalarFn<T> = dyn Fn(&[T]) -> T + Send + Sync;
type VectorFn<T> = dyn Fn(&[T]) -> Vec<T> + Send + Sync;
type MatrixFn<T> = dyn Fn(&[T]) -> RMat<T> + Send + Sync;
type RemainderFn<T> = dyn Fn(&[T], &[T]) -> T + Send + Sync;

/// Potential assembled from user closures.
pub struct FnPotential<T> {
    dim: usize,
    value: Box<ScalarFn<T>>,
    gradient: Box<VectorFn<T>>,
    hessian: Box<MatrixFn<T>>,
    remainder: Option<Box<RemainderFn<T>>>,
}

impl<T: Real> FnPotential<T> {
    pub fn new(
        dim: usize,
        value: impl Fn(&[T]) -> T + Send + Sync + 'static,
        gradient: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static,
        hessian: impl Fn(&[T]) -> RMat<T> + Send + Sync + 'static,
    ) -> Self {
        Self { dim, value: Box::new(value), gradient: Box::new(gradient), hessian: Box::new(hessian), remainder: None }
    }

    pub fn with_remainder(mut self, r: impl Fn(&[T], &[T]) -> T + Send + Sync + 'static) -> Self {
        self.remainder = Some(Box::new(r));
        self
    }
}

impl<T: Real> Potential<T> for FnPotential<T> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[T]) -> T {
        (self.value)(x)
    }
    fn gradient(&self, x: &[T]) -> Vec<T> {
        (self.gradient)(x)
    }
    fn hessian(&self, x: &[T]) -> RMat<T> {
        (self.hessian)(x)
    }
    fn exact_remainder2(&self, q: &[T], s: &[T]) -> Option<T> {
        self.remainder.as_ref().map(|r| r(q, s))
    }
}

fn horner<T: Real>(coeffs: &[T], x: T) -> T {
    coeffs.iter().rev().fold(T::zero(), |acc, &c| acc * x + c)
}

fn derivative<T: Real>(coeffs: &[T]) -> Vec<T> {
    coeffs.iter().enumerate().skip(1).map(|(m, &c)| c * T::from_usize_lossy(m)).collect()
}

/// Coefficients of `p(q + s)` in powers of `s` (repeated synthetic division).
fn taylor_shift<T: Real>(coeffs: &[T], q: T) -> Vec<T> {
    let mut c = coeffs.to_vec();
    let n = c.len();
    for i in 0..n {
        for j in (i..n - 1).rev() {
            let next = c[j + 1];
            c[j] += q * next;
        }
    }
    c
}
