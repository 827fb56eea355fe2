//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All solvers are written against [`Real`], which is implemented for `f32`
//! and `f64`. The accuracy targets quoted throughout the tests assume `f64`;
//! `f32` instantiations are useful for smoke tests and low-precision sweeps.

use std::fmt::{Debug, Display, LowerExp};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating-point type usable by the solvers.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssign + Default + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in target float type")
    }

    /// Converts a count or index into `Self`.
    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in target float type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand for the complex type over a [`Real`].
pub type C<T> = Complex<T>;

/// Element of a [`crate::linalg::Mat`]: either a real or a complex scalar.
pub trait Elem<T: Real>:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_real(x: T) -> Self;
    fn conj(self) -> Self;
    /// Modulus, used for pivoting and norms.
    fn modulus(self) -> T;
    fn scale(self, s: T) -> Self;
}

impl<T: Real> Elem<T> for T {
    #[inline]
    fn zero() -> Self {
        T::zero()
    }
    #[inline]
    fn one() -> Self {
        T::one()
    }
    #[inline]
    fn from_real(x: T) -> Self {
        x
    }
    #[inline]
    fn conj(self) -> Self {
        self
    }
    #[inline]
    fn modulus(self) -> T {
        Float::abs(self)
    }
    #[inline]
    fn scale(self, s: T) -> Self {
        self * s
    }
}

impl<T: Real> Elem<T> for Complex<T> {
    #[inline]
    fn zero() -> Self {
        Complex::new(T::zero(), T::zero())
    }
    #[inline]
    fn one() -> Self {
        Complex::new(T::one(), T::zero())
    }
    #[inline]
    fn from_real(x: T) -> Self {
        Complex::new(x, T::zero())
    }
    #[inline]
    fn conj(self) -> Self {
        Complex::conj(&self)
    }
    #[inline]
    fn modulus(self) -> T {
        self.norm()
    }
    #[inline]
    fn scale(self, s: T) -> Self {
        Complex::new(self.re * s, self.im * s)
    }
}

/// `i·x` for a complex number.
#[inline]
pub fn times_i<T: Real>(z: Complex<T>) -> Complex<T> {
    Complex::new(-z.im, z.re)
}

/// Purely imaginary `i·y`.
#[inline]
pub fn imag<T: Real>(y: T) -> Complex<T> {
    Complex::new(T::zero(), y)
}

/// Real `x + 0i`.
#[inline]
pub fn re<T: Real>(x: T) -> Complex<T> {
    Complex::new(x, T::zero())
}
