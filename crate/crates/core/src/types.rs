use crate::error::{GwptError, Result};
use crate::scalar::Real;

/// Spatial dimension `d ≥ 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Dim(usize);

impl Dim {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(GwptError::InvalidArgument("dimension must be at least 1".into()));
        }
        Ok(Dim(d))
    }

    #[inline]
    pub fn get(self) -> usize {
        self.0
    }
}

impl TryFrom<usize> for Dim {
    type Error = GwptError;
    fn try_from(d: usize) -> Result<Self> {
        Dim::new(d)
    }
}

/// Semi-classical parameter, `0 < ε ≤ 1`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Epsilon<T>(T);

impl<T: Real> Epsilon<T> {
    pub fn new(eps: T) -> Result<Self> {
        if !(eps > T::zero() && eps <= T::one()) {
            return Err(GwptError::InvalidArgument(format!("epsilon must lie in (0, 1], got {eps}")));
        }
        Ok(Epsilon(eps))
    }

    #[inline]
    pub fn get(self) -> T {
        self.0
    }

    #[inline]
    pub fn sqrt(self) -> T {
        self.0.sqrt()
    }
}
