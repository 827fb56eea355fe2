//! Classical fourth-order Runge–Kutta for structured states.

use crate::scalar::Real;

/// A state that supports the linear combinations RK4 needs.
pub trait OdeState<T>: Clone {
    /// `self + h · k`.
    fn axpy(&self, h: T, k: &Self) -> Self;
}

/// One classical RK4 step of `ẏ = f(y)`.
pub fn rk4_step<T: Real, S: OdeState<T>>(y: &S, dt: T, f: impl Fn(&S) -> S) -> S {
    let half = dt * T::lit(0.5);
    let k1 = f(y);
    let k2 = f(&y.axpy(half, &k1));
    let k3 = f(&y.axpy(half, &k2));
    let k4 = f(&y.axpy(dt, &k3));
    let sixth = dt / T::lit(6.0);
    y.axpy(sixth, &k1).axpy(sixth * T::lit(2.0), &k2).axpy(sixth * T::lit(2.0), &k3).axpy(sixth, &k4)
}

impl<T: Real> OdeState<T> for Vec<T> {
    fn axpy(&self, h: T, k: &Self) -> Self {
        self.iter().zip(k).map(|(&a, &b)| a + h * b).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_fourth_order() {
        // ẏ = −y, y(0) = 1 to t = 1
        let err = |steps: usize| {
            let dt = 1.0 / steps as f64;
            let mut y = vec![1.0f64];
            for _ in 0..steps {
                y = rk4_step(&y, dt, |s| vec![-s[0]]);
            }
            (y[0] - (-1.0f64).exp()).abs()
        };
        let order = (err(10) / err(20)).log2();
        assert!((order - 4.0).abs() < 0.1, "order {order}");
    }
}
