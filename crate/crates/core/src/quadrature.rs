//! Gauss–Hermite rules for the weight `e^{−|x|²}` and their tensor products.

use num_complex::Complex;

use crate::error::{GwptError, Result};
use crate::scalar::Real;

/// Largest supported one-dimensional rule.
pub const MAX_NODES_1D: usize = 200;

/// Largest node count accepted for a tensor-product rule.
pub const MAX_TENSOR_NODES: usize = 10_000_000;

/// Nodes and positive weights of a quadrature rule on `ℝ^d`.
///
/// The weights absorb the factor `e^{−|x|²}`: `∫ f(x) e^{−|x|²} dx ≈ Σ w_i f(x_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule<T> {
    dim: usize,
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> QuadratureRule<T> {
    /// `N`-point physicists' Gauss–Hermite rule.
    pub fn gauss_hermite_1d(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_NODES_1D {
            return Err(GwptError::InvalidArgument(format!(
                "Gauss-Hermite rule size must be in 1..={MAX_NODES_1D}, got {n}"
            )));
        }
        let (mut nodes, _) = golub_welsch(n)?;
        for x in nodes.iter_mut() {
            *x = newton_polish(n, *x);
        }
        nodes.sort_by(|a: &T, b: &T| a.partial_cmp(b).expect("finite nodes"));
        // exact x → −x symmetry
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let m = (nodes[j] - nodes[i]) * T::lit(0.5);
            nodes[i] = -m;
            nodes[j] = m;
        }
        if n % 2 == 1 {
            nodes[n / 2] = T::zero();
        }
        let weights = nodes.iter().map(|&x| christoffel_weight(n, x)).collect::<Vec<_>>();
        let mut weights = weights;
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let m = (weights[i] + weights[j]) * T::lit(0.5);
            weights[i] = m;
            weights[j] = m;
        }
        Ok(Self { dim: 1, nodes, weights })
    }

    /// Cartesian product of a one-dimensional rule with itself `d` times.
    ///
    /// Node order: the first coordinate varies slowest.
    pub fn tensor(rule1d: &Self, d: usize) -> Result<Self> {
        if rule1d.dim != 1 {
            return Err(GwptError::InvalidArgument("tensor_rule expects a 1D rule".into()));
        }
        if d == 0 {
            return Err(GwptError::InvalidArgument("dimension must be at least 1".into()));
        }
        let n = rule1d.len();
        let total = (0..d).try_fold(1usize, |acc, _| acc.checked_mul(n));
        let total = match total {
            Some(t) if t <= MAX_TENSOR_NODES => t,
            _ => {
                return Err(GwptError::TooLarge {
                    what: "tensor-product node count",
                    got: total.unwrap_or(usize::MAX),
                    limit: MAX_TENSOR_NODES,
                })
            }
        };
        let mut nodes = Vec::with_capacity(total * d);
        let mut weights = Vec::with_capacity(total);
        let mut idx = vec![0usize; d];
        for _ in 0..total {
            let mut w = T::one();
            for &i in &idx {
                nodes.push(rule1d.nodes[i]);
                w *= rule1d.weights[i];
            }
            weights.push(w);
            // odometer, last coordinate fastest
            for pos in (0..d).rev() {
                idx[pos] += 1;
                if idx[pos] < n {
                    break;
                }
                idx[pos] = 0;
            }
        }
        Ok(Self { dim: d, nodes, weights })
    }

    /// `N` points per axis in `d` dimensions.
    pub fn gauss_hermite(n_per_axis: usize, d: usize) -> Result<Self> {
        let r = Self::gauss_hermite_1d(n_per_axis)?;
        if d == 1 {
            Ok(r)
        } else {
            Self::tensor(&r, d)
        }
    }

    /// Rule for the weight `e^{−|x|²/s²}`: nodes scaled by `s`, weights by `s^d`.
    pub fn rescaled(&self, s: T) -> Self {
        let sd = s.powi(self.dim as i32);
        Self {
            dim: self.dim,
            nodes: self.nodes.iter().map(|&x| x * s).collect(),
            weights: self.weights.iter().map(|&w| w * sd).collect(),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn node(&self, i: usize) -> &[T] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    /// Flat node storage, `len() × dim()` row-major.
    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// `Σ_i w_i f_i`, where `f_i = f(x_i)` excludes the Gaussian weight.
    pub fn integrate(&self, f_on_nodes: &[Complex<T>]) -> Result<Complex<T>> {
        if f_on_nodes.len() != self.len() {
            return Err(GwptError::LengthMismatch { expected: self.len(), got: f_on_nodes.len() });
        }
        Ok(self.weights.iter().zip(f_on_nodes).fold(Complex::new(T::zero(), T::zero()), |acc, (&w, &f)| acc + f * w))
    }

    pub fn integrate_real(&self, f_on_nodes: &[T]) -> Result<T> {
        if f_on_nodes.len() != self.len() {
            return Err(GwptError::LengthMismatch { expected: self.len(), got: f_on_nodes.len() });
        }
        Ok(self.weights.iter().zip(f_on_nodes).fold(T::zero(), |acc, (&w, &f)| acc + w * f))
    }

    /// Integrates a closure evaluated at each node.
    pub fn integrate_fn(&self, f: impl Fn(&[T]) -> T) -> T {
        (0..self.len()).fold(T::zero(), |acc, i| acc + self.weights[i] * f(self.node(i)))
    }
}

/// Orthonormal Hermite polynomials `p_0..=p_n` at `x` (w.r.t. `e^{−x²}`).
pub(crate) fn orthonormal_hermite<T: Real>(n: usize, x: T) -> Vec<T> {
    let mut p = Vec::with_capacity(n + 1);
    p.push(T::PI().powf(T::lit(-0.25)));
    if n >= 1 {
        p.push(T::lit(2.0).sqrt() * x * p[0]);
    }
    for k in 1..n {
        let kf = T::from_usize_lossy(k);
        let next = x * (T::lit(2.0) / (kf + T::one())).sqrt() * p[k] - (kf / (kf + T::one())).sqrt() * p[k - 1];
        p.push(next);
    }
    p
}

fn newton_polish<T: Real>(n: usize, mut x: T) -> T {
    for _ in 0..3 {
        let p = orthonormal_hermite(n, x);
        let deriv = (T::lit(2.0) * T::from_usize_lossy(n)).sqrt() * p[n - 1];
        if deriv == T::zero() {
            break;
        }
        let step = p[n] / deriv;
        x -= step;
        if step.abs() <= T::epsilon() * x.abs().max(T::one()) {
            break;
        }
    }
    x
}

fn christoffel_weight<T: Real>(n: usize, x: T) -> T {
    let p = orthonormal_hermite(n - 1, x);
    T::one() / p.iter().fold(T::zero(), |acc, &v| acc + v * v)
}

/// Eigenvalues and first eigenvector components of the Jacobi matrix of the
/// Hermite recurrence (zero diagonal, off-diagonal `√(k/2)`).
fn golub_welsch<T: Real>(n: usize) -> Result<(Vec<T>, Vec<T>)> {
    let mut d = vec![T::zero(); n];
    let mut e: Vec<T> =
        (0..n).map(|k| if k + 1 < n { (T::from_usize_lossy(k + 1) * T::lit(0.5)).sqrt() } else { T::zero() }).collect();
    let mut z = vec![T::zero(); n];
    z[0] = T::one();
    implicit_ql(&mut d, &mut e, &mut z)?;
    Ok((d, z))
}

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix;
/// `e[i]` couples rows `i` and `i+1`. Rotations are accumulated into the row
/// vector `z` (the first row of the eigenvector matrix).
fn implicit_ql<T: Real>(d: &mut [T], e: &mut [T], z: &mut [T]) -> Result<()> {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= T::epsilon() * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(GwptError::InvalidArgument("tridiagonal QL failed to converge".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (T::lit(2.0) * e[l]);
            let mut r = g.hypot(T::one());
            let sign_r = if g >= T::zero() { r.abs() } else { -r.abs() };
            g = d[m] - d[l] + e[l] / (g + sign_r);
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + T::lit(2.0) * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let fz = z[i + 1];
                z[i + 1] = s * z[i] + c * fz;
                z[i] = c * z[i] - s * fz;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::PI;

    /// ∫ x^m e^{−x²} dx = Γ((m+1)/2) for even m, 0 for odd m.
    fn moment(m: usize) -> f64 {
        if m % 2 == 1 {
            return 0.0;
        }
        // Γ(k + 1/2) = (2k−1)!! / 2^k · √π
        let k = m / 2;
        let mut v = PI.sqrt();
        for j in 0..k {
            v *= (2 * j + 1) as f64 / 2.0;
        }
        v
    }

    #[test]
    fn one_point_rule() {
        let r = QuadratureRule::<f64>::gauss_hermite_1d(1).unwrap();
        assert_eq!(r.node(0), &[0.0]);
        assert_relative_eq!(r.weights()[0], PI.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn two_point_rule_closed_form() {
        let r = QuadratureRule::<f64>::gauss_hermite_1d(2).unwrap();
        let s = 0.5f64.sqrt();
        assert_abs_diff_eq!(r.node(0)[0], -s, epsilon = 1e-15);
        assert_abs_diff_eq!(r.node(1)[0], s, epsilon = 1e-15);
        for &w in r.weights() {
            assert_relative_eq!(w, PI.sqrt() / 2.0, max_relative = 1e-14);
        }
        assert_relative_eq!(r.integrate_fn(|x| x[0] * x[0]), PI.sqrt() / 2.0, max_relative = 1e-14);
    }

    #[test]
    fn out_of_range_sizes_rejected() {
        assert!(QuadratureRule::<f64>::gauss_hermite_1d(0).is_err());
        assert!(QuadratureRule::<f64>::gauss_hermite_1d(201).is_err());
        assert!(QuadratureRule::<f64>::gauss_hermite_1d(200).is_ok());
    }

    #[test]
    fn integrate_constants_and_odd_functions() {
        let r = QuadratureRule::<f64>::gauss_hermite_1d(5).unwrap();
        let ones = vec![Complex::new(1.0, 0.0); 5];
        assert_relative_eq!(r.integrate(&ones).unwrap().re, PI.sqrt(), max_relative = 1e-14);
        let odd: Vec<_> = (0..5).map(|i| Complex::new(r.node(i)[0], 0.0)).collect();
        assert_abs_diff_eq!(r.integrate(&odd).unwrap().norm(), 0.0, epsilon = 1e-15);
        assert!(r.integrate(&ones[..4]).is_err());
    }

    #[test]
    fn hermite_h3_norm() {
        let r = QuadratureRule::<f64>::gauss_hermite_1d(4).unwrap();
        let f: Vec<_> = (0..4)
            .map(|i| {
                let x = r.node(i)[0];
                let h3 = 8.0 * x.powi(3) - 12.0 * x;
                Complex::new(h3 * h3, 0.0)
            })
            .collect();
        assert_relative_eq!(r.integrate(&f).unwrap().re, 48.0 * PI.sqrt(), max_relative = 1e-13);
    }

    #[test]
    fn exact_to_degree_two_n_minus_one() {
        for n in [1usize, 2, 3, 5, 8, 13, 20, 30, 50] {
            let r = QuadratureRule::<f64>::gauss_hermite_1d(n).unwrap();
            for m in 0..2 * n {
                let got = r.integrate_fn(|x| x[0].powi(m as i32));
                let exact = moment(m);
                // moments of high degree are large; compare relative to the
                // magnitude of the integrand mass Σ w |x|^m
                let mass = r.integrate_fn(|x| x[0].abs().powi(m as i32));
                let err = (got - exact).abs() / exact.abs().max(1.0).max(if exact == 0.0 { mass } else { 0.0 });
                assert!(err <= 1e-12, "n={n} m={m} got={got} exact={exact}");
            }
        }
    }

    #[test]
    fn large_rules_are_symmetric_positive_and_sum_to_sqrt_pi() {
        for n in [60usize, 100, 150, 200] {
            let r = QuadratureRule::<f64>::gauss_hermite_1d(n).unwrap();
            assert!(r.weights().iter().all(|&w| w > 0.0));
            let total: f64 = r.weights().iter().sum();
            assert_relative_eq!(total, PI.sqrt(), max_relative = 1e-12);
            for i in 0..n {
                assert_eq!(r.node(i)[0], -r.node(n - 1 - i)[0]);
                let p = orthonormal_hermite(n, r.node(i)[0]);
                let scale = p.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                assert!(p[n].abs() <= 1e-8 * scale, "n={n} i={i}");
            }
        }
    }

    #[test]
    fn tensor_rules() {
        let one = QuadratureRule::<f64>::gauss_hermite_1d(1).unwrap();
        let t = QuadratureRule::tensor(&one, 2).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.node(0), &[0.0, 0.0]);
        assert_relative_eq!(t.weights()[0], PI, max_relative = 1e-15);

        let two = QuadratureRule::<f64>::gauss_hermite_1d(2).unwrap();
        let t = QuadratureRule::tensor(&two, 2).unwrap();
        assert_eq!(t.len(), 4);
        assert_relative_eq!(t.weights().iter().sum::<f64>(), PI, max_relative = 1e-14);
        assert_relative_eq!(t.integrate_fn(|x| x[0] * x[0] * x[1] * x[1]), PI / 4.0, max_relative = 1e-14);
        // first coordinate slowest
        assert_eq!(t.node(1)[0], t.node(0)[0]);
        assert!(t.node(1)[1] > t.node(0)[1]);

        let big = QuadratureRule::<f64>::gauss_hermite_1d(200).unwrap();
        assert!(matches!(QuadratureRule::tensor(&big, 4), Err(GwptError::TooLarge { .. })));
        assert!(QuadratureRule::tensor(&t, 2).is_err());
    }

    #[test]
    fn rescaled_rule_integrates_narrower_gaussian() {
        // ∫ e^{−2x²} dx = √(π/2)
        let r = QuadratureRule::<f64>::gauss_hermite_1d(6).unwrap().rescaled(0.5f64.sqrt());
        assert_relative_eq!(r.integrate_fn(|_| 1.0), (PI / 2.0).sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn single_precision_rule() {
        let r = QuadratureRule::<f32>::gauss_hermite_1d(10).unwrap();
        let total: f32 = r.weights().iter().sum();
        assert!((total - std::f32::consts::PI.sqrt()).abs() < 1e-5);
    }
}
