//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use gwpt_hwp::hagedorn::{position_apply, HagedornParams};
use gwpt_hwp::linalg::CMat;
use gwpt_hwp::MultiIndexSet;
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Exact solution of `iεψ_t = −(ε²/2)ψ'' + (x²/2)ψ` from
/// `ψ₀ = (2/(πε))^{1/4} e^{−(x−q₀)²/ε}`.
///
/// With `Y = cos t + 2i sin t`, the width is `α = Ẏ/(2Y)`, the amplitude is
/// `Y^{−1/2}` and the centre follows the classical orbit. Valid for
/// `t < π/2`, where the principal root of `Y` is continuous.
pub fn harmonic_exact_1d(x: f64, t: f64, q0: f64, eps: f64) -> Complex64 {
    let i = Complex64::i();
    let y = Complex64::new(t.cos(), 2.0 * t.sin());
    let ydot = Complex64::new(-t.sin(), 2.0 * t.cos());
    let alpha = ydot / (y * 2.0);
    let (q, p) = (q0 * t.cos(), -q0 * t.sin());
    let action = -0.25 * q0 * q0 * (2.0 * t).sin();
    let xi = x - q;
    let phase = (alpha * xi * xi + p * xi + action) * i / eps;
    (2.0 / (std::f64::consts::PI * eps)).powf(0.25) / y.sqrt() * phase.exp()
}

/// Product of one-dimensional harmonic solutions.
pub fn harmonic_exact(x: &[f64], t: f64, q0: &[f64], eps: f64) -> Complex64 {
    x.iter().zip(q0).map(|(&xj, &qj)| harmonic_exact_1d(xj, t, qj, eps)).product()
}

/// Matrix of `(η − q_h)_axis^power` on `set`, computed with ladder operators on a
/// set enlarged by `power` so truncation does not touch the block.
pub fn position_matrix(h: &HagedornParams<f64>, set: &MultiIndexSet, axis: usize, power: u32) -> CMat<f64> {
    let big = set.enlarged(power);
    let m = set.len();
    let mut out = CMat::zeros(m, m);
    for l in 0..m {
        let mut c = vec![Complex64::new(0.0, 0.0); big.len()];
        c[big.position(set.get(l)).unwrap()] = Complex64::new(1.0, 0.0);
        for _ in 0..power {
            c = position_apply(h, axis, &big, &c).unwrap();
        }
        for k in 0..m {
            out[(k, l)] = c[big.position(set.get(k)).unwrap()];
        }
    }
    out
}

/// `exp(A) v` by scaling and squaring a Taylor series; accurate to roundoff
/// for the moderate norms used here.
pub fn expm_apply(a: &CMat<f64>, v: &[Complex64]) -> Vec<Complex64> {
    let norm = a.norm_inf();
    let s = if norm > 0.25 { (norm / 0.25).log2().ceil() as i32 } else { 0 };
    let scaled = a.scale(0.5f64.powi(s));
    let n = a.rows();
    let mut e = CMat::<f64>::identity(n);
    let mut term = CMat::<f64>::identity(n);
    for k in 1..=30 {
        term = term.matmul(&scaled).scale(1.0 / k as f64);
        e = e.add(&term);
    }
    for _ in 0..s {
        e = e.matmul(&e);
    }
    e.matvec(v)
}

/// Seeded random Hermitian matrix with entries of size about one.
pub fn random_hermitian(n: usize, seed: u64) -> CMat<f64> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut m = CMat::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = Complex64::new(rng.gen_range(-1.0..1.0), 0.0);
        for j in 0..i {
            let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

/// Seeded random unit vector.
pub fn random_unit(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = StdRng::seed_from_u64(seed);
    let v: Vec<Complex64> =
        (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

/// `max_i |a_i − b_i|`.
pub fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Discrete `L²` norm with cell volume `cell`.
pub fn grid_norm(a: &[Complex64], cell: f64) -> f64 {
    (a.iter().map(|z| z.norm_sqr()).sum::<f64>() * cell).sqrt()
}
