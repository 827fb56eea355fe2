//! Hagedorn wave packets in the scaled variable `η`.
//!
//! The basis is parametrised by `(q_h, p_h, Q, P, S)` with `δ = 1`. Starting
//! from `Q = I/√2`, `P = √2 i I` the packets are the Hermite functions with
//! envelope `e^{−|η|²}`, and the dynamics driven by `BBᵀ` keeps
//! `PQ⁻¹ = 2iI` fixed, so that envelope never changes.

use std::sync::Arc;

use num_complex::Complex;

use crate::error::{GwptError, Result};
use crate::linalg::{CMat, RMat};
use crate::multi_index::MultiIndexSet;
use crate::ode::OdeState;
use crate::quadrature::QuadratureRule;
use crate::scalar::{imag, re, Real};

/// Hagedorn parameters plus the continuously tracked branch of `(det Q)^{1/2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct HagedornParams<T: Real> {
    pub q: Vec<T>,
    pub p: Vec<T>,
    pub big_q: CMat<T>,
    pub big_p: CMat<T>,
    pub s: T,
    pub t: T,
    sqrt_det_q: Complex<T>,
}

impl<T: Real> HagedornParams<T> {
    /// Builds parameters from explicit values, picking the principal root of `det Q`.
    pub fn new(q: Vec<T>, p: Vec<T>, big_q: CMat<T>, big_p: CMat<T>) -> Result<Self> {
        let d = q.len();
        if p.len() != d || big_q.rows() != d || big_q.cols() != d || big_p.rows() != d || big_p.cols() != d {
            return Err(GwptError::InvalidArgument("Hagedorn parameters have inconsistent dimensions".into()));
        }
        let sqrt_det_q = big_q.lu()?.det().sqrt();
        Ok(Self { q, p, big_q, big_p, s: T::zero(), t: T::zero(), sqrt_det_q })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    /// The tracked branch of `(det Q)^{1/2}`.
    pub fn sqrt_det_q(&self) -> Complex<T> {
        self.sqrt_det_q
    }

    /// `Γ = PQ⁻¹`.
    pub fn gamma(&self) -> Result<CMat<T>> {
        Ok(self.big_p.matmul(&self.big_q.inverse()?))
    }

    /// Re-selects the root of `det Q` closest to the previously tracked one.
    pub fn track_branch(&mut self) {
        let root = self.big_q.det().sqrt();
        self.sqrt_det_q = if (root - self.sqrt_det_q).norm() <= (root + self.sqrt_det_q).norm() { root } else { -root };
    }

    /// `max(‖QᵀP − PᵀQ‖, ‖Q*P − P*Q − 2iI‖)`, entrywise.
    pub fn symplectic_residual(&self) -> T {
        let (q, p) = (&self.big_q, &self.big_p);
        let sym = q.transpose().matmul(p).sub(&p.transpose().matmul(q)).max_abs();
        let two_i = CMat::identity(self.dim()).mul_elem(imag(T::lit(2.0)));
        let herm = q.adjoint().matmul(p).sub(&p.adjoint().matmul(q)).sub(&two_i).max_abs();
        sym.max(herm)
    }
}

impl<T: Real> OdeState<T> for HagedornParams<T> {
    fn axpy(&self, h: T, k: &Self) -> Self {
        Self {
            q: self.q.iter().zip(&k.q).map(|(&a, &b)| a + h * b).collect(),
            p: self.p.iter().zip(&k.p).map(|(&a, &b)| a + h * b).collect(),
            big_q: self.big_q.add_scaled(&k.big_q, h),
            big_p: self.big_p.add_scaled(&k.big_p, h),
            s: self.s + h * k.s,
            t: self.t + h * k.t,
            sqrt_det_q: self.sqrt_det_q,
        }
    }
}

/// Initial parameters: `q_h = p_h = 0`, `Q = I/√2`, `P = √2 i I`, `S = 0`.
pub fn hwp_init<T: Real>(d: usize) -> HagedornParams<T> {
    let r = T::lit(0.5).sqrt();
    let big_q = CMat::identity(d).mul_elem(re(r));
    let big_p = CMat::identity(d).mul_elem(imag(T::lit(2.0).sqrt()));
    // det Q = 2^{−d/2} > 0
    let sqrt_det_q = re(r.powi(d as i32).sqrt());
    HagedornParams {
        q: vec![T::zero(); d],
        p: vec![T::zero(); d],
        big_q,
        big_p,
        s: T::zero(),
        t: T::zero(),
        sqrt_det_q,
    }
}

/// Time derivative of the Hagedorn parameters for a given `BBᵀ`.
pub fn hwp_rhs<T: Real>(h: &HagedornParams<T>, bbt: &RMat<T>) -> HagedornParams<T> {
    let m = bbt.map(re);
    let mp = bbt.matvec(&h.p);
    let mq = bbt.matvec(&h.q);
    let quad = |a: &[T], b: &[T]| a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y);
    HagedornParams {
        q: mp.clone(),
        p: mq.iter().map(|&v| T::lit(-4.0) * v).collect(),
        big_q: m.matmul(&h.big_p),
        big_p: m.matmul(&h.big_q).scale(T::lit(-4.0)),
        s: T::lit(0.5) * quad(&h.p, &mp) - T::lit(2.0) * quad(&h.q, &mq),
        t: T::one(),
        sqrt_det_q: re(T::zero()),
    }
}

/// Whether basis values carry the Gaussian envelope.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Envelope {
    /// True values `φ_k(η)`.
    Full,
    /// `φ_k(η)·e^{|η − q_h|²}`, a polynomial times a phase when `PQ⁻¹ = 2iI`.
    Stripped,
}

/// Basis values on a point set, `|K| × n_points`, row `i` following `K`.
#[derive(Clone, Debug)]
pub struct BasisEvaluation<T> {
    pub set: Arc<MultiIndexSet>,
    pub n_points: usize,
    pub values: Vec<Complex<T>>,
}

impl<T: Real> BasisEvaluation<T> {
    pub fn row(&self, i: usize) -> &[Complex<T>] {
        &self.values[i * self.n_points..(i + 1) * self.n_points]
    }

    /// `Σ_k c_k φ_k` at every point.
    pub fn combine(&self, c: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        if c.len() != self.set.len() {
            return Err(GwptError::LengthMismatch { expected: self.set.len(), got: c.len() });
        }
        let mut out = vec![Complex::new(T::zero(), T::zero()); self.n_points];
        for (i, &ck) in c.iter().enumerate() {
            if ck == Complex::new(T::zero(), T::zero()) {
                continue;
            }
            for (o, &v) in out.iter_mut().zip(self.row(i)) {
                *o += ck * v;
            }
        }
        Ok(out)
    }
}

fn check_points<T>(d: usize, points: &[T]) -> Result<usize> {
    if !points.len().is_multiple_of(d) {
        return Err(GwptError::LengthMismatch { expected: points.len() / d * d + d, got: points.len() });
    }
    Ok(points.len() / d)
}

/// Ground-state values `φ_0` at flat points (`d` coordinates per point).
pub fn phi0_eval<T: Real>(h: &HagedornParams<T>, points: &[T], envelope: Envelope) -> Result<Vec<Complex<T>>> {
    let d = h.dim();
    let n = check_points(d, points)?;
    let gamma = h.gamma()?;
    let pref = re(T::PI().powf(-T::from_usize_lossy(d) * T::lit(0.25))) / h.sqrt_det_q;
    let half_i = imag(T::lit(0.5));
    let mut y = vec![T::zero(); d];
    let mut out = Vec::with_capacity(n);
    for x in points.chunks_exact(d) {
        for j in 0..d {
            y[j] = x[j] - h.q[j];
        }
        let mut quad = Complex::new(T::zero(), T::zero());
        let mut lin = T::zero();
        let mut r2 = T::zero();
        for i in 0..d {
            let gy = (0..d).fold(Complex::new(T::zero(), T::zero()), |acc, j| acc + gamma[(i, j)] * y[j]);
            quad += gy * y[i];
            lin += h.p[i] * y[i];
            r2 += y[i] * y[i];
        }
        let mut expo = half_i * quad + imag(lin);
        if envelope == Envelope::Stripped {
            expo += re(r2);
        }
        out.push(pref * expo.exp());
    }
    Ok(out)
}

/// One step of the three-term recurrence producing `φ_{k+⟨j⟩}` from `φ_k`.
#[derive(Clone, Debug)]
struct Step<T> {
    target: usize,
    parent: usize,
    axis: usize,
    /// `1/√(k_j + 1)` for the parent index `k`.
    inv_scale: T,
    /// `(i, position of k − ⟨i⟩, √k_i)` for every nonzero `k_i` of the parent.
    lowers: Vec<(usize, usize, T)>,
}

/// Precomputed recurrence schedule for a truncation set.
#[derive(Clone, Debug)]
pub struct BasisEvaluator<T> {
    set: Arc<MultiIndexSet>,
    steps: Vec<Step<T>>,
}

impl<T: Real> BasisEvaluator<T> {
    pub fn new(set: Arc<MultiIndexSet>) -> Self {
        let d = set.dim();
        let mut steps = Vec::with_capacity(set.len().saturating_sub(1));
        for target in 1..set.len() {
            let k = set.get(target);
            let axis = (0..d).rev().find(|&j| k[j] > 0).expect("nonzero index");
            let parent = set.lowered(target, axis).expect("set is downward closed");
            let pk = set.get(parent);
            let lowers = (0..d)
                .filter(|&i| pk[i] > 0)
                .map(|i| {
                    let pos = set.lowered(parent, i).expect("set is downward closed");
                    (i, pos, T::from_usize_lossy(pk[i] as usize).sqrt())
                })
                .collect();
            let inv_scale = T::one() / T::from_usize_lossy(pk[axis] as usize + 1).sqrt();
            steps.push(Step { target, parent, axis, inv_scale, lowers });
        }
        Self { set, steps }
    }

    pub fn set(&self) -> &Arc<MultiIndexSet> {
        &self.set
    }

    /// Evaluates every basis function of the set at flat points.
    pub fn eval(&self, h: &HagedornParams<T>, points: &[T], envelope: Envelope) -> Result<BasisEvaluation<T>> {
        let d = h.dim();
        if d != self.set.dim() {
            return Err(GwptError::InvalidArgument(format!(
                "basis of dimension {} evaluated with {d}-dimensional parameters",
                self.set.dim()
            )));
        }
        let n = check_points(d, points)?;
        let total = self.set.len().checked_mul(n).ok_or(GwptError::TooLarge {
            what: "basis evaluation",
            got: usize::MAX,
            limit: usize::MAX,
        })?;
        let zero = Complex::new(T::zero(), T::zero());
        let mut values = vec![zero; total];
        values[..n].copy_from_slice(&phi0_eval(h, points, envelope)?);
        if self.steps.is_empty() {
            return Ok(BasisEvaluation { set: self.set.clone(), n_points: n, values });
        }
        let q_inv = h.big_q.inverse()?;
        let m = q_inv.matmul(&h.big_q.conj());
        let sqrt2 = T::lit(2.0).sqrt();
        // lin[j·n + pt] = √2 (Q⁻¹(x − q_h))_j
        let mut lin = vec![zero; d * n];
        for (pt, x) in points.chunks_exact(d).enumerate() {
            for j in 0..d {
                let mut acc = zero;
                for mm in 0..d {
                    acc += q_inv[(j, mm)] * (x[mm] - h.q[mm]);
                }
                lin[j * n + pt] = acc * sqrt2;
            }
        }
        for step in &self.steps {
            let (src, dst) = values.split_at_mut(step.target * n);
            let out = &mut dst[..n];
            let parent = &src[step.parent * n..(step.parent + 1) * n];
            let lj = &lin[step.axis * n..(step.axis + 1) * n];
            for ((o, &a), &f) in out.iter_mut().zip(lj).zip(parent) {
                *o = a * f;
            }
            for &(i, pos, sk) in &step.lowers {
                let coef = m[(step.axis, i)] * sk;
                for (o, &f) in out.iter_mut().zip(&src[pos * n..(pos + 1) * n]) {
                    *o -= coef * f;
                }
            }
            for o in out.iter_mut() {
                *o *= step.inv_scale;
            }
        }
        Ok(BasisEvaluation { set: self.set.clone(), n_points: n, values })
    }
}

/// Evaluates the basis of `set` at flat points.
pub fn recurrence_eval<T: Real>(
    h: &HagedornParams<T>,
    set: &Arc<MultiIndexSet>,
    points: &[T],
    envelope: Envelope,
) -> Result<BasisEvaluation<T>> {
    BasisEvaluator::new(set.clone()).eval(h, points, envelope)
}

/// Direction of a ladder operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ladder {
    /// `A†_j`: `(A†_j c)_k = √k_j c_{k−⟨j⟩}`.
    Raise,
    /// `A_j`: `(A_j c)_k = √(k_j+1) c_{k+⟨j⟩}`.
    Lower,
}

/// Applies a ladder operator along `axis` to a coefficient vector over `set`.
///
/// Raising fails with [`GwptError::IndexOverflow`] if a nonzero coefficient
/// would leave the set.
pub fn ladder_apply<T: Real>(
    dir: Ladder,
    axis: usize,
    set: &MultiIndexSet,
    c: &[Complex<T>],
) -> Result<Vec<Complex<T>>> {
    if c.len() != set.len() {
        return Err(GwptError::LengthMismatch { expected: set.len(), got: c.len() });
    }
    if axis >= set.dim() {
        return Err(GwptError::InvalidArgument(format!("axis {axis} out of range")));
    }
    let zero = Complex::new(T::zero(), T::zero());
    let mut out = vec![zero; c.len()];
    for (i, k) in set.iter().enumerate() {
        match dir {
            Ladder::Raise => {
                if c[i] != zero && set.raised(i, axis).is_none() {
                    let mut over = k.to_vec();
                    over[axis] += 1;
                    return Err(GwptError::IndexOverflow { index: over });
                }
                if let Some(lo) = set.lowered(i, axis) {
                    out[i] = c[lo] * T::from_usize_lossy(k[axis] as usize).sqrt();
                }
            }
            Ladder::Lower => {
                if let Some(up) = set.raised(i, axis) {
                    out[i] = c[up] * T::from_usize_lossy(k[axis] as usize + 1).sqrt();
                }
            }
        }
    }
    Ok(out)
}

fn quadrature_apply<T: Real>(
    m: &CMat<T>,
    axis: usize,
    set: &MultiIndexSet,
    c: &[Complex<T>],
) -> Result<Vec<Complex<T>>> {
    let r = T::lit(0.5).sqrt();
    let mut out = vec![Complex::new(T::zero(), T::zero()); c.len()];
    for mm in 0..set.dim() {
        let up = ladder_apply(Ladder::Raise, mm, set, c)?;
        let down = ladder_apply(Ladder::Lower, mm, set, c)?;
        let (a, b) = (m[(axis, mm)] * r, m[(axis, mm)].conj() * r);
        for ((o, u), w) in out.iter_mut().zip(up).zip(down) {
            *o += a * u + b * w;
        }
    }
    Ok(out)
}

/// `(η − q_h)_j` applied in coefficient space: `(1/√2)(QA† + Q̄A)_j`.
pub fn position_apply<T: Real>(
    h: &HagedornParams<T>,
    axis: usize,
    set: &MultiIndexSet,
    c: &[Complex<T>],
) -> Result<Vec<Complex<T>>> {
    quadrature_apply(&h.big_q, axis, set, c)
}

/// `(−i∂_η − p_h)_j` applied in coefficient space: `(1/√2)(PA† + P̄A)_j`.
pub fn momentum_apply<T: Real>(
    h: &HagedornParams<T>,
    axis: usize,
    set: &MultiIndexSet,
    c: &[Complex<T>],
) -> Result<Vec<Complex<T>>> {
    quadrature_apply(&h.big_p, axis, set, c)
}

/// `L²` norm of `(Ĥ_q − λ)φ_k` in one dimension, where
/// `Ĥ_q = α_I(½p̂² + 2η²)`. The norm is computed by quadrature on the
/// reconstructed function.
pub fn eigen_residual_1d<T: Real>(
    h: &HagedornParams<T>,
    alpha_i: T,
    k: u32,
    lambda: T,
    rule: &QuadratureRule<T>,
) -> Result<T> {
    if h.dim() != 1 || rule.dim() != 1 {
        return Err(GwptError::InvalidArgument("eigencheck is one-dimensional".into()));
    }
    let dim = crate::types::Dim::new(1)?;
    let set = Arc::new(MultiIndexSet::new(dim, k + 2, crate::multi_index::IndexNorm::L1));
    let zero = Complex::new(T::zero(), T::zero());
    let mut c = vec![zero; set.len()];
    c[k as usize] = re(T::one());
    let shift = |v: Vec<Complex<T>>, base: &[Complex<T>], s: T| -> Vec<Complex<T>> {
        v.into_iter().zip(base).map(|(a, &b)| a + b * s).collect()
    };
    let x1 = shift(position_apply(h, 0, &set, &c)?, &c, h.q[0]);
    let x2 = shift(position_apply(h, 0, &set, &x1)?, &x1, h.q[0]);
    let p1 = shift(momentum_apply(h, 0, &set, &c)?, &c, h.p[0]);
    let p2 = shift(momentum_apply(h, 0, &set, &p1)?, &p1, h.p[0]);
    let r: Vec<Complex<T>> =
        (0..c.len()).map(|i| (p2[i] * T::lit(0.5) + x2[i] * T::lit(2.0)) * alpha_i - c[i] * lambda).collect();
    // ∫|f|² with envelope e^{−2(η−q_h)²}: nodes q_h + x/√2, weights w/√2
    let r2 = T::lit(0.5).sqrt();
    let nodes: Vec<T> = rule.nodes().iter().map(|&x| h.q[0] + x * r2).collect();
    let vals = BasisEvaluator::new(set.clone()).eval(h, &nodes, Envelope::Stripped)?.combine(&r)?;
    let sq: Vec<T> = vals.iter().map(|v| v.norm_sqr()).collect();
    Ok((rule.integrate_real(&sq)? * r2).sqrt())
}

/// Residual of the eigenrelation `Ĥ_q φ_k = α_I(2k+1) φ_k`.
pub fn quadratic_eigencheck_1d<T: Real>(
    h: &HagedornParams<T>,
    alpha_i: T,
    k: u32,
    rule: &QuadratureRule<T>,
) -> Result<T> {
    let lambda = alpha_i * T::from_usize_lossy(2 * k as usize + 1);
    eigen_residual_1d(h, alpha_i, k, lambda, rule)
}
