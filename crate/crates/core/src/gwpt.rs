//! Gaussian wave-packet transform parameters and their dynamics.
//!
//! The transform writes the solution as
//! `ψ(x,t) = w(η,t) · exp{(i/ε)(ξᵀα_R ξ + pᵀξ + γ)}` with `ξ = x − q` and
//! `η = Bξ/√ε`. The parameters `(q, p, γ, α, B)` obey
//!
//! ```text
//! q̇ = p,   ṗ = −∇V(q),   γ̇ = ½pᵀp − V(q) + iε tr α_R,
//! α̇ = −2α² − ½∇∇V(q),   Ḃ = −2Bα_R.
//! ```

use std::io::Write;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{GwptError, Result};
use crate::linalg::{complexify, imag_part, real_part, spd_det, spd_sqrt, symmetry_residual, CMat, RMat};
use crate::ode::{rk4_step as rk4, OdeState};
use crate::potential::Potential;
use crate::scalar::{imag, Real};
use crate::types::Epsilon;

/// Normalised Gaussian initial datum
/// `ψ₀(x) = (2/(πε))^{d/4} exp{(i/ε)[(x−q₀)ᵀα₀(x−q₀) + p₀ᵀ(x−q₀) + γ₀]}`.
#[derive(Clone, Debug)]
pub struct GaussianInitialDatum<T: Real> {
    pub q0: Vec<T>,
    pub p0: Vec<T>,
    pub alpha0: CMat<T>,
    /// Real part of the initial phase; the imaginary part is fixed by normalisation.
    pub gamma_r0: T,
    pub eps: Epsilon<T>,
}

impl<T: Real> GaussianInitialDatum<T> {
    pub fn new(q0: Vec<T>, p0: Vec<T>, alpha0: CMat<T>, eps: Epsilon<T>) -> Result<Self> {
        let datum = Self { q0, p0, alpha0, gamma_r0: T::zero(), eps };
        datum.validate()?;
        Ok(datum)
    }

    /// Isotropic packet with `α₀ = i·I`.
    pub fn isotropic(q0: Vec<T>, p0: Vec<T>, eps: Epsilon<T>) -> Result<Self> {
        let d = q0.len();
        let alpha0 = CMat::identity(d).mul_elem(imag(T::one()));
        Self::new(q0, p0, alpha0, eps)
    }

    pub fn dim(&self) -> usize {
        self.q0.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.q0.len();
        if d == 0 || self.p0.len() != d || self.alpha0.rows() != d || self.alpha0.cols() != d {
            return Err(GwptError::InvalidArgument("initial datum has inconsistent dimensions".into()));
        }
        if symmetry_residual(&self.alpha0) > T::lit(1e-12) * self.alpha0.norm_inf().max(T::one()) {
            return Err(GwptError::InvalidArgument("alpha0 must be symmetric".into()));
        }
        spd_sqrt(&imag_part(&self.alpha0))?;
        Ok(())
    }

    /// `γ₀,I = −(ε/4) ln det Im α₀`.
    pub fn gamma_i0(&self) -> T {
        -self.eps.get() * T::lit(0.25) * spd_det(&imag_part(&self.alpha0)).ln()
    }

    /// Pointwise value of the initial wave function.
    pub fn eval(&self, x: &[T]) -> Complex<T> {
        let d = self.dim();
        let eps = self.eps.get();
        let xi: Vec<T> = x.iter().zip(&self.q0).map(|(&a, &b)| a - b).collect();
        let mut quad = Complex::new(T::zero(), T::zero());
        for i in 0..d {
            for j in 0..d {
                quad += self.alpha0[(i, j)] * (xi[i] * xi[j]);
            }
        }
        let lin = xi.iter().zip(&self.p0).fold(T::zero(), |acc, (&a, &b)| acc + a * b);
        let gamma = Complex::new(self.gamma_r0, self.gamma_i0());
        let prefactor = (T::lit(2.0) / (T::PI() * eps)).powf(T::from_usize_lossy(d) * T::lit(0.25));
        let phase = (quad + lin + gamma) * Complex::new(T::zero(), T::one() / eps);
        phase.exp() * prefactor
    }
}

/// State of the transform parameters at time `t`.
///
/// Used both as a state and, in [`gwpt_rhs`], as its own time derivative
/// (with `t` carrying `ṫ = 1`).
#[derive(Clone, Debug, PartialEq)]
pub struct GwptParams<T: Real> {
    pub q: Vec<T>,
    pub p: Vec<T>,
    pub gamma: Complex<T>,
    pub alpha: CMat<T>,
    pub b: RMat<T>,
    pub t: T,
}

impl<T: Real> GwptParams<T> {
    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn alpha_r(&self) -> RMat<T> {
        real_part(&self.alpha)
    }

    pub fn alpha_i(&self) -> RMat<T> {
        imag_part(&self.alpha)
    }

    /// `B Bᵀ`, the metric that drives the Hagedorn parameters.
    pub fn bbt(&self) -> RMat<T> {
        self.b.matmul(&self.b.transpose())
    }
}

impl<T: Real> OdeState<T> for GwptParams<T> {
    fn axpy(&self, h: T, k: &Self) -> Self {
        Self {
            q: self.q.iter().zip(&k.q).map(|(&a, &b)| a + h * b).collect(),
            p: self.p.iter().zip(&k.p).map(|(&a, &b)| a + h * b).collect(),
            gamma: self.gamma + k.gamma * h,
            alpha: self.alpha.add_scaled(&k.alpha, h),
            b: self.b.add_scaled(&k.b, h),
            t: self.t + h * k.t,
        }
    }
}

/// Transform parameters matching a Gaussian initial datum.
pub fn init_gwpt<T: Real>(datum: &GaussianInitialDatum<T>) -> Result<GwptParams<T>> {
    datum.validate()?;
    let b = spd_sqrt(&imag_part(&datum.alpha0))?;
    Ok(GwptParams {
        q: datum.q0.clone(),
        p: datum.p0.clone(),
        gamma: Complex::new(datum.gamma_r0, datum.gamma_i0()),
        alpha: datum.alpha0.clone(),
        b,
        t: T::zero(),
    })
}

/// Time derivative of the transform parameters.
pub fn gwpt_rhs<T: Real>(s: &GwptParams<T>, v: &dyn Potential<T>, eps: Epsilon<T>) -> GwptParams<T> {
    let d = s.dim();
    let grad = v.gradient(&s.q);
    let hess = v.hessian(&s.q);
    let alpha_r = s.alpha_r();
    let kinetic = s.p.iter().fold(T::zero(), |acc, &x| acc + x * x) * T::lit(0.5);
    let gamma_dot = Complex::new(kinetic - v.value(&s.q), eps.get() * alpha_r.trace());
    let alpha_dot = s.alpha.matmul(&s.alpha).scale(T::lit(-2.0)).sub(&complexify(&hess).scale(T::lit(0.5)));
    let b_dot = s.b.matmul(&alpha_r).scale(T::lit(-2.0));
    debug_assert_eq!(grad.len(), d);
    GwptParams {
        q: s.p.clone(),
        p: grad.iter().map(|&g| -g).collect(),
        gamma: gamma_dot,
        alpha: alpha_dot,
        b: b_dot,
        t: T::one(),
    }
}

/// One RK4 step of the parameter ODEs.
pub fn rk4_step<T: Real>(s: &GwptParams<T>, v: &dyn Potential<T>, eps: Epsilon<T>, dt: T) -> GwptParams<T> {
    rk4(s, dt, |y| gwpt_rhs(y, v, eps))
}

/// Diagnostic residuals of the transform invariants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    /// `‖α_I − BᵀB‖_∞`.
    pub alpha_bb_residual: f64,
    /// `|det(α_I)^{1/4} − exp(−γ_I/ε)|`.
    pub clean_lemma_residual: f64,
    /// `‖α − αᵀ‖_∞`.
    pub alpha_symmetry: f64,
}

pub fn check_identities<T: Real>(s: &GwptParams<T>, eps: Epsilon<T>) -> IdentityReport {
    let alpha_i = s.alpha_i();
    let btb = s.b.transpose().matmul(&s.b);
    let det = alpha_i.det();
    let lhs = if det > T::zero() { det.powf(T::lit(0.25)) } else { T::nan() };
    let rhs = (-s.gamma.im / eps.get()).exp();
    IdentityReport {
        alpha_bb_residual: alpha_i.sub(&btb).norm_inf().as_f64(),
        clean_lemma_residual: (lhs - rhs).abs().as_f64(),
        alpha_symmetry: symmetry_residual(&s.alpha).as_f64(),
    }
}

/// Writes a parameter trajectory as CSV: `t, q…, p…, Re γ, Im γ, Re/Im α
/// (row-major), B (row-major)`.
pub fn write_trajectory_csv<T: Real, W: Write>(out: &mut W, traj: &[GwptParams<T>]) -> Result<()> {
    let Some(first) = traj.first() else {
        return Ok(());
    };
    let d = first.dim();
    let mut header = vec!["t".to_string()];
    header.extend((0..d).map(|j| format!("q{j}")));
    header.extend((0..d).map(|j| format!("p{j}")));
    header.push("gamma_re".into());
    header.push("gamma_im".into());
    for i in 0..d {
        for j in 0..d {
            header.push(format!("alpha{i}{j}_re"));
            header.push(format!("alpha{i}{j}_im"));
        }
    }
    for i in 0..d {
        for j in 0..d {
            header.push(format!("b{i}{j}"));
        }
    }
    writeln!(out, "{}", header.join(","))?;
    for s in traj {
        let mut row = vec![s.t.as_f64()];
        row.extend(s.q.iter().map(|x| x.as_f64()));
        row.extend(s.p.iter().map(|x| x.as_f64()));
        row.push(s.gamma.re.as_f64());
        row.push(s.gamma.im.as_f64());
        for z in s.alpha.as_slice() {
            row.push(z.re.as_f64());
            row.push(z.im.as_f64());
        }
        row.extend(s.b.as_slice().iter().map(|x| x.as_f64()));
        let row: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
