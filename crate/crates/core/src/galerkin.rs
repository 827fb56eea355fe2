//! Galerkin propagation of the Hagedorn coefficients.
//!
//! The residual potential in the scaled frame is
//! `U(η) = ε^{−3/2} V₂(√ε B⁻¹η; q)`, and the coefficients obey
//! `i ċ = √ε F c` with `f_kl = ⟨φ_k, U φ_l⟩`. The transform and basis
//! parameters are integrated together on a fine grid `Δt_gt`; the coefficient
//! RK4 runs on a coarse grid `Δt_c` whose stage times are fine-grid samples.

use std::io::Write;
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_complex::Complex;

use crate::error::{GwptError, Result};
use crate::gwpt::{check_identities, gwpt_rhs, init_gwpt, GaussianInitialDatum, GwptParams};
use crate::hagedorn::{hwp_init, hwp_rhs, BasisEvaluator, Envelope, HagedornParams};
use crate::linalg::{hermiticity_residual, CMat};
use crate::multi_index::MultiIndexSet;
use crate::ode::{rk4_step, OdeState};
use crate::potential::{taylor_remainder2, Potential};
use crate::quadrature::QuadratureRule;
use crate::scalar::{imag, Real};
use crate::types::Epsilon;

/// Invariant residual above which a run is aborted.
pub const INVARIANT_ABORT: f64 = 1e-6;

/// Largest basis-by-node table evaluated at once.
pub const MAX_TABLE_ENTRIES: usize = 1 << 26;

/// Points per chunk when reconstructing on large grids.
pub const RECONSTRUCT_CHUNK: usize = 4096;

/// Coefficients over a truncation set at time `t`.
#[derive(Clone, Debug)]
pub struct CoefficientVector<T> {
    pub set: Arc<MultiIndexSet>,
    pub c: Vec<Complex<T>>,
    pub t: T,
}

impl<T: Real> CoefficientVector<T> {
    /// Initial coefficients `c_0 = ε^{−d/4}`, all others zero.
    pub fn initial(set: Arc<MultiIndexSet>, eps: Epsilon<T>) -> Self {
        let d = set.dim();
        let mut c = vec![Complex::new(T::zero(), T::zero()); set.len()];
        c[0] = Complex::new(eps.get().powf(-T::from_usize_lossy(d) * T::lit(0.25)), T::zero());
        Self { set, c, t: T::zero() }
    }

    pub fn norm(&self) -> T {
        self.c.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt()
    }
}

/// Residual potential `U(η) = ε^{−3/2} V₂(√ε B⁻¹η; q)` at one point.
pub fn residue_u<T: Real>(
    v: &dyn Potential<T>,
    q: &[T],
    b_inv: &crate::linalg::RMat<T>,
    eps: Epsilon<T>,
    eta: &[T],
) -> T {
    let se = eps.sqrt();
    let s: Vec<T> = b_inv.matvec(eta).into_iter().map(|x| x * se).collect();
    taylor_remainder2(v, q, &s) / (eps.get() * se)
}

/// Assembled Galerkin matrix together with its Hermiticity defect before
/// symmetrisation.
#[derive(Clone, Debug)]
pub struct GalerkinMatrix<T> {
    pub f: CMat<T>,
    pub hermitian_residual: T,
}

/// Joint state of the transform and basis parameters.
#[derive(Clone, Debug)]
pub struct PacketState<T: Real> {
    pub gwpt: GwptParams<T>,
    pub hwp: HagedornParams<T>,
}

impl<T: Real> OdeState<T> for PacketState<T> {
    fn axpy(&self, h: T, k: &Self) -> Self {
        Self { gwpt: self.gwpt.axpy(h, &k.gwpt), hwp: self.hwp.axpy(h, &k.hwp) }
    }
}

/// One RK4 step of the coupled parameter system; `BBᵀ` comes from the
/// concurrent transform stage.
pub fn packet_step<T: Real>(s: &PacketState<T>, v: &dyn Potential<T>, eps: Epsilon<T>, dt: T) -> PacketState<T> {
    let mut next =
        rk4_step(s, dt, |y| PacketState { gwpt: gwpt_rhs(&y.gwpt, v, eps), hwp: hwp_rhs(&y.hwp, &y.gwpt.bbt()) });
    next.hwp.track_branch();
    next
}

/// Full solver state.
#[derive(Clone, Debug)]
pub struct SimulationState<T: Real> {
    pub packet: PacketState<T>,
    pub coeffs: CoefficientVector<T>,
    f_cache: Option<CMat<T>>,
}

impl<T: Real> SimulationState<T> {
    pub fn t(&self) -> T {
        self.coeffs.t
    }

    pub fn gwpt(&self) -> &GwptParams<T> {
        &self.packet.gwpt
    }

    pub fn hwp(&self) -> &HagedornParams<T> {
        &self.packet.hwp
    }
}

/// Running maxima of diagnostics and per-component timings.
#[derive(Clone, Debug, Default)]
pub struct Diagnostics {
    pub norm_initial: f64,
    pub norm_final: f64,
    pub max_symplectic: f64,
    pub max_clean_lemma: f64,
    pub max_alpha_bb: f64,
    pub max_hermitian: f64,
    pub fine_steps: usize,
    pub coarse_steps: usize,
    pub assemblies: usize,
    pub time_parameters: Duration,
    pub time_assembly: Duration,
    pub time_coefficients: Duration,
}

impl Diagnostics {
    /// `|‖c(T)‖/‖c(0)‖ − 1|`.
    pub fn norm_drift(&self) -> f64 {
        (self.norm_final / self.norm_initial - 1.0).abs()
    }
}

/// Discretisation settings of the propagator.
#[derive(Clone, Debug)]
pub struct SolverConfig<T> {
    pub eps: Epsilon<T>,
    pub set: Arc<MultiIndexSet>,
    pub nq_per_axis: usize,
    pub dt_c: T,
    pub dt_gt: T,
}

/// Propagator for one potential and discretisation.
pub struct Solver<T: Real> {
    cfg: SolverConfig<T>,
    potential: Arc<dyn Potential<T>>,
    evaluator: BasisEvaluator<T>,
    nodes: Vec<T>,
    weights: Vec<T>,
    fine_per_coarse: usize,
}

fn integer_ratio<T: Real>(num: T, den: T, what: &str) -> Result<usize> {
    let r = (num / den).round();
    if !(den > T::zero()) || !(r >= T::one()) || (r * den - num).abs() > T::lit(1e-9) * num.abs() {
        return Err(GwptError::TimeGrid(format!("{what}: {num} is not a positive multiple of {den}")));
    }
    r.to_usize().ok_or_else(|| GwptError::TimeGrid(format!("{what}: step count overflows")))
}

impl<T: Real> Solver<T> {
    pub fn new(cfg: SolverConfig<T>, potential: Arc<dyn Potential<T>>) -> Result<Self> {
        let d = cfg.set.dim();
        if potential.dim() != d {
            return Err(GwptError::InvalidArgument(format!(
                "potential is {}-dimensional but the basis is {d}-dimensional",
                potential.dim()
            )));
        }
        let fine_per_coarse = integer_ratio(cfg.dt_c, cfg.dt_gt, "coarse step")?;
        if fine_per_coarse % 2 != 0 {
            return Err(GwptError::TimeGrid(format!(
                "dt_c / dt_gt = {fine_per_coarse} must be even so the half step is a fine-grid sample"
            )));
        }
        let rule = QuadratureRule::<T>::gauss_hermite(cfg.nq_per_axis, d)?;
        let entries = rule.len().saturating_mul(cfg.set.len());
        if entries > MAX_TABLE_ENTRIES {
            return Err(GwptError::TooLarge { what: "quadrature table", got: entries, limit: MAX_TABLE_ENTRIES });
        }
        // weight e^{−2|η|²}: nodes x/√2, weights 2^{−d/2} w
        let r = T::lit(0.5).sqrt();
        let rescaled = rule.rescaled(r);
        Ok(Self {
            evaluator: BasisEvaluator::new(cfg.set.clone()),
            nodes: rescaled.nodes().to_vec(),
            weights: rescaled.weights().to_vec(),
            cfg,
            potential,
            fine_per_coarse,
        })
    }

    pub fn config(&self) -> &SolverConfig<T> {
        &self.cfg
    }

    pub fn potential(&self) -> &Arc<dyn Potential<T>> {
        &self.potential
    }

    pub fn initial_state(&self, datum: &GaussianInitialDatum<T>) -> Result<SimulationState<T>> {
        if datum.dim() != self.cfg.set.dim() {
            return Err(GwptError::InvalidArgument("initial datum dimension does not match the basis".into()));
        }
        Ok(SimulationState {
            packet: PacketState { gwpt: init_gwpt(datum)?, hwp: hwp_init(datum.dim()) },
            coeffs: CoefficientVector::initial(self.cfg.set.clone(), self.cfg.eps),
            f_cache: None,
        })
    }

    /// `f_kl = Σ_i w̃_i ḡ_k(η_i) U(η_i) g_l(η_i)` with envelope-stripped basis
    /// values, followed by `F ← (F + F*)/2`.
    pub fn assemble(&self, packet: &PacketState<T>) -> Result<GalerkinMatrix<T>> {
        let g = &packet.gwpt;
        let d = g.dim();
        let b_inv = g.b.inverse()?;
        let n = self.weights.len();
        let wu: Vec<T> = self
            .nodes
            .chunks_exact(d)
            .zip(&self.weights)
            .map(|(eta, &w)| w * residue_u(self.potential.as_ref(), &g.q, &b_inv, self.cfg.eps, eta))
            .collect();
        let ev = self.evaluator.eval(&packet.hwp, &self.nodes, Envelope::Stripped)?;
        let m = self.cfg.set.len();
        let weighted: Vec<Complex<T>> =
            (0..m).flat_map(|l| ev.row(l).iter().zip(&wu).map(|(&v, &w)| v * w).collect::<Vec<_>>()).collect();
        let mut f = CMat::zeros(m, m);
        for k in 0..m {
            let gk = ev.row(k);
            for l in 0..m {
                let wl = &weighted[l * n..(l + 1) * n];
                let mut acc = Complex::new(T::zero(), T::zero());
                for (a, b) in gk.iter().zip(wl) {
                    acc += a.conj() * b;
                }
                f[(k, l)] = acc;
            }
        }
        let hermitian_residual = hermiticity_residual(&f);
        let f = f.add(&f.adjoint()).scale(T::lit(0.5));
        Ok(GalerkinMatrix { f, hermitian_residual })
    }

    fn fine_steps(&self, packet: &mut PacketState<T>, count: usize, diag: &mut Diagnostics) -> Result<()> {
        let start = Instant::now();
        for _ in 0..count {
            *packet = packet_step(packet, self.potential.as_ref(), self.cfg.eps, self.cfg.dt_gt);
            diag.fine_steps += 1;
            let ids = check_identities(&packet.gwpt, self.cfg.eps);
            let symp = packet.hwp.symplectic_residual().as_f64();
            diag.max_alpha_bb = diag.max_alpha_bb.max(ids.alpha_bb_residual);
            diag.max_clean_lemma = diag.max_clean_lemma.max(ids.clean_lemma_residual);
            diag.max_symplectic = diag.max_symplectic.max(symp);
            let t = packet.gwpt.t.as_f64();
            for (name, value) in [
                ("alpha_i - B^T B", ids.alpha_bb_residual),
                ("det(alpha_i)^(1/4) - exp(-gamma_i/eps)", ids.clean_lemma_residual),
                ("symplectic", symp),
            ] {
                if !(value <= INVARIANT_ABORT) {
                    return Err(GwptError::InvariantViolation { name, value, threshold: INVARIANT_ABORT, t });
                }
            }
        }
        diag.time_parameters += start.elapsed();
        Ok(())
    }

    fn timed_assemble(&self, packet: &PacketState<T>, diag: &mut Diagnostics) -> Result<CMat<T>> {
        let start = Instant::now();
        let gm = self.assemble(packet)?;
        diag.assemblies += 1;
        diag.max_hermitian = diag.max_hermitian.max(gm.hermitian_residual.as_f64());
        diag.time_assembly += start.elapsed();
        Ok(gm.f)
    }

    /// Advances by one coarse step `Δt_c`.
    pub fn step(&self, state: &mut SimulationState<T>, diag: &mut Diagnostics) -> Result<()> {
        let f0 = match state.f_cache.take() {
            Some(f) => f,
            None => self.timed_assemble(&state.packet, diag)?,
        };
        let half = self.fine_per_coarse / 2;
        self.fine_steps(&mut state.packet, half, diag)?;
        let f_half = self.timed_assemble(&state.packet, diag)?;
        self.fine_steps(&mut state.packet, half, diag)?;
        let f1 = self.timed_assemble(&state.packet, diag)?;

        let start = Instant::now();
        let next = coefficient_step(&state.coeffs.c, [&f0, &f_half, &f1], self.cfg.dt_c, self.cfg.eps);
        state.coeffs.c = next;
        state.coeffs.t = state.packet.gwpt.t;
        state.f_cache = Some(f1);
        diag.coarse_steps += 1;
        diag.time_coefficients += start.elapsed();
        Ok(())
    }

    /// Advances to `t_final`, which must lie on the coarse grid, calling
    /// `observe` after every coarse step.
    pub fn advance_with(
        &self,
        state: &mut SimulationState<T>,
        t_final: T,
        mut observe: impl FnMut(&SimulationState<T>),
    ) -> Result<Diagnostics> {
        let span = t_final - state.t();
        let steps = if span == T::zero() { 0 } else { integer_ratio(span, self.cfg.dt_c, "final time")? };
        let mut diag = Diagnostics { norm_initial: state.coeffs.norm().as_f64(), ..Diagnostics::default() };
        for _ in 0..steps {
            self.step(state, &mut diag)?;
            observe(state);
        }
        diag.norm_final = state.coeffs.norm().as_f64();
        Ok(diag)
    }

    pub fn advance(&self, state: &mut SimulationState<T>, t_final: T) -> Result<Diagnostics> {
        self.advance_with(state, t_final, |_| {})
    }
}

/// One RK4 step of `ċ = −i√ε F(t) c` given `F` at the start, midpoint and
/// end of the step.
pub fn coefficient_step<T: Real>(c: &[Complex<T>], f: [&CMat<T>; 3], dt: T, eps: Epsilon<T>) -> Vec<Complex<T>> {
    let coef = imag(-eps.sqrt());
    let rhs =
        |f: &CMat<T>, c: &[Complex<T>]| -> Vec<Complex<T>> { f.matvec(c).into_iter().map(|z| z * coef).collect() };
    let axpy = |a: &[Complex<T>], h: T, b: &[Complex<T>]| -> Vec<Complex<T>> {
        a.iter().zip(b).map(|(&x, &y)| x + y * h).collect()
    };
    let h2 = dt * T::lit(0.5);
    let k1 = rhs(f[0], c);
    let k2 = rhs(f[1], &axpy(c, h2, &k1));
    let k3 = rhs(f[1], &axpy(c, h2, &k2));
    let k4 = rhs(f[2], &axpy(c, dt, &k3));
    let sixth = dt / T::lit(6.0);
    (0..c.len()).map(|i| c[i] + (k1[i] + (k2[i] + k3[i]) * T::lit(2.0) + k4[i]) * sixth).collect()
}

/// `w̃(η) = e^{iS_h} Σ_k c_k φ_k(η)` at flat points `η`, evaluated in chunks.
pub fn reconstruct_w<T: Real>(
    hwp: &HagedornParams<T>,
    coeffs: &CoefficientVector<T>,
    eta: &[T],
) -> Result<Vec<Complex<T>>> {
    let d = hwp.dim();
    let evaluator = BasisEvaluator::new(coeffs.set.clone());
    let phase = imag(hwp.s).exp();
    let mut out = Vec::with_capacity(eta.len() / d);
    for chunk in eta.chunks(RECONSTRUCT_CHUNK * d) {
        out.extend(evaluator.eval(hwp, chunk, Envelope::Full)?.combine(&coeffs.c)?.into_iter().map(|z| z * phase));
    }
    Ok(out)
}

/// `ψ(x) = w̃(η) exp{(i/ε)(ξᵀα_Rξ + pᵀξ + γ)}` at flat points `x`, with
/// `η = B(x − q)/√ε` and `w̃` as in [`reconstruct_w`].
pub fn reconstruct_psi<T: Real>(state: &SimulationState<T>, eps: Epsilon<T>, x: &[T]) -> Result<Vec<Complex<T>>> {
    let g = state.gwpt();
    let d = g.dim();
    if !x.len().is_multiple_of(d) {
        return Err(GwptError::LengthMismatch { expected: x.len() / d * d + d, got: x.len() });
    }
    let alpha_r = g.alpha_r();
    let inv_se = T::one() / eps.sqrt();
    let evaluator = BasisEvaluator::new(state.coeffs.set.clone());
    let mut out = Vec::with_capacity(x.len() / d);
    let mut eta = Vec::with_capacity(RECONSTRUCT_CHUNK * d);
    let mut phases = Vec::with_capacity(RECONSTRUCT_CHUNK);
    let mut xi = vec![T::zero(); d];
    for chunk in x.chunks(RECONSTRUCT_CHUNK * d) {
        eta.clear();
        phases.clear();
        for pt in chunk.chunks_exact(d) {
            for j in 0..d {
                xi[j] = pt[j] - g.q[j];
            }
            let bx = g.b.matvec(&xi);
            eta.extend(bx.into_iter().map(|v| v * inv_se));
            let mut quad = T::zero();
            let mut lin = T::zero();
            for i in 0..d {
                for j in 0..d {
                    quad += alpha_r[(i, j)] * xi[i] * xi[j];
                }
                lin += g.p[i] * xi[i];
            }
            let arg = (Complex::new(quad + lin, T::zero()) + g.gamma) * imag(T::one() / eps.get());
            phases.push((arg + imag(state.hwp().s)).exp());
        }
        let w = evaluator.eval(state.hwp(), &eta, Envelope::Full)?.combine(&state.coeffs.c)?;
        out.extend(w.into_iter().zip(&phases).map(|(a, &b)| a * b));
    }
    Ok(out)
}

/// `sqrt(Σ|a − b|² · cell)` for samples on a uniform grid with cell volume `cell`.
pub fn l2_error<T: Real>(a: &[Complex<T>], b: &[Complex<T>], cell: T) -> Result<T> {
    if a.len() != b.len() {
        return Err(GwptError::LengthMismatch { expected: a.len(), got: b.len() });
    }
    let sum = a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + (*x - *y).norm_sqr());
    Ok((sum * cell).sqrt())
}

/// Appends one coefficient snapshot as CSV rows `t, k_0, …, re, im`.
pub fn write_coefficients_csv<T: Real, W: Write>(
    out: &mut W,
    coeffs: &CoefficientVector<T>,
    header: bool,
) -> Result<()> {
    let d = coeffs.set.dim();
    if header {
        let ks: Vec<String> = (0..d).map(|j| format!("k{j}")).collect();
        writeln!(out, "t,{},re,im", ks.join(","))?;
    }
    for (k, c) in coeffs.set.iter().zip(&coeffs.c) {
        let ks: Vec<String> = k.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{},{},{},{}", coeffs.t.as_f64(), ks.join(","), c.re.as_f64(), c.im.as_f64())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::RMat;
    use crate::multi_index::IndexNorm;
    use crate::potential::BuiltinPotential;
    use crate::types::Dim;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    fn eps(e: f64) -> Epsilon<f64> {
        Epsilon::new(e).unwrap()
    }

    fn solver(v: BuiltinPotential<f64>, e: f64, n: u32, nq: usize, dt_c: f64, dt_gt: f64) -> Solver<f64> {
        let d = v.dim();
        let cfg = SolverConfig {
            eps: eps(e),
            set: Arc::new(MultiIndexSet::new(Dim::new(d).unwrap(), n, IndexNorm::L1)),
            nq_per_axis: nq,
            dt_c,
            dt_gt,
        };
        Solver::new(cfg, Arc::new(v)).unwrap()
    }

    #[test]
    fn residue_vanishes_for_harmonic() {
        let v = BuiltinPotential::<f64>::harmonic(2);
        let u = residue_u(&v, &[0.3, 0.1], &RMat::identity(2), eps(0.01), &[1.0, -2.0]);
        assert_abs_diff_eq!(u, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn residue_of_cosine_scales_as_cubic() {
        let v = BuiltinPotential::<f64>::cosine1d();
        let e = 1e-4;
        // q = π/2: V₂ ≈ −s³/6 so U ≈ −η³/6
        let u = residue_u(&v, &[FRAC_PI_2], &RMat::identity(1), eps(e), &[1.0]);
        assert_abs_diff_eq!(u, -1.0 / 6.0, epsilon = 1e-3);
    }

    #[test]
    fn harmonic_matrix_is_zero_and_coefficients_static() {
        let s = solver(BuiltinPotential::harmonic(1), 1.0 / 64.0, 6, 12, 1.0 / 64.0, 1.0 / 128.0);
        let datum = GaussianInitialDatum::isotropic(vec![1.0], vec![0.0], eps(1.0 / 64.0)).unwrap();
        let mut st = s.initial_state(&datum).unwrap();
        let c0 = st.coeffs.c.clone();
        let diag = s.advance(&mut st, 0.5).unwrap();
        assert_eq!(diag.coarse_steps, 32);
        assert_eq!(diag.fine_steps, 64);
        for (a, b) in st.coeffs.c.iter().zip(&c0) {
            assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn galerkin_matrix_is_hermitian_before_symmetrisation() {
        let s = solver(BuiltinPotential::cosine2d(), 1.0 / 64.0, 5, 12, 1.0 / 32.0, 1.0 / 128.0);
        let datum = GaussianInitialDatum::isotropic(vec![FRAC_PI_2, 1.0], vec![0.0, 0.2], eps(1.0 / 64.0)).unwrap();
        let mut st = s.initial_state(&datum).unwrap();
        s.advance(&mut st, 0.25).unwrap();
        let gm = s.assemble(&st.packet).unwrap();
        let scale = gm.f.max_abs();
        assert!(gm.hermitian_residual <= 1e-12 * scale.max(1.0), "{}", gm.hermitian_residual);
    }

    #[test]
    fn one_dimensional_matrix_entries_against_direct_integration() {
        // F at t = 0 with B = I and q = π/2
        let e = 1.0 / 32.0;
        let s = solver(BuiltinPotential::cosine1d(), e, 3, 40, 1.0 / 32.0, 1.0 / 64.0);
        let datum = GaussianInitialDatum::isotropic(vec![FRAC_PI_2], vec![0.0], eps(e)).unwrap();
        let st = s.initial_state(&datum).unwrap();
        let f = s.assemble(&st.packet).unwrap().f;
        let herm = |k: usize, x: f64| {
            let mut h = [1.0, 2.0 * x];
            for j in 1..k {
                let next = 2.0 * x * h[1] - 2.0 * j as f64 * h[0];
                h = [h[1], next];
            }
            if k == 0 {
                h[0]
            } else {
                h[1]
            }
        };
        let phi = |k: usize, eta: f64| {
            let x = 2.0f64.sqrt() * eta;
            let fact: f64 = (1..=k).map(|i| i as f64).product();
            2.0f64.powf(0.25) * herm(k, x) * (-x * x / 2.0).exp()
                / (2.0f64.powi(k as i32) * fact * std::f64::consts::PI.sqrt()).sqrt()
        };
        // V₂(s; π/2) = sin s − s
        let u = |eta: f64| {
            let s = e.sqrt() * eta;
            (s.sin() - s) / e.powf(1.5)
        };
        let h = 1e-3;
        for k in 0..4 {
            for l in 0..4 {
                let direct: f64 = (-8000..=8000)
                    .map(|i| {
                        let eta = i as f64 * h;
                        phi(k, eta) * u(eta) * phi(l, eta) * h
                    })
                    .sum();
                assert_abs_diff_eq!(f[(k, l)].re, direct, epsilon = 1e-9);
                assert_abs_diff_eq!(f[(k, l)].im, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rejects_misaligned_time_grids() {
        let cfg = |dt_c: f64, dt_gt: f64| SolverConfig {
            eps: eps(0.1),
            set: Arc::new(MultiIndexSet::new(Dim::new(1).unwrap(), 2, IndexNorm::L1)),
            nq_per_axis: 4,
            dt_c,
            dt_gt,
        };
        let v: Arc<dyn Potential<f64>> = Arc::new(BuiltinPotential::cosine1d());
        assert!(matches!(Solver::new(cfg(0.1, 0.1), v.clone()), Err(GwptError::TimeGrid(_))));
        assert!(matches!(Solver::new(cfg(0.1, 0.03), v.clone()), Err(GwptError::TimeGrid(_))));
        assert!(Solver::new(cfg(0.1, 0.05), v.clone()).is_ok());
        let s = Solver::new(cfg(0.1, 0.05), v).unwrap();
        let datum = GaussianInitialDatum::isotropic(vec![0.0], vec![0.0], eps(0.1)).unwrap();
        let mut st = s.initial_state(&datum).unwrap();
        assert!(matches!(s.advance(&mut st, 0.25), Err(GwptError::TimeGrid(_))));
    }

    #[test]
    fn unitary_propagation_and_reconstruction() {
        let e = 1.0 / 64.0;
        let s = solver(BuiltinPotential::cosine1d(), e, 10, 20, 1.0 / 64.0, 1.0 / 128.0);
        let datum = GaussianInitialDatum::isotropic(vec![FRAC_PI_2], vec![0.0], eps(e)).unwrap();
        let mut st = s.initial_state(&datum).unwrap();
        let xs: Vec<f64> =
            (0..2048).map(|i| -std::f64::consts::PI + i as f64 * 2.0 * std::f64::consts::PI / 2048.0).collect();
        let psi0 = reconstruct_psi(&st, eps(e), &xs).unwrap();
        let exact0: Vec<Complex<f64>> = xs.iter().map(|&x| datum.eval(&[x])).collect();
        let dx = 2.0 * std::f64::consts::PI / 2048.0;
        assert!(l2_error(&psi0, &exact0, dx).unwrap() < 1e-12);
        let diag = s.advance(&mut st, 0.5).unwrap();
        assert!(diag.norm_drift() < 1e-8, "{}", diag.norm_drift());
        let psi = reconstruct_psi(&st, eps(e), &xs).unwrap();
        let mass: f64 = psi.iter().map(|z| z.norm_sqr() * dx).sum();
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn coefficient_csv_rows() {
        let set = Arc::new(MultiIndexSet::new(Dim::new(2).unwrap(), 1, IndexNorm::L1));
        let c = CoefficientVector::initial(set, eps(0.25));
        let mut buf = Vec::new();
        write_coefficients_csv(&mut buf, &c, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("t,k0,k1,re,im\n0,0,0,2,0\n"));
    }
}
