//! Fourier split-step reference solver on a periodic box.
//!
//! The default scheme is Chin's forward fourth-order splitting 4A,
//!
//! ```text
//! e^{τ/6·V} e^{τ/2·T} e^{2τ/3·Ṽ} e^{τ/2·T} e^{τ/6·V},
//! Ṽ = V − (τ²/48)|∇V|²,
//! ```
//!
//! where a kinetic factor multiplies Fourier mode `k` by `e^{−iε|k|²τ_s/2}`
//! and a potential factor multiplies by `e^{−iV τ_s/ε}`. The correction in
//! `Ṽ` is `(τ²/48)[V,[T,V]]` rewritten for the `iε∂ₜ` convention. Yoshida's
//! triple-jump composition of Strang steps is provided as a cross-check.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read as _, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftNum, FftPlanner};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{GwptError, Result};
use crate::gwpt::GaussianInitialDatum;
use crate::linalg::CMat;
use crate::potential::Potential;
use crate::scalar::Real;
use crate::types::Epsilon;

/// Largest grid accepted by the reference solver.
pub const MAX_GRID_POINTS: usize = 1 << 26;

/// Relative boundary amplitude above which the initial datum is flagged.
pub const SUPPORT_TOLERANCE: f64 = 1e-12;

/// Uniform periodic grid on a box `Π_j [a_j, b_j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicGrid {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub points_per_axis: Vec<usize>,
}

impl PeriodicGrid {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, points_per_axis: Vec<usize>) -> Result<Self> {
        let d = lower.len();
        if d == 0 || upper.len() != d || points_per_axis.len() != d {
            return Err(GwptError::InvalidArgument("grid bounds and sizes must share one dimension".into()));
        }
        for j in 0..d {
            let n = points_per_axis[j];
            if n < 8 || !n.is_power_of_two() {
                return Err(GwptError::InvalidArgument(format!("grid axis {j}: {n} points, need a power of two ≥ 8")));
            }
            if !(upper[j] > lower[j]) {
                return Err(GwptError::InvalidArgument(format!("grid axis {j}: empty interval")));
            }
        }
        let total = points_per_axis.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n));
        match total {
            Some(t) if t <= MAX_GRID_POINTS => Ok(Self { lower, upper, points_per_axis }),
            _ => Err(GwptError::TooLarge {
                what: "reference grid",
                got: total.unwrap_or(usize::MAX),
                limit: MAX_GRID_POINTS,
            }),
        }
    }

    /// `[−π, π)^d` with `n` points per axis.
    pub fn symmetric(d: usize, n: usize) -> Result<Self> {
        let pi = std::f64::consts::PI;
        Self::new(vec![-pi; d], vec![pi; d], vec![n; d])
    }

    /// `[−π, π)^d` with spacing at most `dx`; the point count is rounded up
    /// to a power of two.
    pub fn with_spacing(d: usize, dx: f64) -> Result<Self> {
        if !(dx > 0.0) {
            return Err(GwptError::InvalidArgument("grid spacing must be positive".into()));
        }
        let raw = (2.0 * std::f64::consts::PI / dx * (1.0 - 1e-12)).ceil();
        if raw > MAX_GRID_POINTS as f64 {
            return Err(GwptError::TooLarge { what: "reference grid", got: usize::MAX, limit: MAX_GRID_POINTS });
        }
        Self::symmetric(d, (raw as usize).max(8).next_power_of_two())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn len(&self) -> usize {
        self.points_per_axis.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self, j: usize) -> f64 {
        (self.upper[j] - self.lower[j]) / self.points_per_axis[j] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|j| self.dx(j)).product()
    }

    /// Coordinates along one axis.
    pub fn axis(&self, j: usize) -> Vec<f64> {
        let dx = self.dx(j);
        (0..self.points_per_axis[j]).map(|i| self.lower[j] + i as f64 * dx).collect()
    }

    /// Angular wavenumbers along one axis in FFT order.
    pub fn wavenumbers(&self, j: usize) -> Vec<f64> {
        let n = self.points_per_axis[j];
        let scale = 2.0 * std::f64::consts::PI / (self.upper[j] - self.lower[j]);
        (0..n)
            .map(|i| {
                let m = if i < n / 2 { i as f64 } else { i as f64 - n as f64 };
                m * scale
            })
            .collect()
    }

    /// All grid points flattened, last axis fastest.
    pub fn points<T: Real>(&self) -> Vec<T> {
        let d = self.dim();
        let axes: Vec<Vec<f64>> = (0..d).map(|j| self.axis(j)).collect();
        let mut out = Vec::with_capacity(self.len() * d);
        let mut idx = vec![0usize; d];
        for _ in 0..self.len() {
            for j in 0..d {
                out.push(T::lit(axes[j][idx[j]]));
            }
            for j in (0..d).rev() {
                idx[j] += 1;
                if idx[j] < self.points_per_axis[j] {
                    break;
                }
                idx[j] = 0;
            }
        }
        out
    }

    /// The one-dimensional grid along axis `j`.
    pub fn axis_grid(&self, j: usize) -> Result<Self> {
        Self::new(vec![self.lower[j]], vec![self.upper[j]], vec![self.points_per_axis[j]])
    }
}

/// Samples of ψ on a periodic grid at time `t`.
#[derive(Clone, Debug)]
pub struct GridWaveFunction<T> {
    pub grid: PeriodicGrid,
    pub values: Vec<Complex<T>>,
    pub t: T,
    pub warnings: Vec<String>,
}

impl<T: Real> GridWaveFunction<T> {
    /// Discrete `L²` norm.
    pub fn norm(&self) -> T {
        let sum = self.values.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr());
        (sum * T::lit(self.grid.cell_volume())).sqrt()
    }
}

/// Samples a Gaussian datum and flags it if it is not negligible on the boundary.
pub fn init_grid_gaussian<T: Real>(
    grid: &PeriodicGrid,
    datum: &GaussianInitialDatum<T>,
) -> Result<GridWaveFunction<T>> {
    let d = grid.dim();
    if datum.dim() != d {
        return Err(GwptError::InvalidArgument("datum and grid dimensions differ".into()));
    }
    let pts = grid.points::<T>();
    let values: Vec<Complex<T>> = pts.chunks_exact(d).map(|x| datum.eval(x)).collect();
    let mut warnings = Vec::new();
    let peak = values.iter().fold(0.0f64, |m, z| m.max(z.norm().as_f64()));
    let boundary = boundary_max(grid, &values);
    if boundary > SUPPORT_TOLERANCE * peak {
        warnings.push(format!(
            "initial datum reaches the periodic boundary: |ψ| there is {:e} of the peak",
            boundary / peak
        ));
    }
    Ok(GridWaveFunction { grid: grid.clone(), values, t: T::zero(), warnings })
}

fn boundary_max<T: Real>(grid: &PeriodicGrid, values: &[Complex<T>]) -> f64 {
    let d = grid.dim();
    let shape = &grid.points_per_axis;
    let mut best = 0.0f64;
    let mut idx = vec![0usize; d];
    for v in values {
        if (0..d).any(|j| idx[j] == 0 || idx[j] + 1 == shape[j]) {
            best = best.max(v.norm().as_f64());
        }
        for j in (0..d).rev() {
            idx[j] += 1;
            if idx[j] < shape[j] {
                break;
            }
            idx[j] = 0;
        }
    }
    best
}

/// Fourth-order splitting variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitScheme {
    /// Chin's gradient-corrected forward scheme 4A.
    Chin4a,
    /// Yoshida's triple jump of Strang steps.
    Yoshida4,
}

impl std::fmt::Display for SplitScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SplitScheme::Chin4a => "chin4a",
            SplitScheme::Yoshida4 => "yoshida4",
        })
    }
}

/// Multi-dimensional FFT built from one-dimensional plans.
struct FftNd<T: FftNum> {
    shape: Vec<usize>,
    forward: Vec<Arc<dyn Fft<T>>>,
    inverse: Vec<Arc<dyn Fft<T>>>,
}

impl<T: Real + FftNum> FftNd<T> {
    fn new(shape: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            shape: shape.to_vec(),
            forward: shape.iter().map(|&n| planner.plan_fft_forward(n)).collect(),
            inverse: shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect(),
        }
    }

    /// Unnormalised transform in place.
    fn apply(&self, data: &mut [Complex<T>], inverse: bool) {
        let plans = if inverse { &self.inverse } else { &self.forward };
        let mut line = Vec::new();
        for (j, plan) in plans.iter().enumerate() {
            let n = self.shape[j];
            let stride: usize = self.shape[j + 1..].iter().product();
            if stride == 1 {
                plan.process(data);
                continue;
            }
            line.resize(n, Complex::new(T::zero(), T::zero()));
            let block = n * stride;
            for start in (0..data.len()).step_by(block) {
                for inner in 0..stride {
                    for i in 0..n {
                        line[i] = data[start + inner + i * stride];
                    }
                    plan.process(&mut line);
                    for i in 0..n {
                        data[start + inner + i * stride] = line[i];
                    }
                }
            }
        }
    }
}

/// Precomputed split-step propagator for one grid, potential and step size.
pub struct SplitStepper<T: Real + FftNum> {
    grid: PeriodicGrid,
    scheme: SplitScheme,
    fft: FftNd<T>,
    /// Kinetic multipliers, one per distinct substep weight.
    kinetic: Vec<Vec<Complex<T>>>,
    /// Potential multipliers, one per distinct substep.
    potential: Vec<Vec<Complex<T>>>,
    dt: T,
}

fn yoshida_weights() -> (f64, f64) {
    let c = 2f64.powf(1.0 / 3.0);
    (1.0 / (2.0 - c), -c / (2.0 - c))
}

impl<T: Real + FftNum> SplitStepper<T> {
    pub fn new(grid: &PeriodicGrid, v: &dyn Potential<T>, eps: Epsilon<T>, dt: T, scheme: SplitScheme) -> Result<Self> {
        let d = grid.dim();
        if v.dim() != d {
            return Err(GwptError::InvalidArgument("potential and grid dimensions differ".into()));
        }
        if !(dt > T::zero()) {
            return Err(GwptError::InvalidArgument("reference time step must be positive".into()));
        }
        let e = eps.get();
        let k2 = squared_wavenumbers(grid);
        let pts = grid.points::<T>();
        let vals: Vec<T> = pts.chunks_exact(d).map(|x| v.value(x)).collect();
        let kin = |w: f64| -> Vec<Complex<T>> {
            let s = T::lit(w) * dt;
            k2.iter().map(|&k| Complex::from_polar(T::one(), -e * T::lit(k) * s * T::lit(0.5))).collect()
        };
        let pot = |w: f64, vs: &[T]| -> Vec<Complex<T>> {
            let s = T::lit(w) * dt;
            vs.iter().map(|&vv| Complex::from_polar(T::one(), -vv * s / e)).collect()
        };
        let (kinetic, potential) = match scheme {
            SplitScheme::Chin4a => {
                let corr = dt * dt / T::lit(48.0);
                let tilde: Vec<T> = pts
                    .chunks_exact(d)
                    .zip(&vals)
                    .map(|(x, &vv)| {
                        let g = v.gradient(x);
                        vv - corr * g.iter().fold(T::zero(), |acc, &gi| acc + gi * gi)
                    })
                    .collect();
                (vec![kin(0.5)], vec![pot(1.0 / 6.0, &vals), pot(2.0 / 3.0, &tilde)])
            }
            SplitScheme::Yoshida4 => {
                let (w1, w0) = yoshida_weights();
                (vec![kin(w1), kin(w0)], vec![pot(w1 / 2.0, &vals), pot((w1 + w0) / 2.0, &vals), pot(w1, &vals)])
            }
        };
        Ok(Self { grid: grid.clone(), scheme, fft: FftNd::new(&grid.points_per_axis), kinetic, potential, dt })
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    fn mul(data: &mut [Complex<T>], m: &[Complex<T>]) {
        for (z, &f) in data.iter_mut().zip(m) {
            *z *= f;
        }
    }

    fn kinetic_step(&self, data: &mut [Complex<T>], which: usize) {
        self.fft.apply(data, false);
        let inv_n = T::one() / T::from_usize_lossy(data.len());
        for (z, &f) in data.iter_mut().zip(&self.kinetic[which]) {
            *z = *z * f * inv_n;
        }
        self.fft.apply(data, true);
    }

    /// One step of size `dt`.
    pub fn step(&self, psi: &mut GridWaveFunction<T>) {
        let data = &mut psi.values;
        match self.scheme {
            SplitScheme::Chin4a => {
                Self::mul(data, &self.potential[0]);
                self.kinetic_step(data, 0);
                Self::mul(data, &self.potential[1]);
                self.kinetic_step(data, 0);
                Self::mul(data, &self.potential[0]);
            }
            SplitScheme::Yoshida4 => {
                Self::mul(data, &self.potential[0]);
                self.kinetic_step(data, 0);
                Self::mul(data, &self.potential[1]);
                self.kinetic_step(data, 1);
                Self::mul(data, &self.potential[1]);
                self.kinetic_step(data, 0);
                Self::mul(data, &self.potential[0]);
            }
        }
        psi.t += self.dt;
    }

    /// `steps` consecutive steps.
    pub fn run(&self, psi: &mut GridWaveFunction<T>, steps: usize) -> Result<()> {
        if psi.grid != self.grid {
            return Err(GwptError::InvalidArgument("wave function lives on a different grid".into()));
        }
        for _ in 0..steps {
            self.step(psi);
        }
        Ok(())
    }
}

fn squared_wavenumbers(grid: &PeriodicGrid) -> Vec<f64> {
    let d = grid.dim();
    let ks: Vec<Vec<f64>> = (0..d).map(|j| grid.wavenumbers(j)).collect();
    let mut out = Vec::with_capacity(grid.len());
    let mut idx = vec![0usize; d];
    for _ in 0..grid.len() {
        out.push((0..d).map(|j| ks[j][idx[j]] * ks[j][idx[j]]).sum());
        for j in (0..d).rev() {
            idx[j] += 1;
            if idx[j] < grid.points_per_axis[j] {
                break;
            }
            idx[j] = 0;
        }
    }
    out
}

/// One step of a fourth-order splitting (convenience wrapper).
pub fn split_step_4<T: Real + FftNum>(
    psi: &mut GridWaveFunction<T>,
    v: &dyn Potential<T>,
    eps: Epsilon<T>,
    dt: T,
    scheme: SplitScheme,
) -> Result<()> {
    SplitStepper::new(&psi.grid.clone(), v, eps, dt, scheme)?.run(psi, 1)
}

/// How the reference is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceMethod {
    /// Split-step on the full tensor grid.
    Full,
    /// Outer product of one-dimensional runs; valid for axis-separable
    /// potentials and diagonal `α₀`.
    Separable,
    /// `Separable` when it applies, `Full` otherwise.
    Auto,
}

fn step_count(t_final: f64, dt: f64) -> Result<usize> {
    let r = (t_final / dt).round();
    if t_final < 0.0 || !(dt > 0.0) || (r * dt - t_final).abs() > 1e-9 * t_final.abs().max(dt) {
        return Err(GwptError::TimeGrid(format!("final time {t_final} is not a multiple of dt_ref = {dt}")));
    }
    Ok(r as usize)
}

/// Splits a datum with diagonal `α₀` into one-dimensional factors.
fn axis_data<T: Real>(datum: &GaussianInitialDatum<T>) -> Option<Vec<GaussianInitialDatum<T>>> {
    let d = datum.dim();
    for i in 0..d {
        for j in 0..d {
            if i != j && datum.alpha0[(i, j)] != Complex::new(T::zero(), T::zero()) {
                return None;
            }
        }
    }
    (0..d)
        .map(|j| {
            let alpha = CMat::from_vec(1, 1, vec![datum.alpha0[(j, j)]]);
            let mut one = GaussianInitialDatum::new(vec![datum.q0[j]], vec![datum.p0[j]], alpha, datum.eps).ok()?;
            if j == 0 {
                one.gamma_r0 = datum.gamma_r0;
            }
            Some(one)
        })
        .collect()
}

/// Reference integration that can be resumed, for time series.
///
/// Separable problems carry one stepper per axis and form the tensor
/// product only when [`ReferencePropagator::state`] is called.
pub struct ReferencePropagator<T: Real + FftNum> {
    grid: PeriodicGrid,
    dt_ref: f64,
    steps_done: usize,
    parts: Vec<(SplitStepper<T>, GridWaveFunction<T>)>,
}

impl<T: Real + FftNum> ReferencePropagator<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        datum: &GaussianInitialDatum<T>,
        v: &dyn Potential<T>,
        eps: Epsilon<T>,
        dt_ref: f64,
        grid: &PeriodicGrid,
        scheme: SplitScheme,
        method: ReferenceMethod,
    ) -> Result<Self> {
        let d = grid.dim();
        let separable = match method {
            ReferenceMethod::Full => None,
            ReferenceMethod::Separable | ReferenceMethod::Auto => {
                let parts = if d > 1 { v.axis_terms().zip(axis_data(datum)) } else { None };
                if parts.is_none() && method == ReferenceMethod::Separable && d > 1 {
                    return Err(GwptError::InvalidArgument(
                        "separable reference needs an axis-separable potential and diagonal alpha0".into(),
                    ));
                }
                parts
            }
        };
        let parts = match separable {
            None => {
                let psi = init_grid_gaussian(grid, datum)?;
                vec![(SplitStepper::new(grid, v, eps, T::lit(dt_ref), scheme)?, psi)]
            }
            Some((terms, data)) => (0..d)
                .map(|j| {
                    let g = grid.axis_grid(j)?;
                    let psi = init_grid_gaussian(&g, &data[j])?;
                    Ok((SplitStepper::new(&g, terms[j].as_ref(), eps, T::lit(dt_ref), scheme)?, psi))
                })
                .collect::<Result<Vec<_>>>()?,
        };
        Ok(Self { grid: grid.clone(), dt_ref, steps_done: 0, parts })
    }

    pub fn t(&self) -> f64 {
        self.steps_done as f64 * self.dt_ref
    }

    /// Steps forward to `t`, which must be a later multiple of `dt_ref`.
    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        let target = step_count(t, self.dt_ref)?;
        if target < self.steps_done {
            return Err(GwptError::TimeGrid(format!("cannot step back from t = {} to t = {t}", self.t())));
        }
        for (stepper, psi) in &mut self.parts {
            stepper.run(psi, target - self.steps_done)?;
        }
        self.steps_done = target;
        Ok(())
    }

    /// ψ on the full grid at the current time.
    pub fn state(&self) -> GridWaveFunction<T> {
        let t = T::lit(self.t());
        let warnings: Vec<String> = self.parts.iter().flat_map(|(_, p)| p.warnings.iter().cloned()).collect();
        if let [(_, psi)] = self.parts.as_slice() {
            return GridWaveFunction { grid: self.grid.clone(), values: psi.values.clone(), t, warnings };
        }
        let mut values = vec![Complex::new(T::one(), T::zero())];
        for (_, f) in &self.parts {
            values = values.iter().flat_map(|&a| f.values.iter().map(move |&b| a * b)).collect();
        }
        GridWaveFunction { grid: self.grid.clone(), values, t, warnings }
    }
}

/// Integrates from the sampled datum to `t_final` with step `dt_ref`.
#[allow(clippy::too_many_arguments)]
pub fn propagate_reference<T: Real + FftNum>(
    datum: &GaussianInitialDatum<T>,
    v: &dyn Potential<T>,
    eps: Epsilon<T>,
    t_final: f64,
    dt_ref: f64,
    grid: &PeriodicGrid,
    scheme: SplitScheme,
    method: ReferenceMethod,
) -> Result<GridWaveFunction<T>> {
    step_count(t_final, dt_ref)?;
    let mut prop = ReferencePropagator::new(datum, v, eps, dt_ref, grid, scheme, method)?;
    prop.advance_to(t_final)?;
    let mut psi = prop.state();
    psi.t = T::lit(t_final);
    Ok(psi)
}

/// Everything that determines a cached reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceKey {
    pub example: String,
    pub eps: f64,
    pub t_final: f64,
    pub dt_ref: f64,
    pub grid: PeriodicGrid,
    pub scheme: SplitScheme,
    pub q0: Vec<f64>,
    pub p0: Vec<f64>,
    /// `α₀` as row-major `(re, im)` pairs.
    pub alpha0: Vec<(f64, f64)>,
}

impl ReferenceKey {
    pub fn new<T: Real>(
        example: &str,
        datum: &GaussianInitialDatum<T>,
        t_final: f64,
        dt_ref: f64,
        grid: &PeriodicGrid,
        scheme: SplitScheme,
    ) -> Self {
        Self {
            example: example.to_string(),
            eps: datum.eps.get().as_f64(),
            t_final,
            dt_ref,
            grid: grid.clone(),
            scheme,
            q0: datum.q0.iter().map(|x| x.as_f64()).collect(),
            p0: datum.p0.iter().map(|x| x.as_f64()).collect(),
            alpha0: datum.alpha0.as_slice().iter().map(|z| (z.re.as_f64(), z.im.as_f64())).collect(),
        }
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("key serialises");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

const CACHE_MAGIC: &str = "gwpt-hwp-reference v1";

/// Directory of reference snapshots keyed by [`ReferenceKey::digest`].
///
/// Each file holds a magic line, one line of JSON with the key, then the
/// values as little-endian `f64` pairs.
#[derive(Clone, Debug)]
pub struct ReferenceCache {
    dir: PathBuf,
}

impl ReferenceCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path(&self, key: &ReferenceKey) -> PathBuf {
        self.dir.join(format!("{}.ref", key.digest()))
    }

    pub fn load<T: Real>(&self, key: &ReferenceKey) -> Result<Option<GridWaveFunction<T>>> {
        let path = self.path(key);
        if !path.exists() {
            return Ok(None);
        }
        let psi = read_snapshot(&path)?;
        if psi.0 != *key {
            return Err(GwptError::Format(format!("{}: key does not match its digest", path.display())));
        }
        Ok(Some(psi.1))
    }

    pub fn store<T: Real>(&self, key: &ReferenceKey, psi: &GridWaveFunction<T>) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir)?;
        let path = self.path(key);
        // write then rename so readers never see a partial file
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        write_snapshot(&tmp, key, psi)?;
        fs::rename(&tmp, &path)?;
        Ok(path)
    }

    /// Loads the snapshot for `key`, computing and storing it if absent.
    pub fn get_or_compute<T: Real>(
        &self,
        key: &ReferenceKey,
        compute: impl FnOnce() -> Result<GridWaveFunction<T>>,
    ) -> Result<GridWaveFunction<T>> {
        if let Some(psi) = self.load(key)? {
            return Ok(psi);
        }
        let psi = compute()?;
        self.store(key, &psi)?;
        Ok(psi)
    }
}

/// Writes a snapshot file.
pub fn write_snapshot<T: Real>(path: &Path, key: &ReferenceKey, psi: &GridWaveFunction<T>) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "{CACHE_MAGIC}")?;
    writeln!(out, "{}", serde_json::to_string(key).map_err(|e| GwptError::Format(e.to_string()))?)?;
    for z in &psi.values {
        out.write_all(&z.re.as_f64().to_le_bytes())?;
        out.write_all(&z.im.as_f64().to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a snapshot file.
pub fn read_snapshot<T: Real>(path: &Path) -> Result<(ReferenceKey, GridWaveFunction<T>)> {
    let mut input = BufReader::new(fs::File::open(path)?);
    let mut line = String::new();
    input.read_line(&mut line)?;
    if line.trim_end() != CACHE_MAGIC {
        return Err(GwptError::Format(format!("{}: not a reference snapshot", path.display())));
    }
    line.clear();
    input.read_line(&mut line)?;
    let key: ReferenceKey = serde_json::from_str(line.trim_end()).map_err(|e| GwptError::Format(e.to_string()))?;
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let n = key.grid.len();
    if bytes.len() != n * 16 {
        return Err(GwptError::Format(format!(
            "{}: expected {} bytes of samples, found {}",
            path.display(),
            n * 16,
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex::new(T::lit(re), T::lit(im))
        })
        .collect();
    let t = T::lit(key.t_final);
    let grid = key.grid.clone();
    Ok((key, GridWaveFunction { grid, values, t, warnings: Vec::new() }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::BuiltinPotential;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};

    fn eps(e: f64) -> Epsilon<f64> {
        Epsilon::new(e).unwrap()
    }

    fn diff(a: &GridWaveFunction<f64>, b: &GridWaveFunction<f64>) -> f64 {
        let s: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).norm_sqr()).sum();
        (s * a.grid.cell_volume()).sqrt()
    }

    #[test]
    fn grid_validation() {
        assert!(PeriodicGrid::symmetric(1, 6).is_err());
        assert!(PeriodicGrid::symmetric(1, 12).is_err());
        assert!(PeriodicGrid::symmetric(1, 8).is_ok());
        assert!(matches!(PeriodicGrid::symmetric(2, 1 << 14), Err(GwptError::TooLarge { .. })));
        let g = PeriodicGrid::with_spacing(1, 2.0 * PI / 128.0 * (1.0 / 64.0) * 64.0).unwrap();
        assert_eq!(g.points_per_axis, vec![128]);
        let g = PeriodicGrid::with_spacing(1, 2.0 * PI / 100.0).unwrap();
        assert_eq!(g.points_per_axis, vec![128]);
    }

    #[test]
    fn wavenumber_layout() {
        let g = PeriodicGrid::symmetric(1, 8).unwrap();
        assert_eq!(g.wavenumbers(0), vec![0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0]);
        assert_abs_diff_eq!(g.axis(0)[0], -PI);
    }

    #[test]
    fn sampled_gaussians_are_normalised() {
        let e = 1.0 / 128.0;
        let g1 = PeriodicGrid::with_spacing(1, 2.0 * PI * e / 64.0).unwrap();
        let d1 = GaussianInitialDatum::isotropic(vec![FRAC_PI_2], vec![0.0], eps(e)).unwrap();
        let psi = init_grid_gaussian(&g1, &d1).unwrap();
        assert_abs_diff_eq!(psi.norm(), 1.0, epsilon = 1e-10);
        assert!(psi.warnings.is_empty());
        let g2 = PeriodicGrid::with_spacing(2, 2.0 * PI * e / 16.0).unwrap();
        let d2 = GaussianInitialDatum::isotropic(vec![FRAC_PI_2, FRAC_PI_3], vec![0.0, 0.0], eps(e)).unwrap();
        assert_abs_diff_eq!(init_grid_gaussian(&g2, &d2).unwrap().norm(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn boundary_datum_is_flagged() {
        let g = PeriodicGrid::symmetric(1, 256).unwrap();
        let d = GaussianInitialDatum::isotropic(vec![PI], vec![0.0], eps(0.05)).unwrap();
        assert_eq!(init_grid_gaussian(&g, &d).unwrap().warnings.len(), 1);
    }

    #[test]
    fn free_plane_wave_phase() {
        let e = 0.1;
        let g = PeriodicGrid::symmetric(1, 64).unwrap();
        let k = 5.0;
        let xs = g.axis(0);
        let values: Vec<Complex<f64>> = xs.iter().map(|&x| Complex::from_polar(1.0, k * x)).collect();
        let mut psi = GridWaveFunction { grid: g.clone(), values: values.clone(), t: 0.0, warnings: vec![] };
        let zero = BuiltinPotential::<f64>::polynomial(1, vec![0.0]).unwrap();
        for scheme in [SplitScheme::Chin4a, SplitScheme::Yoshida4] {
            psi.values = values.clone();
            SplitStepper::new(&g, &zero, eps(e), 0.01, scheme).unwrap().run(&mut psi, 100).unwrap();
            let phase = Complex::from_polar(1.0, -e * k * k * 1.0 / 2.0);
            for (a, b) in psi.values.iter().zip(&values) {
                assert_abs_diff_eq!((a - b * phase).norm(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn norm_is_preserved() {
        let e = 1.0 / 32.0;
        let g = PeriodicGrid::with_spacing(1, 2.0 * PI * e / 64.0).unwrap();
        let d = GaussianInitialDatum::isotropic(vec![FRAC_PI_2], vec![0.3], eps(e)).unwrap();
        let v = BuiltinPotential::<f64>::cosine1d();
        let mut psi = init_grid_gaussian(&g, &d).unwrap();
        let n0 = psi.norm();
        let stepper = SplitStepper::new(&g, &v, eps(e), e / 64.0, SplitScheme::Chin4a).unwrap();
        stepper.run(&mut psi, 1).unwrap();
        assert!((psi.norm() - n0).abs() < 1e-15);
        // FFT round-off accumulates; 10⁴ steps stay at the 1e-12 level
        stepper.run(&mut psi, 9999).unwrap();
        assert!((psi.norm() - n0).abs() < 1e-11, "{:e}", psi.norm() - n0);
    }

    #[test]
    fn zero_time_returns_datum() {
        let e = 1.0 / 16.0;
        let g = PeriodicGrid::symmetric(1, 256).unwrap();
        let d = GaussianInitialDatum::isotropic(vec![0.5], vec![0.0], eps(e)).unwrap();
        let v = BuiltinPotential::<f64>::cosine1d();
        let psi =
            propagate_reference(&d, &v, eps(e), 0.0, e / 64.0, &g, SplitScheme::Chin4a, ReferenceMethod::Auto).unwrap();
        let init = init_grid_gaussian(&g, &d).unwrap();
        assert_eq!(psi.values, init.values);
        assert!(matches!(
            propagate_reference(&d, &v, eps(e), 0.1, 0.03, &g, SplitScheme::Chin4a, ReferenceMethod::Auto),
            Err(GwptError::TimeGrid(_))
        ));
    }

    #[test]
    fn fourth_order_in_time_and_schemes_agree() {
        let e = 1.0 / 32.0;
        let g = PeriodicGrid::with_spacing(1, 2.0 * PI * e / 64.0).unwrap();
        let d = GaussianInitialDatum::isotropic(vec![FRAC_PI_2], vec![0.0], eps(e)).unwrap();
        let v = BuiltinPotential::<f64>::cosine1d();
        let tf = 0.25;
        let run = |dt: f64, s: SplitScheme| {
            propagate_reference(&d, &v, eps(e), tf, dt, &g, s, ReferenceMethod::Full).unwrap()
        };
        let fine = run(tf / 512.0, SplitScheme::Chin4a);
        let e1 = diff(&run(tf / 8.0, SplitScheme::Chin4a), &fine);
        let e2 = diff(&run(tf / 16.0, SplitScheme::Chin4a), &fine);
        let order = (e1 / e2).log2();
        assert!((order - 4.0).abs() < 0.3, "order {order}");
        let y = run(tf / 256.0, SplitScheme::Yoshida4);
        assert!(diff(&y, &fine) < 1e-8, "{}", diff(&y, &fine));
    }

    #[test]
    fn separable_matches_full_grid() {
        let e = 1.0 / 16.0;
        let g = PeriodicGrid::symmetric(2, 64).unwrap();
        let d = GaussianInitialDatum::isotropic(vec![FRAC_PI_2, FRAC_PI_3], vec![0.1, -0.2], eps(e)).unwrap();
        let v = BuiltinPotential::<f64>::cosine2d();
        let dt = e / 8.0;
        let full =
            propagate_reference(&d, &v, eps(e), 0.25, dt, &g, SplitScheme::Chin4a, ReferenceMethod::Full).unwrap();
        let sep =
            propagate_reference(&d, &v, eps(e), 0.25, dt, &g, SplitScheme::Chin4a, ReferenceMethod::Separable).unwrap();
        assert!(diff(&full, &sep) < 1e-12, "{}", diff(&full, &sep));
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ReferenceCache::new(dir.path());
        let g = PeriodicGrid::symmetric(1, 16).unwrap();
        let d = GaussianInitialDatum::isotropic(vec![0.0], vec![0.0], eps(0.25)).unwrap();
        let psi = init_grid_gaussian(&g, &d).unwrap();
        let key = ReferenceKey::new("cosine1d", &d, 0.0, 0.01, &g, SplitScheme::Chin4a);
        assert!(cache.load::<f64>(&key).unwrap().is_none());
        cache.store(&key, &psi).unwrap();
        let back = cache.load::<f64>(&key).unwrap().unwrap();
        assert_eq!(back.values, psi.values);
        let other = ReferenceKey { eps: 0.5, ..key.clone() };
        assert_ne!(other.digest(), key.digest());
        let mut calls = 0;
        cache
            .get_or_compute(&key, || {
                calls += 1;
                Ok(psi.clone())
            })
            .unwrap();
        assert_eq!(calls, 0);
    }

    #[test]
    fn key_survives_json_exactly() {
        let g = PeriodicGrid::symmetric(1, 16).unwrap();
        let d = GaussianInitialDatum::isotropic(vec![0.0], vec![0.0], eps(0.25)).unwrap();
        let base = ReferenceKey::new("cosine1d", &d, 2.0, 0.01, &g, SplitScheme::Chin4a);
        for k in 1..2000 {
            let x = std::f64::consts::PI * k as f64 / 7.0 / 2048.0;
            let key = ReferenceKey { dt_ref: x, q0: vec![x.sqrt()], alpha0: vec![(x / 3.0, 1.0 / x)], ..base.clone() };
            let back: ReferenceKey = serde_json::from_str(&serde_json::to_string(&key).unwrap()).unwrap();
            assert_eq!(back, key, "k = {k}");
        }
    }
}
