//! Experiment harness: configuration, single runs, parameter sweeps, timing
//! tables, profiles and error time series, with CSV output.
//!
//! Configurations are flat `key = value` files. Real values accept fractions
//! such as `1/128`. Recognised keys:
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `example` | `cosine1d`, `cosine2d`, `harmonic` or `custom` | `cosine1d` |
//! | `dim` | dimension of `harmonic` / `custom` | 1 |
//! | `eps` | semi-classical parameter | `1/128` |
//! | `n` | index-set order | 10 |
//! | `index_norm` | `linf` or `l1` | `linf` |
//! | `quad` | Gauss–Hermite nodes per axis | `n + 5` |
//! | `dt_c`, `dt_gt`, `t_final` | time grid | `1/128`, `1/2048`, `0.125` |
//! | `q0`, `p0` | comma-separated initial centre and momentum | per example |
//! | `poly` | ascending per-axis coefficients of the `custom` potential | |
//! | `reference` | `compute`, `none` or `load:<path>` | `compute` |
//! | `ref_dx`, `ref_dt`, `ref_scheme` | reference meshing and scheme | per dimension, `chin4a` |
//! | `cache_dir` | directory of cached references | none |
//! | `out` | output path | stdout |
//! | `profile_eta_points`, `profile_eta_max`, `profile_x_stride` | profile sampling | 256, 6, 1 (1D) or 8 |

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex;
use thiserror::Error;

use crate::error::GwptError;
use crate::galerkin::{
    l2_error, reconstruct_psi, reconstruct_w, Diagnostics, SimulationState, Solver, SolverConfig, INVARIANT_ABORT,
};
use crate::gwpt::GaussianInitialDatum;
use crate::linalg::symmetric_eigen;
use crate::multi_index::{IndexNorm, MultiIndexSet};
use crate::potential::BuiltinPotential;
use crate::reference::{
    propagate_reference, read_snapshot, GridWaveFunction, PeriodicGrid, ReferenceCache, ReferenceKey, ReferenceMethod,
    ReferencePropagator, SplitScheme,
};
use crate::types::{Dim, Epsilon};

/// First line of every CSV file written by the harness.
pub const CSV_VERSION_LINE: &str = "# gwpt-hwp v1";

/// Columns of a result CSV, in order.
pub const CSV_COLUMNS: [&str; 14] = [
    "example",
    "eps",
    "n",
    "index_norm",
    "nq_per_axis",
    "dt_c",
    "dt_gt",
    "t_final",
    "l2_error",
    "norm_drift",
    "res_symplectic",
    "res_clean_lemma",
    "res_hermitian",
    "wall_time_core_s",
];

/// A row is flagged when the Hermiticity residual of `F` exceeds this.
pub const HERMITIAN_FLAG: f64 = 1e-10;

/// A row is flagged when the coefficient norm drifts by more than this.
pub const NORM_DRIFT_FLAG: f64 = 1e-6;

/// Errors of the harness.
#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Run(#[from] GwptError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

fn config_err(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(msg.into())
}

pub type ExperimentResult<T> = std::result::Result<T, ExperimentError>;

/// Parses a real number, allowing the form `a/b`.
pub fn parse_real(s: &str) -> Option<f64> {
    let s = s.trim();
    match s.split_once('/') {
        Some((a, b)) => {
            let (a, b): (f64, f64) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
            (b != 0.0).then_some(a / b)
        }
        None => s.parse().ok(),
    }
}

fn parse_list(s: &str) -> Option<Vec<f64>> {
    s.split(',').map(parse_real).collect()
}

/// Bundled experiment presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Example {
    /// `V = 1 − cos x`, datum centred at `π/2`.
    Cosine1d,
    /// `V = 2 − cos x − cos y`, datum centred at `(π/2, π/3)`.
    Cosine2d,
    /// `V = ½|x|²`, datum centred at `(1, …, 1)`.
    Harmonic,
    /// Per-axis polynomial given by `poly`.
    Custom,
}

impl fmt::Display for Example {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Example::Cosine1d => "cosine1d",
            Example::Cosine2d => "cosine2d",
            Example::Harmonic => "harmonic",
            Example::Custom => "custom",
        })
    }
}

impl FromStr for Example {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "cosine1d" => Ok(Example::Cosine1d),
            "cosine2d" => Ok(Example::Cosine2d),
            "harmonic" => Ok(Example::Harmonic),
            "custom" => Ok(Example::Custom),
            other => Err(format!("unknown example `{other}`")),
        }
    }
}

/// Where the reference solution comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum ReferenceSource {
    /// Run the split-step solver with the configured meshing.
    Compute,
    /// Read a snapshot file.
    Load(PathBuf),
    /// No reference; errors are reported as NaN.
    None,
}

impl fmt::Display for ReferenceSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReferenceSource::Compute => f.write_str("compute"),
            ReferenceSource::Load(p) => write!(f, "load:{}", p.display()),
            ReferenceSource::None => f.write_str("none"),
        }
    }
}

impl FromStr for ReferenceSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "compute" => Ok(ReferenceSource::Compute),
            "none" => Ok(ReferenceSource::None),
            other => match other.strip_prefix("load:") {
                Some(p) if !p.is_empty() => Ok(ReferenceSource::Load(PathBuf::from(p))),
                _ => Err(format!("reference must be compute, none or load:<path>, got `{other}`")),
            },
        }
    }
}

/// One experiment, fully determined by its fields.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub example: Example,
    pub dim: Option<usize>,
    pub eps: f64,
    pub n_packets: u32,
    pub index_norm: IndexNorm,
    pub quad_per_axis: Option<usize>,
    pub dt_c: f64,
    pub dt_gt: f64,
    pub t_final: f64,
    pub q0: Option<Vec<f64>>,
    pub p0: Option<Vec<f64>>,
    pub poly: Vec<f64>,
    pub reference: ReferenceSource,
    pub ref_dx: Option<f64>,
    pub ref_dt: Option<f64>,
    pub ref_scheme: SplitScheme,
    pub cache_dir: Option<PathBuf>,
    pub output_path: Option<PathBuf>,
    pub profile_eta_points: usize,
    pub profile_eta_max: f64,
    pub profile_x_stride: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            example: Example::Cosine1d,
            dim: None,
            eps: 1.0 / 128.0,
            n_packets: 10,
            index_norm: IndexNorm::Linf,
            quad_per_axis: None,
            dt_c: 1.0 / 128.0,
            dt_gt: 1.0 / 2048.0,
            t_final: 0.125,
            q0: None,
            p0: None,
            poly: Vec::new(),
            reference: ReferenceSource::Compute,
            ref_dx: None,
            ref_dt: None,
            ref_scheme: SplitScheme::Chin4a,
            cache_dir: None,
            output_path: None,
            profile_eta_points: 256,
            profile_eta_max: 6.0,
            profile_x_stride: None,
        }
    }
}

impl ExperimentConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn from_kv_str(text: &str) -> ExperimentResult<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected `key = value`", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| config_err(format!("line {}: {}", lineno + 1, strip_prefix(&e))))?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> ExperimentResult<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_kv_str(&text)
    }

    /// Sets one key. Accepts the same keys as the file format.
    pub fn set(&mut self, key: &str, value: &str) -> ExperimentResult<()> {
        let bad = |what: &str| config_err(format!("invalid value `{value}` for `{key}`: expected {what}"));
        let real = || parse_real(value).ok_or_else(|| bad("a real number"));
        let count = || value.trim().parse::<usize>().map_err(|_| bad("a non-negative integer"));
        match key {
            "example" => self.example = value.parse().map_err(|e: String| config_err(e))?,
            "dim" => self.dim = Some(count()?),
            "eps" => self.eps = real()?,
            "n" | "packets" | "n_packets" => {
                self.n_packets = value.trim().parse().map_err(|_| bad("a non-negative integer"))?
            }
            "index_norm" => self.index_norm = value.parse().map_err(|_| bad("linf or l1"))?,
            "quad" | "quad_per_axis" | "nq_per_axis" => self.quad_per_axis = Some(count()?),
            "dt_c" => self.dt_c = real()?,
            "dt_gt" => self.dt_gt = real()?,
            "t_final" | "tf" => self.t_final = real()?,
            "q0" => self.q0 = Some(parse_list(value).ok_or_else(|| bad("a comma-separated list"))?),
            "p0" => self.p0 = Some(parse_list(value).ok_or_else(|| bad("a comma-separated list"))?),
            "poly" => self.poly = parse_list(value).ok_or_else(|| bad("a comma-separated list"))?,
            "reference" => self.reference = value.parse().map_err(|e: String| config_err(e))?,
            "ref_dx" => self.ref_dx = Some(real()?),
            "ref_dt" => self.ref_dt = Some(real()?),
            "ref_scheme" => {
                self.ref_scheme = match value.trim() {
                    "chin4a" => SplitScheme::Chin4a,
                    "yoshida4" => SplitScheme::Yoshida4,
                    _ => return Err(bad("chin4a or yoshida4")),
                }
            }
            "cache_dir" => self.cache_dir = Some(PathBuf::from(value.trim())),
            "out" | "output_path" => self.output_path = Some(PathBuf::from(value.trim())),
            "profile_eta_points" => self.profile_eta_points = count()?,
            "profile_eta_max" => self.profile_eta_max = real()?,
            "profile_x_stride" => self.profile_x_stride = Some(count()?),
            _ => return Err(config_err(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// A copy with one key changed.
    pub fn with(&self, key: &str, value: &str) -> ExperimentResult<Self> {
        let mut c = self.clone();
        c.set(key, value)?;
        Ok(c)
    }

    pub fn dimension(&self) -> usize {
        match self.example {
            Example::Cosine1d => 1,
            Example::Cosine2d => 2,
            Example::Harmonic | Example::Custom => self.dim.unwrap_or(1),
        }
    }

    /// Gauss–Hermite nodes per axis, `n + 5` unless set.
    pub fn nq(&self) -> usize {
        self.quad_per_axis.unwrap_or(self.n_packets as usize + 5)
    }

    pub fn q0(&self) -> Vec<f64> {
        self.q0.clone().unwrap_or_else(|| match self.example {
            Example::Cosine1d => vec![FRAC_PI_2],
            Example::Cosine2d => vec![FRAC_PI_2, FRAC_PI_3],
            Example::Harmonic => vec![1.0; self.dimension()],
            Example::Custom => vec![0.0; self.dimension()],
        })
    }

    pub fn p0(&self) -> Vec<f64> {
        self.p0.clone().unwrap_or_else(|| vec![0.0; self.dimension()])
    }

    /// Reference grid spacing: `2πε/64` in 1D, `2πε/16` otherwise.
    pub fn reference_dx(&self) -> f64 {
        self.ref_dx.unwrap_or_else(|| 2.0 * PI * self.eps / if self.dimension() == 1 { 64.0 } else { 16.0 })
    }

    /// Reference time step: `ε/64` in 1D, `ε/32` otherwise.
    pub fn reference_dt(&self) -> f64 {
        self.ref_dt.unwrap_or_else(|| self.eps / if self.dimension() == 1 { 64.0 } else { 32.0 })
    }

    /// Name used in CSV rows and reference keys.
    pub fn example_label(&self) -> String {
        match self.example {
            Example::Custom => {
                let c: Vec<String> = self.poly.iter().map(|v| v.to_string()).collect();
                format!("custom[{}]", c.join(";"))
            }
            Example::Harmonic if self.dimension() != 1 => format!("harmonic{}d", self.dimension()),
            other => other.to_string(),
        }
    }

    /// Checks every precondition of a run.
    pub fn validate(&self) -> ExperimentResult<()> {
        let d = self.dimension();
        if d == 0 {
            return Err(config_err("dimension must be at least 1"));
        }
        match (self.example, self.dim) {
            (Example::Cosine1d, Some(k)) if k != 1 => return Err(config_err("cosine1d is one-dimensional")),
            (Example::Cosine2d, Some(k)) if k != 2 => return Err(config_err("cosine2d is two-dimensional")),
            (Example::Custom, _) if self.poly.is_empty() => {
                return Err(config_err("the custom example needs `poly` coefficients"))
            }
            _ => {}
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(config_err(format!("eps must be positive, got {}", self.eps)));
        }
        if self.nq() < 1 {
            return Err(config_err("quad must be at least 1"));
        }
        for (name, v) in [("dt_c", self.dt_c), ("dt_gt", self.dt_gt)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(config_err(format!("{name} must be positive, got {v}")));
            }
        }
        let ratio = self.dt_c / self.dt_gt;
        let m = ratio.round();
        if (m - ratio).abs() > 1e-9 * ratio || m < 2.0 || !(m as u64).is_multiple_of(2) {
            return Err(config_err(format!(
                "dt_c / dt_gt = {ratio} must be an even integer so the half step lands on the fine grid"
            )));
        }
        let steps = self.t_final / self.dt_c;
        if !(self.t_final >= 0.0) || (steps.round() - steps).abs() > 1e-9 * steps.max(1.0) {
            return Err(config_err(format!("t_final = {} is not a multiple of dt_c = {}", self.t_final, self.dt_c)));
        }
        if self.q0().len() != d || self.p0().len() != d {
            return Err(config_err(format!("q0 and p0 must have {d} components")));
        }
        if self.profile_eta_points < 2 || !(self.profile_eta_max > 0.0) {
            return Err(config_err("profile sampling needs at least 2 points and a positive extent"));
        }
        if self.profile_x_stride == Some(0) {
            return Err(config_err("profile_x_stride must be positive"));
        }
        self.potential()?;
        Ok(())
    }

    pub fn potential(&self) -> ExperimentResult<BuiltinPotential<f64>> {
        Ok(match self.example {
            Example::Cosine1d => BuiltinPotential::cosine1d(),
            Example::Cosine2d => BuiltinPotential::cosine2d(),
            Example::Harmonic => BuiltinPotential::harmonic(self.dimension()),
            Example::Custom => BuiltinPotential::polynomial(self.dimension(), self.poly.clone())
                .map_err(|e| config_err(e.to_string()))?,
        })
    }

    pub fn epsilon(&self) -> ExperimentResult<Epsilon<f64>> {
        Epsilon::new(self.eps).map_err(|e| config_err(e.to_string()))
    }

    /// Gaussian datum with `α₀ = iI`.
    pub fn datum(&self) -> ExperimentResult<GaussianInitialDatum<f64>> {
        GaussianInitialDatum::isotropic(self.q0(), self.p0(), self.epsilon()?).map_err(|e| config_err(e.to_string()))
    }

    pub fn index_set(&self) -> ExperimentResult<MultiIndexSet> {
        let dim = Dim::new(self.dimension()).map_err(|e| config_err(e.to_string()))?;
        Ok(MultiIndexSet::new(dim, self.n_packets, self.index_norm))
    }

    pub fn solver(&self) -> ExperimentResult<Solver<f64>> {
        self.validate()?;
        let cfg = SolverConfig {
            eps: self.epsilon()?,
            set: Arc::new(self.index_set()?),
            nq_per_axis: self.nq(),
            dt_c: self.dt_c,
            dt_gt: self.dt_gt,
        };
        Ok(Solver::new(cfg, Arc::new(self.potential()?))?)
    }

    pub fn reference_grid(&self) -> ExperimentResult<PeriodicGrid> {
        Ok(PeriodicGrid::with_spacing(self.dimension(), self.reference_dx())?)
    }

    fn reference_key(&self, t_final: f64) -> ExperimentResult<ReferenceKey> {
        Ok(ReferenceKey::new(
            &self.example_label(),
            &self.datum()?,
            t_final,
            self.reference_dt(),
            &self.reference_grid()?,
            self.ref_scheme,
        ))
    }
}

fn strip_prefix(e: &ExperimentError) -> String {
    match e {
        ExperimentError::Config(m) => m.clone(),
        other => other.to_string(),
    }
}

/// Reference solutions shared across the rows of a sweep.
#[derive(Default)]
pub struct ReferenceStore {
    memory: HashMap<String, Arc<GridWaveFunction<f64>>>,
}

impl ReferenceStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// The reference at `cfg.t_final`, or `None` when none is requested.
    pub fn get(&mut self, cfg: &ExperimentConfig) -> ExperimentResult<Option<Arc<GridWaveFunction<f64>>>> {
        match &cfg.reference {
            ReferenceSource::None => Ok(None),
            ReferenceSource::Load(path) => {
                let tag = format!("load:{}", path.display());
                if let Some(r) = self.memory.get(&tag) {
                    return Ok(Some(r.clone()));
                }
                let (key, psi) = read_snapshot::<f64>(path)?;
                if key.grid.dim() != cfg.dimension() || (key.t_final - cfg.t_final).abs() > 1e-12 {
                    return Err(config_err(format!(
                        "{} holds a {}-dimensional reference at t = {}, the run needs {} dimensions at t = {}",
                        path.display(),
                        key.grid.dim(),
                        key.t_final,
                        cfg.dimension(),
                        cfg.t_final
                    )));
                }
                let psi = Arc::new(psi);
                self.memory.insert(tag, psi.clone());
                Ok(Some(psi))
            }
            ReferenceSource::Compute => {
                let key = cfg.reference_key(cfg.t_final)?;
                let digest = key.digest();
                if let Some(r) = self.memory.get(&digest) {
                    return Ok(Some(r.clone()));
                }
                let compute = || {
                    propagate_reference(
                        &cfg.datum().map_err(|e| GwptError::InvalidArgument(e.to_string()))?,
                        &cfg.potential().map_err(|e| GwptError::InvalidArgument(e.to_string()))?,
                        Epsilon::new(cfg.eps)?,
                        cfg.t_final,
                        cfg.reference_dt(),
                        &key.grid,
                        cfg.ref_scheme,
                        ReferenceMethod::Auto,
                    )
                };
                let psi = match &cfg.cache_dir {
                    Some(dir) => ReferenceCache::new(dir).get_or_compute(&key, compute)?,
                    None => compute()?,
                };
                let psi = Arc::new(psi);
                self.memory.insert(digest, psi.clone());
                Ok(Some(psi))
            }
        }
    }
}

/// Outcome of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub example: String,
    pub eps: f64,
    pub n: u32,
    pub index_norm: IndexNorm,
    pub nq_per_axis: usize,
    pub dt_c: f64,
    pub dt_gt: f64,
    pub t_final: f64,
    pub l2_error: f64,
    pub norm_drift: f64,
    pub res_symplectic: f64,
    pub res_clean_lemma: f64,
    pub res_alpha_bb: f64,
    pub res_hermitian: f64,
    pub wall_time_core_s: f64,
    /// Set when the run aborted.
    pub failure: Option<String>,
}

impl ResultRow {
    fn echo(cfg: &ExperimentConfig) -> Self {
        Self {
            example: cfg.example_label(),
            eps: cfg.eps,
            n: cfg.n_packets,
            index_norm: cfg.index_norm,
            nq_per_axis: cfg.nq(),
            dt_c: cfg.dt_c,
            dt_gt: cfg.dt_gt,
            t_final: cfg.t_final,
            l2_error: f64::NAN,
            norm_drift: f64::NAN,
            res_symplectic: f64::NAN,
            res_clean_lemma: f64::NAN,
            res_alpha_bb: f64::NAN,
            res_hermitian: f64::NAN,
            wall_time_core_s: f64::NAN,
            failure: None,
        }
    }

    /// A row for a run that aborted with `msg`.
    pub fn failed(cfg: &ExperimentConfig, msg: impl Into<String>) -> Self {
        Self { failure: Some(msg.into()), ..Self::echo(cfg) }
    }

    fn from_diagnostics(cfg: &ExperimentConfig, d: &Diagnostics, l2: f64, wall: f64) -> Self {
        Self {
            l2_error: l2,
            norm_drift: d.norm_drift(),
            res_symplectic: d.max_symplectic,
            res_clean_lemma: d.max_clean_lemma,
            res_alpha_bb: d.max_alpha_bb,
            res_hermitian: d.max_hermitian,
            wall_time_core_s: wall,
            ..Self::echo(cfg)
        }
    }

    /// Reasons this row fails the module thresholds; empty when it passes.
    pub fn flags(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(f) = &self.failure {
            out.push(f.clone());
            return out;
        }
        for (name, value, limit) in [
            ("symplectic residual", self.res_symplectic, INVARIANT_ABORT),
            ("clean-lemma residual", self.res_clean_lemma, INVARIANT_ABORT),
            ("alpha_i - B^T B residual", self.res_alpha_bb, INVARIANT_ABORT),
            ("Hermiticity residual", self.res_hermitian, HERMITIAN_FLAG),
            ("norm drift", self.norm_drift, NORM_DRIFT_FLAG),
        ] {
            if !(value <= limit) {
                out.push(format!("{name} {value:e} exceeds {limit:e}"));
            }
        }
        out
    }

    pub fn is_flagged(&self) -> bool {
        !self.flags().is_empty()
    }
}

/// Writes the version line and column header.
pub fn write_csv_header<W: Write>(out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{CSV_VERSION_LINE}")?;
    writeln!(out, "{}", CSV_COLUMNS.join(","))
}

pub fn write_csv_row<W: Write>(out: &mut W, r: &ResultRow) -> std::io::Result<()> {
    writeln!(
        out,
        "{},{},{},{},{},{},{},{},{:e},{:e},{:e},{:e},{:e},{}",
        r.example,
        r.eps,
        r.n,
        r.index_norm,
        r.nq_per_axis,
        r.dt_c,
        r.dt_gt,
        r.t_final,
        r.l2_error,
        r.norm_drift,
        r.res_symplectic,
        r.res_clean_lemma,
        r.res_hermitian,
        r.wall_time_core_s
    )
}

pub fn write_csv<W: Write>(out: &mut W, rows: &[ResultRow]) -> std::io::Result<()> {
    write_csv_header(out)?;
    rows.iter().try_for_each(|r| write_csv_row(out, r))
}

fn propagate(cfg: &ExperimentConfig) -> ExperimentResult<(Solver<f64>, SimulationState<f64>, Diagnostics, f64)> {
    let solver = cfg.solver()?;
    let mut state = solver.initial_state(&cfg.datum()?)?;
    let start = Instant::now();
    let diag = solver.advance(&mut state, cfg.t_final)?;
    let wall = start.elapsed().as_secs_f64();
    Ok((solver, state, diag, wall))
}

/// Runs one configuration with references drawn from `store`.
pub fn run_single_with(cfg: &ExperimentConfig, store: &mut ReferenceStore) -> ExperimentResult<ResultRow> {
    cfg.validate()?;
    let reference = store.get(cfg)?;
    let (_, state, diag, wall) = propagate(cfg)?;
    let l2 = match reference {
        None => f64::NAN,
        Some(r) => {
            let psi = reconstruct_psi(&state, cfg.epsilon()?, &r.grid.points::<f64>())?;
            l2_error(&psi, &r.values, r.grid.cell_volume())?
        }
    };
    Ok(ResultRow::from_diagnostics(cfg, &diag, l2, wall))
}

/// Runs one configuration: propagate, reconstruct on the reference grid and
/// compare.
pub fn run_single(cfg: &ExperimentConfig) -> ExperimentResult<ResultRow> {
    run_single_with(cfg, &mut ReferenceStore::new())
}

/// Parameter varied by a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    Eps,
    NPackets,
    Quad,
    DtC,
    DtGt,
    IndexNorm,
}

impl SweepAxis {
    /// The configuration key the axis sets.
    pub fn key(self) -> &'static str {
        match self {
            SweepAxis::Eps => "eps",
            SweepAxis::NPackets => "n",
            SweepAxis::Quad => "quad",
            SweepAxis::DtC => "dt_c",
            SweepAxis::DtGt => "dt_gt",
            SweepAxis::IndexNorm => "index_norm",
        }
    }

    fn value(self, r: &ResultRow) -> Option<f64> {
        match self {
            SweepAxis::Eps => Some(r.eps),
            SweepAxis::NPackets => Some(r.n as f64),
            SweepAxis::Quad => Some(r.nq_per_axis as f64),
            SweepAxis::DtC => Some(r.dt_c),
            SweepAxis::DtGt => Some(r.dt_gt),
            SweepAxis::IndexNorm => None,
        }
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "eps" => Ok(SweepAxis::Eps),
            "n" | "packets" | "n_packets" => Ok(SweepAxis::NPackets),
            "quad" | "nq" => Ok(SweepAxis::Quad),
            "dt_c" | "dt-c" => Ok(SweepAxis::DtC),
            "dt_gt" | "dt-gt" => Ok(SweepAxis::DtGt),
            "index_norm" | "index-norm" => Ok(SweepAxis::IndexNorm),
            other => Err(format!("unknown sweep axis `{other}`")),
        }
    }
}

/// Rows of a sweep together with the observed orders between neighbours.
#[derive(Clone, Debug)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub rows: Vec<ResultRow>,
    /// `ln(e_i/e_{i−1}) / ln(x_i/x_{i−1})`; `None` for the first row and
    /// where undefined.
    pub orders: Vec<Option<f64>>,
}

/// Observed algebraic order between consecutive rows.
pub fn observed_orders(axis: SweepAxis, rows: &[ResultRow]) -> Vec<Option<f64>> {
    let mut out = vec![None; rows.len()];
    for i in 1..rows.len() {
        let (a, b) = (&rows[i - 1], &rows[i]);
        let (Some(xa), Some(xb)) = (axis.value(a), axis.value(b)) else { continue };
        let ratio = (b.l2_error / a.l2_error).ln() / (xb / xa).ln();
        if ratio.is_finite() {
            out[i] = Some(ratio);
        }
    }
    out
}

/// Runs `base` once per value of `axis`. Values are validated before any
/// run; a failing run becomes a flagged row and the sweep continues.
pub fn run_sweep(base: &ExperimentConfig, axis: SweepAxis, values: &[String]) -> ExperimentResult<Sweep> {
    if values.is_empty() {
        return Err(config_err("a sweep needs at least one value"));
    }
    let configs = values
        .iter()
        .map(|v| {
            let c = base.with(axis.key(), v)?;
            c.validate()?;
            Ok(c)
        })
        .collect::<ExperimentResult<Vec<_>>>()?;
    let mut store = ReferenceStore::new();
    let rows: Vec<ResultRow> = configs
        .iter()
        .map(|c| match run_single_with(c, &mut store) {
            Ok(r) => r,
            Err(e) => ResultRow::failed(c, e.to_string()),
        })
        .collect();
    let orders = observed_orders(axis, &rows);
    Ok(Sweep { axis, rows, orders })
}

/// Human-readable table of a sweep.
pub fn sweep_summary(s: &Sweep) -> String {
    let mut out = format!("{:>14} {:>14} {:>8} {:>12}  status\n", s.axis.key(), "l2_error", "order", "core_s");
    for (r, o) in s.rows.iter().zip(&s.orders) {
        let x = match s.axis {
            SweepAxis::Eps => r.eps.to_string(),
            SweepAxis::NPackets => r.n.to_string(),
            SweepAxis::Quad => r.nq_per_axis.to_string(),
            SweepAxis::DtC => r.dt_c.to_string(),
            SweepAxis::DtGt => r.dt_gt.to_string(),
            SweepAxis::IndexNorm => r.index_norm.to_string(),
        };
        let order = o.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
        let flags = r.flags();
        let status = if flags.is_empty() { "ok".to_string() } else { format!("FLAGGED: {}", flags.join("; ")) };
        out.push_str(&format!("{x:>14} {:>14.6e} {order:>8} {:>12.4}  {status}\n", r.l2_error, r.wall_time_core_s));
    }
    out
}

/// Wall times of the propagation loop over an `(n, ε)` grid.
#[derive(Clone, Debug)]
pub struct TimingTable {
    pub n_values: Vec<u32>,
    pub eps_values: Vec<f64>,
    /// `seconds[i][j]` for `n_values[i]`, `eps_values[j]`: minimum over repeats.
    pub seconds: Vec<Vec<f64>>,
}

impl TimingTable {
    /// `max/min` of the wall time across ε for each `n`.
    pub fn eps_ratios(&self) -> Vec<f64> {
        self.seconds
            .iter()
            .map(|row| {
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let min = row.iter().cloned().fold(f64::INFINITY, f64::min);
                max / min
            })
            .collect()
    }

    /// Long-form CSV: `n, eps, wall_time_core_s, max_over_min`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "{CSV_VERSION_LINE}")?;
        writeln!(out, "n,eps,wall_time_core_s,max_over_min")?;
        for ((n, row), ratio) in self.n_values.iter().zip(&self.seconds).zip(self.eps_ratios()) {
            for (eps, t) in self.eps_values.iter().zip(row) {
                writeln!(out, "{n},{eps},{t},{ratio}")?;
            }
        }
        Ok(())
    }
}

/// Times the propagation loop for each `(n, ε)`, keeping the fastest of
/// `repeats` interleaved passes. No reference is computed.
pub fn timing_table(
    base: &ExperimentConfig,
    n_values: &[u32],
    eps_values: &[f64],
    repeats: usize,
) -> ExperimentResult<TimingTable> {
    if n_values.is_empty() || eps_values.is_empty() || repeats == 0 {
        return Err(config_err("timing needs n values, eps values and at least one repeat"));
    }
    let mut configs = Vec::new();
    for &n in n_values {
        let mut row = Vec::new();
        for &eps in eps_values {
            let c = ExperimentConfig { n_packets: n, eps, reference: ReferenceSource::None, ..base.clone() };
            c.validate()?;
            row.push(c);
        }
        configs.push(row);
    }
    let mut seconds = vec![vec![f64::INFINITY; eps_values.len()]; n_values.len()];
    for _ in 0..repeats {
        for (i, row) in configs.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                let (_, _, _, wall) = propagate(c)?;
                seconds[i][j] = seconds[i][j].min(wall);
            }
        }
    }
    Ok(TimingTable { n_values: n_values.to_vec(), eps_values: eps_values.to_vec(), seconds })
}

/// Sampled `w̃` and `ψ` at the final time.
#[derive(Clone, Debug)]
pub struct Profile {
    pub dim: usize,
    pub t: f64,
    /// Flat `η` points.
    pub eta: Vec<f64>,
    pub w: Vec<Complex<f64>>,
    /// Flat `x` points.
    pub x: Vec<f64>,
    pub psi: Vec<Complex<f64>>,
    pub reference: Option<Vec<Complex<f64>>>,
}

impl Profile {
    /// CSV `eta_0, …, re_w, im_w`.
    pub fn write_w_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "{CSV_VERSION_LINE}")?;
        let cols: Vec<String> = (0..self.dim).map(|j| format!("eta{j}")).collect();
        writeln!(out, "{},re_w,im_w", cols.join(","))?;
        for (p, z) in self.eta.chunks_exact(self.dim).zip(&self.w) {
            writeln!(out, "{},{:e},{:e}", join(p), z.re, z.im)?;
        }
        Ok(())
    }

    /// CSV `x_0, …, re_psi, im_psi, re_ref, im_ref`; reference columns are
    /// NaN without a reference.
    pub fn write_psi_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "{CSV_VERSION_LINE}")?;
        let cols: Vec<String> = (0..self.dim).map(|j| format!("x{j}")).collect();
        writeln!(out, "{},re_psi,im_psi,re_ref,im_ref", cols.join(","))?;
        for (i, (p, z)) in self.x.chunks_exact(self.dim).zip(&self.psi).enumerate() {
            let r = self.reference.as_ref().map_or(Complex::new(f64::NAN, f64::NAN), |r| r[i]);
            writeln!(out, "{},{:e},{:e},{:e},{:e}", join(p), z.re, z.im, r.re, r.im)?;
        }
        Ok(())
    }
}

fn join(p: &[f64]) -> String {
    p.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// Points of the tensor grid `axes[0] × axes[1] × …`, last axis fastest.
fn tensor_points(axes: &[Vec<f64>]) -> Vec<f64> {
    let mut pts: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in axes {
        pts = pts.iter().flat_map(|p| axis.iter().map(move |&v| [p.as_slice(), &[v]].concat())).collect();
    }
    pts.concat()
}

/// Indices of the strided subgrid, last axis fastest.
fn strided_indices(shape: &[usize], stride: usize) -> Vec<usize> {
    let mut idx = vec![0usize];
    for &n in shape {
        idx = idx.iter().flat_map(|&i| (0..n).step_by(stride).map(move |k| i * n + k)).collect();
    }
    idx
}

/// Propagates `cfg` and samples `w̃` on a uniform `η` grid and `ψ` on the
/// reference grid thinned by `profile_x_stride`.
pub fn emit_profile(cfg: &ExperimentConfig) -> ExperimentResult<Profile> {
    cfg.validate()?;
    let d = cfg.dimension();
    let reference = ReferenceStore::new().get(cfg)?;
    let (_, state, _, _) = propagate(cfg)?;

    let m = cfg.profile_eta_points;
    let h = 2.0 * cfg.profile_eta_max / (m - 1) as f64;
    let axis: Vec<f64> = (0..m).map(|i| -cfg.profile_eta_max + h * i as f64).collect();
    let eta = tensor_points(&vec![axis; d]);
    let w = reconstruct_w(state.hwp(), &state.coeffs, &eta)?;

    let grid = match &reference {
        Some(r) => r.grid.clone(),
        None => cfg.reference_grid()?,
    };
    let stride = cfg.profile_x_stride.unwrap_or(if d == 1 { 1 } else { 8 });
    let keep = strided_indices(&grid.points_per_axis, stride);
    let axes: Vec<Vec<f64>> = (0..d).map(|j| grid.axis(j).into_iter().step_by(stride).collect()).collect();
    let x = tensor_points(&axes);
    let psi = reconstruct_psi(&state, cfg.epsilon()?, &x)?;
    let reference = reference.map(|r| keep.iter().map(|&i| r.values[i]).collect());
    Ok(Profile { dim: d, t: cfg.t_final, eta, w, x, psi, reference })
}

/// One sample of the error time series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesPoint {
    pub t: f64,
    pub l2_error: f64,
    /// Smallest eigenvalue of `α_I`.
    pub alpha_i_min: f64,
    pub coeff_norm: f64,
}

/// `L²` error against a reference advanced alongside, every `every` coarse
/// steps.
pub fn error_series(cfg: &ExperimentConfig, every: usize) -> ExperimentResult<Vec<SeriesPoint>> {
    cfg.validate()?;
    if every == 0 {
        return Err(config_err("series interval must be at least one coarse step"));
    }
    if cfg.reference != ReferenceSource::Compute {
        return Err(config_err("an error series needs reference = compute"));
    }
    let eps = cfg.epsilon()?;
    let datum = cfg.datum()?;
    let v = cfg.potential()?;
    let grid = cfg.reference_grid()?;
    let interval = cfg.dt_c * every as f64;
    let ref_steps = interval / cfg.reference_dt();
    if (ref_steps.round() - ref_steps).abs() > 1e-9 * ref_steps {
        return Err(config_err(format!(
            "series interval {interval} is not a multiple of the reference step {}",
            cfg.reference_dt()
        )));
    }
    let mut reference =
        ReferencePropagator::new(&datum, &v, eps, cfg.reference_dt(), &grid, cfg.ref_scheme, ReferenceMethod::Auto)?;
    let solver = cfg.solver()?;
    let mut state = solver.initial_state(&datum)?;
    let pts = grid.points::<f64>();
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let t = interval * k as f64;
        if t > cfg.t_final * (1.0 + 1e-12) {
            break;
        }
        if k > 0 {
            solver.advance(&mut state, t)?;
            reference.advance_to(t)?;
        }
        let psi = reconstruct_psi(&state, eps, &pts)?;
        let r = reference.state();
        let (eig, _) = symmetric_eigen(&state.gwpt().alpha_i());
        out.push(SeriesPoint {
            t,
            l2_error: l2_error(&psi, &r.values, grid.cell_volume())?,
            alpha_i_min: eig.into_iter().fold(f64::INFINITY, f64::min),
            coeff_norm: state.coeffs.norm(),
        });
        k += 1;
    }
    Ok(out)
}

pub fn write_series_csv<W: Write>(out: &mut W, series: &[SeriesPoint]) -> std::io::Result<()> {
    writeln!(out, "{CSV_VERSION_LINE}")?;
    writeln!(out, "t,l2_error,alpha_i_min,coeff_norm")?;
    for p in series {
        writeln!(out, "{},{:e},{},{}", p.t, p.l2_error, p.alpha_i_min, p.coeff_norm)?;
    }
    Ok(())
}
