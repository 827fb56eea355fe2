//! Spectral solver for the semi-classical Schrödinger equation
//! `iε ∂ₜψ = −(ε²/2)Δψ + V(x)ψ` built on the Gaussian wave-packet transform
//! and a Galerkin expansion in Hagedorn wave packets.
//!
//! The numerical core is generic over the scalar type; the `*64` aliases at
//! the crate root fix it to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod galerkin;
pub mod gwpt;
pub mod hagedorn;
pub mod linalg;
pub mod multi_index;
pub mod ode;
pub mod potential;
pub mod quadrature;
pub mod reference;
pub mod scalar;
pub mod types;

pub use error::{GwptError, Result};
pub use experiment::{ExperimentConfig, ExperimentError, ResultRow};
pub use galerkin::{Diagnostics, SimulationState, Solver, SolverConfig};
pub use gwpt::{GaussianInitialDatum, GwptParams};
pub use hagedorn::HagedornParams;
pub use multi_index::{IndexNorm, MultiIndexSet};
pub use potential::{BuiltinPotential, Potential};
pub use quadrature::QuadratureRule;
pub use reference::{GridWaveFunction, PeriodicGrid, SplitScheme};
pub use scalar::Real;
pub use types::{Dim, Epsilon};

pub type GwptParams64 = GwptParams<f64>;
pub type GaussianInitialDatum64 = GaussianInitialDatum<f64>;
pub type QuadratureRule64 = QuadratureRule<f64>;
pub type BuiltinPotential64 = BuiltinPotential<f64>;
pub type Epsilon64 = Epsilon<f64>;
pub type HagedornParams64 = HagedornParams<f64>;
pub type Solver64 = Solver<f64>;
pub type SolverConfig64 = SolverConfig<f64>;
pub type SimulationState64 = SimulationState<f64>;
pub type GridWaveFunction64 = GridWaveFunction<f64>;
