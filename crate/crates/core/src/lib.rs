//! Structure-preserving discretization, simulation and spectral analysis of
//! current- and charge-actuated piezoelectric beams with fully dynamic
//! magnetic effects (stretching motion).
//!
//! All numerics are generic over [`Real`]; the aliases at the bottom of this
//! file fix the scalar to `f64`, which is what the command-line front end and
//! the experiment suite use.

// `!(x > 0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dynamics;
pub mod error;
pub mod generator;
pub mod grid;
pub mod operators;
pub mod params;
pub mod scalar;
pub mod spectral;
pub mod state;
pub mod stencil;
pub mod variants;

pub use config::{simulate, Actuation, ExperimentConfig};
pub use error::{Error, Result};
pub use params::RawParameters;
pub use scalar::Real;

pub type BeamParameters = params::BeamParameters<f64>;
pub type StaggeredGrid = grid::StaggeredGrid<f64>;
pub type StateVector = state::StateVector<f64>;
pub type DiscreteOperators = operators::DiscreteOperators<f64>;
pub type EnergyBreakdown = operators::EnergyBreakdown<f64>;
pub type GeneratorAssembly = generator::GeneratorAssembly<f64>;
pub type TimeSeries = dynamics::TimeSeries<f64>;
pub type SpectrumReport = spectral::SpectrumReport<f64>;
pub type ElectrostaticAssembly = variants::ElectrostaticAssembly<f64>;
