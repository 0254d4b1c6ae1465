//! Multilevel hybrid Monte Carlo / low-order transport for slab geometry.

pub mod config;
pub mod error;
pub mod functional;
pub mod grid;
pub mod lo;
pub mod mc;
pub mod mlht;
pub mod mlmc;
pub mod problem;
pub mod reference;
pub mod rng;
pub mod scalar;
pub mod stats;

pub use config::ProblemConfig;
pub use error::{Error, Result};
pub use functional::FunctionalSpec;
pub use grid::{Grid, GridHierarchy};
pub use lo::{Cost, Method};
pub use problem::{Incident, Material, Region, SlabProblem};
pub use rng::{RngStream, StreamKey};
pub use scalar::Real;

/// Double-precision problem, the default for studies.
pub type Problem = SlabProblem<f64>;
pub type Hierarchy = GridHierarchy<f64>;
pub type Reference = reference::ReferenceSolution<f64>;
pub type MultilevelRun = mlmc::MlmcRun<f64>;

/// Single-precision variants.
pub type Problem32 = SlabProblem<f32>;
pub type Hierarchy32 = GridHierarchy<f32>;
