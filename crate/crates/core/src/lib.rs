//! Branching-mechanism calculus, continuous-state branching process (CSBP)
//! simulation, pruning mass flow, and a Monte Carlo validation harness.
//!
//! The analytic kernels are generic over the scalar type through [`Real`]
//! (f32 or f64); the concrete aliases below fix f64 for the simulation and
//! validation layers.

pub mod crtfrag;
pub mod csbp;
pub mod error;
pub mod gwprune;
pub mod harness;
pub mod laplace;
pub mod massflow;
pub mod mechanism;
pub mod numerics;
pub mod real;
pub mod streams;

pub use error::{Error, Result};
pub use real::Real;

/// f64 branching mechanism.
pub type Mechanism = mechanism::BranchingMechanism<f64>;
/// f64 jump-measure specification.
pub type Measure = mechanism::LevyMeasure<f64>;
/// f64 classification record.
pub type MechanismClass = mechanism::Classification<f64>;
