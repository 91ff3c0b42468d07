//! Numerical laboratory for the linearized incompressible Navier-Stokes
//! inverse source problem: a MAC-grid forward solver, singular-in-time
//! Carleman weights, evaluators for the Carleman inequalities, and
//! end-to-end Lipschitz-stability experiments.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`, which is what the experiments use.

pub mod carleman;
pub mod error;
pub mod forward;
pub mod grid;
pub mod inverse_lab;
pub mod operators;
pub mod scalar;
pub mod weights;

pub use error::{LabError, Result};
pub use scalar::Real;

pub type Grid64 = grid::Grid<f64>;
pub type Field64 = grid::Field<f64>;
pub type TimeSeries64 = grid::TimeSeriesField<f64>;
