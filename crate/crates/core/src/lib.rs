//! Mechanistic model of a small organic Rankine cycle test stand.
//!
//! The crate provides the pieces needed to simulate superheat dynamics at the
//! evaporator outlet under pump-speed actuation:
//!
//! - [`fluid`]: analytic working-fluid property correlations (saturation curve,
//!   enthalpies, densities) over a bounded pressure window,
//! - [`evaporator`]: a three-zone moving-boundary evaporator written as a
//!   semi-explicit index-1 DAE, with the Newton solver that keeps the algebraic
//!   constraints satisfied,
//! - [`machines`]: static pump and expander models closing the mass-flow loop,
//! - [`plant`]: the assembled plant with time stepping and equilibrium finding,
//! - [`pi`]: the PI baseline controller with conditional-integration anti-windup.
//!
//! Everything is plain `f64`; plant instances are cheap to clone and each one
//! is single-threaded, so parallel experiments run one instance per thread.

pub mod evaporator;
pub mod fluid;
pub mod linalg;
pub mod machines;
pub mod pi;
pub mod plant;

pub use evaporator::{EvaporatorInputs, EvaporatorState, PlantParams};
pub use fluid::Fluid;
pub use pi::PiController;
pub use plant::{Plant, PlantError, SolverSettings, StepOutputs};
