//! Logarithmic diffusion `u_t = Δ log u` with nonlinear Robin boundary data.
//!
//! Solvers for the line `[-l, l]`, the disc and the cylinder `[-l, l] × S¹`
//! share one implicit integrator ([`integrate`]). Geometry routines read a
//! state `u` as the conformal factor of the metric `u (dx² + dθ²)`.

pub mod analysis;
pub mod cylinder;
pub mod disc;
pub mod domain;
pub mod error;
pub mod geometry;
pub mod integrate;
pub mod krylov;
pub mod solver1d;
pub mod tridiag;

pub use domain::{Interval1D, LogFlux, RobinBoundary, Side, SolutionState, SolverConfig};
pub use error::{Error, Result};
pub use integrate::{DiagnosticRow, Termination, Trajectory};
