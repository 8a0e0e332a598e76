//! One-dimensional viscous compressible flow without heat conduction, in
//! Lagrangian mass coordinates, with vacuum allowed in the initial density.
//!
//! * [`model`]: grids, fields, initial data, conserved quantities, norms.
//! * [`operators`]: staggered differences and the tridiagonal solver.
//! * [`integrator`]: the semi-implicit global-in-time solver.
//! * [`picard`]: the fixed-point construction on short windows.
//! * [`certify`]: conservation laws and a priori bounds evaluated on trajectories.
//! * [`presets`]: named initial profiles.

pub mod certify;
pub mod error;
pub mod integrator;
pub mod model;
pub mod operators;
pub mod picard;
pub mod presets;

pub use error::{Error, Result};
pub use integrator::{run, StepConfig, Trajectory};
pub use model::{Conserved, InitialData, MassGrid, PhysParams, State};
pub use picard::{picard_solve, PicardConfig};
