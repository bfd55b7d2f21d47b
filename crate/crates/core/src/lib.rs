//! Finite volume shallow water solver with an embedded zero-width permeable
//! barrier on a Cartesian cut-cell grid, plus a mapped-grid reference solver.

pub mod barrier;
pub mod config;
pub mod cutcell;
pub mod driver;
pub mod error;
pub mod geometry;
pub mod io;
pub mod mapped;
pub mod mesh;
pub mod riemann;
pub mod solver;
pub mod state;
pub mod study;

pub use error::{Error, Result};
pub use state::{AverageKind, ConservedState, Order, SolverParams};
