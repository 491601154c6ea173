//! Monotone finite-difference scheme for Hamilton-Jacobi equations posed on a
//! junction of half-lines, and the Godunov scheme for LWR traffic densities
//! that it induces.
//!
//! The crate is `no_std` (it needs `alloc`). All physical quantities use
//! traffic units internally: densities in veh/km, flows in veh/h, label
//! gradients in labels/km and speeds in km/h. Grids are described in meters
//! and seconds and converted once when a solver is built.
//!
//! Module map:
//! - [`hamiltonian`]: fundamental diagrams, demand/supply and the branch
//!   Hamiltonians `H`, `H-`, `H+` with their generalized inverses.
//! - [`junction`]: junction topology, grids, initial data and the
//!   density/label conversions.
//! - [`hj_scheme`]: the label time-stepper with CFL validation and the
//!   gradient/time-derivative estimate tracker.
//! - [`density_scheme`]: the derived Godunov scheme for densities, including
//!   the junction flux and flux-maximizing split coefficients.
//! - [`analysis`]: shock tracking, Q1 interpolation, refinement studies and
//!   vehicle trajectories.
#![no_std]
#![warn(missing_docs)]

extern crate alloc;

pub mod analysis;
pub mod density_scheme;
mod error;
pub mod hamiltonian;
pub mod hj_scheme;
pub mod junction;
pub mod units;

pub use error::{Error, Result};
pub use hamiltonian::{BranchHamiltonian, DiagramKind, FundamentalDiagram, Orientation};
pub use junction::{Branch, GridSpec, InitialData, JunctionSpec, Segment, TimeStep};
