//! Scenario files, CSV output and command implementations for the junction
//! label and density solvers.

#![warn(missing_docs)]

pub mod commands;
mod error;
pub mod output;
pub mod scenario;
pub mod verify;

pub use error::{AppError, AppResult};
pub use scenario::{Field, Outputs, Scenario};
