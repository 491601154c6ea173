//! Post-processing of runs: interpolation, shock fronts, refinement studies,
//! vehicle trajectories and the continuous a priori bounds.

mod bounds;
mod q1;
mod refinement;
mod shock;
mod trajectories;

pub use bounds::{continuous_bounds, ContinuousBounds};
pub use q1::{q1_interpolate, q1_on_field};
pub use refinement::{refinement_study, RefinementLevel, RefinementReport};
pub use shock::{track_shock, ShockPoint, ShockTrace};
pub use trajectories::{vehicle_trajectories, TrajectoryPoint, VehicleTrajectory};
