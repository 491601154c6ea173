use alloc::vec::Vec;

use crate::hamiltonian::Orientation;
use crate::hj_scheme::LabelField;
use crate::junction::JunctionSpec;

/// Position of a vehicle at one snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    /// Snapshot time (s).
    pub time_s: f64,
    /// Branch-local distance from the junction (m).
    pub x_m: f64,
    /// Position along the route: `-x` on incoming branches, `x` on outgoing
    /// ones.
    pub signed_x_m: f64,
}

/// Iso-label curve of one label value, split by branch.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleTrajectory {
    /// Label value followed.
    pub label: f64,
    /// One polyline per branch, in branch order. Every incoming polyline
    /// ends and every outgoing polyline starts at the junction crossing, so
    /// any incoming/outgoing pair forms a route through the junction.
    pub branches: Vec<Vec<TrajectoryPoint>>,
}

/// Extracts vehicle paths as iso-contours of the labels at each snapshot
/// time.
///
/// On each branch the position is the crossing closest to the junction of
/// the piecewise-linear label profile. A snapshot where the label lies
/// outside a branch's range contributes no point on that branch, and the
/// polyline stops at the first such snapshot after it has started.
pub fn vehicle_trajectories(
    junction: &JunctionSpec,
    dx_m: f64,
    snapshots: &[LabelField],
    labels: &[f64],
) -> Vec<VehicleTrajectory> {
    labels
        .iter()
        .map(|&label| {
            let branches = (0..junction.len())
                .map(|alpha| {
                    let orientation = junction.orientation(alpha);
                    let mut points = Vec::new();
                    for s in snapshots {
                        match locate(s.branch(alpha), label, orientation, dx_m) {
                            Some(x_m) => points.push(TrajectoryPoint {
                                time_s: s.time_s(),
                                x_m,
                                signed_x_m: -orientation.sign() * x_m,
                            }),
                            None if !points.is_empty() => break,
                            None => {}
                        }
                    }
                    points
                })
                .collect();
            VehicleTrajectory { label, branches }
        })
        .collect()
}

/// Smallest `x` with `U(x) >= label` on incoming branches (labels grow away
/// from the junction) or `U(x) <= label` on outgoing ones.
fn locate(u: &[f64], label: f64, orientation: Orientation, dx_m: f64) -> Option<f64> {
    // work with a nondecreasing profile
    let s = orientation.sign();
    let target = s * label;
    if s * u[0] >= target {
        return (s * u[0] == target).then_some(0.0);
    }
    u.windows(2).enumerate().find_map(|(i, w)| {
        let (a, b) = (s * w[0], s * w[1]);
        if b >= target && a < target {
            Some((i as f64 + (target - a) / (b - a)) * dx_m)
        } else {
            None
        }
    })
}
