use alloc::vec::Vec;

use crate::density_scheme::DensityField;
use crate::error::{Error, Result};
use crate::hamiltonian::Orientation;
use crate::units::{M_PER_KM, S_PER_H};

/// Front location at one snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShockPoint {
    /// Snapshot time (s).
    pub time_s: f64,
    /// Branch-local distance from the junction (m).
    pub position_m: f64,
}

/// Tracked front on one branch and its fitted speed.
#[derive(Debug, Clone, PartialEq)]
pub struct ShockTrace {
    /// Branch index.
    pub branch: usize,
    /// Threshold density used (veh/km).
    pub threshold: f64,
    /// Front locations, one per usable snapshot.
    pub points: Vec<ShockPoint>,
    /// Least-squares speed in the direction of traffic (km/h). Negative
    /// values are fronts moving against the traffic.
    pub speed_kmh: f64,
    /// Root-mean-square residual of the fit (m).
    pub residual_m: f64,
}

/// Tracks the density front closest to the junction on `branch`.
///
/// In each snapshot the front is the first crossing of `threshold`, walking
/// away from the junction, between two neighboring cell centers, located by
/// linear interpolation. Snapshots without a crossing are skipped. When
/// `threshold` is `None` the midpoint between the smallest and largest
/// density of the first snapshot is used.
pub fn track_shock(
    snapshots: &[DensityField],
    branch: usize,
    orientation: Orientation,
    dx_m: f64,
    threshold: Option<f64>,
) -> Result<ShockTrace> {
    let threshold = match (threshold, snapshots.first()) {
        (Some(t), _) => t,
        (None, Some(first)) => {
            let rho = first.branch(branch);
            let lo = rho.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = rho.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            0.5 * (lo + hi)
        }
        (None, None) => return Err(Error::TooFewSamples { found: 0 }),
    };
    let points: Vec<ShockPoint> = snapshots
        .iter()
        .filter_map(|s| {
            crossing(s.branch(branch), threshold, dx_m).map(|position_m| ShockPoint {
                time_s: s.time_s(),
                position_m,
            })
        })
        .collect();
    let distinct_times = {
        let mut t: Vec<f64> = points.iter().map(|p| p.time_s).collect();
        t.dedup();
        t.len()
    };
    if distinct_times < 2 {
        return Err(Error::TooFewSamples { found: distinct_times });
    }
    let (slope, residual_m) = least_squares(&points);
    // local x grows against the traffic on incoming branches
    let speed_kmh = -orientation.sign() * slope * S_PER_H / M_PER_KM;
    Ok(ShockTrace {
        branch,
        threshold,
        points,
        speed_kmh,
        residual_m,
    })
}

fn crossing(rho: &[f64], threshold: f64, dx_m: f64) -> Option<f64> {
    rho.windows(2).enumerate().find_map(|(j, w)| {
        let (a, b) = (w[0] - threshold, w[1] - threshold);
        if a == 0.0 && b == 0.0 {
            return None;
        }
        if a == 0.0 {
            return Some((j as f64 + 0.5) * dx_m);
        }
        if a * b < 0.0 || b == 0.0 {
            let frac = a / (a - b);
            return Some((j as f64 + 0.5 + frac) * dx_m);
        }
        None
    })
}

fn least_squares(points: &[ShockPoint]) -> (f64, f64) {
    let n = points.len() as f64;
    let mt = points.iter().map(|p| p.time_s).sum::<f64>() / n;
    let mx = points.iter().map(|p| p.position_m).sum::<f64>() / n;
    let stt: f64 = points.iter().map(|p| (p.time_s - mt) * (p.time_s - mt)).sum();
    let stx: f64 = points
        .iter()
        .map(|p| (p.time_s - mt) * (p.position_m - mx))
        .sum();
    let slope = stx / stt;
    let sse: f64 = points
        .iter()
        .map(|p| {
            let r = p.position_m - (mx + slope * (p.time_s - mt));
            r * r
        })
        .sum();
    (slope, libm::sqrt(sse / n))
}
