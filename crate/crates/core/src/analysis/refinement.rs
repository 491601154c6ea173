use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use super::q1::q1_interpolate;
use crate::error::{Error, Result};
use crate::hj_scheme::{compute_cfl_restrictive, run_hj, HjProblem, SnapshotPair, SnapshotPlan};
use crate::junction::{GridSpec, InitialData, JunctionSpec, TimeStep};

/// One grid level of a refinement study.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementLevel {
    /// Space step (m).
    pub dx_m: f64,
    /// Resolved time step (s).
    pub dt_s: f64,
    /// Steps taken, one past the last comparison time.
    pub n_steps: usize,
    /// Sup-norm of the label difference to the next finer level over all
    /// snapshot times; `None` on the finest level.
    pub label_diff_to_next_finer: Option<f64>,
    /// Same, per snapshot time.
    pub label_diff_per_time: Vec<f64>,
    /// Sup-norm of the difference of the densities derived from the labels
    /// on the coarsest cells.
    pub density_diff_to_next_finer: Option<f64>,
}

/// Cross-grid comparison of label fields.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementReport {
    /// Physical comparison times (s).
    pub times_s: Vec<f64>,
    /// Levels, coarsest first.
    pub levels: Vec<RefinementLevel>,
}

/// Runs the label scheme at every space step in `dx_levels` (nonincreasing)
/// and compares consecutive levels at `times_s` on the nodes of the
/// coarsest grid, using Q1 interpolation in space and time.
///
/// An explicit time step in `template` belongs to the first level and is
/// scaled with `dx` on the others; [`TimeStep::Auto`] is resolved per level.
pub fn refinement_study(
    junction: &JunctionSpec,
    init: &InitialData,
    template: &GridSpec,
    dx_levels: &[f64],
    times_s: &[f64],
) -> Result<RefinementReport> {
    if dx_levels.len() < 2 {
        return Err(Error::InvalidGrid(format!(
            "a refinement study needs at least two levels, got {}",
            dx_levels.len()
        )));
    }
    if dx_levels.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidGrid("space steps must not increase across levels".into()));
    }
    if times_s.is_empty() {
        return Err(Error::InvalidGrid("no comparison times".into()));
    }
    let horizon_s = times_s.iter().copied().fold(0.0, f64::max);
    let plan = SnapshotPlan {
        brackets_s: times_s.to_vec(),
        ..SnapshotPlan::default()
    };

    let mut runs: Vec<(f64, f64, usize, Vec<SnapshotPair>)> = Vec::with_capacity(dx_levels.len());
    for (level, &dx_m) in dx_levels.iter().enumerate() {
        let failed = |e: Error| Error::LevelFailed { level, dx_m, reason: e.to_string() };
        let dt = match template.dt {
            TimeStep::Auto => TimeStep::Auto,
            TimeStep::Seconds(s) => TimeStep::Seconds(s * dx_m / dx_levels[0]),
        };
        let grid = GridSpec { dx_m, dt, horizon_s };
        let problem = HjProblem::new(junction, &grid, init).map_err(failed)?;
        // one extra step so the last comparison time is bracketed
        let dt_s = compute_cfl_restrictive(&problem)
            .and_then(|c| c.resolve(dt))
            .map_err(failed)?;
        let grid = GridSpec { horizon_s: horizon_s + dt_s, ..grid };
        let run = run_hj(problem, &grid, &plan, true).map_err(failed)?;
        runs.push((dx_m, run.dt_s, run.n_steps, run.brackets));
    }

    let coarse_dx = dx_levels[0];
    let nodes: Vec<Vec<f64>> = (0..junction.len())
        .map(|alpha| {
            let span = dx_levels
                .iter()
                .map(|&dx| {
                    let grid = GridSpec { dx_m: dx, ..*template };
                    grid.last_point(junction.branch(alpha).length_m) as f64 * dx
                })
                .fold(f64::INFINITY, f64::min);
            let count = libm::floor(span / coarse_dx + 1e-9) as usize;
            (0..=count).map(|i| i as f64 * coarse_dx).collect()
        })
        .collect();

    let mut levels = Vec::with_capacity(runs.len());
    for l in 0..runs.len() {
        let (dx_m, dt_s, n_steps, _) = runs[l];
        let mut level = RefinementLevel {
            dx_m,
            dt_s,
            n_steps,
            label_diff_to_next_finer: None,
            label_diff_per_time: Vec::new(),
            density_diff_to_next_finer: None,
        };
        if l + 1 < runs.len() {
            let (coarse, fine) = (&runs[l], &runs[l + 1]);
            let mut density_diff: f64 = 0.0;
            for (k, &t) in times_s.iter().enumerate() {
                let mut label_diff: f64 = 0.0;
                for (alpha, xs) in nodes.iter().enumerate() {
                    let scale = junction.orientation(alpha).sign() * junction.branch(alpha).gamma
                        / (coarse_dx / 1000.0);
                    let mut prev: Option<(f64, f64)> = None;
                    for &x in xs {
                        let a = q1_interpolate(&coarse.3[k], t, x, alpha, coarse.0)?;
                        let b = q1_interpolate(&fine.3[k], t, x, alpha, fine.0)?;
                        label_diff = label_diff.max((a - b).abs());
                        if let Some((pa, pb)) = prev {
                            density_diff = density_diff.max((scale * ((a - pa) - (b - pb))).abs());
                        }
                        prev = Some((a, b));
                    }
                }
                level.label_diff_per_time.push(label_diff);
            }
            level.label_diff_to_next_finer =
                Some(level.label_diff_per_time.iter().copied().fold(0.0, f64::max));
            level.density_diff_to_next_finer = Some(density_diff);
        }
        levels.push(level);
    }
    Ok(RefinementReport {
        times_s: times_s.to_vec(),
        levels,
    })
}
