//! Checks shared by the `verify` subcommand and the acceptance suite.

use junction_hj_core::analysis::continuous_bounds;
use junction_hj_core::density_scheme::{verify_equivalence, DensitySolver, GammaPolicy};
use junction_hj_core::hj_scheme::{EstimateRow, HjProblem, HjSolver, LabelField};
use junction_hj_core::{
    Branch, FundamentalDiagram, GridSpec, InitialData, JunctionSpec, Orientation, Segment, TimeStep,
};
use rand::Rng;

use crate::error::AppResult;

/// Tolerance of the order comparison in the monotonicity check.
pub const ORDER_TOL: f64 = 1e-12;

/// Random junction with 1-2 incoming and 1-2 outgoing branches, random
/// diagrams (bi-parabolic or triangular), random split coefficients and
/// piecewise-constant densities on branches of `length_m`.
pub fn random_scenario<R: Rng>(rng: &mut R, length_m: f64) -> (JunctionSpec, InitialData) {
    let n_in = rng.random_range(1..=2);
    let n_out = rng.random_range(1..=2);
    let n = n_in + n_out;
    let mut gammas: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    for group in [0..n_in, n_in..n] {
        let s: f64 = gammas[group.clone()].iter().sum();
        for g in &mut gammas[group.clone()] {
            *g /= s;
        }
        let rest: f64 = gammas[group.start + 1..group.end].iter().sum();
        gammas[group.start] = 1.0 - rest;
    }
    let mut branches = Vec::with_capacity(n);
    let mut profiles = Vec::with_capacity(n);
    for &gamma in &gammas {
        let rho_c = rng.random_range(15.0..40.0);
        let rho_max = rng.random_range(120.0..200.0);
        let f_max = rng.random_range(800.0..2500.0);
        let diagram = if rng.random_bool(0.5) {
            FundamentalDiagram::bi_parabolic(rho_c, rho_max, f_max, rng.random_range(1.0..1.9))
        } else {
            FundamentalDiagram::piecewise(vec![(0.0, 0.0), (rho_c, f_max), (rho_max, 0.0)])
        }
        .expect("parameters in range");
        let pieces = rng.random_range(1..=3);
        let mut cuts: Vec<f64> = (1..pieces).map(|_| rng.random_range(0.0..length_m)).collect();
        cuts.sort_by(f64::total_cmp);
        let mut from = 0.0;
        let mut segments = Vec::with_capacity(pieces);
        for to in cuts.into_iter().chain([length_m]) {
            if to > from {
                segments.push(Segment { from_m: from, to_m: to, rho: rng.random_range(0.0..=rho_max) });
                from = to;
            }
        }
        profiles.push(segments);
        branches.push(Branch { diagram, gamma, length_m });
    }
    let junction = JunctionSpec::new(n_in, branches).expect("coefficients normalized");
    let init = InitialData {
        profiles,
        junction_label: rng.random_range(-10.0..10.0),
        inflow_density: vec![None; n],
    };
    (junction, init)
}

/// Largest gap between the densities derived from a label run and a direct
/// density run over `steps` steps, both with the label scheme's step.
pub fn equivalence_gap(junction: &JunctionSpec, init: &InitialData, dx_m: f64, steps: usize) -> AppResult<f64> {
    let grid = GridSpec { dx_m, dt: TimeStep::Auto, horizon_s: 0.0 };
    let mut hj = HjSolver::new(HjProblem::new(junction, &grid, init)?, TimeStep::Auto, false)?;
    let grid = GridSpec { dt: TimeStep::Seconds(hj.dt_s()), ..grid };
    let mut ds = DensitySolver::new(junction, &grid, init, GammaPolicy::Fixed)?;
    let mut worst = verify_equivalence(junction, dx_m, &[hj.state().clone()], &[ds.state().clone()])?;
    for _ in 0..steps {
        hj.step()?;
        ds.step()?;
        worst = worst.max(verify_equivalence(junction, dx_m, &[hj.state().clone()], &[ds.state().clone()])?);
    }
    Ok(worst)
}

/// Checks the estimate rows of a run: `m^n` nondecreasing, `M^n`
/// nonincreasing and every gradient margin nonnegative, up to `tol` scaled
/// by magnitude. Returns the failures.
pub fn estimate_failures(rows: &[EstimateRow], tol: f64) -> Vec<String> {
    let mut out = Vec::new();
    for w in rows.windows(2) {
        let scale = tol * w[0].m.abs().max(w[0].big_m.abs()).max(1.0);
        if w[1].m < w[0].m - scale {
            out.push(format!("step {}: m decreased from {} to {}", w[1].step, w[0].m, w[1].m));
        }
        if w[1].big_m > w[0].big_m + scale {
            out.push(format!("step {}: M increased from {} to {}", w[1].step, w[0].big_m, w[1].big_m));
        }
    }
    for r in rows {
        for (a, (lo, hi)) in r.lower_margin.iter().zip(&r.upper_margin).enumerate() {
            if *lo < -tol || *hi < -tol {
                out.push(format!("step {}: branch {} gradient outside bounds ({lo}, {hi})", r.step, a + 1));
            }
        }
    }
    out
}

/// Largest per-step mass-balance residual of the density scheme, relative
/// to the mass after the step.
pub fn conservation_residual(
    junction: &JunctionSpec,
    grid: &GridSpec,
    init: &InitialData,
    policy: GammaPolicy,
    steps: usize,
) -> AppResult<f64> {
    let mut s = DensitySolver::new(junction, grid, init, policy)?;
    let dx_km = grid.dx_km();
    let dt_h = s.dt_s() / 3600.0;
    let mut mass = s.state().total_vehicles(dx_km);
    let mut worst: f64 = 0.0;
    for _ in 0..steps {
        let f = s.step()?;
        let next = s.state().total_vehicles(dx_km);
        let residual = (next - mass) - dt_h * (f.inflow - f.outflow);
        worst = worst.max(residual.abs() / next.max(f64::MIN_POSITIVE));
        mass = next;
    }
    Ok(worst)
}

/// Compares the continuous bounds with the discrete ones of the initial
/// labels. Returns the failures.
pub fn bound_bracket_failures(junction: &JunctionSpec, grid: &GridSpec, init: &InitialData) -> AppResult<Vec<String>> {
    let b = continuous_bounds(junction, init)?;
    let s = HjSolver::new(HjProblem::new(junction, grid, init)?, TimeStep::Auto, false)?;
    let c = s.cfl();
    let tol = |x: f64| 1e-9 * x.abs().max(1.0);
    let mut out = Vec::new();
    if b.m0_0 > c.m0 + tol(c.m0) {
        out.push(format!("m0_0 = {} exceeds m0 = {}", b.m0_0, c.m0));
    }
    if c.big_m0 > b.big_m0_0 + tol(c.big_m0) {
        out.push(format!("M0 = {} exceeds M0_0 = {}", c.big_m0, b.big_m0_0));
    }
    for a in 0..junction.len() {
        if b.p_lo0[a] > c.p_lo[a] + tol(c.p_lo[a]) {
            out.push(format!("branch {}: lower bound {} above {}", a + 1, b.p_lo0[a], c.p_lo[a]));
        }
        if c.p_hi[a] > b.p_hi0[a] + tol(c.p_hi[a]) {
            out.push(format!("branch {}: upper bound {} above {}", a + 1, c.p_hi[a], b.p_hi0[a]));
        }
    }
    Ok(out)
}

/// Outcome of [`monotonicity_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    /// Ordered pairs tested.
    pub pairs: usize,
    /// Steps per pair.
    pub steps: usize,
    /// Point comparisons made.
    pub comparisons: usize,
    /// Comparisons where `U > V + ORDER_TOL`.
    pub violations: usize,
    /// Largest `U - V` seen.
    pub worst_excess: f64,
}

fn random_labels<R: Rng>(rng: &mut R, junction: &JunctionSpec, points: &[usize], dx_m: f64) -> LabelField {
    let u0 = rng.random_range(-5.0..5.0);
    let values = (0..junction.len())
        .map(|a| {
            let b = junction.branch(a);
            let scale = junction.orientation(a).sign() * dx_m / 1000.0 / b.gamma;
            let mut col = Vec::with_capacity(points[a] + 1);
            col.push(u0);
            for _ in 0..points[a] {
                let rho = rng.random_range(0.0..=b.diagram.rho_max());
                col.push(col[col.len() - 1] + scale * rho);
            }
            col
        })
        .collect();
    LabelField::new(values, 0, 0.0)
}

/// Property test of order preservation: for random label fields `U` and
/// `W`, runs `U` and `V = max(U, W)` side by side with a common admissible
/// step and checks `U^n <= V^n`.
///
/// The free-outflow closure at the end of outgoing branches is not monotone
/// on congested cells, so points of an outgoing branch within `n` points of
/// its end are not compared at step `n`.
pub fn monotonicity_check<R: Rng>(
    rng: &mut R,
    junction: &JunctionSpec,
    dx_m: f64,
    pairs: usize,
    steps: usize,
) -> AppResult<MonotonicityReport> {
    let grid = GridSpec { dx_m, dt: TimeStep::Auto, horizon_s: 0.0 };
    let zero = InitialData::uniform(junction, &vec![0.0; junction.len()]);
    let problem = HjProblem::new(junction, &grid, &zero)?;
    let points: Vec<usize> = (0..junction.len()).map(|a| problem.initial().branch(a).len() - 1).collect();
    let mut report = MonotonicityReport { pairs, steps, comparisons: 0, violations: 0, worst_excess: f64::NEG_INFINITY };
    for _ in 0..pairs {
        let u = random_labels(rng, junction, &points, dx_m);
        let w = random_labels(rng, junction, &points, dx_m);
        let v_values = u
            .values()
            .iter()
            .zip(w.values())
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p.max(*q)).collect())
            .collect();
        let v = LabelField::new(v_values, 0, 0.0);
        let pu = problem.clone().with_initial_labels(u)?;
        let pv = problem.clone().with_initial_labels(v)?;
        let dt = HjSolver::new(pu.clone(), TimeStep::Auto, false)?
            .cfl()
            .dt_max_s
            .min(HjSolver::new(pv.clone(), TimeStep::Auto, false)?.cfl().dt_max_s)
            * junction_hj_core::junction::AUTO_DT_FRACTION;
        let mut su = HjSolver::new(pu, TimeStep::Seconds(dt), false)?;
        let mut sv = HjSolver::new(pv, TimeStep::Seconds(dt), false)?;
        for n in 1..=steps {
            su.step()?;
            sv.step()?;
            for (a, &last) in points.iter().enumerate() {
                let reach = match junction.orientation(a) {
                    Orientation::Incoming => last,
                    Orientation::Outgoing if n > last => continue,
                    Orientation::Outgoing => last - n,
                };
                let (x, y) = (su.state().branch(a), sv.state().branch(a));
                for i in 0..=reach {
                    let excess = x[i] - y[i];
                    report.comparisons += 1;
                    report.worst_excess = report.worst_excess.max(excess);
                    if excess > ORDER_TOL {
                        report.violations += 1;
                    }
                }
            }
        }
    }
    Ok(report)
}
