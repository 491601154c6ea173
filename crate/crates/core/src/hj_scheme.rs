//! Explicit monotone scheme for the label field.
//!
//! Interior points follow
//!
//! ```text
//! U_i^{n+1} = U_i^n - dt max{ H+(p_{i,-}), H-(p_{i,+}) }
//! ```
//!
//! and the junction point, shared by every branch, follows
//! `U_0^{n+1} = U_0^n - dt max_beta H-_beta(p^beta_{0,+})`. The last point of
//! each branch uses the interior formula with a ghost gradient: the upstream
//! inflow density on incoming branches and `p_{N_b,-}` (free outflow) on
//! outgoing ones.
//!
//! Labels are in vehicles, gradients in labels/km and time derivatives in
//! labels/h.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::hamiltonian::{BranchHamiltonian, Orientation};
use crate::junction::{
    labels_from_densities, GridSpec, InitialData, JunctionSpec, TimeStep, AUTO_DT_FRACTION,
};
use crate::units::{h_to_s, s_to_h};

/// Relative slack accepted when a user-provided `dt` equals `dt_max` up to
/// rounding.
const DT_SLACK: f64 = 1e-12;

/// Base tolerance of the estimate tripwires, scaled by magnitude.
pub const ESTIMATE_TOL: f64 = 1e-9;

/// Labels `U^alpha_i` on every branch at one time level.
///
/// Index `0` of every branch holds the junction label; the scheme writes the
/// same `f64` there for all branches.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelField {
    values: Vec<Vec<f64>>,
    step: usize,
    time_s: f64,
}

impl LabelField {
    /// Wraps per-branch label columns.
    pub fn new(values: Vec<Vec<f64>>, step: usize, time_s: f64) -> Self {
        Self { values, step, time_s }
    }

    /// Labels of branch `alpha`, junction first.
    pub fn branch(&self, alpha: usize) -> &[f64] {
        &self.values[alpha]
    }

    /// All branches.
    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// Mutable access, used to build perturbed fields.
    pub fn values_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.values
    }

    /// Step index `n`.
    pub fn step(&self) -> usize {
        self.step
    }

    /// Physical time in seconds.
    pub fn time_s(&self) -> f64 {
        self.time_s
    }

    /// Number of branches.
    pub fn n_branches(&self) -> usize {
        self.values.len()
    }

    /// Shared junction label `U_0`.
    pub fn junction_value(&self) -> f64 {
        self.values[0][0]
    }

    /// Largest `|U^alpha_0 - U^1_0|`; zero whenever the identification holds.
    pub fn junction_mismatch(&self) -> f64 {
        let u0 = self.junction_value();
        self.values.iter().map(|b| (b[0] - u0).abs()).fold(0.0, f64::max)
    }

    /// Adds `c` to every label.
    pub fn shifted(&self, c: f64) -> Self {
        let values = self
            .values
            .iter()
            .map(|b| b.iter().map(|v| v + c).collect())
            .collect();
        Self::new(values, self.step, self.time_s)
    }
}

/// `(p_minus, p_plus)` at point `i` of branch `alpha`; `p_minus` is `None` at
/// the junction and `p_plus` is `None` at the last point.
pub fn discrete_gradients(
    labels: &LabelField,
    alpha: usize,
    i: usize,
    dx_km: f64,
) -> Result<(Option<f64>, Option<f64>)> {
    let u = labels.branch(alpha);
    let last = u.len() - 1;
    if i > last {
        return Err(Error::IndexOutOfRange { branch: alpha, index: i, last });
    }
    let minus = (i > 0).then(|| (u[i] - u[i - 1]) / dx_km);
    let plus = (i < last).then(|| (u[i + 1] - u[i]) / dx_km);
    Ok((minus, plus))
}

/// Interior update rate `-max{H+(p_minus), H-(p_plus)}` (labels/h).
#[inline]
pub fn interior_rate(h: &BranchHamiltonian, p_minus: f64, p_plus: f64) -> f64 {
    -h.eval_plus(p_minus).max(h.eval_minus(p_plus))
}

/// Everything a run needs besides the time step: Hamiltonians, initial
/// labels and boundary data.
#[derive(Debug, Clone)]
pub struct HjProblem {
    junction: JunctionSpec,
    hamiltonians: Vec<BranchHamiltonian>,
    dx_m: f64,
    ghost_gradient: Vec<Option<f64>>,
    initial: LabelField,
    initial_data: InitialData,
}

impl HjProblem {
    /// Builds the initial labels and the incoming ghost gradients
    /// `rho_in / gamma`.
    pub fn new(junction: &JunctionSpec, grid: &GridSpec, init: &InitialData) -> Result<Self> {
        let initial = labels_from_densities(junction, grid, init)?;
        let hamiltonians = junction.hamiltonians();
        let ghost_gradient = (0..junction.len())
            .map(|alpha| match junction.orientation(alpha) {
                Orientation::Incoming => {
                    let rho = init.inflow_density(alpha, junction.branch(alpha).length_m);
                    Some(hamiltonians[alpha].gradient(rho))
                }
                Orientation::Outgoing => None,
            })
            .collect();
        Ok(Self {
            junction: junction.clone(),
            hamiltonians,
            dx_m: grid.dx_m,
            ghost_gradient,
            initial,
            initial_data: init.clone(),
        })
    }

    /// Replaces the initial labels (used by property tests on arbitrary
    /// fields). The layout must match and the junction label must be shared.
    pub fn with_initial_labels(mut self, labels: LabelField) -> Result<Self> {
        let same_shape = labels.n_branches() == self.initial.n_branches()
            && labels
                .values()
                .iter()
                .zip(self.initial.values())
                .all(|(a, b)| a.len() == b.len());
        if !same_shape {
            return Err(Error::Mismatch("label field layout differs from the grid".into()));
        }
        if labels.junction_mismatch() != 0.0 {
            return Err(Error::Mismatch("junction labels differ across branches".into()));
        }
        self.initial = labels;
        Ok(self)
    }

    /// The junction.
    pub fn junction(&self) -> &JunctionSpec {
        &self.junction
    }

    /// Branch Hamiltonians.
    pub fn hamiltonians(&self) -> &[BranchHamiltonian] {
        &self.hamiltonians
    }

    /// Space step in meters.
    pub fn dx_m(&self) -> f64 {
        self.dx_m
    }

    /// Space step in km.
    pub fn dx_km(&self) -> f64 {
        self.dx_m / crate::units::M_PER_KM
    }

    /// Initial labels.
    pub fn initial(&self) -> &LabelField {
        &self.initial
    }

    /// Initial density data the labels were built from.
    pub fn initial_data(&self) -> &InitialData {
        &self.initial_data
    }

    /// Ghost gradient at the upstream end of incoming branches.
    pub fn ghost_gradient(&self, alpha: usize) -> Option<f64> {
        self.ghost_gradient[alpha]
    }

    /// Time derivatives `W^alpha_i` produced by one application of the
    /// scheme to `labels`.
    pub fn rates(&self, labels: &LabelField) -> Vec<Vec<f64>> {
        let dx = self.dx_km();
        let junction_rate = -self
            .hamiltonians
            .iter()
            .enumerate()
            .map(|(beta, h)| {
                let u = labels.branch(beta);
                h.eval_minus((u[1] - u[0]) / dx)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        self.hamiltonians
            .iter()
            .enumerate()
            .map(|(alpha, h)| {
                let u = labels.branch(alpha);
                let last = u.len() - 1;
                let mut w = Vec::with_capacity(u.len());
                w.push(junction_rate);
                for i in 1..last {
                    let p_minus = (u[i] - u[i - 1]) / dx;
                    let p_plus = (u[i + 1] - u[i]) / dx;
                    w.push(interior_rate(h, p_minus, p_plus));
                }
                let p_minus = (u[last] - u[last - 1]) / dx;
                let p_plus = self.ghost_gradient[alpha].unwrap_or(p_minus);
                w.push(interior_rate(h, p_minus, p_plus));
                w
            })
            .collect()
    }
}

/// Static bounds and the largest admissible time step derived from the
/// initial labels.
#[derive(Debug, Clone, PartialEq)]
pub struct CflReport {
    /// `m0 = inf W^0` (labels/h).
    pub m0: f64,
    /// `M0 = sup W^0` (labels/h).
    pub big_m0: f64,
    /// Lower gradient bounds `(H-)^{-1}(-m0)` per branch (labels/km).
    pub p_lo: Vec<f64>,
    /// Upper gradient bounds `(H+)^{-1}(-m0)` per branch.
    pub p_hi: Vec<f64>,
    /// Essential sup of `|H'|` over `[p_lo, p_hi]` per branch (km/h).
    pub lipschitz: Vec<f64>,
    /// Largest admissible step in seconds.
    pub dt_max_s: f64,
    /// Branch attaining the largest Lipschitz bound.
    pub binding_branch: usize,
}

impl CflReport {
    /// Resolves a time-step policy against `dt_max`.
    pub fn resolve(&self, dt: TimeStep) -> Result<f64> {
        match dt {
            TimeStep::Auto => Ok(AUTO_DT_FRACTION * self.dt_max_s),
            TimeStep::Seconds(s) if s <= self.dt_max_s * (1.0 + DT_SLACK) => Ok(s),
            TimeStep::Seconds(s) => Err(Error::CflViolation {
                branch: self.binding_branch,
                dt_s: s,
                dt_max_s: self.dt_max_s,
            }),
        }
    }
}

/// Computes `m0`, the gradient bounds and `dt_max` from one dry application
/// of the scheme to the initial labels.
pub fn compute_cfl_restrictive(problem: &HjProblem) -> Result<CflReport> {
    let rates = problem.rates(problem.initial());
    let (m0, big_m0) = extrema(&rates);
    if !m0.is_finite() || !big_m0.is_finite() {
        return Err(Error::UnboundedInitialData);
    }
    let mut p_lo = Vec::with_capacity(rates.len());
    let mut p_hi = Vec::with_capacity(rates.len());
    let mut lipschitz = Vec::with_capacity(rates.len());
    for h in problem.hamiltonians() {
        let lo = h.inverse_minus(-m0)?;
        let hi = h.inverse_plus(-m0)?;
        lipschitz.push(h.lipschitz_bound(lo, hi));
        p_lo.push(lo);
        p_hi.push(hi);
    }
    let (binding_branch, speed) = lipschitz
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |best, (a, l)| if l > best.1 { (a, l) } else { best });
    let dt_max_s = if speed > 0.0 {
        h_to_s(problem.dx_km() / speed)
    } else {
        f64::INFINITY
    };
    Ok(CflReport {
        m0,
        big_m0,
        p_lo,
        p_hi,
        lipschitz,
        dt_max_s,
        binding_branch,
    })
}

fn extrema(rates: &[Vec<f64>]) -> (f64, f64) {
    rates
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &w| (lo.min(w), hi.max(w)))
}

/// One row of the estimate log.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRow {
    /// Step index `n`.
    pub step: usize,
    /// Time `n dt` in seconds.
    pub time_s: f64,
    /// `m^n` (labels/h).
    pub m: f64,
    /// `M^n` (labels/h).
    pub big_m: f64,
    /// Per branch `min_i p_{i,+} - p_lo`.
    pub lower_margin: Vec<f64>,
    /// Per branch `p_hi - max_i p_{i,+}`.
    pub upper_margin: Vec<f64>,
}

/// Running `m^n`, `M^n` and the static gradient bounds.
#[derive(Debug, Clone)]
pub struct EstimateTracker {
    /// Initial infimum of the time derivative.
    pub m0: f64,
    /// Initial supremum.
    pub big_m0: f64,
    /// Latest `m^n`.
    pub m_n: f64,
    /// Latest `M^n`.
    pub big_m_n: f64,
    /// Lower gradient bound per branch.
    pub p_lo: Vec<f64>,
    /// Upper gradient bound per branch.
    pub p_hi: Vec<f64>,
    strict: bool,
    observed: usize,
    violations: Vec<String>,
}

impl EstimateTracker {
    /// Starts tracking from the CFL report. With `strict` the first
    /// violation is returned as an error, otherwise it is recorded.
    pub fn new(cfl: &CflReport, strict: bool) -> Self {
        Self {
            m0: cfl.m0,
            big_m0: cfl.big_m0,
            m_n: cfl.m0,
            big_m_n: cfl.big_m0,
            p_lo: cfl.p_lo.clone(),
            p_hi: cfl.p_hi.clone(),
            strict,
            observed: 0,
            violations: Vec::new(),
        }
    }

    /// Violations recorded in non-strict mode.
    pub fn violations(&self) -> &[String] {
        &self.violations
    }

    fn time_tol(&self) -> f64 {
        ESTIMATE_TOL * self.m0.abs().max(1.0)
    }

    /// Checks the time-derivative monotonicity and gradient bounds for the
    /// state `labels` whose rates are `rates`.
    pub fn observe(
        &mut self,
        labels: &LabelField,
        rates: &[Vec<f64>],
        dx_km: f64,
        dt_s: f64,
    ) -> Result<EstimateRow> {
        let step = labels.step();
        let (m, big_m) = extrema(rates);
        let tol = self.time_tol();
        if self.observed > 0 {
            if m < self.m_n - tol {
                self.flag(step, format!("m^n decreased from {} to {}", self.m_n, m))?;
            }
            if big_m > self.big_m_n + tol {
                self.flag(step, format!("M^n increased from {} to {}", self.big_m_n, big_m))?;
            }
        }
        self.observed += 1;
        self.m_n = m;
        self.big_m_n = big_m;

        let n = labels.n_branches();
        let mut lower_margin = Vec::with_capacity(n);
        let mut upper_margin = Vec::with_capacity(n);
        for alpha in 0..n {
            let (lo, hi) = (self.p_lo[alpha], self.p_hi[alpha]);
            let mut min_p = f64::INFINITY;
            let mut max_p = f64::NEG_INFINITY;
            for (i, w) in labels.branch(alpha).windows(2).enumerate() {
                let p = (w[1] - w[0]) / dx_km;
                if p < lo - ESTIMATE_TOL * lo.abs().max(1.0)
                    || p > hi + ESTIMATE_TOL * hi.abs().max(1.0)
                {
                    self.flag(
                        step,
                        format!("branch {alpha} index {i}: gradient {p} outside [{lo}, {hi}]"),
                    )?;
                }
                min_p = min_p.min(p);
                max_p = max_p.max(p);
            }
            lower_margin.push(min_p - lo);
            upper_margin.push(hi - max_p);
        }
        Ok(EstimateRow {
            step,
            time_s: step as f64 * dt_s,
            m,
            big_m,
            lower_margin,
            upper_margin,
        })
    }

    fn flag(&mut self, step: usize, detail: String) -> Result<()> {
        if self.strict {
            Err(Error::EstimateViolation { step, detail })
        } else {
            self.violations.push(format!("step {step}: {detail}"));
            Ok(())
        }
    }
}

/// Time-stepper holding the current label field.
#[derive(Debug, Clone)]
pub struct HjSolver {
    problem: HjProblem,
    cfl: CflReport,
    dt_s: f64,
    state: LabelField,
    tracker: EstimateTracker,
    rows: Vec<EstimateRow>,
}

impl HjSolver {
    /// Validates the CFL condition and starts from the initial labels.
    pub fn new(problem: HjProblem, dt: TimeStep, strict: bool) -> Result<Self> {
        let cfl = compute_cfl_restrictive(&problem)?;
        let dt_s = cfl.resolve(dt)?;
        let tracker = EstimateTracker::new(&cfl, strict);
        let state = problem.initial().clone();
        Ok(Self {
            problem,
            cfl,
            dt_s,
            state,
            tracker,
            rows: Vec::new(),
        })
    }

    /// Resolved time step in seconds.
    pub fn dt_s(&self) -> f64 {
        self.dt_s
    }

    /// CFL report of the initial data.
    pub fn cfl(&self) -> &CflReport {
        &self.cfl
    }

    /// The problem being solved.
    pub fn problem(&self) -> &HjProblem {
        &self.problem
    }

    /// Current labels.
    pub fn state(&self) -> &LabelField {
        &self.state
    }

    /// Estimate tracker.
    pub fn tracker(&self) -> &EstimateTracker {
        &self.tracker
    }

    /// Estimate rows recorded so far, one per observed state.
    pub fn rows(&self) -> &[EstimateRow] {
        &self.rows
    }

    /// Advances one step: junction, then branch interiors, then the
    /// boundary points. Every point reads step-`n` data only.
    pub fn step(&mut self) -> Result<()> {
        let rates = self.problem.rates(&self.state);
        let row = self
            .tracker
            .observe(&self.state, &rates, self.problem.dx_km(), self.dt_s)?;
        self.rows.push(row);
        let dt_h = s_to_h(self.dt_s);
        let u0 = self.state.junction_value() + dt_h * rates[0][0];
        for (u, w) in self.state.values.iter_mut().zip(&rates) {
            u[0] = u0;
            for (ui, wi) in u.iter_mut().zip(w).skip(1) {
                *ui += dt_h * wi;
            }
        }
        self.state.step += 1;
        self.state.time_s = self.state.step as f64 * self.dt_s;
        Ok(())
    }

    /// Runs the estimate checks on the current state without advancing.
    pub fn observe_current(&mut self) -> Result<()> {
        let rates = self.problem.rates(&self.state);
        let row = self
            .tracker
            .observe(&self.state, &rates, self.problem.dx_km(), self.dt_s)?;
        self.rows.push(row);
        Ok(())
    }
}

/// Which states a run keeps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SnapshotPlan {
    /// Physical times; each is taken at the nearest completed step.
    pub times_s: Vec<f64>,
    /// Also keep every `k`-th step (including step 0).
    pub every: Option<usize>,
    /// Times for which the two steps bracketing them are kept, for
    /// interpolation in time.
    pub brackets_s: Vec<f64>,
}

/// Two consecutive label fields bracketing a time of interest.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotPair {
    /// Field at step `n`.
    pub before: LabelField,
    /// Field at step `n + 1` (equal to `before` at the final step).
    pub after: LabelField,
}

/// Output of [`run_hj`].
#[derive(Debug, Clone)]
pub struct HjRun {
    /// Resolved time step in seconds.
    pub dt_s: f64,
    /// Number of steps taken.
    pub n_steps: usize,
    /// CFL data of the initial labels.
    pub cfl: CflReport,
    /// Snapshots in step order, without duplicates.
    pub snapshots: Vec<LabelField>,
    /// Bracketing pairs, in the order of `SnapshotPlan::brackets_s`.
    pub brackets: Vec<SnapshotPair>,
    /// One estimate row per state `n = 0..=n_T`.
    pub estimates: Vec<EstimateRow>,
    /// Violations recorded in non-strict mode.
    pub violations: Vec<String>,
    /// Final labels.
    pub final_state: LabelField,
}

/// Advances the problem to the grid horizon, checking the estimates after
/// every step.
pub fn run_hj(
    problem: HjProblem,
    grid: &GridSpec,
    plan: &SnapshotPlan,
    strict: bool,
) -> Result<HjRun> {
    let mut solver = HjSolver::new(problem, grid.dt, strict)?;
    let dt_s = solver.dt_s();
    let n_steps = grid.n_steps(dt_s);

    let mut wanted: Vec<usize> = plan
        .times_s
        .iter()
        .map(|&t| nearest_step(t, dt_s, n_steps))
        .collect();
    if let Some(k) = plan.every.filter(|&k| k > 0) {
        wanted.extend((0..=n_steps).step_by(k));
    }
    wanted.sort_unstable();
    wanted.dedup();
    let bracket_steps: Vec<usize> = plan
        .brackets_s
        .iter()
        .map(|&t| (libm::floor(t / dt_s + 1e-9) as usize).min(n_steps))
        .collect();

    let mut snapshots = Vec::with_capacity(wanted.len());
    let mut brackets: Vec<Option<SnapshotPair>> = alloc::vec![None; bracket_steps.len()];
    let mut pending: Vec<(usize, LabelField)> = Vec::new();
    let mut next_wanted = 0;
    for n in 0..=n_steps {
        let state = solver.state();
        while next_wanted < wanted.len() && wanted[next_wanted] == n {
            snapshots.push(state.clone());
            next_wanted += 1;
        }
        for (slot, before) in pending.drain(..) {
            brackets[slot] = Some(SnapshotPair { before, after: state.clone() });
        }
        for (slot, &b) in bracket_steps.iter().enumerate() {
            if b == n {
                if n == n_steps {
                    brackets[slot] = Some(SnapshotPair {
                        before: state.clone(),
                        after: state.clone(),
                    });
                } else {
                    pending.push((slot, state.clone()));
                }
            }
        }
        if n < n_steps {
            solver.step()?;
        } else {
            solver.observe_current()?;
        }
    }
    let cfl = solver.cfl().clone();
    let violations = solver.tracker().violations().to_vec();
    let estimates = solver.rows().to_vec();
    Ok(HjRun {
        dt_s,
        n_steps,
        cfl,
        snapshots,
        brackets: brackets.into_iter().flatten().collect(),
        estimates,
        violations,
        final_state: solver.state().clone(),
    })
}

/// Step closest to time `t_s`, clamped to `[0, n_steps]`.
pub fn nearest_step(t_s: f64, dt_s: f64, n_steps: usize) -> usize {
    let n = libm::round(t_s / dt_s);
    if n <= 0.0 {
        0
    } else {
        (n as usize).min(n_steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::FundamentalDiagram;
    use crate::junction::{densities_from_labels, Branch, Segment};
    use alloc::vec;

    fn table1_junction() -> JunctionSpec {
        let d = FundamentalDiagram::bi_parabolic(20.0, 160.0, 1000.0, 1.5).unwrap();
        let b = Branch { diagram: d, gamma: 0.5, length_m: 200.0 };
        JunctionSpec::new(2, vec![b.clone(), b.clone(), b.clone(), b]).unwrap()
    }

    fn table1_initial() -> InitialData {
        let whole = |rho| vec![Segment { from_m: 0.0, to_m: 200.0, rho }];
        InitialData {
            profiles: vec![
                whole(15.0),
                whole(15.0),
                vec![
                    Segment { from_m: 0.0, to_m: 100.0, rho: 30.0 },
                    Segment { from_m: 100.0, to_m: 200.0, rho: 90.0 },
                ],
                whole(5.0),
            ],
            junction_label: 0.0,
            inflow_density: vec![None; 4],
        }
    }

    fn grid(dx_m: f64, horizon_s: f64) -> GridSpec {
        GridSpec { dx_m, dt: TimeStep::Auto, horizon_s }
    }

    #[test]
    fn gradients_of_small_fields() {
        let u = LabelField::new(vec![vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 1.0]], 0, 0.0);
        assert_eq!(discrete_gradients(&u, 0, 1, 1.0).unwrap(), (Some(1.0), Some(1.0)));
        assert_eq!(discrete_gradients(&u, 1, 1, 1.0).unwrap(), (Some(1.0), Some(0.0)));
        assert_eq!(discrete_gradients(&u, 1, 0, 1.0).unwrap(), (None, Some(1.0)));
        assert_eq!(discrete_gradients(&u, 1, 2, 1.0).unwrap(), (Some(0.0), None));
        assert!(matches!(
            discrete_gradients(&u, 0, 3, 1.0),
            Err(Error::IndexOutOfRange { index: 3, .. })
        ));
    }

    #[test]
    fn table1_initial_rates() {
        let p = HjProblem::new(&table1_junction(), &grid(5.0, 350.0), &table1_initial()).unwrap();
        let (_, plus) = discrete_gradients(p.initial(), 0, 7, p.dx_km()).unwrap();
        assert!((plus.unwrap() - 30.0).abs() < 1e-9);
        let w = p.rates(p.initial());
        assert!((w[0][0] - 1687.5).abs() < 1e-9);
        assert!((w[0][10] - 1687.5).abs() < 1e-9);
        assert_eq!(p.ghost_gradient(0), Some(30.0));
        assert_eq!(p.ghost_gradient(2), None);
        // branch 3 mid-road interface passes f(90)
        assert!((w[2][20] - 1250.0).abs() < 1e-9);
        // branch 3 outflow at 90 veh/km
        assert!((w[2][40] - 1250.0).abs() < 1e-9);
    }

    #[test]
    fn table1_cfl() {
        let p = HjProblem::new(&table1_junction(), &grid(5.0, 350.0), &table1_initial()).unwrap();
        let cfl = compute_cfl_restrictive(&p).unwrap();
        assert!((cfl.m0 - 687.5).abs() < 1e-9);
        for alpha in 0..2 {
            assert!((cfl.p_lo[alpha] - 10.0).abs() < 1e-9);
            assert!((cfl.p_hi[alpha] - 250.0).abs() < 1e-9);
        }
        for alpha in 2..4 {
            assert!((cfl.p_lo[alpha] + 250.0).abs() < 1e-9);
            assert!((cfl.p_hi[alpha] + 10.0).abs() < 1e-9);
        }
        assert!((cfl.dt_max_s - 0.288).abs() < 1e-12);
        assert!((cfl.resolve(TimeStep::Auto).unwrap() - 0.2736).abs() < 1e-12);
        assert_eq!(cfl.resolve(TimeStep::Seconds(0.16)).unwrap(), 0.16);
        assert!(matches!(
            cfl.resolve(TimeStep::Seconds(0.3)),
            Err(Error::CflViolation { .. })
        ));
    }

    #[test]
    fn constant_gradient_advances_rigidly() {
        let j = table1_junction();
        let init = InitialData::uniform(&j, &[15.0, 15.0, 15.0, 15.0]);
        let g = grid(5.0, 20.0);
        let p = HjProblem::new(&j, &g, &init).unwrap();
        let run = run_hj(p.clone(), &g, &SnapshotPlan::default(), true).unwrap();
        let shift = run.final_state.junction_value() - p.initial().junction_value();
        let expected = 2.0 * 843.75 * s_to_h(run.dt_s) * run.n_steps as f64;
        assert!((shift - expected).abs() < 1e-9);
        for (a, b) in run.final_state.values().iter().zip(p.initial().values()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y - shift).abs() < 1e-9);
            }
        }
        for row in &run.estimates {
            assert!((row.m - 1687.5).abs() < 1e-9 && (row.big_m - 1687.5).abs() < 1e-9);
        }
    }

    #[test]
    fn junction_stays_identified_and_shift_commutes() {
        let j = table1_junction();
        let g = grid(5.0, 60.0);
        let p = HjProblem::new(&j, &g, &table1_initial()).unwrap();
        let shifted = p.clone().with_initial_labels(p.initial().shifted(37.0)).unwrap();
        let mut a = HjSolver::new(p, g.dt, true).unwrap();
        let mut b = HjSolver::new(shifted, g.dt, true).unwrap();
        for _ in 0..200 {
            a.step().unwrap();
            b.step().unwrap();
            assert_eq!(a.state().junction_mismatch(), 0.0);
            for (x, y) in a.state().values().iter().flatten().zip(b.state().values().iter().flatten()) {
                assert!((y - x - 37.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn stationary_final_state_advances_uniformly() {
        let j = table1_junction();
        let init = InitialData::uniform(&j, &[90.0, 90.0, 90.0, 10.0]);
        let p = HjProblem::new(&j, &grid(5.0, 10.0), &init).unwrap();
        let w = p.rates(p.initial());
        assert!(w.iter().flatten().all(|&r| (r - 1250.0).abs() < 1e-9), "{w:?}");
    }

    #[test]
    fn snapshots_and_brackets() {
        let j = table1_junction();
        let g = grid(5.0, 10.0);
        let p = HjProblem::new(&j, &g, &table1_initial()).unwrap();
        let plan = SnapshotPlan {
            times_s: vec![0.0, 5.0, 100.0],
            every: None,
            brackets_s: vec![5.0, 10.0],
        };
        let run = run_hj(p, &g, &plan, true).unwrap();
        assert_eq!(run.n_steps, 36);
        let steps: Vec<usize> = run.snapshots.iter().map(|s| s.step()).collect();
        assert_eq!(steps, vec![0, 18, 36]);
        assert_eq!(run.brackets.len(), 2);
        assert_eq!(run.brackets[0].before.step(), 18);
        assert_eq!(run.brackets[0].after.step(), 19);
        assert_eq!(run.brackets[1].before.step(), 36);
        assert_eq!(run.estimates.len(), 37);
        assert!(run.violations.is_empty());
    }

    #[test]
    fn densities_track_labels_after_steps() {
        let j = table1_junction();
        let g = grid(5.0, 20.0);
        let p = HjProblem::new(&j, &g, &table1_initial()).unwrap();
        let run = run_hj(p, &g, &SnapshotPlan::default(), true).unwrap();
        let rho = densities_from_labels(&j, 5.0, &run.final_state);
        for alpha in 0..4 {
            for &r in rho.branch(alpha) {
                assert!((5.0 - 1e-9..=125.0 + 1e-9).contains(&r));
            }
        }
    }
}
