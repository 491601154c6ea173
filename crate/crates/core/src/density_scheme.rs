//! Godunov scheme for the densities induced by the label scheme.
//!
//! Away from the junction the update is the classical Godunov scheme with
//! interface flux `min{demand(upstream), supply(downstream)}`. At the
//! junction every branch exchanges `gamma^alpha F0` where
//!
//! ```text
//! F0 = min( min_in f_D(rho^beta_{-1}) / gamma^beta , min_out f_S(rho^lambda_0) / gamma^lambda )
//! ```
//!
//! Cells are stored per branch from the junction outward (see
//! [`crate::junction`]). Flux `k` of a branch crosses grid point `k`; point 0
//! is the junction and point `N_b` the far boundary.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::hamiltonian::{FundamentalDiagram, Orientation};
use crate::hj_scheme::LabelField;
use crate::junction::{
    densities_from_labels, GridSpec, InitialData, JunctionSpec, TimeStep, AUTO_DT_FRACTION,
};
use crate::units::{h_to_s, s_to_h};

const GAMMA_SUM_TOL: f64 = 1e-12;

/// Default resolution of the discretized simplex of split coefficients.
pub const DEFAULT_SIMPLEX_RESOLUTION: u32 = 64;

/// Cell densities `rho^alpha_j` (veh/km) at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    values: Vec<Vec<f64>>,
    step: usize,
    time_s: f64,
}

impl DensityField {
    /// Wraps per-branch density columns.
    pub fn new(values: Vec<Vec<f64>>, step: usize, time_s: f64) -> Self {
        Self { values, step, time_s }
    }

    /// Densities of branch `alpha`, junction side first.
    pub fn branch(&self, alpha: usize) -> &[f64] {
        &self.values[alpha]
    }

    /// All branches.
    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// Step index.
    pub fn step(&self) -> usize {
        self.step
    }

    /// Time in seconds.
    pub fn time_s(&self) -> f64 {
        self.time_s
    }

    /// Total number of vehicles `sum rho dx` for a space step in km.
    pub fn total_vehicles(&self, dx_km: f64) -> f64 {
        self.values.iter().flatten().sum::<f64>() * dx_km
    }
}

/// Admissible split coefficients for flux maximization.
#[derive(Debug, Clone, PartialEq)]
pub enum AdmissibleSet {
    /// Explicit list of full coefficient vectors (branch order).
    Candidates(Vec<Vec<f64>>),
    /// Product of the incoming and outgoing simplices sampled on multiples
    /// of `1 / resolution`, optionally bounded below per branch.
    Simplex {
        /// Number of subdivisions per unit.
        resolution: u32,
        /// Per-branch lower bounds; empty means none.
        lower_bounds: Vec<f64>,
    },
}

/// How the junction picks its split coefficients each step.
#[derive(Debug, Clone, PartialEq)]
pub enum GammaPolicy {
    /// Use the junction's own coefficients.
    Fixed,
    /// Maximize `F0` over an admissible set; ties go to the candidate that is
    /// lexicographically largest (largest `gamma^1`, then `gamma^2`, ...).
    Maximize(AdmissibleSet),
}

/// Junction flux and how it is shared.
#[derive(Debug, Clone, PartialEq)]
pub struct JunctionFlux {
    /// `F0` (veh/h).
    pub total: f64,
    /// `gamma^alpha F0` per branch.
    pub per_branch: Vec<f64>,
    /// Coefficients used.
    pub gamma: Vec<f64>,
}

/// Godunov interface flux `min{demand(left), supply(right)}`, where `left`
/// is upstream.
#[inline]
pub fn godunov_flux(d: &FundamentalDiagram, rho_left: f64, rho_right: f64) -> f64 {
    d.demand(rho_left).min(d.supply(rho_right))
}

fn fixed_f0(junction: &JunctionSpec, gamma: &[f64], upstream: &[f64], downstream: &[f64]) -> f64 {
    let n_in = junction.n_in();
    let demand = (0..n_in)
        .map(|b| junction.branch(b).diagram.demand(upstream[b]) / gamma[b])
        .fold(f64::INFINITY, f64::min);
    let supply = (n_in..junction.len())
        .map(|l| junction.branch(l).diagram.supply(downstream[l - n_in]) / gamma[l])
        .fold(f64::INFINITY, f64::min);
    demand.min(supply)
}

/// Enumerates the admissible set as full coefficient vectors, dropping any
/// candidate with a zero (or negative) share.
pub fn admissible_candidates(junction: &JunctionSpec, set: &AdmissibleSet) -> Result<Vec<Vec<f64>>> {
    let n = junction.len();
    let n_in = junction.n_in();
    let candidates: Vec<Vec<f64>> = match set {
        AdmissibleSet::Candidates(list) => {
            for c in list {
                if c.len() != n {
                    return Err(Error::InvalidJunction(format!(
                        "candidate has {} coefficients for {} branches",
                        c.len(),
                        n
                    )));
                }
                let s_in: f64 = c[..n_in].iter().sum();
                let s_out: f64 = c[n_in..].iter().sum();
                if (s_in - 1.0).abs() > GAMMA_SUM_TOL || (s_out - 1.0).abs() > GAMMA_SUM_TOL {
                    return Err(Error::InvalidJunction(format!(
                        "candidate {c:?} does not sum to one on each side"
                    )));
                }
            }
            list.iter().filter(|c| c.iter().all(|&g| g > 0.0)).cloned().collect()
        }
        AdmissibleSet::Simplex { resolution, lower_bounds } => {
            if *resolution == 0 {
                return Err(Error::EmptyAdmissibleSet);
            }
            if !lower_bounds.is_empty() && lower_bounds.len() != n {
                return Err(Error::InvalidJunction(format!(
                    "{} lower bounds for {} branches",
                    lower_bounds.len(),
                    n
                )));
            }
            let bound = |a: usize| lower_bounds.get(a).copied().unwrap_or(0.0);
            let r = *resolution;
            let incoming = compositions(n_in, r);
            let outgoing = compositions(n - n_in, r);
            let mut all = Vec::new();
            for a in &incoming {
                for b in &outgoing {
                    let c: Vec<f64> = a
                        .iter()
                        .chain(b)
                        .map(|&k| k as f64 / r as f64)
                        .collect();
                    if c.iter().enumerate().all(|(i, &g)| g >= bound(i)) {
                        all.push(c);
                    }
                }
            }
            all
        }
    };
    if candidates.is_empty() {
        return Err(Error::EmptyAdmissibleSet);
    }
    Ok(candidates)
}

/// Positive integer compositions of `total` into `parts` parts, in
/// lexicographically decreasing order.
fn compositions(parts: usize, total: u32) -> Vec<Vec<u32>> {
    if parts == 1 {
        return if total >= 1 { alloc::vec![alloc::vec![total]] } else { Vec::new() };
    }
    let mut out = Vec::new();
    let max_first = total.saturating_sub(parts as u32 - 1);
    for first in (1..=max_first).rev() {
        for mut rest in compositions(parts - 1, total - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn lexicographically_greater(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x != y {
            return x > y;
        }
    }
    false
}

/// Junction flux for upstream densities `rho^beta_{-1}` (incoming order) and
/// downstream densities `rho^lambda_0` (outgoing order).
pub fn junction_flux(
    junction: &JunctionSpec,
    upstream: &[f64],
    downstream: &[f64],
    policy: &GammaPolicy,
) -> Result<JunctionFlux> {
    match policy {
        GammaPolicy::Fixed => Ok(fixed_junction_flux(junction, &junction.gammas(), upstream, downstream)),
        GammaPolicy::Maximize(set) => {
            let candidates = admissible_candidates(junction, set)?;
            Ok(maximize_over(junction, &candidates, upstream, downstream))
        }
    }
}

fn fixed_junction_flux(
    junction: &JunctionSpec,
    gamma: &[f64],
    upstream: &[f64],
    downstream: &[f64],
) -> JunctionFlux {
    let total = fixed_f0(junction, gamma, upstream, downstream);
    JunctionFlux {
        total,
        per_branch: gamma.iter().map(|g| g * total).collect(),
        gamma: gamma.to_vec(),
    }
}

fn maximize_over(
    junction: &JunctionSpec,
    candidates: &[Vec<f64>],
    upstream: &[f64],
    downstream: &[f64],
) -> JunctionFlux {
    let mut best = &candidates[0];
    let mut best_f0 = fixed_f0(junction, best, upstream, downstream);
    for c in &candidates[1..] {
        let f0 = fixed_f0(junction, c, upstream, downstream);
        if f0 > best_f0 || (f0 == best_f0 && lexicographically_greater(c, best)) {
            best = c;
            best_f0 = f0;
        }
    }
    fixed_junction_flux(junction, best, upstream, downstream)
}

/// Boundary and junction fluxes of one step, for mass bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFluxes {
    /// Sum of the upstream inflows of incoming branches (veh/h).
    pub inflow: f64,
    /// Sum of the downstream outflows of outgoing branches (veh/h).
    pub outflow: f64,
    /// Junction flux used.
    pub junction: JunctionFlux,
}

/// Density-side CFL data.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityCfl {
    /// Minimal initial flux scaled by `1/gamma` (veh/h); `NaN` in maximize
    /// mode where it is not used.
    pub m0: f64,
    /// Lower density bound per branch.
    pub rho_lo: Vec<f64>,
    /// Upper density bound per branch.
    pub rho_hi: Vec<f64>,
    /// Sup of `|f'|` over `[rho_lo, rho_hi]` per branch (km/h).
    pub lipschitz: Vec<f64>,
    /// Largest admissible step in seconds.
    pub dt_max_s: f64,
    /// Branch attaining the largest speed.
    pub binding_branch: usize,
}

/// Time-stepper for the densities.
#[derive(Debug, Clone)]
pub struct DensitySolver {
    junction: JunctionSpec,
    dx_km: f64,
    dt_s: f64,
    inflow: Vec<f64>,
    policy: GammaPolicy,
    candidates: Option<Vec<Vec<f64>>>,
    cfl: DensityCfl,
    state: DensityField,
}

impl DensitySolver {
    /// Builds the initial cell densities from the same labels the HJ scheme
    /// uses, so both start from identical data.
    pub fn new(
        junction: &JunctionSpec,
        grid: &GridSpec,
        init: &InitialData,
        policy: GammaPolicy,
    ) -> Result<Self> {
        let labels = crate::junction::labels_from_densities(junction, grid, init)?;
        let state = densities_from_labels(junction, grid.dx_m, &labels);
        let inflow = (0..junction.len())
            .map(|a| init.inflow_density(a, junction.branch(a).length_m))
            .collect();
        Self::from_field(junction, grid, state, inflow, policy)
    }

    /// Starts from an explicit density field; `inflow` gives the upstream
    /// density of each branch (ignored on outgoing branches).
    pub fn from_field(
        junction: &JunctionSpec,
        grid: &GridSpec,
        state: DensityField,
        inflow: Vec<f64>,
        policy: GammaPolicy,
    ) -> Result<Self> {
        grid.validate()?;
        let candidates = match &policy {
            GammaPolicy::Fixed => None,
            GammaPolicy::Maximize(set) => Some(admissible_candidates(junction, set)?),
        };
        let mut solver = Self {
            junction: junction.clone(),
            dx_km: grid.dx_km(),
            dt_s: 0.0,
            inflow,
            policy,
            candidates,
            cfl: DensityCfl {
                m0: f64::NAN,
                rho_lo: Vec::new(),
                rho_hi: Vec::new(),
                lipschitz: Vec::new(),
                dt_max_s: f64::INFINITY,
                binding_branch: 0,
            },
            state,
        };
        solver.cfl = solver.compute_cfl()?;
        solver.dt_s = match grid.dt {
            TimeStep::Auto => AUTO_DT_FRACTION * solver.cfl.dt_max_s,
            TimeStep::Seconds(s) if s <= solver.cfl.dt_max_s * (1.0 + 1e-12) => s,
            TimeStep::Seconds(s) => {
                return Err(Error::CflViolation {
                    branch: solver.cfl.binding_branch,
                    dt_s: s,
                    dt_max_s: solver.cfl.dt_max_s,
                })
            }
        };
        Ok(solver)
    }

    /// Resolved time step in seconds.
    pub fn dt_s(&self) -> f64 {
        self.dt_s
    }

    /// Density CFL data.
    pub fn cfl(&self) -> &DensityCfl {
        &self.cfl
    }

    /// Current densities.
    pub fn state(&self) -> &DensityField {
        &self.state
    }

    fn compute_cfl(&self) -> Result<DensityCfl> {
        let n = self.junction.len();
        let (m0, rho_lo, rho_hi) = match self.policy {
            GammaPolicy::Fixed => {
                // point fluxes divided by gamma are the label time derivatives
                let (fluxes, _) = self.point_fluxes()?;
                let m0 = fluxes
                    .iter()
                    .enumerate()
                    .flat_map(|(a, f)| {
                        let g = self.junction.branch(a).gamma;
                        f.iter().map(move |q| q / g)
                    })
                    .fold(f64::INFINITY, f64::min);
                if !m0.is_finite() {
                    return Err(Error::UnboundedInitialData);
                }
                let mut lo = Vec::with_capacity(n);
                let mut hi = Vec::with_capacity(n);
                for b in self.junction.branches() {
                    lo.push(b.diagram.inverse_demand(b.gamma * m0)?);
                    hi.push(b.diagram.inverse_supply(b.gamma * m0)?);
                }
                (m0, lo, hi)
            }
            GammaPolicy::Maximize(_) => {
                let lo = alloc::vec![0.0; n];
                let hi = self.junction.branches().iter().map(|b| b.diagram.rho_max()).collect();
                (f64::NAN, lo, hi)
            }
        };
        let lipschitz: Vec<f64> = self
            .junction
            .branches()
            .iter()
            .enumerate()
            .map(|(a, b)| b.diagram.max_abs_slope(rho_lo[a], rho_hi[a]))
            .collect();
        let (binding_branch, speed) = lipschitz
            .iter()
            .copied()
            .enumerate()
            .fold((0, 0.0), |best, (a, l)| if l > best.1 { (a, l) } else { best });
        let dt_max_s = if speed > 0.0 { h_to_s(self.dx_km / speed) } else { f64::INFINITY };
        Ok(DensityCfl {
            m0,
            rho_lo,
            rho_hi,
            lipschitz,
            dt_max_s,
            binding_branch,
        })
    }

    /// Fluxes through every grid point of every branch (`N_b + 1` each), and
    /// the junction flux.
    fn point_fluxes(&self) -> Result<(Vec<Vec<f64>>, JunctionFlux)> {
        let n_in = self.junction.n_in();
        let n = self.junction.len();
        let upstream: Vec<f64> = (0..n_in).map(|b| self.state.branch(b)[0]).collect();
        let downstream: Vec<f64> = (n_in..n).map(|l| self.state.branch(l)[0]).collect();
        let jf = match (&self.policy, &self.candidates) {
            (GammaPolicy::Maximize(_), Some(c)) => maximize_over(&self.junction, c, &upstream, &downstream),
            _ => fixed_junction_flux(&self.junction, &self.junction.gammas(), &upstream, &downstream),
        };
        let fluxes = (0..n)
            .map(|a| {
                let d = &self.junction.branch(a).diagram;
                let rho = self.state.branch(a);
                let cells = rho.len();
                let mut f = Vec::with_capacity(cells + 1);
                f.push(jf.per_branch[a]);
                match self.junction.orientation(a) {
                    Orientation::Incoming => {
                        for k in 1..cells {
                            f.push(godunov_flux(d, rho[k], rho[k - 1]));
                        }
                        f.push(godunov_flux(d, self.inflow[a], rho[cells - 1]));
                    }
                    Orientation::Outgoing => {
                        for k in 1..cells {
                            f.push(godunov_flux(d, rho[k - 1], rho[k]));
                        }
                        // free outflow: the virtual next cell clones the last one
                        let last = rho[cells - 1];
                        f.push(godunov_flux(d, last, last));
                    }
                }
                f
            })
            .collect();
        Ok((fluxes, jf))
    }

    /// Advances one conservative step and reports the boundary fluxes used.
    pub fn step(&mut self) -> Result<StepFluxes> {
        let (fluxes, junction) = self.point_fluxes()?;
        let ratio = s_to_h(self.dt_s) / self.dx_km;
        let mut inflow = 0.0;
        let mut outflow = 0.0;
        for (a, (rho, f)) in self.state.values.iter_mut().zip(&fluxes).enumerate() {
            let last = f.len() - 1;
            match self.junction.orientation(a) {
                Orientation::Incoming => {
                    for (j, r) in rho.iter_mut().enumerate() {
                        *r += ratio * (f[j + 1] - f[j]);
                    }
                    inflow += f[last];
                }
                Orientation::Outgoing => {
                    for (j, r) in rho.iter_mut().enumerate() {
                        *r += ratio * (f[j] - f[j + 1]);
                    }
                    outflow += f[last];
                }
            }
        }
        self.state.step += 1;
        self.state.time_s = self.state.step as f64 * self.dt_s;
        Ok(StepFluxes { inflow, outflow, junction })
    }
}

/// Largest `|densities_from_labels(U^n) - rho^n|` over matching steps.
pub fn verify_equivalence(
    junction: &JunctionSpec,
    dx_m: f64,
    labels: &[LabelField],
    densities: &[DensityField],
) -> Result<f64> {
    if labels.len() != densities.len() {
        return Err(Error::Mismatch(format!(
            "{} label snapshots vs {} density snapshots",
            labels.len(),
            densities.len()
        )));
    }
    let mut worst: f64 = 0.0;
    for (u, rho) in labels.iter().zip(densities) {
        if u.step() != rho.step() {
            return Err(Error::Mismatch(format!(
                "label step {} paired with density step {}",
                u.step(),
                rho.step()
            )));
        }
        let derived = densities_from_labels(junction, dx_m, u);
        if derived.values().len() != rho.values().len()
            || derived.values().iter().zip(rho.values()).any(|(a, b)| a.len() != b.len())
        {
            return Err(Error::Mismatch("grids differ".into()));
        }
        for (a, b) in derived.values().iter().flatten().zip(rho.values().iter().flatten()) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}
