//! Junction topology, grids and initial data.
//!
//! Branches are stored incoming first. Every branch uses a local coordinate
//! `x >= 0` measured from the junction point. Labels live on the grid points
//! `i = 0..=N_b` and densities on the `N_b` segments between them, so
//! segment `j` of an incoming branch is the cell the traffic literature
//! indexes `-(j + 1)` and segment `j` of an outgoing branch is cell `j`.

use alloc::format;
use alloc::vec::Vec;

use crate::density_scheme::DensityField;
use crate::error::{Error, Result};
use crate::hamiltonian::{BranchHamiltonian, FundamentalDiagram, Orientation};
use crate::hj_scheme::LabelField;
use crate::units::{m_to_km, M_PER_KM};

const GAMMA_SUM_TOL: f64 = 1e-12;

/// One road attached to the junction.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    /// Fundamental diagram of the road.
    pub diagram: FundamentalDiagram,
    /// Split coefficient in `(0, 1]`.
    pub gamma: f64,
    /// Simulated length in meters.
    pub length_m: f64,
}

/// `n_in` incoming branches followed by the outgoing ones.
#[derive(Debug, Clone, PartialEq)]
pub struct JunctionSpec {
    n_in: usize,
    branches: Vec<Branch>,
}

impl JunctionSpec {
    /// Validates counts, lengths and that each group of split coefficients
    /// sums to one.
    pub fn new(n_in: usize, branches: Vec<Branch>) -> Result<Self> {
        if n_in == 0 || n_in >= branches.len() {
            return Err(Error::InvalidJunction(format!(
                "need at least one incoming and one outgoing branch, got {} incoming of {}",
                n_in,
                branches.len()
            )));
        }
        for (alpha, b) in branches.iter().enumerate() {
            if !(b.gamma > 0.0 && b.gamma <= 1.0) {
                return Err(Error::InvalidJunction(format!(
                    "branch {alpha}: split coefficient {} not in (0, 1]",
                    b.gamma
                )));
            }
            if !(b.length_m.is_finite() && b.length_m > 0.0) {
                return Err(Error::InvalidJunction(format!(
                    "branch {alpha}: length {} m must be positive",
                    b.length_m
                )));
            }
        }
        let sum_in: f64 = branches[..n_in].iter().map(|b| b.gamma).sum();
        let sum_out: f64 = branches[n_in..].iter().map(|b| b.gamma).sum();
        if (sum_in - 1.0).abs() > GAMMA_SUM_TOL {
            return Err(Error::InvalidJunction(format!(
                "incoming split coefficients sum to {sum_in}, expected 1"
            )));
        }
        if (sum_out - 1.0).abs() > GAMMA_SUM_TOL {
            return Err(Error::InvalidJunction(format!(
                "outgoing split coefficients sum to {sum_out}, expected 1"
            )));
        }
        Ok(Self { n_in, branches })
    }

    /// Number of incoming branches.
    pub fn n_in(&self) -> usize {
        self.n_in
    }

    /// Number of outgoing branches.
    pub fn n_out(&self) -> usize {
        self.branches.len() - self.n_in
    }

    /// Total number of branches.
    pub fn len(&self) -> usize {
        self.branches.len()
    }

    /// Always false; a junction has at least two branches.
    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    /// All branches, incoming first.
    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    /// Branch `alpha`.
    pub fn branch(&self, alpha: usize) -> &Branch {
        &self.branches[alpha]
    }

    /// Orientation of branch `alpha`.
    pub fn orientation(&self, alpha: usize) -> Orientation {
        if alpha < self.n_in {
            Orientation::Incoming
        } else {
            Orientation::Outgoing
        }
    }

    /// Split coefficients in branch order.
    pub fn gammas(&self) -> Vec<f64> {
        self.branches.iter().map(|b| b.gamma).collect()
    }

    /// Hamiltonian of branch `alpha`.
    pub fn hamiltonian(&self, alpha: usize) -> BranchHamiltonian {
        let b = &self.branches[alpha];
        BranchHamiltonian::new(b.diagram.clone(), b.gamma, self.orientation(alpha))
            .expect("split coefficients validated at construction")
    }

    /// Hamiltonians of all branches.
    pub fn hamiltonians(&self) -> Vec<BranchHamiltonian> {
        (0..self.len()).map(|a| self.hamiltonian(a)).collect()
    }
}

/// Time step selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeStep {
    /// `0.95` times the largest step allowed by the restrictive CFL bound.
    Auto,
    /// Explicit step in seconds.
    Seconds(f64),
}

/// Fraction of `dt_max` used by [`TimeStep::Auto`].
pub const AUTO_DT_FRACTION: f64 = 0.95;

/// Space/time discretization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Space step in meters.
    pub dx_m: f64,
    /// Time step policy.
    pub dt: TimeStep,
    /// Final time in seconds.
    pub horizon_s: f64,
}

impl GridSpec {
    /// Checks `dx > 0`, a positive explicit `dt` and a nonnegative horizon.
    pub fn validate(&self) -> Result<()> {
        if !(self.dx_m.is_finite() && self.dx_m > 0.0) {
            return Err(Error::InvalidGrid(format!("dx must be positive, got {}", self.dx_m)));
        }
        if let TimeStep::Seconds(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::InvalidGrid(format!("dt must be positive, got {dt}")));
            }
        }
        if !(self.horizon_s.is_finite() && self.horizon_s >= 0.0) {
            return Err(Error::InvalidGrid(format!(
                "horizon must be nonnegative, got {}",
                self.horizon_s
            )));
        }
        Ok(())
    }

    /// Space step in km.
    pub fn dx_km(&self) -> f64 {
        m_to_km(self.dx_m)
    }

    /// Index of the last grid point, `N_b = floor(L / dx)`.
    pub fn last_point(&self, length_m: f64) -> usize {
        libm::floor(length_m / self.dx_m + 1e-9) as usize
    }

    /// Number of steps `n_T = floor(T / dt)` for a resolved step.
    pub fn n_steps(&self, dt_s: f64) -> usize {
        libm::floor(self.horizon_s / dt_s + 1e-9) as usize
    }
}

/// Constant-density piece of an initial profile, in branch-local meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    /// Start (distance from the junction, m).
    pub from_m: f64,
    /// End (m).
    pub to_m: f64,
    /// Density (veh/km).
    pub rho: f64,
}

/// Piecewise-constant initial densities and the junction label.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    /// One contiguous profile per branch, covering `[0, length]`.
    pub profiles: Vec<Vec<Segment>>,
    /// `u0(0)`, the label at the junction point at `t = 0`.
    pub junction_label: f64,
    /// Upstream boundary density on incoming branches; `None` uses the
    /// farthest-upstream segment. Ignored on outgoing branches.
    pub inflow_density: Vec<Option<f64>>,
}

impl InitialData {
    /// Uniform density per branch over the whole branch.
    pub fn uniform(junction: &JunctionSpec, rhos: &[f64]) -> Self {
        let profiles = junction
            .branches()
            .iter()
            .zip(rhos)
            .map(|(b, &rho)| {
                alloc::vec![Segment {
                    from_m: 0.0,
                    to_m: b.length_m,
                    rho,
                }]
            })
            .collect();
        Self {
            profiles,
            junction_label: 0.0,
            inflow_density: alloc::vec![None; junction.len()],
        }
    }

    /// Checks coverage, contiguity and the physical density range.
    pub fn validate(&self, junction: &JunctionSpec) -> Result<()> {
        if self.profiles.len() != junction.len() {
            return Err(Error::InvalidInitialData {
                branch: self.profiles.len().min(junction.len()),
                reason: format!(
                    "{} profiles for {} branches",
                    self.profiles.len(),
                    junction.len()
                ),
            });
        }
        if !self.junction_label.is_finite() {
            return Err(Error::InvalidInitialData {
                branch: 0,
                reason: "junction label must be finite".into(),
            });
        }
        for (alpha, (profile, branch)) in self.profiles.iter().zip(junction.branches()).enumerate()
        {
            let bad = |reason| Err(Error::InvalidInitialData { branch: alpha, reason });
            let rho_max = branch.diagram.rho_max();
            if profile.is_empty() {
                return bad("empty density profile".into());
            }
            if profile[0].from_m != 0.0 {
                return bad(format!("profile starts at {} m, expected 0", profile[0].from_m));
            }
            for (s, seg) in profile.iter().enumerate() {
                // negated so NaN extents are rejected too
                #[allow(clippy::neg_cmp_op_on_partial_ord)]
                if !(seg.to_m > seg.from_m) {
                    return bad(format!("segment {s} has empty extent"));
                }
                if !(seg.rho >= 0.0 && seg.rho <= rho_max) {
                    return bad(format!("segment {s}: density {} outside [0, {rho_max}]", seg.rho));
                }
                if s > 0 && seg.from_m != profile[s - 1].to_m {
                    return bad(format!("segment {s} does not start where segment {} ends", s - 1));
                }
            }
            let end = profile[profile.len() - 1].to_m;
            if end + 1e-9 < branch.length_m {
                return bad(format!("profile ends at {end} m, branch is {} m", branch.length_m));
            }
            if let Some(Some(rho)) = self.inflow_density.get(alpha) {
                if !(*rho >= 0.0 && *rho <= rho_max) {
                    return bad(format!("inflow density {rho} outside [0, {rho_max}]"));
                }
            }
        }
        Ok(())
    }

    /// Upstream boundary density used on incoming branch `alpha`.
    pub fn inflow_density(&self, alpha: usize, length_m: f64) -> f64 {
        match self.inflow_density.get(alpha).copied().flatten() {
            Some(rho) => rho,
            None => self.density_at(alpha, length_m),
        }
    }

    /// Density of the profile at branch-local position `x_m` (the segment
    /// ending at `x_m` wins on a breakpoint).
    pub fn density_at(&self, alpha: usize, x_m: f64) -> f64 {
        let profile = &self.profiles[alpha];
        profile
            .iter()
            .find(|s| x_m <= s.to_m)
            .unwrap_or(&profile[profile.len() - 1])
            .rho
    }

    /// Exact `integral_0^x rho` (vehicles) of the piecewise-constant profile.
    pub fn vehicles_up_to(&self, alpha: usize, x_m: f64) -> f64 {
        self.profiles[alpha]
            .iter()
            .map(|s| {
                let hi = s.to_m.min(x_m);
                if hi > s.from_m {
                    s.rho * (hi - s.from_m) / M_PER_KM
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// Smallest and largest density on branch `alpha` over `[0, length_m]`.
    pub fn density_range(&self, alpha: usize, length_m: f64) -> (f64, f64) {
        self.profiles[alpha]
            .iter()
            .filter(|s| s.from_m < length_m)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                (lo.min(s.rho), hi.max(s.rho))
            })
    }
}

/// Initial labels `U_i = u0(0) + s (1/gamma) integral_0^{i dx} rho` with
/// `s = +1` on incoming and `-1` on outgoing branches. The integral is exact
/// for the piecewise-constant profile, so breakpoints need not be aligned
/// to the grid.
pub fn labels_from_densities(
    junction: &JunctionSpec,
    grid: &GridSpec,
    init: &InitialData,
) -> Result<LabelField> {
    grid.validate()?;
    init.validate(junction)?;
    let mut values = Vec::with_capacity(junction.len());
    for (alpha, branch) in junction.branches().iter().enumerate() {
        let last = grid.last_point(branch.length_m);
        if last == 0 {
            return Err(Error::InvalidGrid(format!(
                "branch {alpha} ({} m) is shorter than one space step",
                branch.length_m
            )));
        }
        let sign = junction.orientation(alpha).sign();
        let column: Vec<f64> = (0..=last)
            .map(|i| {
                if i == 0 {
                    init.junction_label
                } else {
                    let x = i as f64 * grid.dx_m;
                    init.junction_label + sign * init.vehicles_up_to(alpha, x) / branch.gamma
                }
            })
            .collect();
        values.push(column);
    }
    Ok(LabelField::new(values, 0, 0.0))
}

/// Cell densities `rho_j = s gamma (U_{j+1} - U_j) / dx`.
pub fn densities_from_labels(junction: &JunctionSpec, dx_m: f64, labels: &LabelField) -> DensityField {
    let dx_km = m_to_km(dx_m);
    let values = (0..junction.len())
        .map(|alpha| {
            let scale = junction.orientation(alpha).sign() * junction.branch(alpha).gamma / dx_km;
            labels
                .branch(alpha)
                .windows(2)
                .map(|w| scale * (w[1] - w[0]))
                .collect()
        })
        .collect();
    DensityField::new(values, labels.step(), labels.time_s())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    pub(crate) fn table1_junction() -> JunctionSpec {
        let d = FundamentalDiagram::bi_parabolic(20.0, 160.0, 1000.0, 1.5).unwrap();
        let b = Branch {
            diagram: d,
            gamma: 0.5,
            length_m: 200.0,
        };
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

    fn grid(dx_m: f64) -> GridSpec {
        GridSpec { dx_m, dt: TimeStep::Auto, horizon_s: 350.0 }
    }

    #[test]
    fn rejects_bad_gamma_sums() {
        let j = table1_junction();
        let mut branches = j.branches().to_vec();
        branches[0].gamma = 0.4;
        assert!(matches!(
            JunctionSpec::new(2, branches.clone()),
            Err(Error::InvalidJunction(_))
        ));
        assert!(JunctionSpec::new(0, branches.clone()).is_err());
        assert!(JunctionSpec::new(4, branches).is_err());
    }

    #[test]
    fn labels_of_constant_and_empty_profiles() {
        let j = table1_junction();
        let init = InitialData::uniform(&j, &[12.0, 12.0, 12.0, 12.0]);
        let u = labels_from_densities(&j, &grid(5.0), &init).unwrap();
        for i in 0..=40 {
            let expected = 2.0 * 12.0 * i as f64 * 5.0 / 1000.0;
            assert!((u.branch(0)[i] - expected).abs() < 1e-12);
            assert!((u.branch(3)[i] + expected).abs() < 1e-12);
        }
        let zero = InitialData::uniform(&j, &[0.0; 4]);
        let u = labels_from_densities(&j, &grid(5.0), &zero).unwrap();
        assert!(u.values().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn table1_labels_and_round_trip() {
        let j = table1_junction();
        let u = labels_from_densities(&j, &grid(5.0), &table1_initial()).unwrap();
        assert_eq!(u.branch(2).len(), 41);
        assert!((u.branch(2)[40] + 24.0).abs() < 1e-12);
        assert!((u.branch(0)[40] - 6.0).abs() < 1e-12);
        let rho = densities_from_labels(&j, 5.0, &u);
        let expect = |alpha: usize, cell: usize| match alpha {
            0 | 1 => 15.0,
            2 if cell < 20 => 30.0,
            2 => 90.0,
            _ => 5.0,
        };
        for alpha in 0..4 {
            assert_eq!(rho.branch(alpha).len(), 40);
            for (cell, &r) in rho.branch(alpha).iter().enumerate() {
                assert!((r - expect(alpha, cell)).abs() < 1e-12 * 90.0, "{alpha} {cell} {r}");
            }
        }
    }

    #[test]
    fn outgoing_slope_sign() {
        let j = table1_junction();
        let mut u = LabelField::new(vec![vec![0.0; 41]; 4], 0, 0.0);
        u.values_mut()[2][1] = -20.0 * 0.005;
        let rho = densities_from_labels(&j, 5.0, &u);
        assert!((rho.branch(2)[0] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn unaligned_breakpoints_integrate_exactly() {
        let j = table1_junction();
        let mut init = InitialData::uniform(&j, &[10.0; 4]);
        init.profiles[0] = vec![
            Segment { from_m: 0.0, to_m: 7.5, rho: 40.0 },
            Segment { from_m: 7.5, to_m: 200.0, rho: 10.0 },
        ];
        let u = labels_from_densities(&j, &grid(5.0), &init).unwrap();
        // cell [5, 10] averages 40 and 10 over equal halves
        let rho = densities_from_labels(&j, 5.0, &u);
        assert!((rho.branch(0)[0] - 40.0).abs() < 1e-12);
        assert!((rho.branch(0)[1] - 25.0).abs() < 1e-12);
        assert!((rho.branch(0)[2] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn initial_data_validation() {
        let j = table1_junction();
        let mut init = table1_initial();
        init.profiles[1][0].rho = 200.0;
        assert!(matches!(init.validate(&j), Err(Error::InvalidInitialData { branch: 1, .. })));
        let mut init = table1_initial();
        init.profiles[2][1].from_m = 120.0;
        assert!(init.validate(&j).is_err());
        let mut init = table1_initial();
        init.profiles[3][0].to_m = 150.0;
        assert!(init.validate(&j).is_err());
        assert_eq!(table1_initial().inflow_density(0, 200.0), 15.0);
        assert_eq!(table1_initial().density_range(2, 200.0), (30.0, 90.0));
    }
}
