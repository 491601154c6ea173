//! Fundamental diagrams and branch Hamiltonians.
//!
//! A branch carries a concave-shaped flux `f` with a unique maximum `f_max`
//! at the critical density `rho_c`. Demand and supply are its nondecreasing
//! and nonincreasing envelopes. The Hamiltonian of a branch acts on label
//! gradients `p`:
//!
//! ```text
//! incoming:  H(p) = -(1/gamma) f( gamma p)
//! outgoing:  H(p) = -(1/gamma) f(-gamma p)
//! ```
//!
//! so that `H-` and `H+` are obtained by replacing `f` with the demand or the
//! supply. Every evaluation is a pure function of immutable data.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

const BISECTION_MAX_ITER: usize = 400;

/// Shape of a fundamental diagram.
#[derive(Debug, Clone, PartialEq)]
pub enum DiagramKind {
    /// Two quadratic pieces glued at the critical density. `k` is the
    /// normalized slope at the origin and at the jam density; `1 <= k < 2`.
    BiParabolic {
        /// Shape parameter.
        k: f64,
    },
    /// Piecewise-linear flux through sampled `(density, flow)` breakpoints.
    UserPiecewise {
        /// Breakpoints sorted by strictly increasing density.
        breakpoints: Vec<(f64, f64)>,
    },
}

/// Flux-density relation of one road.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalDiagram {
    rho_c: f64,
    rho_max: f64,
    f_max: f64,
    kind: DiagramKind,
}

impl FundamentalDiagram {
    /// Builds the bi-parabolic diagram
    ///
    /// ```text
    /// f(rho) = f_max s ((1-k) s + k),   s = rho / rho_c                 (rho <= rho_c)
    /// f(rho) = f_max s ((1-k) s + k),   s = (rho_max - rho) / (rho_max - rho_c)
    /// ```
    ///
    /// which is the expanded two-piece quadratic written in normalized form.
    pub fn bi_parabolic(rho_c: f64, rho_max: f64, f_max: f64, k: f64) -> Result<Self> {
        if !(rho_c.is_finite() && rho_max.is_finite() && f_max.is_finite() && k.is_finite()) {
            return Err(Error::InvalidDiagram(format!(
                "non-finite parameter (rho_c={rho_c}, rho_max={rho_max}, f_max={f_max}, k={k})"
            )));
        }
        if !(rho_c > 0.0 && rho_c < rho_max) {
            return Err(Error::InvalidDiagram(format!(
                "need 0 < rho_c < rho_max, got rho_c={rho_c}, rho_max={rho_max}"
            )));
        }
        if f_max <= 0.0 {
            return Err(Error::InvalidDiagram(format!("need f_max > 0, got {f_max}")));
        }
        if !(1.0..2.0).contains(&k) {
            return Err(Error::InvalidDiagram(format!("need 1 <= k < 2, got {k}")));
        }
        Ok(Self {
            rho_c,
            rho_max,
            f_max,
            kind: DiagramKind::BiParabolic { k },
        })
    }

    /// Builds a piecewise-linear diagram. The first breakpoint must be
    /// `(0, 0)`, the last `(rho_max, 0)`, and the flows must rise strictly to
    /// a single maximum and then fall strictly.
    pub fn piecewise(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        if breakpoints.len() < 3 {
            return Err(Error::InvalidDiagram(
                "piecewise diagram needs at least 3 breakpoints".into(),
            ));
        }
        if breakpoints.iter().any(|(r, q)| !r.is_finite() || !q.is_finite()) {
            return Err(Error::InvalidDiagram("non-finite breakpoint".into()));
        }
        let (r0, q0) = breakpoints[0];
        let (rn, qn) = breakpoints[breakpoints.len() - 1];
        if r0 != 0.0 || q0 != 0.0 {
            return Err(Error::InvalidDiagram("first breakpoint must be (0, 0)".into()));
        }
        if qn != 0.0 {
            return Err(Error::InvalidDiagram("last breakpoint must have zero flow".into()));
        }
        if breakpoints.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidDiagram(
                "breakpoint densities must be strictly increasing".into(),
            ));
        }
        let peak = breakpoints
            .iter()
            .enumerate()
            .fold(0, |best, (i, p)| if p.1 > breakpoints[best].1 { i } else { best });
        let rising = breakpoints[..=peak].windows(2).all(|w| w[1].1 > w[0].1);
        let falling = breakpoints[peak..].windows(2).all(|w| w[1].1 < w[0].1);
        if peak == 0 || peak == breakpoints.len() - 1 || !rising || !falling {
            return Err(Error::InvalidDiagram(
                "flows must increase strictly to a unique interior maximum, then decrease strictly"
                    .into(),
            ));
        }
        let (rho_c, f_max) = breakpoints[peak];
        Ok(Self {
            rho_c,
            rho_max: rn,
            f_max,
            kind: DiagramKind::UserPiecewise { breakpoints },
        })
    }

    /// Critical density (veh/km).
    pub fn rho_c(&self) -> f64 {
        self.rho_c
    }

    /// Jam density (veh/km).
    pub fn rho_max(&self) -> f64 {
        self.rho_max
    }

    /// Capacity flow (veh/h).
    pub fn f_max(&self) -> f64 {
        self.f_max
    }

    /// Shape of the diagram.
    pub fn kind(&self) -> &DiagramKind {
        &self.kind
    }

    /// Flow at `rho`. Outside `[0, rho_max]` each piece is continued
    /// analytically (quadratic pieces) or linearly (piecewise diagrams).
    pub fn flux(&self, rho: f64) -> f64 {
        match &self.kind {
            DiagramKind::BiParabolic { k } => {
                let s = self.normalized(rho);
                self.f_max * s * ((1.0 - k) * s + k)
            }
            DiagramKind::UserPiecewise { breakpoints } => {
                let j = segment_index(breakpoints, rho);
                let (r0, q0) = breakpoints[j];
                q0 + segment_slope(breakpoints, j) * (rho - r0)
            }
        }
    }

    /// Left and right derivatives of the flux at `rho`.
    pub fn slopes(&self, rho: f64) -> (f64, f64) {
        match &self.kind {
            DiagramKind::BiParabolic { .. } => {
                if rho < self.rho_c {
                    let d = self.piece_derivative(false, rho);
                    (d, d)
                } else if rho > self.rho_c {
                    let d = self.piece_derivative(true, rho);
                    (d, d)
                } else {
                    (
                        self.piece_derivative(false, rho),
                        self.piece_derivative(true, rho),
                    )
                }
            }
            DiagramKind::UserPiecewise { breakpoints } => {
                let j = segment_index(breakpoints, rho);
                let right = segment_slope(breakpoints, j);
                let left = if rho == breakpoints[j].0 && j > 0 {
                    segment_slope(breakpoints, j - 1)
                } else {
                    right
                };
                (left, right)
            }
        }
    }

    /// Demand: `f` below the critical density, `f_max` above.
    pub fn demand(&self, rho: f64) -> f64 {
        if rho <= self.rho_c {
            self.flux(rho)
        } else {
            self.f_max
        }
    }

    /// Supply: `f_max` below the critical density, `f` above.
    pub fn supply(&self, rho: f64) -> f64 {
        if rho >= self.rho_c {
            self.flux(rho)
        } else {
            self.f_max
        }
    }

    /// Smallest density on the increasing branch with flow `q`
    /// (`rho_c` when `q == f_max`).
    pub fn inverse_demand(&self, q: f64) -> Result<f64> {
        self.inverse_demand_tol(q, 1e-12)
    }

    /// Largest density on the decreasing branch with flow `q`
    /// (`rho_c` when `q == f_max`).
    pub fn inverse_supply(&self, q: f64) -> Result<f64> {
        self.inverse_supply_tol(q, 1e-12)
    }

    pub(crate) fn inverse_demand_tol(&self, q: f64, tol: f64) -> Result<f64> {
        self.check_flow(q)?;
        if q == self.f_max {
            return Ok(self.rho_c);
        }
        match &self.kind {
            DiagramKind::BiParabolic { k } => {
                Ok(self.rho_c * normalized_root(*k, q / self.f_max))
            }
            DiagramKind::UserPiecewise { .. } => {
                // invariant: f(lo) < q <= f(hi)
                let mut hi = self.rho_c;
                let mut lo = 0.0;
                let mut step = 1.0;
                while self.flux(lo) >= q {
                    lo = -step;
                    step *= 2.0;
                }
                for _ in 0..BISECTION_MAX_ITER {
                    if hi - lo <= tol {
                        break;
                    }
                    let mid = 0.5 * (lo + hi);
                    if self.flux(mid) < q {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Ok(hi)
            }
        }
    }

    pub(crate) fn inverse_supply_tol(&self, q: f64, tol: f64) -> Result<f64> {
        self.check_flow(q)?;
        if q == self.f_max {
            return Ok(self.rho_c);
        }
        match &self.kind {
            DiagramKind::BiParabolic { k } => {
                let width = self.rho_max - self.rho_c;
                Ok(self.rho_max - width * normalized_root(*k, q / self.f_max))
            }
            DiagramKind::UserPiecewise { .. } => {
                // invariant: f(lo) >= q > f(hi)
                let mut lo = self.rho_c;
                let mut hi = self.rho_max;
                let mut step = 1.0;
                while self.flux(hi) >= q {
                    hi = self.rho_max + step;
                    step *= 2.0;
                }
                for _ in 0..BISECTION_MAX_ITER {
                    if hi - lo <= tol {
                        break;
                    }
                    let mid = 0.5 * (lo + hi);
                    if self.flux(mid) >= q {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Ok(lo)
            }
        }
    }

    /// Essential supremum of `|f'|` over the density interval `[lo, hi]`.
    pub fn max_abs_slope(&self, lo: f64, hi: f64) -> f64 {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        match &self.kind {
            DiagramKind::BiParabolic { .. } => {
                // |f'| is affine on each piece, so its max sits at the ends of
                // the interval clipped to the piece.
                let mut best: f64 = 0.0;
                if lo <= self.rho_c {
                    let end = hi.min(self.rho_c);
                    best = best
                        .max(self.piece_derivative(false, lo).abs())
                        .max(self.piece_derivative(false, end).abs());
                }
                if hi >= self.rho_c {
                    let start = lo.max(self.rho_c);
                    best = best
                        .max(self.piece_derivative(true, start).abs())
                        .max(self.piece_derivative(true, hi).abs());
                }
                best
            }
            DiagramKind::UserPiecewise { breakpoints } => {
                let segments = breakpoints.len() - 1;
                (0..segments)
                    .filter(|&j| {
                        let start = if j == 0 { f64::NEG_INFINITY } else { breakpoints[j].0 };
                        let end = if j + 1 == segments {
                            f64::INFINITY
                        } else {
                            breakpoints[j + 1].0
                        };
                        start <= hi && lo <= end
                    })
                    .map(|j| segment_slope(breakpoints, j).abs())
                    .fold(0.0, f64::max)
            }
        }
    }

    fn check_flow(&self, q: f64) -> Result<()> {
        if q.is_nan() || q > self.f_max {
            return Err(Error::BelowMinimum {
                value: -q,
                min: -self.f_max,
            });
        }
        Ok(())
    }

    fn normalized(&self, rho: f64) -> f64 {
        if rho <= self.rho_c {
            rho / self.rho_c
        } else {
            (self.rho_max - rho) / (self.rho_max - self.rho_c)
        }
    }

    /// Derivative of one quadratic piece (`congested` selects the piece).
    fn piece_derivative(&self, congested: bool, rho: f64) -> f64 {
        let DiagramKind::BiParabolic { k } = self.kind else {
            unreachable!("piece_derivative on a piecewise diagram")
        };
        if congested {
            let width = self.rho_max - self.rho_c;
            let s = (self.rho_max - rho) / width;
            -self.f_max * (2.0 * (1.0 - k) * s + k) / width
        } else {
            let s = rho / self.rho_c;
            self.f_max * (2.0 * (1.0 - k) * s + k) / self.rho_c
        }
    }
}

/// Root `s <= 1` of `(1-k) s^2 + k s = r`, written to avoid cancellation.
fn normalized_root(k: f64, r: f64) -> f64 {
    let disc = (k * k + 4.0 * (1.0 - k) * r).max(0.0);
    2.0 * r / (k + libm::sqrt(disc))
}

/// Index of the segment `[x_j, x_{j+1})` containing `rho`, clamped so the
/// first and last segments extend to infinity.
fn segment_index(breakpoints: &[(f64, f64)], rho: f64) -> usize {
    let last_segment = breakpoints.len() - 2;
    match breakpoints.partition_point(|(r, _)| *r <= rho) {
        0 => 0,
        n => (n - 1).min(last_segment),
    }
}

fn segment_slope(breakpoints: &[(f64, f64)], j: usize) -> f64 {
    let (r0, q0) = breakpoints[j];
    let (r1, q1) = breakpoints[j + 1];
    (q1 - q0) / (r1 - r0)
}

/// Direction of a branch relative to the junction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Traffic flows toward the junction.
    Incoming,
    /// Traffic flows away from the junction.
    Outgoing,
}

impl Orientation {
    /// `+1` for incoming branches, `-1` for outgoing ones: the sign relating
    /// a label gradient to a density.
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Incoming => 1.0,
            Orientation::Outgoing => -1.0,
        }
    }
}

/// Hamiltonian of one branch, built from its fundamental diagram and split
/// coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchHamiltonian {
    diagram: FundamentalDiagram,
    gamma: f64,
    orientation: Orientation,
}

impl BranchHamiltonian {
    /// Requires `gamma` in `(0, 1]`.
    pub fn new(diagram: FundamentalDiagram, gamma: f64, orientation: Orientation) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidJunction(format!(
                "split coefficient must lie in (0, 1], got {gamma}"
            )));
        }
        Ok(Self {
            diagram,
            gamma,
            orientation,
        })
    }

    /// Underlying fundamental diagram.
    pub fn diagram(&self) -> &FundamentalDiagram {
        &self.diagram
    }

    /// Split coefficient.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Branch orientation.
    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    /// Density encoded by the label gradient `p`.
    #[inline]
    pub fn density(&self, p: f64) -> f64 {
        self.orientation.sign() * self.gamma * p
    }

    /// Label gradient encoding the density `rho`.
    #[inline]
    pub fn gradient(&self, rho: f64) -> f64 {
        self.orientation.sign() * rho / self.gamma
    }

    /// Minimizer of `H`.
    pub fn p0(&self) -> f64 {
        self.gradient(self.diagram.rho_c)
    }

    /// Global minimum `H(p0) = -f_max / gamma`.
    pub fn min_value(&self) -> f64 {
        -self.diagram.f_max / self.gamma
    }

    /// `H(p)`.
    pub fn eval(&self, p: f64) -> f64 {
        -self.diagram.flux(self.density(p)) / self.gamma
    }

    /// Nonincreasing envelope `H-(p)`.
    pub fn eval_minus(&self, p: f64) -> f64 {
        let rho = self.density(p);
        let q = match self.orientation {
            Orientation::Incoming => self.diagram.demand(rho),
            Orientation::Outgoing => self.diagram.supply(rho),
        };
        -q / self.gamma
    }

    /// Nondecreasing envelope `H+(p)`.
    pub fn eval_plus(&self, p: f64) -> f64 {
        let rho = self.density(p);
        let q = match self.orientation {
            Orientation::Incoming => self.diagram.supply(rho),
            Orientation::Outgoing => self.diagram.demand(rho),
        };
        -q / self.gamma
    }

    /// `inf { p : H-(p) = a }`; `+inf` maps to `-inf`.
    pub fn inverse_minus(&self, a: f64) -> Result<f64> {
        if a == f64::INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        let q = self.flow_level(a)?;
        let tol = 1e-12 * self.gamma;
        // the infimum in p is the smallest density on incoming branches and
        // the largest density on outgoing ones
        let rho = match self.orientation {
            Orientation::Incoming => self.diagram.inverse_demand_tol(q, tol)?,
            Orientation::Outgoing => self.diagram.inverse_supply_tol(q, tol)?,
        };
        Ok(self.gradient(rho))
    }

    /// `sup { p : H+(p) = a }`; `+inf` maps to `+inf`.
    pub fn inverse_plus(&self, a: f64) -> Result<f64> {
        if a == f64::INFINITY {
            return Ok(f64::INFINITY);
        }
        let q = self.flow_level(a)?;
        let tol = 1e-12 * self.gamma;
        let rho = match self.orientation {
            Orientation::Incoming => self.diagram.inverse_supply_tol(q, tol)?,
            Orientation::Outgoing => self.diagram.inverse_demand_tol(q, tol)?,
        };
        Ok(self.gradient(rho))
    }

    /// Essential supremum of `|H'|` over `[p_lo, p_hi]` (km/h).
    pub fn lipschitz_bound(&self, p_lo: f64, p_hi: f64) -> f64 {
        // |H'(p)| = |f'(density(p))|, the gamma factors cancel
        self.diagram
            .max_abs_slope(self.density(p_lo), self.density(p_hi))
    }

    fn flow_level(&self, a: f64) -> Result<f64> {
        let min = self.min_value();
        if a.is_nan() || a < min {
            return Err(Error::BelowMinimum { value: a, min });
        }
        // clamp rounding so the plateau value maps to p0 exactly
        Ok((-self.gamma * a).min(self.diagram.f_max))
    }
}
