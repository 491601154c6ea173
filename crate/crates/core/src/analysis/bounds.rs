use alloc::vec::Vec;

use crate::error::Result;
use crate::hamiltonian::Orientation;
use crate::junction::{InitialData, JunctionSpec};

/// A priori bounds satisfied by the continuous solution, built from the
/// best Lipschitz constants of the initial labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousBounds {
    /// Smallest initial label slope `L^{alpha,-}` per branch.
    pub l_minus: Vec<f64>,
    /// Largest initial label slope `L^{alpha,+}` per branch.
    pub l_plus: Vec<f64>,
    /// Lower bound `m0_0` on the time derivative (labels/h).
    pub m0_0: f64,
    /// Upper bound `M0_0` on the time derivative (labels/h).
    pub big_m0_0: f64,
    /// Lower gradient bound `(H-)^{-1}(-m0_0)` per branch.
    pub p_lo0: Vec<f64>,
    /// Upper gradient bound `(H+)^{-1}(-m0_0)` per branch.
    pub p_hi0: Vec<f64>,
}

/// Computes the continuous bounds for piecewise-constant initial data.
///
/// For such data the best Lipschitz constants are the extreme densities of
/// each profile mapped to label slopes. The upstream boundary density of an
/// incoming branch counts as part of its profile.
pub fn continuous_bounds(junction: &JunctionSpec, init: &InitialData) -> Result<ContinuousBounds> {
    init.validate(junction)?;
    let hs = junction.hamiltonians();
    let mut l_minus = Vec::with_capacity(hs.len());
    let mut l_plus = Vec::with_capacity(hs.len());
    for (alpha, h) in hs.iter().enumerate() {
        let length = junction.branch(alpha).length_m;
        let (mut lo, mut hi) = init.density_range(alpha, length);
        if junction.orientation(alpha) == Orientation::Incoming {
            let rho_in = init.inflow_density(alpha, length);
            lo = lo.min(rho_in);
            hi = hi.max(rho_in);
        }
        let (a, b) = (h.gradient(lo), h.gradient(hi));
        l_minus.push(a.min(b));
        l_plus.push(a.max(b));
    }

    // -H is unimodal, so its infimum over an interval sits at an endpoint
    let m0_0 = hs
        .iter()
        .enumerate()
        .map(|(a, h)| (-h.eval(l_minus[a])).min(-h.eval(l_plus[a])))
        .fold(f64::INFINITY, f64::min);
    let branch_term = hs
        .iter()
        .enumerate()
        .map(|(a, h)| -h.eval_minus(l_plus[a]).max(h.eval_plus(l_minus[a])))
        .fold(f64::NEG_INFINITY, f64::max);
    let junction_term = -hs
        .iter()
        .enumerate()
        .map(|(a, h)| h.eval_minus(l_plus[a]))
        .fold(f64::NEG_INFINITY, f64::max);
    let big_m0_0 = branch_term.max(junction_term);

    let p_lo0 = hs.iter().map(|h| h.inverse_minus(-m0_0)).collect::<Result<Vec<_>>>()?;
    let p_hi0 = hs.iter().map(|h| h.inverse_plus(-m0_0)).collect::<Result<Vec<_>>>()?;
    Ok(ContinuousBounds {
        l_minus,
        l_plus,
        m0_0,
        big_m0_0,
        p_lo0,
        p_hi0,
    })
}
