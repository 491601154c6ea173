use alloc::format;

use crate::error::{Error, Result};
use crate::hj_scheme::{LabelField, SnapshotPair};

/// Bilinear (Q1) interpolation of the labels of `branch` at time `t_s` and
/// branch-local position `x_m`, inside the space-time strip spanned by
/// `pair`.
///
/// With `A, B` the values at step `n` around `x` and `D, C` those at step
/// `n + 1`, and `(tau, xi)` the local coordinates rescaled to `[0, 1]`:
/// `u = [A + xi (B - A)] (1 - tau) + [D + xi (C - D)] tau`.
pub fn q1_interpolate(
    pair: &SnapshotPair,
    t_s: f64,
    x_m: f64,
    branch: usize,
    dx_m: f64,
) -> Result<f64> {
    let t0 = pair.before.time_s();
    let t1 = pair.after.time_s();
    let tau = if t1 > t0 {
        (t_s - t0) / (t1 - t0)
    } else if t_s == t0 {
        0.0
    } else {
        return Err(Error::OutOfSpan(format!("t = {t_s} s, snapshot pair is at {t0} s only")));
    };
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::OutOfSpan(format!("t = {t_s} s outside [{t0}, {t1}] s")));
    }
    let (i, xi) = locate(pair.before.branch(branch).len(), x_m, dx_m)?;
    let a = pair.before.branch(branch);
    let d = pair.after.branch(branch);
    let lower = a[i] + xi * (a[i + 1] - a[i]);
    let upper = d[i] + xi * (d[i + 1] - d[i]);
    Ok(lower * (1.0 - tau) + upper * tau)
}

/// Linear interpolation in `x` of a single time level.
pub fn q1_on_field(field: &LabelField, x_m: f64, branch: usize, dx_m: f64) -> Result<f64> {
    let u = field.branch(branch);
    let (i, xi) = locate(u.len(), x_m, dx_m)?;
    Ok(u[i] + xi * (u[i + 1] - u[i]))
}

fn locate(points: usize, x_m: f64, dx_m: f64) -> Result<(usize, f64)> {
    let last = points - 1;
    let s = x_m / dx_m;
    if !(s >= -1e-12 && s <= last as f64 + 1e-9) {
        return Err(Error::OutOfSpan(format!(
            "x = {x_m} m outside [0, {}] m",
            last as f64 * dx_m
        )));
    }
    let s = s.clamp(0.0, last as f64);
    let i = (libm::floor(s) as usize).min(last - 1);
    Ok((i, s - i as f64))
}
