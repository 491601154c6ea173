//! Unit conversions between the scenario units (m, s) and the internal
//! traffic units (km, h).

/// Meters per kilometer.
pub const M_PER_KM: f64 = 1000.0;
/// Seconds per hour.
pub const S_PER_H: f64 = 3600.0;

/// Converts meters to kilometers.
#[inline]
pub fn m_to_km(m: f64) -> f64 {
    m / M_PER_KM
}

/// Converts kilometers to meters.
#[inline]
pub fn km_to_m(km: f64) -> f64 {
    km * M_PER_KM
}

/// Converts seconds to hours.
#[inline]
pub fn s_to_h(s: f64) -> f64 {
    s / S_PER_H
}

/// Converts hours to seconds.
#[inline]
pub fn h_to_s(h: f64) -> f64 {
    h * S_PER_H
}
