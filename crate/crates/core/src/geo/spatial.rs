use crate::ingest::GeoLocation;

use super::GeoError;

/// Mean earth radius in statute miles.
pub const EARTH_RADIUS_MI: f64 = 3958.8;

/// Below this distance a station is treated as coincident with the query.
pub const SNAP_DISTANCE_MI: f64 = 1e-6;

/// Great-circle distance in miles (haversine).
pub fn haversine_miles(a: GeoLocation, b: GeoLocation) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = (b.lat - a.lat).to_radians();
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_MI * h.sqrt().min(1.0).asin()
}

/// Distance to the storm eye, clamped below at `d_min` miles.
pub fn distance_to_eye(p: GeoLocation, eye: GeoLocation, d_min: f64) -> f64 {
    haversine_miles(p, eye).max(d_min)
}

/// Inverse-distance-weighted estimate at `p`:
///
/// ```text
/// W_p = Σ (W_i / D_i^k) / Σ (1 / D_i^k)
/// ```
///
/// with great-circle distances in miles. A station closer than
/// [`SNAP_DISTANCE_MI`] returns its own value.
pub fn idw_interpolate(p: GeoLocation, readings: &[(GeoLocation, f64)], k: f64) -> Result<f64, GeoError> {
    if readings.is_empty() {
        return Err(GeoError::NoReadings);
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(GeoError::InvalidParameter(format!("IDW power must be positive, got {k}")));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &(loc, value) in readings {
        lo = lo.min(value);
        hi = hi.max(value);
        let d = haversine_miles(p, loc);
        if d < SNAP_DISTANCE_MI {
            return Ok(value);
        }
        let w = d.powf(-k);
        num += value * w;
        den += w;
    }
    if den > 0.0 && den.is_finite() {
        return Ok((num / den).clamp(lo, hi));
    }
    // Weights underflowed (huge k): the nearest station dominates.
    Ok(nearest_value(p, readings).expect("non-empty"))
}

/// Value of the closest reading; the first wins ties.
pub fn nearest_value(p: GeoLocation, readings: &[(GeoLocation, f64)]) -> Option<f64> {
    readings
        .iter()
        .map(|&(loc, v)| (haversine_miles(p, loc), v))
        .fold(None, |best: Option<(f64, f64)>, (d, v)| match best {
            Some((bd, _)) if bd <= d => best,
            _ => Some((d, v)),
        })
        .map(|(_, v)| v)
}
