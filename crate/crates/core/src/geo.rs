//! Spherical-earth geodesy helpers.

use crate::scalar::Scalar;

/// Mean earth radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Kilometres per nautical mile (1 knot = 1.852 km/h).
pub const KM_PER_NM: f64 = 1.852;

/// Great-circle distance in kilometres between two (lat, lon) points in degrees.
pub fn haversine_distance<T: Scalar>(p1: (T, T), p2: (T, T)) -> T {
    let (lat1, lon1) = (p1.0.to_radians(), p1.1.to_radians());
    let (lat2, lon2) = (p2.0.to_radians(), p2.1.to_radians());
    let half = T::lit(0.5);
    let a = ((lat2 - lat1) * half).sin().powi(2)
        + lat1.cos() * lat2.cos() * ((lon2 - lon1) * half).sin().powi(2);
    let c = T::lit(2.0) * a.sqrt().min(T::one()).asin();
    T::lit(EARTH_RADIUS_KM) * c
}

/// Initial great-circle bearing from `p1` to `p2`, degrees in [0, 360).
pub fn initial_bearing<T: Scalar>(p1: (T, T), p2: (T, T)) -> T {
    let (lat1, lat2) = (p1.0.to_radians(), p2.0.to_radians());
    let dlon = (p2.1 - p1.1).to_radians();
    let y = dlon.sin() * lat2.cos();
    let x = lat1.cos() * lat2.sin() - lat1.sin() * lat2.cos() * dlon.cos();
    normalize_bearing(y.atan2(x).to_degrees())
}

/// Point reached after travelling `distance_km` from `origin` along `bearing_deg`.
pub fn destination_point<T: Scalar>(origin: (T, T), bearing_deg: T, distance_km: T) -> (T, T) {
    let delta = distance_km / T::lit(EARTH_RADIUS_KM);
    let theta = bearing_deg.to_radians();
    let lat1 = origin.0.to_radians();
    let lon1 = origin.1.to_radians();
    let sin_lat2 = lat1.sin() * delta.cos() + lat1.cos() * delta.sin() * theta.cos();
    let lat2 = sin_lat2.max(-T::one()).min(T::one()).asin();
    let lon2 = lon1
        + (theta.sin() * delta.sin() * lat1.cos()).atan2(delta.cos() - lat1.sin() * sin_lat2);
    (lat2.to_degrees(), wrap_longitude(lon2.to_degrees()))
}

/// Maps a bearing into [0, 360).
pub fn normalize_bearing<T: Scalar>(deg: T) -> T {
    let full = T::lit(360.0);
    let r = deg % full;
    let r = if r < T::zero() { r + full } else { r };
    if r >= full {
        T::zero()
    } else {
        r
    }
}

/// Wraps an angle difference into (-180, 180].
pub fn wrap_angle<T: Scalar>(deg: T) -> T {
    let full = T::lit(360.0);
    let half = T::lit(180.0);
    let mut r = deg % full;
    if r > half {
        r = r - full;
    } else if r <= -half {
        r = r + full;
    }
    r
}

fn wrap_longitude<T: Scalar>(deg: T) -> T {
    let w = wrap_angle(deg);
    // keep +180 rather than mapping the antimeridian to -180
    if w == -T::lit(180.0) {
        T::lit(180.0)
    } else {
        w
    }
}
