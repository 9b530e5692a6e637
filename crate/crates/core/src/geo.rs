//! Great-circle distance and a local tangent-plane projection.

use crate::trace_model::GeoPoint;

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Haversine great-circle distance in meters on a sphere of `radius_m`.
pub fn haversine_m(a: GeoPoint, b: GeoPoint, radius_m: f64) -> f64 {
    let (lat1, lat2) = (a.lat().to_radians(), b.lat().to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon() - a.lon()).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * radius_m * h.sqrt().min(1.0).asin()
}

/// Equirectangular projection about an origin: `x` east, `y` north, in meters.
///
/// Accurate to well under a centimeter for points within a few hundred
/// meters of the origin, which is all the clustering code ever needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    lat0: f64,
    lon0: f64,
    cos_lat0: f64,
    radius_m: f64,
}

impl LocalFrame {
    pub fn new(origin: GeoPoint, radius_m: f64) -> Self {
        LocalFrame {
            lat0: origin.lat(),
            lon0: origin.lon(),
            cos_lat0: origin.lat().to_radians().cos(),
            radius_m,
        }
    }

    /// Frame centered on the arithmetic mean of `points` (longitudes are
    /// unwrapped relative to the first point).
    pub fn centered_on(points: &[GeoPoint], radius_m: f64) -> Self {
        let first = points[0];
        let n = points.len() as f64;
        let lat = points.iter().map(|p| p.lat()).sum::<f64>() / n;
        let lon = points
            .iter()
            .map(|p| first.lon() + wrap_deg(p.lon() - first.lon()))
            .sum::<f64>()
            / n;
        LocalFrame {
            lat0: lat,
            lon0: lon,
            cos_lat0: lat.to_radians().cos(),
            radius_m,
        }
    }

    pub fn to_xy(&self, p: GeoPoint) -> (f64, f64) {
        let x = wrap_deg(p.lon() - self.lon0).to_radians() * self.radius_m * self.cos_lat0;
        let y = (p.lat() - self.lat0).to_radians() * self.radius_m;
        (x, y)
    }

    pub fn to_geo(&self, x: f64, y: f64) -> GeoPoint {
        let lat = (self.lat0 + (y / self.radius_m).to_degrees()).clamp(-90.0, 90.0);
        let lon = wrap_deg(self.lon0 + (x / (self.radius_m * self.cos_lat0)).to_degrees());
        GeoPoint::new(lat, lon).expect("projected point is in range")
    }
}

/// Wraps a longitude difference or value into `(-180, 180]`.
pub fn wrap_deg(d: f64) -> f64 {
    let mut r = d % 360.0;
    if r <= -180.0 {
        r += 360.0;
    } else if r > 180.0 {
        r -= 360.0;
    }
    r
}
