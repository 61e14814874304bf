//! Geodesic and coordinate utilities.
//!
//! Everything is `(lat, lon)` in decimal degrees internally. Config blocks may
//! declare `(lon, lat)` order explicitly via [`CoordOrder`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius used by the spherical formulas.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

const WGS84_A: f64 = 6_378_137.0;
const WGS84_F: f64 = 1.0 / 298.257_223_563;
const VINCENTY_TOL: f64 = 1e-12;
const VINCENTY_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(Error::invalid("lat", format!("{lat} outside [-90, 90]")));
        }
        if !lon.is_finite() || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::invalid("lon", format!("{lon} outside [-180, 180]")));
        }
        Ok(GeoPoint { lat, lon })
    }

    pub fn from_pair(pair: [f64; 2], order: CoordOrder) -> Result<Self> {
        match order {
            CoordOrder::LatLon => GeoPoint::new(pair[0], pair[1]),
            CoordOrder::LonLat => GeoPoint::new(pair[1], pair[0]),
        }
    }

    fn key(&self) -> (f64, f64) {
        (self.lat, self.lon)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordOrder {
    #[default]
    LatLon,
    LonLat,
}

/// City centre plus bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CityFrame {
    pub centre: GeoPoint,
    pub bbox_sw: GeoPoint,
    pub bbox_ne: GeoPoint,
}

impl CityFrame {
    pub fn new(centre: GeoPoint, bbox_sw: GeoPoint, bbox_ne: GeoPoint) -> Result<Self> {
        if !(bbox_sw.lat < bbox_ne.lat && bbox_sw.lon < bbox_ne.lon) {
            return Err(Error::invalid("city.bbox_sw", "must be strictly south-west of bbox_ne"));
        }
        let frame = CityFrame {
            centre,
            bbox_sw,
            bbox_ne,
        };
        if !frame.contains(centre) {
            return Err(Error::invalid("city.centre", "must lie inside the bounding box"));
        }
        Ok(frame)
    }

    /// London centre and bounding box from Flickr place data, listed in lon, lat order.
    pub fn london() -> Self {
        let p = |lon, lat| GeoPoint::from_pair([lon, lat], CoordOrder::LonLat).unwrap();
        CityFrame::new(p(-0.1280, 51.5077), p(-0.5103, 51.2868), p(0.3340, 51.6923)).unwrap()
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        self.bbox_sw.lat <= p.lat && p.lat <= self.bbox_ne.lat && self.bbox_sw.lon <= p.lon && p.lon <= self.bbox_ne.lon
    }

    pub fn diagonal_m(&self) -> f64 {
        vincenty(self.bbox_sw, self.bbox_ne).meters
    }
}

/// `city.centre`, `city.bbox_sw`, `city.bbox_ne` in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CityFrameConfig {
    pub centre: [f64; 2],
    pub bbox_sw: [f64; 2],
    pub bbox_ne: [f64; 2],
    #[serde(default)]
    pub order: CoordOrder,
}

impl CityFrameConfig {
    pub fn to_frame(&self) -> Result<CityFrame> {
        CityFrame::new(
            GeoPoint::from_pair(self.centre, self.order)?,
            GeoPoint::from_pair(self.bbox_sw, self.order)?,
            GeoPoint::from_pair(self.bbox_ne, self.order)?,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartesianPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl CartesianPoint {
    pub fn distance(&self, other: &CartesianPoint) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

/// Orders a pair so both distance functions are exactly symmetric.
fn canonical(a: GeoPoint, b: GeoPoint) -> (GeoPoint, GeoPoint) {
    if a.key().partial_cmp(&b.key()) == Some(std::cmp::Ordering::Greater) {
        (b, a)
    } else {
        (a, b)
    }
}

/// Great-circle distance in metres on a sphere of radius [`EARTH_RADIUS_M`].
pub fn haversine(a: GeoPoint, b: GeoPoint) -> f64 {
    let (a, b) = canonical(a, b);
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMethod {
    Vincenty,
    /// Vincenty failed to converge (near-antipodal points).
    HaversineFallback,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicDistance {
    pub meters: f64,
    pub method: DistanceMethod,
}

impl GeodesicDistance {
    pub fn converged(&self) -> bool {
        self.method == DistanceMethod::Vincenty
    }
}

/// WGS-84 inverse geodesic by Vincenty's iteration; falls back to
/// [`haversine`] (flagged) when the iteration does not converge.
pub fn vincenty(a: GeoPoint, b: GeoPoint) -> GeodesicDistance {
    let (a, b) = canonical(a, b);
    match vincenty_inverse(a, b) {
        Some(m) => GeodesicDistance {
            meters: m,
            method: DistanceMethod::Vincenty,
        },
        None => GeodesicDistance {
            meters: haversine(a, b),
            method: DistanceMethod::HaversineFallback,
        },
    }
}

fn vincenty_inverse(p1: GeoPoint, p2: GeoPoint) -> Option<f64> {
    let a = WGS84_A;
    let f = WGS84_F;
    let b = (1.0 - f) * a;

    let l = (p2.lon - p1.lon).to_radians();
    let u1 = ((1.0 - f) * p1.lat.to_radians().tan()).atan();
    let u2 = ((1.0 - f) * p2.lat.to_radians().tan()).atan();
    let (sin_u1, cos_u1) = u1.sin_cos();
    let (sin_u2, cos_u2) = u2.sin_cos();

    let mut lambda = l;
    for _ in 0..VINCENTY_MAX_ITER {
        let (sin_l, cos_l) = lambda.sin_cos();
        let sin_sigma = ((cos_u2 * sin_l).powi(2) + (cos_u1 * sin_u2 - sin_u1 * cos_u2 * cos_l).powi(2)).sqrt();
        if sin_sigma == 0.0 {
            return Some(0.0);
        }
        let cos_sigma = sin_u1 * sin_u2 + cos_u1 * cos_u2 * cos_l;
        let sigma = sin_sigma.atan2(cos_sigma);
        let sin_alpha = cos_u1 * cos_u2 * sin_l / sin_sigma;
        let cos2_alpha = 1.0 - sin_alpha * sin_alpha;
        let cos_2sm = if cos2_alpha != 0.0 {
            cos_sigma - 2.0 * sin_u1 * sin_u2 / cos2_alpha
        } else {
            0.0 // equatorial line
        };
        let c = f / 16.0 * cos2_alpha * (4.0 + f * (4.0 - 3.0 * cos2_alpha));
        let prev = lambda;
        lambda = l
            + (1.0 - c)
                * f
                * sin_alpha
                * (sigma + c * sin_sigma * (cos_2sm + c * cos_sigma * (-1.0 + 2.0 * cos_2sm * cos_2sm)));
        if lambda.abs() > PI {
            return None;
        }
        if (lambda - prev).abs() < VINCENTY_TOL {
            let u_sq = cos2_alpha * (a * a - b * b) / (b * b);
            let big_a = 1.0 + u_sq / 16384.0 * (4096.0 + u_sq * (-768.0 + u_sq * (320.0 - 175.0 * u_sq)));
            let big_b = u_sq / 1024.0 * (256.0 + u_sq * (-128.0 + u_sq * (74.0 - 47.0 * u_sq)));
            let delta_sigma = big_b
                * sin_sigma
                * (cos_2sm
                    + big_b / 4.0
                        * (cos_sigma * (-1.0 + 2.0 * cos_2sm * cos_2sm)
                            - big_b / 6.0
                                * cos_2sm
                                * (-3.0 + 4.0 * sin_sigma * sin_sigma)
                                * (-3.0 + 4.0 * cos_2sm * cos_2sm)));
            return Some(b * big_a * (sigma - delta_sigma));
        }
    }
    None
}

/// Earth-centred Cartesian coordinates on the sphere of radius
/// [`EARTH_RADIUS_M`].
pub fn to_cartesian(p: GeoPoint) -> CartesianPoint {
    let (lat, lon) = (p.lat.to_radians(), p.lon.to_radians());
    CartesianPoint {
        x: EARTH_RADIUS_M * lat.cos() * lon.cos(),
        y: EARTH_RADIUS_M * lat.cos() * lon.sin(),
        z: EARTH_RADIUS_M * lat.sin(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    // Independent oracles computed with Python: math-module haversine and
    // GeographicLib (Karney) for the ellipsoidal values.
    const LONDON_PARIS_HAVERSINE_M: f64 = 343_591.696_924_780_9;
    const LONDON_BBOX_DIAGONAL_M: f64 = 73_987.351_895_795_67;

    #[test]
    fn identity() {
        let p = pt(51.5077, -0.128);
        assert_eq!(haversine(p, p), 0.0);
        assert_eq!(vincenty(p, p).meters, 0.0);
    }

    #[test]
    fn london_paris() {
        let d = haversine(pt(51.5077, -0.1280), pt(48.8566, 2.3522));
        assert!((d - LONDON_PARIS_HAVERSINE_M).abs() / LONDON_PARIS_HAVERSINE_M < 1e-9);
        assert!((d - 343_900.0).abs() / 343_900.0 < 0.01);
    }

    #[test]
    fn london_bbox_diagonal_matches_karney() {
        let f = CityFrame::london();
        let d = vincenty(f.bbox_sw, f.bbox_ne);
        assert!(d.converged());
        assert!((d.meters - LONDON_BBOX_DIAGONAL_M).abs() < 1e-3, "{}", d.meters);
    }

    #[test]
    fn london_constants_are_reordered() {
        let f = CityFrame::london();
        assert_eq!(f.centre, pt(51.5077, -0.1280));
        assert_eq!(f.bbox_sw, pt(51.2868, -0.5103));
        assert_eq!(f.bbox_ne, pt(51.6923, 0.3340));
    }

    #[test]
    fn near_antipodal_falls_back() {
        let d = vincenty(pt(0.0, 0.0), pt(0.5, 179.7));
        assert_eq!(d.method, DistanceMethod::HaversineFallback);
        assert!(d.meters > 19_000_000.0);
    }

    #[test]
    fn vincenty_close_to_haversine_same_hemisphere() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let a = pt(rng.random_range(0.0..80.0), rng.random_range(-60.0..60.0));
            let b = pt(rng.random_range(0.0..80.0), rng.random_range(-60.0..60.0));
            let h = haversine(a, b);
            let v = vincenty(a, b);
            assert!(v.converged());
            assert!((v.meters - h).abs() / h < 0.006, "{a:?} {b:?}");
        }
    }

    #[test]
    fn cartesian_reference_points() {
        let c = to_cartesian(pt(0.0, 0.0));
        assert_eq!((c.x, c.y, c.z), (EARTH_RADIUS_M, 0.0, 0.0));
        let p = to_cartesian(pt(90.0, 37.0));
        assert!(p.x.abs() < 1e-6 * EARTH_RADIUS_M);
        assert!(p.y.abs() < 1e-6 * EARTH_RADIUS_M);
        assert!((p.z - EARTH_RADIUS_M).abs() < 1e-6 * EARTH_RADIUS_M);
    }

    #[test]
    fn chord_matches_arc_for_near_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = CityFrame::london().centre;
        for _ in 0..200 {
            let p = pt(c.lat + rng.random_range(-0.3..0.3), c.lon + rng.random_range(-0.4..0.4));
            let arc = haversine(c, p);
            if arc == 0.0 || arc > 50_000.0 {
                continue;
            }
            let chord = to_cartesian(c).distance(&to_cartesian(p));
            assert!((chord - arc).abs() / arc < 1e-3);
        }
    }

    #[test]
    fn frame_rejects_bad_boxes() {
        let f = CityFrame::london();
        assert!(CityFrame::new(f.centre, f.bbox_ne, f.bbox_sw).is_err());
        assert!(CityFrame::new(pt(0.0, 0.0), f.bbox_sw, f.bbox_ne).is_err());
    }

    #[test]
    fn config_order_flag() {
        let cfg: CityFrameConfig = serde_json::from_str(
            r#"{"centre":[-0.1280,51.5077],"bbox_sw":[-0.5103,51.2868],"bbox_ne":[0.3340,51.6923],"order":"lon_lat"}"#,
        )
        .unwrap();
        assert_eq!(cfg.to_frame().unwrap(), CityFrame::london());
    }
}
