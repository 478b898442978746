//! Transverse Mercator projection onto a single UTM zone (WGS84).

use serde::{Deserialize, Serialize};

const SEMI_MAJOR: f64 = 6_378_137.0;
const FLATTENING: f64 = 1.0 / 298.257_223_563;
const SCALE: f64 = 0.9996;
const FALSE_EASTING: f64 = 500_000.0;
const FALSE_NORTHING_SOUTH: f64 = 10_000_000.0;

/// One UTM zone, fixed for a whole run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtmZone {
    pub number: u8,
    pub north: bool,
}

impl UtmZone {
    /// Standard 6° zone arithmetic; the Norway/Svalbard exceptions are ignored.
    pub fn containing(lat: f64, lon: f64) -> Self {
        let number = (((lon + 180.0) / 6.0).floor() as i64 + 1).clamp(1, 60) as u8;
        UtmZone {
            number,
            north: lat >= 0.0,
        }
    }

    /// Zone of the mean coordinate of `points`. `None` when empty.
    pub fn from_centroid<I>(points: I) -> Option<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let (mut lat, mut lon, mut n) = (0.0, 0.0, 0usize);
        for (a, b) in points {
            lat += a;
            lon += b;
            n += 1;
        }
        (n > 0).then(|| Self::containing(lat / n as f64, lon / n as f64))
    }

    pub fn central_meridian(&self) -> f64 {
        f64::from(self.number) * 6.0 - 183.0
    }

    /// Whether `lon` lies inside the zone's nominal 6° band.
    pub fn covers(&self, lon: f64) -> bool {
        (lon - self.central_meridian()).abs() <= 3.0
    }

    /// Project to (easting, northing) in meters.
    pub fn project(&self, lat: f64, lon: f64) -> (f64, f64) {
        let e2 = FLATTENING * (2.0 - FLATTENING);
        let e4 = e2 * e2;
        let e6 = e4 * e2;
        let ep2 = e2 / (1.0 - e2);

        let phi = lat.to_radians();
        let dlam = (lon - self.central_meridian()).to_radians();
        let (sin_phi, cos_phi) = phi.sin_cos();
        let tan_phi = sin_phi / cos_phi;

        let n = SEMI_MAJOR / (1.0 - e2 * sin_phi * sin_phi).sqrt();
        let t = tan_phi * tan_phi;
        let c = ep2 * cos_phi * cos_phi;
        let a = cos_phi * dlam;

        let m = SEMI_MAJOR
            * ((1.0 - e2 / 4.0 - 3.0 * e4 / 64.0 - 5.0 * e6 / 256.0) * phi
                - (3.0 * e2 / 8.0 + 3.0 * e4 / 32.0 + 45.0 * e6 / 1024.0) * (2.0 * phi).sin()
                + (15.0 * e4 / 256.0 + 45.0 * e6 / 1024.0) * (4.0 * phi).sin()
                - (35.0 * e6 / 3072.0) * (6.0 * phi).sin());

        let a2 = a * a;
        let a3 = a2 * a;
        let a4 = a3 * a;
        let a5 = a4 * a;
        let a6 = a5 * a;

        let easting = SCALE
            * n
            * (a + (1.0 - t + c) * a3 / 6.0
                + (5.0 - 18.0 * t + t * t + 72.0 * c - 58.0 * ep2) * a5 / 120.0)
            + FALSE_EASTING;
        let mut northing = SCALE
            * (m + n
                * tan_phi
                * (a2 / 2.0
                    + (5.0 - t + 9.0 * c + 4.0 * c * c) * a4 / 24.0
                    + (61.0 - 58.0 * t + t * t + 600.0 * c - 330.0 * ep2) * a6 / 720.0));
        if !self.north {
            northing += FALSE_NORTHING_SOUTH;
        }
        (easting, northing)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::tests_support::haversine_km;

    fn haversine_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
        haversine_km(lat1, lon1, lat2, lon2) * 1000.0
    }

    fn planar(zone: &UtmZone, a: (f64, f64), b: (f64, f64)) -> f64 {
        let (x1, y1) = zone.project(a.0, a.1);
        let (x2, y2) = zone.project(b.0, b.1);
        (x1 - x2).hypot(y1 - y2)
    }

    #[test]
    fn nyc_zone_is_18_north() {
        let zone = UtmZone::containing(40.7, -74.0);
        assert_eq!(zone, UtmZone { number: 18, north: true });
        assert_eq!(zone.central_meridian(), -75.0);
        let centroid =
            UtmZone::from_centroid([(40.75, -73.98), (40.68, -73.94), (40.80, -73.96)]).unwrap();
        assert_eq!(centroid.number, 18);
        assert!(UtmZone::from_centroid(std::iter::empty()).is_none());
    }

    #[test]
    fn projection_is_deterministic() {
        let zone = UtmZone::containing(40.7, -74.0);
        assert_eq!(zone.project(40.7128, -74.0060), zone.project(40.7128, -74.0060));
    }

    #[test]
    fn hundredth_degree_latitude_is_about_1112_m() {
        let zone = UtmZone::containing(40.7, -74.0);
        let d = planar(&zone, (40.70, -74.0), (40.71, -74.0));
        let oracle = haversine_m(40.70, -74.0, 40.71, -74.0);
        assert!((oracle - 1112.0).abs() / 1112.0 < 0.01, "oracle {oracle}");
        assert!((d - 1112.0).abs() / 1112.0 < 0.02, "planar {d}");
    }

    #[test]
    fn known_reference_point() {
        // Statue of Liberty, zone 18N: approx 580_700 E, 4_504_700 N.
        let zone = UtmZone { number: 18, north: true };
        let (e, n) = zone.project(40.6892, -74.0445);
        assert!((e - 580_700.0).abs() < 200.0, "{e}");
        assert!((n - 4_504_700.0).abs() < 200.0, "{n}");
    }

    #[test]
    fn southern_hemisphere_uses_false_northing() {
        let zone = UtmZone::containing(-33.87, 151.21);
        assert!(!zone.north);
        let (_, n) = zone.project(-33.87, 151.21);
        assert!(n > 6_000_000.0 && n < 10_000_000.0);
    }

    #[test]
    fn coverage_band() {
        let zone = UtmZone { number: 18, north: true };
        assert!(zone.covers(-74.0));
        assert!(!zone.covers(-70.0));
    }
}
