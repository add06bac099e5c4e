//! Coordinate conversions between normalized image coordinates, latitude and
//! longitude, and 3D unit vectors, plus the inverse gnomonic projection used to
//! lay sampling kernels onto the sphere.
//!
//! Conventions: `y` grows downward from the top row (north pole), `x` grows
//! rightward from longitude -pi. Latitude is positive north.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in normalized equirectangular coordinates, both axes in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormPoint {
    pub y: f64,
    pub x: f64,
}

impl NormPoint {
    pub fn new(y: f64, x: f64) -> Result<Self> {
        let p = NormPoint { y, x };
        p.validate()?;
        Ok(p)
    }

    pub const CENTER: NormPoint = NormPoint { y: 0.5, x: 0.5 };

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.y) || !(0.0..=1.0).contains(&self.x) {
            return Err(Error::Domain(format!(
                "normalized point ({}, {}) outside [0,1]^2",
                self.y, self.x
            )));
        }
        Ok(())
    }
}

/// Latitude in `[-pi/2, pi/2]`, longitude in `[-pi, pi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalPoint {
    pub lat: f64,
    pub lon: f64,
}

impl SphericalPoint {
    /// Builds a point, clamping latitude and wrapping longitude.
    pub fn new(lat: f64, lon: f64) -> Self {
        SphericalPoint {
            lat: lat.clamp(-FRAC_PI_2, FRAC_PI_2),
            lon: wrap_lon(lon),
        }
    }
}

/// Wraps a longitude into `[-pi, pi)`. Values already in range are returned unchanged.
#[inline]
pub fn wrap_lon(lon: f64) -> f64 {
    if (-PI..PI).contains(&lon) {
        return lon;
    }
    let w = (lon + PI).rem_euclid(TAU) - PI;
    // rem_euclid can round up to TAU for tiny negative inputs
    if w >= PI {
        -PI
    } else {
        w
    }
}

/// Offset on the tangent plane at a kernel center: `u` rightward (east), `v` upward (north).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentOffset {
    pub u: f64,
    pub v: f64,
}

impl TangentOffset {
    pub fn new(u: f64, v: f64) -> Result<Self> {
        if !(u.is_finite() && v.is_finite()) || u.abs() >= FRAC_PI_2 || v.abs() >= FRAC_PI_2 {
            return Err(Error::Domain(format!(
                "tangent offset ({u}, {v}) outside gnomonic validity range"
            )));
        }
        Ok(TangentOffset { u, v })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVec3(pub [f64; 3]);

impl UnitVec3 {
    pub fn dot(&self, other: &UnitVec3) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    pub fn cross(&self, other: &UnitVec3) -> [f64; 3] {
        let (a, b) = (self.0, other.0);
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

pub fn norm_to_sph(p: NormPoint) -> Result<SphericalPoint> {
    p.validate()?;
    Ok(norm_to_sph_unchecked(p.y, p.x))
}

#[inline]
pub(crate) fn norm_to_sph_unchecked(y: f64, x: f64) -> SphericalPoint {
    SphericalPoint {
        lat: (0.5 - y) * PI,
        lon: wrap_lon((x - 0.5) * TAU),
    }
}

pub fn sph_to_norm(s: SphericalPoint) -> NormPoint {
    let (y, x) = sph_to_norm_unchecked(s.lat, s.lon);
    NormPoint { y, x }
}

#[inline]
pub(crate) fn sph_to_norm_unchecked(lat: f64, lon: f64) -> (f64, f64) {
    let y = (0.5 - lat / PI).clamp(0.0, 1.0);
    let x = (wrap_lon(lon) / TAU + 0.5).clamp(0.0, 1.0);
    (y, x)
}

pub fn sph_to_vec(s: SphericalPoint) -> UnitVec3 {
    let (sin_lat, cos_lat) = s.lat.sin_cos();
    let (sin_lon, cos_lon) = s.lon.sin_cos();
    UnitVec3([cos_lat * cos_lon, cos_lat * sin_lon, sin_lat])
}

pub fn vec_to_sph(v: UnitVec3) -> SphericalPoint {
    let [x, y, z] = v.0;
    SphericalPoint::new(z.atan2(x.hypot(y)), y.atan2(x))
}

/// Great-circle distance in radians.
pub fn great_circle_distance(a: SphericalPoint, b: SphericalPoint) -> f64 {
    let va = sph_to_vec(a);
    let vb = sph_to_vec(b);
    let c = va.cross(&vb);
    (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt().atan2(va.dot(&vb))
}

/// Tangent plane at a fixed center; amortizes the center's trigonometry
/// across all samples of one kernel.
#[derive(Debug, Clone, Copy)]
pub struct TangentPlane {
    center: SphericalPoint,
    sin_lat: f64,
    cos_lat: f64,
}

impl TangentPlane {
    pub fn new(center: SphericalPoint) -> Self {
        let (sin_lat, cos_lat) = center.lat.sin_cos();
        TangentPlane {
            center,
            sin_lat,
            cos_lat,
        }
    }

    /// Inverse gnomonic projection of a tangent-plane offset.
    ///
    /// With `rho = |(u, v)|` and `c = atan(rho)`, the common factor
    /// `sin c / rho = cos c = 1 / sqrt(1 + rho^2)` cancels inside both `atan2`
    /// calls, so no inverse tangent is needed.
    #[inline]
    pub fn inverse(&self, u: f64, v: f64) -> (f64, f64) {
        if u == 0.0 && v == 0.0 {
            return (self.center.lat, self.center.lon);
        }
        let east = u;
        let toward = self.cos_lat - v * self.sin_lat;
        let up = self.sin_lat + v * self.cos_lat;
        let lat = up.atan2(toward.hypot(east));
        let lon = wrap_lon(self.center.lon + east.atan2(toward));
        (lat, lon)
    }
}

pub fn gnomonic_inverse(center: SphericalPoint, off: TangentOffset) -> SphericalPoint {
    let (lat, lon) = TangentPlane::new(center).inverse(off.u, off.v);
    SphericalPoint { lat, lon }
}

/// `k` points of a Fibonacci (golden-angle) lattice, approximately area-uniform.
pub fn fibonacci_lattice(k: usize) -> impl Iterator<Item = SphericalPoint> {
    let golden_angle = PI * (3.0 - 5f64.sqrt());
    (0..k).map(move |i| {
        let z = 1.0 - (2 * i + 1) as f64 / k as f64;
        let lon = (i as f64 * golden_angle).rem_euclid(TAU) - PI;
        SphericalPoint::new(z.asin(), lon)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn norm_to_sph_examples() {
        let s = norm_to_sph(NormPoint::new(0.5, 0.5).unwrap()).unwrap();
        assert_eq!((s.lat, s.lon), (0.0, 0.0));
        let s = norm_to_sph(NormPoint::new(0.0, 0.5).unwrap()).unwrap();
        assert_eq!((s.lat, s.lon), (FRAC_PI_2, 0.0));
        let s = norm_to_sph(NormPoint::new(0.25, 0.75).unwrap()).unwrap();
        assert!(close(s.lat, PI / 4.0, 1e-15) && close(s.lon, FRAC_PI_2, 1e-15));
    }

    #[test]
    fn out_of_range_is_domain_error() {
        assert!(matches!(NormPoint::new(1.2, 0.5), Err(Error::Domain(_))));
        let bad = NormPoint { y: -0.1, x: 0.5 };
        assert!(norm_to_sph(bad).is_err());
    }

    #[test]
    fn sph_to_norm_examples() {
        assert_eq!(sph_to_norm(SphericalPoint::new(0.0, 0.0)), NormPoint { y: 0.5, x: 0.5 });
        assert_eq!(
            sph_to_norm(SphericalPoint::new(-FRAC_PI_2, 0.0)),
            NormPoint { y: 1.0, x: 0.5 }
        );
    }

    #[test]
    fn right_edge_wraps_to_left() {
        let s = norm_to_sph(NormPoint::new(0.5, 1.0).unwrap()).unwrap();
        assert_eq!(s.lon, -PI);
        assert_eq!(wrap_lon(PI), -PI);
        assert_eq!(wrap_lon(-1e-300), -1e-300);
        assert!(close(wrap_lon(3.0 * PI + 0.1), -PI + 0.1, 1e-12));
    }

    #[test]
    fn sph_to_vec_examples() {
        assert_eq!(sph_to_vec(SphericalPoint::new(0.0, 0.0)).0, [1.0, 0.0, 0.0]);
        let v = sph_to_vec(SphericalPoint::new(FRAC_PI_2, 1.234)).0;
        assert!(close(v[0], 0.0, 1e-15) && close(v[1], 0.0, 1e-15) && v[2] == 1.0);
        let v = sph_to_vec(SphericalPoint::new(0.0, FRAC_PI_2)).0;
        assert!(close(v[0], 0.0, 1e-15) && v[1] == 1.0 && v[2] == 0.0);
    }

    #[test]
    fn gnomonic_kernel_center_is_exact() {
        let c = SphericalPoint::new(0.3, -2.0);
        let r = gnomonic_inverse(c, TangentOffset::new(0.0, 0.0).unwrap());
        assert_eq!(r, c);
    }

    #[test]
    fn gnomonic_equator_horizontal_offset() {
        let d = 0.37;
        let r = gnomonic_inverse(SphericalPoint::new(0.0, 0.0), TangentOffset::new(d, 0.0).unwrap());
        assert!(close(r.lat, 0.0, 1e-15));
        assert!(close(r.lon, d.atan(), 1e-15));
    }

    #[test]
    fn tangent_offset_validity() {
        assert!(TangentOffset::new(1.6, 0.0).is_err());
        assert!(TangentOffset::new(0.0, f64::NAN).is_err());
        assert!(TangentOffset::new(1.5, -1.5).is_ok());
    }

    #[test]
    fn fibonacci_lattice_is_balanced() {
        let pts: Vec<_> = fibonacci_lattice(10_000).collect();
        let mean_z: f64 = pts.iter().map(|p| p.lat.sin()).sum::<f64>() / pts.len() as f64;
        let mean_x: f64 = pts.iter().map(|p| sph_to_vec(*p).0[0]).sum::<f64>() / pts.len() as f64;
        assert!(mean_z.abs() < 1e-12);
        assert!(mean_x.abs() < 1e-3);
        assert!(pts.iter().all(|p| (-PI..PI).contains(&p.lon)));
    }

    proptest! {
        #[test]
        fn norm_sph_vec_round_trip(y in 0.001f64..0.999, x in 0.0f64..1.0) {
            let p = NormPoint::new(y, x).unwrap();
            let s = norm_to_sph(p).unwrap();
            let back = sph_to_norm(vec_to_sph(sph_to_vec(s)));
            prop_assert!(close(back.y, y, 1e-12));
            prop_assert!(close(back.x, x, 1e-12));
        }

        #[test]
        fn gnomonic_radial_distance(
            lat in -1.5f64..1.5, lon in -PI..PI,
            u in -1.5f64..1.5, v in -1.5f64..1.5,
        ) {
            let c = SphericalPoint::new(lat, lon);
            let r = gnomonic_inverse(c, TangentOffset::new(u, v).unwrap());
            let d = great_circle_distance(c, r);
            prop_assert!(close(d, u.hypot(v).atan(), 1e-12));
        }
    }
}
