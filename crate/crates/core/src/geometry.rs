//! Spherical coordinates, head-pose conversion and great-circle distance.
//!
//! Three coordinate types are used throughout the crate:
//!
//! - [`EulerAngles`]: head pose as reported by an HMD runtime.
//! - [`SphericalCoord`]: viewport center as azimuth `phi` in `[0, 2π)` and
//!   inclination `theta` in `[0, π]`, measured from the zenith.
//! - [`GeoCoord`]: the same point as latitude/longitude, used for distances
//!   and for the equirectangular grid.
//!
//! The head frame is right-handed with `+Y` up, `+Z` forward and `+X` to the
//! user's left. Looking straight ahead is `(phi = 0, theta = π/2)`, positive
//! yaw turns left (increasing azimuth) and positive pitch looks up.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("non-finite {field}: {value}")]
    NonFinite { field: &'static str, value: f64 },
    #[error("{field} = {value} outside [{min}, {max}]")]
    OutOfRange {
        field: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("grid cell ({x}, {y}) outside {width}x{height} grid")]
    CellOutOfRange {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },
}

fn finite(field: &'static str, value: f64) -> Result<f64, GeometryError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(GeometryError::NonFinite { field, value })
    }
}

/// Wraps an angle into `[0, 2π)`.
#[inline]
pub fn wrap_two_pi(angle: f64) -> f64 {
    let w = angle.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Wraps an angle into `[-π, π)`.
#[inline]
pub fn wrap_pi(angle: f64) -> f64 {
    let w = wrap_two_pi(angle + PI) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

/// Minimal signed difference `a - b` of two angles, in `(-π, π]`.
#[inline]
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = wrap_pi(a - b);
    if d == -PI {
        PI
    } else {
        d
    }
}

/// Head pose in radians. Yaw and roll are wrapped into `[-π, π)`, pitch must
/// lie in `[-π/2, π/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerAngles {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl EulerAngles {
    pub fn new(yaw: f64, pitch: f64, roll: f64) -> Result<Self, GeometryError> {
        let yaw = finite("yaw", yaw)?;
        let pitch = finite("pitch", pitch)?;
        let roll = finite("roll", roll)?;
        if !(-FRAC_PI_2..=FRAC_PI_2).contains(&pitch) {
            return Err(GeometryError::OutOfRange {
                field: "pitch",
                value: pitch,
                min: -FRAC_PI_2,
                max: FRAC_PI_2,
            });
        }
        Ok(Self {
            yaw: wrap_pi(yaw),
            pitch,
            roll: wrap_pi(roll),
        })
    }
}

/// Viewport center on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalCoord {
    phi: f64,
    theta: f64,
}

impl SphericalCoord {
    /// Builds a coordinate, wrapping `phi` and clamping `theta`. At the poles
    /// the azimuth is canonicalized to 0.
    pub fn new(phi: f64, theta: f64) -> Result<Self, GeometryError> {
        let phi = finite("phi", phi)?;
        let theta = finite("theta", theta)?;
        Ok(Self::from_finite(phi, theta))
    }

    fn from_finite(phi: f64, theta: f64) -> Self {
        let theta = theta.clamp(0.0, PI);
        let phi = if theta == 0.0 || theta == PI {
            0.0
        } else {
            wrap_two_pi(phi)
        };
        Self { phi, theta }
    }

    /// Builds a coordinate from values already known to be finite.
    ///
    /// # Panics
    /// Panics on non-finite input.
    pub fn wrapped(phi: f64, theta: f64) -> Self {
        assert!(
            phi.is_finite() && theta.is_finite(),
            "non-finite spherical coordinate ({phi}, {theta})"
        );
        Self::from_finite(phi, theta)
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Unit vector with `z` toward the zenith and `x` toward `phi = 0`.
    pub fn to_unit_vector(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }

    /// Inverse of [`to_unit_vector`](Self::to_unit_vector). The vector need
    /// not be normalized but must be non-zero.
    pub fn from_vector(v: [f64; 3]) -> Self {
        let rho = v[0].hypot(v[1]);
        let theta = rho.atan2(v[2]);
        let phi = if rho == 0.0 { 0.0 } else { v[1].atan2(v[0]) };
        Self::from_finite(phi, theta)
    }

    /// `(sin φ, cos φ, sin θ, cos θ)`, the circle embedding the predictor
    /// regresses.
    pub fn encode(&self) -> [f64; 4] {
        let (sp, cp) = self.phi.sin_cos();
        let (st, ct) = self.theta.sin_cos();
        [sp, cp, st, ct]
    }

    /// Decodes an arbitrary 4-vector produced by a regressor into a valid
    /// coordinate. Non-finite components fall back to the forward direction.
    pub fn decode(enc: [f64; 4]) -> Self {
        if enc.iter().any(|v| !v.is_finite()) {
            return Self::from_finite(0.0, FRAC_PI_2);
        }
        let phi = if enc[0] == 0.0 && enc[1] == 0.0 {
            0.0
        } else {
            enc[0].atan2(enc[1])
        };
        // sin θ ≥ 0 on [0, π]; a negative regressed value carries no extra
        // information, so fold it.
        let theta = if enc[2] == 0.0 && enc[3] == 0.0 {
            FRAC_PI_2
        } else {
            enc[2].abs().atan2(enc[3])
        };
        Self::from_finite(phi, theta)
    }
}

/// Latitude/longitude form of a sphere point, in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoCoord {
    lat: f64,
    lon: f64,
}

impl GeoCoord {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeometryError> {
        let lat = finite("latitude", lat)?;
        let lon = finite("longitude", lon)?;
        if !(-FRAC_PI_2..=FRAC_PI_2).contains(&lat) {
            return Err(GeometryError::OutOfRange {
                field: "latitude",
                value: lat,
                min: -FRAC_PI_2,
                max: FRAC_PI_2,
            });
        }
        Ok(Self {
            lat,
            lon: wrap_pi(lon),
        })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }
}

/// View direction of a head pose. Roll spins the view around the gaze axis
/// and therefore never changes the result.
pub fn euler_to_spherical(e: &EulerAngles) -> Result<SphericalCoord, GeometryError> {
    finite("yaw", e.yaw)?;
    finite("pitch", e.pitch)?;
    finite("roll", e.roll)?;
    // Forward (0,0,1) pitched up about X, then yawed about Y.
    let (sp, cp) = e.pitch.sin_cos();
    let (sy, cy) = e.yaw.sin_cos();
    let dir = [cp * sy, sp, cp * cy];
    let horiz = dir[0].hypot(dir[2]);
    // cos(pi/2) is not exactly zero in floating point
    if horiz < 1e-15 {
        let theta = if dir[1] > 0.0 { 0.0 } else { PI };
        return Ok(SphericalCoord::from_finite(0.0, theta));
    }
    Ok(SphericalCoord::from_finite(dir[0].atan2(dir[2]), horiz.atan2(dir[1])))
}

pub fn spherical_to_geo(s: &SphericalCoord) -> GeoCoord {
    GeoCoord {
        lat: FRAC_PI_2 - s.theta,
        lon: wrap_pi(s.phi),
    }
}

pub fn geo_to_spherical(g: &GeoCoord) -> SphericalCoord {
    SphericalCoord::from_finite(g.lon, FRAC_PI_2 - g.lat)
}

/// Great-circle distance between two points of the unit sphere, in `[0, π]`.
///
/// This is the spherical law of cosines
/// `acos(sin αa sin αb + cos αa cos αb cos Δβ)` (α latitude, β longitude),
/// evaluated in its `atan2` form so that nearby and identical points keep
/// full precision.
pub fn orthodromic_distance(a: &GeoCoord, b: &GeoCoord) -> f64 {
    let (sa, ca) = a.lat.sin_cos();
    let (sb, cb) = b.lat.sin_cos();
    let (sd, cd) = (b.lon - a.lon).sin_cos();
    let cross_e = cb * sd;
    let cross_n = ca * sb - sa * cb * cd;
    let dot = sa * sb + ca * cb * cd;
    cross_e.hypot(cross_n).atan2(dot).clamp(0.0, PI)
}

/// Distance between two spherical coordinates; shorthand for converting both
/// to [`GeoCoord`] first.
pub fn spherical_distance(a: &SphericalCoord, b: &SphericalCoord) -> f64 {
    orthodromic_distance(&spherical_to_geo(a), &spherical_to_geo(b))
}

/// Great-circle distance between two unit vectors.
#[inline]
pub(crate) fn unit_vector_distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let cx = a[1] * b[2] - a[2] * b[1];
    let cy = a[2] * b[0] - a[0] * b[2];
    let cz = a[0] * b[1] - a[1] * b[0];
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    (cx * cx + cy * cy + cz * cz).sqrt().atan2(dot)
}

/// Center of equirectangular cell `(x, y)` on a `width x height` grid. Row 0 is
/// the northern edge, column 0 starts at longitude `-π`.
pub fn grid_cell_to_geo(
    x: usize,
    y: usize,
    width: usize,
    height: usize,
) -> Result<GeoCoord, GeometryError> {
    if x >= width || y >= height {
        return Err(GeometryError::CellOutOfRange {
            x,
            y,
            width,
            height,
        });
    }
    let lon = TAU * (x as f64 + 0.5) / width as f64 - PI;
    let lat = FRAC_PI_2 - PI * (y as f64 + 0.5) / height as f64;
    Ok(GeoCoord { lat, lon })
}

/// Spherical linear interpolation between two directions. Returns `None` when
/// the endpoints are (numerically) antipodal and the great circle is undefined.
pub fn slerp(a: &SphericalCoord, b: &SphericalCoord, frac: f64) -> Option<SphericalCoord> {
    let va = a.to_unit_vector();
    let vb = b.to_unit_vector();
    slerp_vectors(&va, &vb, frac).map(SphericalCoord::from_vector)
}

pub(crate) fn slerp_vectors(a: &[f64; 3], b: &[f64; 3], frac: f64) -> Option<[f64; 3]> {
    let omega = unit_vector_distance(a, b);
    if omega < 1e-12 {
        return Some(*a);
    }
    if PI - omega < 1e-9 {
        return None;
    }
    let so = omega.sin();
    let wa = ((1.0 - frac) * omega).sin() / so;
    let wb = (frac * omega).sin() / so;
    let v = [
        wa * a[0] + wb * b[0],
        wa * a[1] + wb * b[1],
        wa * a[2] + wb * b[2],
    ];
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    Some([v[0] / norm, v[1] / norm, v[2] / norm])
}
