//! Array geometry, look directions and plane-wave steering.
//!
//! Conventions used throughout the crate:
//!
//! * Directions are `{azimuth θ, zenith φ}` with unit vector
//!   `d = (sinφ cosθ, sinφ sinθ, cosφ)`; `φ = π/2` is the plane of a planar
//!   array lying in `z = 0`.
//! * `d` points from the array toward the source. A microphone displaced
//!   toward the source receives the wavefront early, so its delay relative
//!   to the reference point is negative: `τ_m = −(r_m · d) / c`.
//! * The reference point is the centroid of the microphone positions.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;

/// Leg lengths (metres) of the bundled right-angled triangular array.
pub const DEFAULT_TRIANGLE_LEGS: (f64, f64) = (0.05, 0.045);

fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// A direction on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolidAngle {
    azimuth: f64,
    zenith: f64,
}

impl SolidAngle {
    /// Builds a direction; azimuth is wrapped into `[0, 2π)`, zenith outside
    /// `[0, π]` is rejected.
    pub fn new(azimuth: f64, zenith: f64) -> Result<Self> {
        if !azimuth.is_finite() || !zenith.is_finite() {
            return Err(Error::InvalidArgument("angles must be finite".into()));
        }
        if !(0.0..=PI).contains(&zenith) {
            return Err(Error::InvalidArgument(format!("zenith {zenith} rad outside [0, pi]")));
        }
        Ok(Self {
            azimuth: wrap_azimuth(azimuth),
            zenith,
        })
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    pub fn zenith(&self) -> f64 {
        self.zenith
    }

    pub fn unit_vector(&self) -> Vec3 {
        let (sp, cp) = self.zenith.sin_cos();
        let (st, ct) = self.azimuth.sin_cos();
        [sp * ct, sp * st, cp]
    }

    /// Direction of a (not necessarily normalised) non-zero vector.
    pub fn from_vector(v: Vec3) -> Result<Self> {
        let norm = dot(&v, &v).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidArgument("zero or non-finite direction".into()));
        }
        let zenith = (v[2] / norm).clamp(-1.0, 1.0).acos();
        let azimuth = v[1].atan2(v[0]);
        Self::new(azimuth, zenith)
    }

    /// The same zenith with the azimuth shifted by `offset` radians.
    pub fn offset_azimuth(&self, offset: f64) -> Self {
        Self {
            azimuth: wrap_azimuth(self.azimuth + offset),
            zenith: self.zenith,
        }
    }

    /// Great-circle angle to another direction.
    pub fn angle_to(&self, other: &SolidAngle) -> f64 {
        dot(&self.unit_vector(), &other.unit_vector()).clamp(-1.0, 1.0).acos()
    }
}

/// Wraps an azimuth into `[0, 2π)`.
pub fn wrap_azimuth(azimuth: f64) -> f64 {
    let a = azimuth.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if a >= TAU {
        0.0
    } else {
        a
    }
}

/// Signed smallest difference `a − b` between two azimuths, in `(−π, π]`.
pub fn azimuth_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

/// Microphone positions around a centroid reference point.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    positions: Vec<Vec3>,
    speed_of_sound: f64,
}

impl ArrayGeometry {
    /// Builds a geometry, re-centring the positions on their centroid.
    pub fn new(positions: Vec<Vec3>, speed_of_sound: f64) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidArgument("array needs at least one microphone".into()));
        }
        if !(speed_of_sound > 0.0) || !speed_of_sound.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "speed of sound must be positive, got {speed_of_sound}"
            )));
        }
        if positions.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("microphone positions must be finite".into()));
        }
        let n = positions.len() as f64;
        let mut centroid = [0.0; 3];
        for p in &positions {
            for (c, x) in centroid.iter_mut().zip(p) {
                *c += x / n;
            }
        }
        let positions = positions
            .into_iter()
            .map(|p| [p[0] - centroid[0], p[1] - centroid[1], p[2] - centroid[2]])
            .collect();
        Ok(Self {
            positions,
            speed_of_sound,
        })
    }

    /// The bundled 3-channel right-angled triangle in the `z = 0` plane.
    pub fn default_triangle() -> Self {
        let (a, b) = DEFAULT_TRIANGLE_LEGS;
        Self::new(
            vec![[0.0, 0.0, 0.0], [a, 0.0, 0.0], [0.0, b, 0.0]],
            DEFAULT_SPEED_OF_SOUND,
        )
        .expect("default geometry is valid")
    }

    pub fn channels(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn speed_of_sound(&self) -> f64 {
        self.speed_of_sound
    }

    /// Largest distance between any two microphones.
    pub fn aperture(&self) -> f64 {
        let mut best: f64 = 0.0;
        for (i, a) in self.positions.iter().enumerate() {
            for b in &self.positions[i + 1..] {
                let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
                best = best.max(dot(&d, &d).sqrt());
            }
        }
        best
    }

    /// Per-microphone plane-wave delays relative to the reference point.
    pub fn propagation_delays(&self, direction: &SolidAngle) -> Vec<f64> {
        self.delays_for_vector(&direction.unit_vector())
    }

    pub(crate) fn delays_for_vector(&self, d: &Vec3) -> Vec<f64> {
        self.positions
            .iter()
            .map(|r| -dot(r, d) / self.speed_of_sound)
            .collect()
    }

    /// Steering vector `exp(−jωτ_m)` at angular frequency `omega` (rad/s).
    pub fn steering_vector(&self, direction: &SolidAngle, omega: f64) -> SteeringVector {
        SteeringVector {
            omega,
            entries: self.steering_entries(&direction.unit_vector(), omega),
        }
    }

    pub(crate) fn steering_entries(&self, d: &Vec3, omega: f64) -> Vec<Complex64> {
        self.positions
            .iter()
            .map(|r| Complex64::cis(omega * dot(r, d) / self.speed_of_sound))
            .collect()
    }

    /// Applies a 3×3 rotation (row-major) to every microphone position.
    pub fn rotated(&self, rotation: &[[f64; 3]; 3]) -> Self {
        let positions = self.positions.iter().map(|p| rotate(rotation, p)).collect();
        Self::new(positions, self.speed_of_sound).expect("rotation preserves validity")
    }
}

pub fn rotate(rotation: &[[f64; 3]; 3], v: &Vec3) -> Vec3 {
    [dot(&rotation[0], v), dot(&rotation[1], v), dot(&rotation[2], v)]
}

/// Plane-wave phase shifts across the array for one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector {
    omega: f64,
    entries: Vec<Complex64>,
}

impl SteeringVector {
    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
