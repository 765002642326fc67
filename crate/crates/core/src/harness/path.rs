use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transform::Transform;

/// Helix pitch per unit of the path parameter (m).
pub const HELIX_PITCH: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathKind {
    Helix,
    Lissajous,
}

/// Reference path: `origin + offset(t)` with a fixed orientation, sampled at
/// `n_steps` evenly spaced parameters covering `[t_start, t_end]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub kind: PathKind,
    pub origin: [f64; 3],
    /// `[A]` for a helix, `[A, B, C]` for a Lissajous curve (m).
    pub amplitudes: Vec<f64>,
    /// Row-major rotation matrix.
    pub orientation: [[f64; 3]; 3],
    pub n_steps: usize,
    pub t_start: f64,
    pub t_end: f64,
}

/// Tool-tip-down orientation used by both reference paths.
pub fn reference_orientation() -> [[f64; 3]; 3] {
    [[-1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, -1.0, 0.0]]
}

impl PathSpec {
    pub fn helix(origin: [f64; 3], amplitude: f64, n_steps: usize) -> Self {
        Self {
            kind: PathKind::Helix,
            origin,
            amplitudes: vec![amplitude],
            orientation: reference_orientation(),
            n_steps,
            t_start: 0.0,
            t_end: 2.0,
        }
    }

    pub fn lissajous(origin: [f64; 3], amplitudes: [f64; 3], n_steps: usize) -> Self {
        Self {
            kind: PathKind::Lissajous,
            origin,
            amplitudes: amplitudes.to_vec(),
            orientation: reference_orientation(),
            n_steps,
            t_start: 0.0,
            t_end: 2.0 * PI,
        }
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        let r = &self.orientation;
        Matrix3::new(
            r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
        )
    }

    pub fn origin(&self) -> Vector3<f64> {
        Vector3::from(self.origin)
    }

    pub fn validate(&self) -> Result<()> {
        let expected = match self.kind {
            PathKind::Helix => 1,
            PathKind::Lissajous => 3,
        };
        if self.amplitudes.len() != expected {
            return Err(Error::Validation(format!(
                "path.amplitudes: expected {expected} values, found {}",
                self.amplitudes.len()
            )));
        }
        if !self.amplitudes.iter().all(|a| *a > 0.0 && a.is_finite()) {
            return Err(Error::Validation("path.amplitudes must be positive".into()));
        }
        if self.n_steps < 2 {
            return Err(Error::Validation("path.n_steps must be at least 2".into()));
        }
        if !(self.t_start.is_finite() && self.t_end.is_finite()) {
            return Err(Error::Validation("path parameter range must be finite".into()));
        }
        if !Transform::new(self.rotation(), self.origin()).is_valid(1e-10) {
            return Err(Error::Validation("path.orientation is not a rotation matrix".into()));
        }
        Ok(())
    }

    /// Path parameter of step `k`.
    pub fn parameter(&self, k: usize) -> f64 {
        let span = self.t_end - self.t_start;
        self.t_start + span * k as f64 / (self.n_steps - 1) as f64
    }

    pub fn point(&self, t: f64) -> Transform {
        match self.kind {
            PathKind::Helix => helix_point(t, self),
            PathKind::Lissajous => lissajous_point(t, self),
        }
    }
}

/// `origin + (A cos 2 pi t, A sin 2 pi t, 0.01 t)`
pub fn helix_point(t: f64, spec: &PathSpec) -> Transform {
    let a = spec.amplitudes[0];
    let w = 2.0 * PI * t;
    let offset = Vector3::new(a * w.cos(), a * w.sin(), HELIX_PITCH * t);
    Transform::new(spec.rotation(), spec.origin() + offset)
}

/// `origin + (A sin t, B sin(2t + pi), C (cos 2t - 1))`
pub fn lissajous_point(t: f64, spec: &PathSpec) -> Transform {
    let (a, b, c) = (spec.amplitudes[0], spec.amplitudes[1], spec.amplitudes[2]);
    let offset = Vector3::new(a * t.sin(), b * (2.0 * t + PI).sin(), c * ((2.0 * t).cos() - 1.0));
    Transform::new(spec.rotation(), spec.origin() + offset)
}
