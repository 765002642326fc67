//! Rigid transforms, twists and the SE(3) exponential / logarithm.
//!
//! Twists are ordered `(linear, angular)` everywhere in this crate.

use std::ops::Mul;

use nalgebra::{Matrix3, Rotation3, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this rotation angle the log/exp maps use their Taylor expansions.
pub const SMALL_ANGLE: f64 = 1e-8;

/// Largest rotation angle accepted by [`se3_log`].
pub const MAX_LOG_ANGLE: f64 = std::f64::consts::PI - 1e-6;

/// Homogeneous transform stored as a rotation matrix and a translation in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Transform {
    fn default() -> Self {
        Self::identity()
    }
}

impl Transform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Fixed-axis roll/pitch/yaw: `R = Rz(yaw) * Ry(pitch) * Rx(roll)`.
    pub fn from_xyz_rpy(xyz: [f64; 3], rpy: [f64; 3]) -> Self {
        let rotation = Rotation3::from_euler_angles(rpy[0], rpy[1], rpy[2]).into_inner();
        Self {
            rotation,
            translation: Vector3::from(xyz),
        }
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Checks `R^T R = I` and `det R = 1` to `tol`.
    pub fn is_valid(&self, tol: f64) -> bool {
        let orth = (self.rotation.transpose() * self.rotation - Matrix3::identity()).amax();
        let det = self.rotation.determinant();
        self.translation.iter().all(|v| v.is_finite()) && orth <= tol && (det - 1.0).abs() <= tol
    }
}

impl Mul for Transform {
    type Output = Transform;

    fn mul(self, rhs: Transform) -> Transform {
        Transform {
            rotation: self.rotation * rhs.rotation,
            translation: self.rotation * rhs.translation + self.translation,
        }
    }
}

impl Mul<&Transform> for &Transform {
    type Output = Transform;

    fn mul(self, rhs: &Transform) -> Transform {
        *self * *rhs
    }
}

/// Spatial velocity or pose-error coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist {
    pub linear: Vector3<f64>,
    pub angular: Vector3<f64>,
}

impl Twist {
    pub fn new(linear: Vector3<f64>, angular: Vector3<f64>) -> Self {
        Self { linear, angular }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.linear.x,
            self.linear.y,
            self.linear.z,
            self.angular.x,
            self.angular.y,
            self.angular.z,
        )
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self {
            linear: Vector3::new(v[0], v[1], v[2]),
            angular: Vector3::new(v[3], v[4], v[5]),
        }
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }

    /// Re-expresses both parts with a rotation (e.g. body to base coordinates).
    pub fn rotated(&self, rotation: &Matrix3<f64>) -> Self {
        Self {
            linear: rotation * self.linear,
            angular: rotation * self.angular,
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            linear: self.linear * k,
            angular: self.angular * k,
        }
    }
}

pub(crate) fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

fn vee_antisymmetric(r: &Matrix3<f64>) -> Vector3<f64> {
    // vee((R - R^T) / 2)
    Vector3::new(
        0.5 * (r[(2, 1)] - r[(1, 2)]),
        0.5 * (r[(0, 2)] - r[(2, 0)]),
        0.5 * (r[(1, 0)] - r[(0, 1)]),
    )
}

/// Rotation angle in `[0, pi]`, computed with `atan2` for accuracy at all angles.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let s = vee_antisymmetric(r).norm();
    let c = 0.5 * (r.trace() - 1.0);
    s.atan2(c)
}

/// SE(3) logarithm. Returns the body twist `xi` with `se3_exp(xi) == pose`.
pub fn se3_log(pose: &Transform) -> Result<Twist> {
    let r = &pose.rotation;
    let s_vec = vee_antisymmetric(r);
    let s = s_vec.norm();
    let c = 0.5 * (r.trace() - 1.0);
    let theta = s.atan2(c);
    if theta > MAX_LOG_ANGLE {
        return Err(Error::LogBranch { angle: theta });
    }

    let (omega, v_inv) = if theta < SMALL_ANGLE {
        let omega = s_vec;
        let w = hat(&omega);
        (omega, Matrix3::identity() - 0.5 * w)
    } else {
        let omega = s_vec * (theta / s);
        let w = hat(&omega);
        let half = 0.5 * theta;
        // 1/theta^2 * (1 - (theta/2) cot(theta/2))
        let coeff = (1.0 - half * half.cos() / half.sin()) / (theta * theta);
        (omega, Matrix3::identity() - 0.5 * w + coeff * w * w)
    };

    Ok(Twist {
        linear: v_inv * pose.translation,
        angular: omega,
    })
}

/// SE(3) exponential of a body twist.
pub fn se3_exp(xi: &Twist) -> Transform {
    let omega = xi.angular;
    let theta = omega.norm();
    let w = hat(&omega);
    let w2 = w * w;
    let (a, b, c) = if theta < SMALL_ANGLE {
        (1.0, 0.5, 1.0 / 6.0)
    } else {
        let t2 = theta * theta;
        (
            theta.sin() / theta,
            (1.0 - theta.cos()) / t2,
            (theta - theta.sin()) / (t2 * theta),
        )
    };
    let rotation = Matrix3::identity() + a * w + b * w2;
    let v = Matrix3::identity() + b * w + c * w2;
    Transform {
        rotation,
        translation: v * xi.linear,
    }
}
