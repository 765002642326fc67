//! Serial kinematic chains: description file, forward kinematics and geometric Jacobians.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transform::Transform;

pub const FRAME_EE: &str = "ee";
pub const FRAME_RCM_PRE: &str = "rcm_pre";
pub const FRAME_RCM_POST: &str = "rcm_post";

const REQUIRED_FRAMES: [&str; 3] = [FRAME_EE, FRAME_RCM_PRE, FRAME_RCM_POST];
const AXIS_NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointKind {
    Revolute,
    Prismatic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    pub kind: JointKind,
    /// Unit axis in the joint frame.
    pub axis: Vector3<f64>,
    /// Fixed transform from the parent joint frame (or base) to this joint frame.
    pub origin: Transform,
    pub lower: f64,
    pub upper: f64,
}

/// A named point rigidly attached to a joint frame (`parent = None` means the base).
#[derive(Debug, Clone, PartialEq)]
pub struct FrameAttachment {
    pub parent: Option<usize>,
    pub offset: Transform,
}

/// Immutable, validated serial chain.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicChain {
    name: String,
    joints: Vec<Joint>,
    frames: BTreeMap<String, FrameAttachment>,
}

// On-disk schema.

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainDocument {
    pub name: String,
    pub joints: Vec<JointDocument>,
    pub frames: BTreeMap<String, FrameDocument>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointDocument {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(rename = "type")]
    pub kind: JointKind,
    pub axis: [f64; 3],
    #[serde(default)]
    pub origin_xyz: [f64; 3],
    #[serde(default)]
    pub origin_rpy: [f64; 3],
    pub limit_lower: f64,
    pub limit_upper: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameDocument {
    /// Index of the joint the frame is attached to; `null` for the base.
    pub parent: Option<usize>,
    #[serde(default)]
    pub xyz: [f64; 3],
    #[serde(default)]
    pub rpy: [f64; 3],
}

/// Parses and validates a chain description (JSON text).
pub fn load_chain(document: &str) -> Result<KinematicChain> {
    let doc: ChainDocument = serde_json::from_str(document)?;
    KinematicChain::from_document(doc)
}

pub fn load_chain_file(path: impl AsRef<Path>) -> Result<KinematicChain> {
    let text = std::fs::read_to_string(path.as_ref())?;
    load_chain(&text)
}

fn depth(parent: Option<usize>) -> i64 {
    parent.map_or(-1, |p| p as i64)
}

impl KinematicChain {
    pub fn from_document(doc: ChainDocument) -> Result<Self> {
        let mut joints = Vec::with_capacity(doc.joints.len());
        for (i, j) in doc.joints.into_iter().enumerate() {
            let axis = Vector3::from(j.axis);
            if !axis.iter().all(|v| v.is_finite()) || (axis.norm() - 1.0).abs() > AXIS_NORM_TOL {
                return Err(Error::Validation(format!(
                    "joint {i}: axis {:?} is not a unit vector",
                    j.axis
                )));
            }
            if !(j.limit_lower.is_finite() && j.limit_upper.is_finite()) {
                return Err(Error::Validation(format!("joint {i}: limits must be finite")));
            }
            if j.limit_lower >= j.limit_upper {
                return Err(Error::Validation(format!(
                    "joint {i}: lower limit {} is not below upper limit {}",
                    j.limit_lower, j.limit_upper
                )));
            }
            joints.push(Joint {
                name: j.name.unwrap_or_else(|| format!("joint_{}", i + 1)),
                kind: j.kind,
                axis,
                origin: Transform::from_xyz_rpy(j.origin_xyz, j.origin_rpy),
                lower: j.limit_lower,
                upper: j.limit_upper,
            });
        }

        let mut frames = BTreeMap::new();
        for (name, f) in doc.frames {
            if let Some(p) = f.parent {
                if p >= joints.len() {
                    return Err(Error::Validation(format!(
                        "frame `{name}`: parent joint {p} does not exist"
                    )));
                }
            }
            frames.insert(
                name,
                FrameAttachment {
                    parent: f.parent,
                    offset: Transform::from_xyz_rpy(f.xyz, f.rpy),
                },
            );
        }
        for required in REQUIRED_FRAMES {
            if !frames.contains_key(required) {
                return Err(Error::Validation(format!("missing required frame `{required}`")));
            }
        }
        let pre = depth(frames[FRAME_RCM_PRE].parent);
        let post = depth(frames[FRAME_RCM_POST].parent);
        if pre >= post {
            return Err(Error::Validation(
                "frame `rcm_post` must be attached to a joint distal to `rcm_pre`".into(),
            ));
        }

        Ok(Self {
            name: doc.name,
            joints,
            frames,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn frame(&self, name: &str) -> Result<&FrameAttachment> {
        self.frames
            .get(name)
            .ok_or_else(|| Error::UnknownFrame(name.to_string()))
    }

    pub fn frame_names(&self) -> impl Iterator<Item = &str> {
        self.frames.keys().map(String::as_str)
    }

    pub fn lower_limits(&self) -> DVector<f64> {
        DVector::from_iterator(self.dof(), self.joints.iter().map(|j| j.lower))
    }

    pub fn upper_limits(&self) -> DVector<f64> {
        DVector::from_iterator(self.dof(), self.joints.iter().map(|j| j.upper))
    }

    /// True when every joint is within its limits, widened by `tol`.
    pub fn within_limits(&self, q: &DVector<f64>, tol: f64) -> bool {
        q.len() == self.dof()
            && self
                .joints
                .iter()
                .zip(q.iter())
                .all(|(j, &v)| v >= j.lower - tol && v <= j.upper + tol)
    }

    fn check_q(&self, q: &DVector<f64>) -> Result<()> {
        if q.len() != self.dof() {
            return Err(Error::DimensionMismatch {
                context: "joint vector",
                expected: self.dof(),
                found: q.len(),
            });
        }
        Ok(())
    }

    /// World poses of every joint frame at `q`, computed once and reused for
    /// any number of frame queries.
    pub fn kinematics(&self, q: &DVector<f64>) -> Result<ChainKinematics<'_>> {
        self.check_q(q)?;
        let mut poses = Vec::with_capacity(self.dof());
        let mut current = Transform::identity();
        for (joint, &qi) in self.joints.iter().zip(q.iter()) {
            current = current * joint.origin;
            let motion = match joint.kind {
                JointKind::Revolute => Transform::new(
                    nalgebra::Rotation3::from_axis_angle(
                        &nalgebra::Unit::new_unchecked(joint.axis),
                        qi,
                    )
                    .into_inner(),
                    Vector3::zeros(),
                ),
                JointKind::Prismatic => Transform::from_translation(joint.axis * qi),
            };
            current = current * motion;
            poses.push(current);
        }
        Ok(ChainKinematics { chain: self, poses })
    }

    pub fn forward_kinematics(&self, q: &DVector<f64>, frame: &str) -> Result<Transform> {
        self.kinematics(q)?.frame_pose(frame)
    }

    pub fn geometric_jacobian(&self, q: &DVector<f64>, frame: &str) -> Result<Jacobian> {
        self.kinematics(q)?.jacobian(frame)
    }
}

/// Joint-frame poses for one configuration.
#[derive(Debug, Clone)]
pub struct ChainKinematics<'a> {
    chain: &'a KinematicChain,
    poses: Vec<Transform>,
}

impl ChainKinematics<'_> {
    pub fn joint_pose(&self, index: usize) -> &Transform {
        &self.poses[index]
    }

    pub fn frame_pose(&self, frame: &str) -> Result<Transform> {
        let att = self.chain.frame(frame)?;
        Ok(match att.parent {
            Some(p) => self.poses[p] * att.offset,
            None => att.offset,
        })
    }

    pub fn frame_position(&self, frame: &str) -> Result<Vector3<f64>> {
        Ok(self.frame_pose(frame)?.translation)
    }

    /// 6 x n geometric Jacobian of the named frame. Linear rows give the
    /// velocity of the frame origin, angular rows the angular velocity, both in
    /// base coordinates. Joints distal to the frame contribute zero columns.
    pub fn jacobian(&self, frame: &str) -> Result<Jacobian> {
        let att = self.chain.frame(frame)?;
        let n = self.chain.dof();
        let point = self.frame_position(frame)?;
        let mut matrix = DMatrix::zeros(6, n);
        let last = match att.parent {
            Some(p) => p + 1,
            None => 0,
        };
        for i in 0..last {
            let pose = &self.poses[i];
            let axis = pose.rotation * self.chain.joints[i].axis;
            match self.chain.joints[i].kind {
                JointKind::Revolute => {
                    let lin = axis.cross(&(point - pose.translation));
                    matrix.fixed_view_mut::<3, 1>(0, i).copy_from(&lin);
                    matrix.fixed_view_mut::<3, 1>(3, i).copy_from(&axis);
                }
                JointKind::Prismatic => {
                    matrix.fixed_view_mut::<3, 1>(0, i).copy_from(&axis);
                }
            }
        }
        Ok(Jacobian {
            matrix,
            frame: frame.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    /// 6 x n, rows ordered (linear, angular).
    pub matrix: DMatrix<f64>,
    pub frame: String,
}

impl Jacobian {
    pub fn position_rows(&self) -> DMatrix<f64> {
        self.matrix.rows(0, 3).into_owned()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }
}
