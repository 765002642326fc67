//! Task and constraint builders: end-effector pose, remote center of motion,
//! manipulability ascent and joint limits.
//!
//! Every equality task is a pair `(A, b)` asking for `A * qdot = b`, and every
//! inequality constraint a pair `(C, d)` asking for `C * qdot - d <= w`.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::chain::{ChainKinematics, KinematicChain, FRAME_EE, FRAME_RCM_POST, FRAME_RCM_PRE};
use crate::error::{Error, Result};
use crate::transform::{se3_log, Transform, Twist};

/// Default central-difference step for the manipulability gradient.
pub const GRADIENT_STEP: f64 = 1e-6;

/// Shortest shaft (pre to post distance) accepted by the RCM builders.
pub const MIN_SHAFT_LENGTH: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct EqualityTask {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub weight: f64,
}

impl EqualityTask {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, weight: f64) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::DimensionMismatch {
                context: "task residual",
                expected: a.nrows(),
                found: b.len(),
            });
        }
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::Validation(format!("task weight must be positive, got {weight}")));
        }
        if !a.iter().chain(b.iter()).all(|v| v.is_finite()) {
            return Err(Error::Validation("task contains non-finite entries".into()));
        }
        Ok(Self { a, b, weight })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// `|| A qdot - b ||`
    pub fn residual_norm(&self, qdot: &DVector<f64>) -> f64 {
        (&self.a * qdot - &self.b).norm()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InequalityConstraint {
    pub c: DMatrix<f64>,
    pub d: DVector<f64>,
    pub slack_weight: f64,
}

impl InequalityConstraint {
    pub fn new(c: DMatrix<f64>, d: DVector<f64>, slack_weight: f64) -> Result<Self> {
        if c.nrows() != d.len() {
            return Err(Error::DimensionMismatch {
                context: "constraint bound",
                expected: c.nrows(),
                found: d.len(),
            });
        }
        if !(slack_weight > 0.0 && slack_weight.is_finite()) {
            return Err(Error::Validation(format!(
                "slack weight must be positive, got {slack_weight}"
            )));
        }
        if !c.iter().chain(d.iter()).all(|v| v.is_finite()) {
            return Err(Error::Validation("constraint contains non-finite entries".into()));
        }
        Ok(Self { c, d, slack_weight })
    }

    pub fn rows(&self) -> usize {
        self.c.nrows()
    }
}

// ---------------------------------------------------------------------------
// End-effector pose

/// Pose error twist: body log of `actual^-1 * desired`, re-expressed in base
/// coordinates so it lines up with the geometric Jacobian rows.
pub fn pose_error(actual: &Transform, desired: &Transform) -> Result<Twist> {
    let body = se3_log(&(actual.inverse() * *desired))?;
    Ok(body.rotated(&actual.rotation))
}

pub(crate) fn ee_pose_task_from(
    kin: &ChainKinematics<'_>,
    desired: &Transform,
    weight: f64,
    residual_gain: f64,
) -> Result<(EqualityTask, Twist)> {
    let actual = kin.frame_pose(FRAME_EE)?;
    let err = pose_error(&actual, desired)?;
    let jac = kin.jacobian(FRAME_EE)?;
    let b = DVector::from_iterator(6, err.to_vector().iter().map(|v| v * residual_gain));
    Ok((EqualityTask::new(jac.matrix, b, weight)?, err))
}

/// End-effector pose task: `A = J_ee`, `b = K_r * e_ee`.
pub fn ee_pose_task(
    chain: &KinematicChain,
    q: &DVector<f64>,
    desired: &Transform,
    weight: f64,
    residual_gain: f64,
) -> Result<EqualityTask> {
    let kin = chain.kinematics(q)?;
    Ok(ee_pose_task_from(&kin, desired, weight, residual_gain)?.0)
}

// ---------------------------------------------------------------------------
// Remote center of motion

/// Geometry of the tool shaft relative to the trocar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RcmState {
    pub p_trocar: Vector3<f64>,
    pub p_pre: Vector3<f64>,
    pub p_post: Vector3<f64>,
    /// Point of the shaft line closest to the trocar.
    pub p_rcm: Vector3<f64>,
    /// `p_trocar - p_rcm`, perpendicular to the shaft.
    pub residual_vec: Vector3<f64>,
}

impl RcmState {
    pub fn from_points(
        p_pre: Vector3<f64>,
        p_post: Vector3<f64>,
        p_trocar: Vector3<f64>,
    ) -> Result<Self> {
        let shaft = p_post - p_pre;
        let length = shaft.norm();
        if length.is_nan() || length <= MIN_SHAFT_LENGTH {
            return Err(Error::DegenerateShaft { length });
        }
        let dir = shaft / length;
        let p_rcm = p_pre + (p_trocar - p_pre).dot(&dir) * dir;
        Ok(Self {
            p_trocar,
            p_pre,
            p_post,
            p_rcm,
            residual_vec: p_trocar - p_rcm,
        })
    }

    pub fn error_norm(&self) -> f64 {
        self.residual_vec.norm()
    }

    pub fn shaft_direction(&self) -> Vector3<f64> {
        (self.p_post - self.p_pre).normalize()
    }
}

pub(crate) fn rcm_state_from(kin: &ChainKinematics<'_>, p_trocar: &Vector3<f64>) -> Result<RcmState> {
    RcmState::from_points(
        kin.frame_position(FRAME_RCM_PRE)?,
        kin.frame_position(FRAME_RCM_POST)?,
        *p_trocar,
    )
}

pub fn rcm_state(chain: &KinematicChain, q: &DVector<f64>, p_trocar: &Vector3<f64>) -> Result<RcmState> {
    rcm_state_from(&chain.kinematics(q)?, p_trocar)
}

/// `d p_rcm / d q` from the position Jacobians of the shaft endpoints.
///
/// With `s = p_post - p_pre`, `u = s / |s|` and `r = p_trocar - p_pre`:
///
/// ```text
/// J_rcm = (I - u u^T) J_pre + (u r^T + (r . u) I) du/dq
/// du/dq = (I - u u^T) (J_post - J_pre) / |s|
/// ```
pub fn rcm_jacobian(state: &RcmState, j_pre: &DMatrix<f64>, j_post: &DMatrix<f64>) -> DMatrix<f64> {
    let s = state.p_post - state.p_pre;
    let len = s.norm();
    let u = s / len;
    let r = state.p_trocar - state.p_pre;
    let proj = Matrix3::identity() - u * u.transpose();
    let du = (proj / len) * (j_post - j_pre);
    let coupling = u * r.transpose() + Matrix3::identity() * r.dot(&u);
    let j = proj * j_pre + coupling * du;
    DMatrix::from_column_slice(3, j.ncols(), j.as_slice())
}

pub(crate) fn rcm_task_from(
    kin: &ChainKinematics<'_>,
    p_trocar: &Vector3<f64>,
    weight: f64,
    residual_gain: f64,
) -> Result<(EqualityTask, RcmState)> {
    let state = rcm_state_from(kin, p_trocar)?;
    let j_pre = kin.jacobian(FRAME_RCM_PRE)?.position_rows();
    let j_post = kin.jacobian(FRAME_RCM_POST)?.position_rows();
    // Only motion perpendicular to the shaft changes the RCM error. The
    // along-shaft row of `J_rcm` is `e^T du/dq`, which vanishes as the error
    // does and would otherwise make the task numerically rank-3.
    let u = state.shaft_direction();
    let perp = Matrix3::identity() - u * u.transpose();
    let a = DMatrix::from_column_slice(3, j_pre.ncols(), (perp * rcm_jacobian(&state, &j_pre, &j_post)).as_slice());
    let b = DVector::from_iterator(3, state.residual_vec.iter().map(|v| v * residual_gain));
    Ok((EqualityTask::new(a, b, weight)?, state))
}

/// RCM task: `A = (I - u u^T) J_rcm` (3 x n), `b = K_r * (p_trocar - p_rcm)`.
pub fn rcm_task(
    chain: &KinematicChain,
    q: &DVector<f64>,
    p_trocar: &Vector3<f64>,
    weight: f64,
    residual_gain: f64,
) -> Result<EqualityTask> {
    Ok(rcm_task_from(&chain.kinematics(q)?, p_trocar, weight, residual_gain)?.0)
}

// ---------------------------------------------------------------------------
// Manipulability

/// Determinants at or below this are treated as a singular configuration.
pub const SINGULAR_DET: f64 = 1e-14;

/// `sqrt(det(J J^T))`, zero when the determinant is at most [`SINGULAR_DET`].
pub fn manipulability(j: &DMatrix<f64>) -> f64 {
    let det = (j * j.transpose()).determinant();
    if det > SINGULAR_DET {
        det.sqrt()
    } else {
        0.0
    }
}

/// Which Jacobian the manipulability index is measured on.
#[derive(Debug, Clone, PartialEq)]
pub struct ManipulabilityMeasure {
    pub frame: String,
    /// Row indices of the 6 x n geometric Jacobian to keep.
    pub rows: Vec<usize>,
}

impl Default for ManipulabilityMeasure {
    fn default() -> Self {
        Self::full(FRAME_EE)
    }
}

impl ManipulabilityMeasure {
    /// Full 6 x n Jacobian.
    pub fn full(frame: &str) -> Self {
        Self {
            frame: frame.to_string(),
            rows: (0..6).collect(),
        }
    }

    /// Selected rows only, e.g. `[0, 1]` for a planar position Jacobian.
    pub fn rows(frame: &str, rows: &[usize]) -> Self {
        Self {
            frame: frame.to_string(),
            rows: rows.to_vec(),
        }
    }

    fn jacobian(&self, kin: &ChainKinematics<'_>) -> Result<DMatrix<f64>> {
        let full = kin.jacobian(&self.frame)?.matrix;
        if self.rows.len() == 6 {
            return Ok(full);
        }
        Ok(full.select_rows(self.rows.iter()))
    }

    pub fn evaluate(&self, chain: &KinematicChain, q: &DVector<f64>) -> Result<f64> {
        Ok(manipulability(&self.jacobian(&chain.kinematics(q)?)?))
    }
}

/// Central-difference gradient of the manipulability index.
pub fn manipulability_gradient(
    chain: &KinematicChain,
    q: &DVector<f64>,
    measure: &ManipulabilityMeasure,
    step: f64,
) -> Result<DVector<f64>> {
    if step.is_nan() || step <= 0.0 {
        return Err(Error::Validation(format!("gradient step must be positive, got {step}")));
    }
    let n = chain.dof();
    if q.len() != n {
        return Err(Error::DimensionMismatch {
            context: "joint vector",
            expected: n,
            found: q.len(),
        });
    }
    let mut grad = DVector::zeros(n);
    let mut probe = q.clone();
    for i in 0..n {
        probe[i] = q[i] + step;
        let plus = measure.evaluate(chain, &probe)?;
        probe[i] = q[i] - step;
        let minus = measure.evaluate(chain, &probe)?;
        probe[i] = q[i];
        grad[i] = (plus - minus) / (2.0 * step);
    }
    Ok(grad)
}

/// Manipulability value and gradient at `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct ManipulabilitySample {
    pub value: f64,
    pub gradient: DVector<f64>,
}

pub fn sample_manipulability(
    chain: &KinematicChain,
    q: &DVector<f64>,
    measure: &ManipulabilityMeasure,
    step: f64,
) -> Result<ManipulabilitySample> {
    Ok(ManipulabilitySample {
        value: measure.evaluate(chain, q)?,
        gradient: manipulability_gradient(chain, q, measure, step)?,
    })
}

/// Linearized ascent task `|| dt * grad(m)^T qdot - m ||^2` from a sample.
pub fn manipulability_task_from(sample: &ManipulabilitySample, dt: f64, weight: f64) -> Result<EqualityTask> {
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::Validation(format!("time step must be positive, got {dt}")));
    }
    let a = DMatrix::from_row_slice(1, sample.gradient.len(), (sample.gradient.clone() * dt).as_slice());
    EqualityTask::new(a, DVector::from_element(1, sample.value), weight)
}

/// Manipulability ascent task: `A = dt * grad(m)^T`, `b = m`.
pub fn manipulability_task(
    chain: &KinematicChain,
    q: &DVector<f64>,
    measure: &ManipulabilityMeasure,
    dt: f64,
    weight: f64,
) -> Result<EqualityTask> {
    let sample = sample_manipulability(chain, q, measure, GRADIENT_STEP)?;
    manipulability_task_from(&sample, dt, weight)
}

// ---------------------------------------------------------------------------
// Joint limits

/// `C = [I; -I]`, `d = [(q+ - q) / dt; -(q- - q) / dt]`.
pub fn joint_limit_constraint(
    chain: &KinematicChain,
    q: &DVector<f64>,
    cycle_dt: f64,
    slack_weight: f64,
) -> Result<InequalityConstraint> {
    let n = chain.dof();
    if q.len() != n {
        return Err(Error::DimensionMismatch {
            context: "joint vector",
            expected: n,
            found: q.len(),
        });
    }
    if cycle_dt.is_nan() || cycle_dt <= 0.0 {
        return Err(Error::Validation(format!("cycle time must be positive, got {cycle_dt}")));
    }
    let mut c = DMatrix::zeros(2 * n, n);
    let mut d = DVector::zeros(2 * n);
    for (i, joint) in chain.joints().iter().enumerate() {
        c[(i, i)] = 1.0;
        c[(n + i, i)] = -1.0;
        d[i] = (joint.upper - q[i]) / cycle_dt;
        d[n + i] = -(joint.lower - q[i]) / cycle_dt;
    }
    InequalityConstraint::new(c, d, slack_weight)
}
