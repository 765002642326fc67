//! Composition of the surgical IK problem into priority levels.
//!
//! Constrained mode uses two levels:
//!
//! 1. RCM task, with the joint-limit inequality rows;
//! 2. end-effector pose task and manipulability ascent task (soft-weighted).
//!
//! Unconstrained mode drops the RCM task and keeps a single level with the
//! pose task, the manipulability task and the joint limits.
//!
//! Residual gains are per-cycle fractions: the pose and RCM tasks ask for
//! `K_r * e / dt` so that one integration step of `dt` removes the fraction
//! `K_r` of the error, and the manipulability task asks for a predicted gain of
//! `K_r * m` per step.

use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::chain::KinematicChain;
use crate::error::{Error, Result};
use crate::hqp::PriorityLevel;
use crate::tasks::{
    ee_pose_task_from, joint_limit_constraint, manipulability, manipulability_gradient,
    manipulability_task_from, rcm_task_from, ManipulabilityMeasure, ManipulabilitySample, RcmState,
    GRADIENT_STEP,
};
use crate::transform::{Transform, Twist};

/// Task weights `kt*`, residual gains `kr*`, damping `kd*` and slack weights
/// `kw*`. Index 1 is the RCM task / first level, 2 the pose task / second
/// level, 3 the manipulability task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainSet {
    pub kt1: f64,
    pub kt2: f64,
    pub kt3: f64,
    pub kr1: f64,
    pub kr2: f64,
    pub kr3: f64,
    pub kd1: f64,
    pub kd2: f64,
    pub kw1: f64,
    pub kw2: f64,
}

impl Default for GainSet {
    fn default() -> Self {
        Self::reference()
    }
}

impl GainSet {
    /// Reference gains for the 10-DOF chain.
    pub fn reference() -> Self {
        Self {
            kt1: 1.0,
            kt2: 1.0,
            kt3: 0.01,
            kr1: 1.0,
            kr2: 1.0,
            kr3: 1e-3,
            kd1: 1e-5,
            kd2: 1e-9,
            kw1: 1e-5,
            kw2: 1e-5,
        }
    }

    /// Reference gains for the 12-DOF chain (`kt3 = 0.001`).
    pub fn reference_twelve_dof() -> Self {
        Self {
            kt3: 0.001,
            ..Self::reference()
        }
    }

    /// `(key, value)` pairs in a fixed order, keys as accepted by [`GainSet::set`].
    pub fn entries(&self) -> [(&'static str, f64); 10] {
        [
            ("Kt1", self.kt1),
            ("Kt2", self.kt2),
            ("Kt3", self.kt3),
            ("Kr1", self.kr1),
            ("Kr2", self.kr2),
            ("Kr3", self.kr3),
            ("Kd1", self.kd1),
            ("Kd2", self.kd2),
            ("Kw1", self.kw1),
            ("Kw2", self.kw2),
        ]
    }

    /// Sets one gain by key (`Kt1` ... `Kw2`, case-insensitive). Returns false
    /// for an unknown key.
    pub fn set(&mut self, key: &str, value: f64) -> bool {
        let slot = match key.to_ascii_lowercase().as_str() {
            "kt1" => &mut self.kt1,
            "kt2" => &mut self.kt2,
            "kt3" => &mut self.kt3,
            "kr1" => &mut self.kr1,
            "kr2" => &mut self.kr2,
            "kr3" => &mut self.kr3,
            "kd1" => &mut self.kd1,
            "kd2" => &mut self.kd2,
            "kw1" => &mut self.kw1,
            "kw2" => &mut self.kw2,
            _ => return false,
        };
        *slot = value;
        true
    }

    /// Every gain must be positive and finite, except `Kt3` which may be zero
    /// (disables the manipulability task).
    pub fn validate(&self) -> Result<()> {
        for (key, value) in self.entries() {
            let ok = if key == "Kt3" { value >= 0.0 } else { value > 0.0 };
            if !(ok && value.is_finite()) {
                return Err(Error::Validation(format!("gain {key} must be positive, got {value}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemOptions {
    /// Integration step (s).
    pub dt: f64,
    /// Control cycle used by the joint-limit rows (s).
    pub cycle_dt: f64,
    pub optimize_manipulability: bool,
}

/// Levels plus the diagnostics computed while building them.
#[derive(Debug, Clone)]
pub struct SurgicalProblem {
    pub levels: Vec<PriorityLevel>,
    pub pose_error: Twist,
    pub rcm: Option<RcmState>,
    pub manipulability: f64,
    /// Present only when the manipulability task is active.
    pub gradient: Option<DVector<f64>>,
}

pub fn build_surgical_problem(
    chain: &KinematicChain,
    q: &DVector<f64>,
    desired_pose: &Transform,
    trocar: Option<&Vector3<f64>>,
    gains: &GainSet,
    options: &ProblemOptions,
) -> Result<SurgicalProblem> {
    gains.validate()?;
    if !(options.dt > 0.0 && options.cycle_dt > 0.0) {
        return Err(Error::Validation("time steps must be positive".into()));
    }
    let kin = chain.kinematics(q)?;
    let measure = ManipulabilityMeasure::default();
    let jee = kin.jacobian(&measure.frame)?;
    let m = manipulability(&jee.matrix);

    let (pose_task, pose_error) = ee_pose_task_from(&kin, desired_pose, gains.kt2, gains.kr2 / options.dt)?;

    let mut second = vec![pose_task];
    let mut gradient = None;
    if options.optimize_manipulability && gains.kt3 > 0.0 {
        let grad = manipulability_gradient(chain, q, &measure, GRADIENT_STEP)?;
        let sample = ManipulabilitySample {
            value: m,
            gradient: grad.clone(),
        };
        let mut task = manipulability_task_from(&sample, options.dt, gains.kt3)?;
        task.b *= gains.kr3;
        second.push(task);
        gradient = Some(grad);
    }

    let (levels, rcm) = match trocar {
        Some(p) => {
            let (rcm_task, state) = rcm_task_from(&kin, p, gains.kt1, gains.kr1 / options.dt)?;
            let limits = joint_limit_constraint(chain, q, options.cycle_dt, gains.kw1)?;
            let first = PriorityLevel::new(vec![rcm_task], vec![limits], gains.kd1)?;
            let second = PriorityLevel::new(second, vec![], gains.kd2)?;
            (vec![first, second], Some(state))
        }
        None => {
            let limits = joint_limit_constraint(chain, q, options.cycle_dt, gains.kw2)?;
            (vec![PriorityLevel::new(second, vec![limits], gains.kd2)?], None)
        }
    };

    Ok(SurgicalProblem {
        levels,
        pose_error,
        rcm,
        manipulability: m,
        gradient,
    })
}
