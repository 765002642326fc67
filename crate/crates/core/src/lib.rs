//! Constrained inverse kinematics for redundant surgical manipulators.
//!
//! A remote-center-of-motion (RCM) task is solved at the highest priority,
//! and end-effector pose tracking plus manipulability maximization are solved
//! in its null space, each priority level being a strictly convex QP with
//! slack-relaxed joint limits.

pub mod chain;
pub mod error;
pub mod harness;
pub mod hqp;
pub mod problem;
pub mod qp;
pub mod tasks;
pub mod transform;

pub use chain::{load_chain, load_chain_file, Jacobian, JointKind, KinematicChain};
pub use error::{Error, Result};
pub use hqp::{
    assemble_level, null_space_projector, solve_hierarchy, HierarchySolution, HierarchySolver,
    PriorityLevel,
};
pub use problem::{build_surgical_problem, GainSet, ProblemOptions, SurgicalProblem};
pub use qp::{solve_qp, QpProblem, QpSettings, QpSolution, QpStatus};
pub use tasks::{
    ee_pose_task, joint_limit_constraint, manipulability, manipulability_gradient,
    manipulability_task, rcm_state, rcm_task, EqualityTask, InequalityConstraint,
    ManipulabilityMeasure, RcmState,
};
pub use transform::{se3_exp, se3_log, Transform, Twist};
