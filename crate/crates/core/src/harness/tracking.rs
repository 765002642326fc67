use std::time::Instant;

use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};

use super::scenario::{Mode, Scenario};
use crate::chain::{KinematicChain, FRAME_EE};
use crate::error::{Error, Result};
use crate::hqp::HierarchySolver;
use crate::problem::{build_surgical_problem, GainSet, ProblemOptions};
use crate::qp::QpSettings;
use crate::tasks::{manipulability, pose_error, rcm_state_from};
use crate::transform::Transform;

/// Constrained runs abort once the RCM error exceeds this (m).
pub const RCM_DIVERGENCE_LIMIT: f64 = 5e-3;

/// Gradient norms above this are recorded in the report.
pub const GRADIENT_FLAG_THRESHOLD: f64 = 1e6;

/// Per-step series. Field order is the fixed column order of the report.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Series {
    pub step: Vec<usize>,
    pub t: Vec<f64>,
    pub m: Vec<f64>,
    pub e_rcm_norm: Vec<f64>,
    pub e_ee_norm: Vec<f64>,
    pub solve_time_s: Vec<f64>,
}

pub const SERIES_COLUMNS: [&str; 6] = ["step", "t", "m", "e_rcm_norm", "e_ee_norm", "solve_time_s"];

impl Series {
    pub fn len(&self) -> usize {
        self.step.len()
    }

    pub fn is_empty(&self) -> bool {
        self.step.is_empty()
    }

    fn consistent(&self) -> bool {
        let n = self.step.len();
        [self.t.len(), self.m.len(), self.e_rcm_norm.len(), self.e_ee_norm.len(), self.solve_time_s.len()]
            .iter()
            .all(|&l| l == n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub steps: usize,
    pub avg_manipulability: f64,
    pub max_manipulability: f64,
    /// Absent in unconstrained runs (m).
    pub avg_rcm_error: Option<f64>,
    pub max_rcm_error: Option<f64>,
    pub avg_pose_error: f64,
    pub max_pose_error: f64,
    pub mean_solve_time_s: f64,
    pub max_solve_time_s: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

impl Aggregates {
    /// Arithmetic means and maxima over all steps.
    pub fn from_series(series: &Series, mode: Mode) -> Result<Self> {
        if series.is_empty() || !series.consistent() {
            return Err(Error::Validation("report series are empty or of unequal length".into()));
        }
        let constrained = mode == Mode::Constrained;
        Ok(Self {
            steps: series.len(),
            avg_manipulability: mean(&series.m),
            max_manipulability: max(&series.m),
            avg_rcm_error: constrained.then(|| mean(&series.e_rcm_norm)),
            max_rcm_error: constrained.then(|| max(&series.e_rcm_norm)),
            avg_pose_error: mean(&series.e_ee_norm),
            max_pose_error: max(&series.e_ee_norm),
            mean_solve_time_s: mean(&series.solve_time_s),
            max_solve_time_s: max(&series.solve_time_s),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingReport {
    pub scenario: String,
    pub fingerprint: String,
    pub chain: String,
    pub mode: Mode,
    pub optimize_manipulability: bool,
    pub aggregates: Aggregates,
    pub series: Series,
    /// Joint configuration after each step.
    pub q: Vec<Vec<f64>>,
    /// Steps where the manipulability gradient norm exceeded the flag threshold.
    pub gradient_flags: Vec<usize>,
}

impl TrackingReport {
    /// Copy with every wall-clock quantity set to zero, for byte-stable output.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        r.series.solve_time_s.iter_mut().for_each(|v| *v = 0.0);
        r.aggregates.mean_solve_time_s = 0.0;
        r.aggregates.max_solve_time_s = 0.0;
        r
    }

    pub fn recompute_aggregates(&self) -> Result<Aggregates> {
        Aggregates::from_series(&self.series, self.mode)
    }
}

/// Closed-loop tracking: per step, build the two-level problem, solve the
/// hierarchy, integrate `q += dt * qdot` and record errors at the new state
/// against the pose targeted in that step.
pub fn run_tracking(scenario: &Scenario) -> Result<TrackingReport> {
    run_tracking_with(scenario, &QpSettings::default())
}

pub fn run_tracking_with(scenario: &Scenario, settings: &QpSettings) -> Result<TrackingReport> {
    scenario.validate()?;
    let cfg = &scenario.config;
    let chain = &scenario.chain;
    let trocar = cfg.trocar_point();
    let options = cfg.options();
    let n_steps = cfg.path.n_steps;

    let mut q = cfg.initial_configuration();
    let mut solver = HierarchySolver::new(*settings);
    let mut series = Series::default();
    let mut qs = Vec::with_capacity(n_steps);
    let mut flags = Vec::new();

    for k in 0..n_steps {
        let t = cfg.path.parameter(k);
        let desired = cfg.path.point(t);
        let step = tracking_step(chain, &mut q, &desired, trocar.as_ref(), &cfg.gains, &options, &mut solver)
            .map_err(|e| e.at_step(k))?;
        if step.gradient_norm.is_some_and(|g| g > GRADIENT_FLAG_THRESHOLD) {
            flags.push(k);
        }
        if trocar.is_some() && step.rcm_error > RCM_DIVERGENCE_LIMIT {
            return Err(Error::RcmDivergence {
                error_m: step.rcm_error,
                limit_m: RCM_DIVERGENCE_LIMIT,
            }
            .at_step(k));
        }
        series.step.push(k);
        series.t.push(t);
        series.m.push(step.manipulability);
        series.e_rcm_norm.push(step.rcm_error);
        series.e_ee_norm.push(step.pose_error);
        series.solve_time_s.push(step.solve_time_s);
        qs.push(q.iter().copied().collect());
    }

    Ok(TrackingReport {
        scenario: cfg.name.clone(),
        fingerprint: cfg.fingerprint(),
        chain: chain.name().to_string(),
        mode: cfg.mode,
        optimize_manipulability: cfg.optimize_manipulability,
        aggregates: Aggregates::from_series(&series, cfg.mode)?,
        series,
        q: qs,
        gradient_flags: flags,
    })
}

/// Metrics of one control cycle, measured after integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub manipulability: f64,
    pub rcm_error: f64,
    pub pose_error: f64,
    pub solve_time_s: f64,
    pub gradient_norm: Option<f64>,
}

pub fn tracking_step(
    chain: &KinematicChain,
    q: &mut DVector<f64>,
    desired: &Transform,
    trocar: Option<&Vector3<f64>>,
    gains: &GainSet,
    options: &ProblemOptions,
    solver: &mut HierarchySolver,
) -> Result<StepOutcome> {
    let started = Instant::now();
    let problem = build_surgical_problem(chain, q, desired, trocar, gains, options)?;
    let solution = solver.solve(&problem.levels)?;
    let solve_time_s = started.elapsed().as_secs_f64();
    if !solution.stats.converged {
        return Err(Error::MaxIterations {
            iterations: solution.stats.admm_iterations,
        });
    }
    *q += &solution.qdot * options.dt;

    let kin = chain.kinematics(q)?;
    let pose = kin.frame_pose(FRAME_EE)?;
    let rcm_error = match trocar {
        Some(p) => rcm_state_from(&kin, p)?.error_norm(),
        None => 0.0,
    };
    Ok(StepOutcome {
        manipulability: manipulability(&kin.jacobian(FRAME_EE)?.matrix),
        rcm_error,
        pose_error: pose_error(&pose, desired)?.norm(),
        solve_time_s,
        gradient_norm: problem.gradient.map(|g| g.norm()),
    })
}

/// Drives `q` onto `desired` (and the trocar, if any) without manipulability
/// optimization by repeating control cycles on a static target. Used to
/// produce recorded initial configurations.
#[allow(clippy::too_many_arguments)]
pub fn settle_configuration(
    chain: &KinematicChain,
    q_seed: &DVector<f64>,
    desired: &Transform,
    trocar: Option<&Vector3<f64>>,
    gains: &GainSet,
    dt: f64,
    max_cycles: usize,
    tol: f64,
) -> Result<DVector<f64>> {
    let options = ProblemOptions {
        dt,
        cycle_dt: dt,
        optimize_manipulability: false,
    };
    // Partial correction per cycle keeps large initial errors well inside the
    // linearization.
    let mut gentle = *gains;
    gentle.kr1 = gains.kr1.min(0.2);
    gentle.kr2 = gains.kr2.min(0.2);
    let mut solver = HierarchySolver::default();
    let mut q = q_seed.clone();
    for _ in 0..max_cycles {
        let out = tracking_step(chain, &mut q, desired, trocar, &gentle, &options, &mut solver)?;
        if out.pose_error < tol && out.rcm_error < tol {
            return Ok(q);
        }
    }
    Err(Error::Validation(format!(
        "configuration did not settle within {max_cycles} cycles"
    )))
}

/// Relative change in percent; `None` when the baseline is zero and the values differ.
fn pct(on: f64, off: f64) -> Option<f64> {
    if on == off {
        Some(0.0)
    } else if off == 0.0 {
        None
    } else {
        Some((on - off) / off * 100.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub with_optimization: Option<f64>,
    pub without_optimization: Option<f64>,
    pub change_pct: Option<f64>,
}

impl MetricDelta {
    fn new(on: Option<f64>, off: Option<f64>) -> Self {
        let change_pct = match (on, off) {
            (Some(a), Some(b)) => pct(a, b),
            _ => None,
        };
        Self {
            with_optimization: on,
            without_optimization: off,
            change_pct,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub scenario: String,
    pub fingerprint: String,
    pub avg_manipulability: MetricDelta,
    pub max_manipulability: MetricDelta,
    pub avg_rcm_error: MetricDelta,
    pub avg_pose_error: MetricDelta,
    pub mean_solve_time_s: MetricDelta,
    pub max_solve_time_s: MetricDelta,
}

pub fn compare_runs(on: &TrackingReport, off: &TrackingReport) -> Result<ComparisonSummary> {
    if on.fingerprint != off.fingerprint {
        return Err(Error::ScenarioMismatch(on.fingerprint.clone(), off.fingerprint.clone()));
    }
    let (a, b) = (&on.aggregates, &off.aggregates);
    Ok(ComparisonSummary {
        scenario: on.scenario.clone(),
        fingerprint: on.fingerprint.clone(),
        avg_manipulability: MetricDelta::new(Some(a.avg_manipulability), Some(b.avg_manipulability)),
        max_manipulability: MetricDelta::new(Some(a.max_manipulability), Some(b.max_manipulability)),
        avg_rcm_error: MetricDelta::new(a.avg_rcm_error, b.avg_rcm_error),
        avg_pose_error: MetricDelta::new(Some(a.avg_pose_error), Some(b.avg_pose_error)),
        mean_solve_time_s: MetricDelta::new(Some(a.mean_solve_time_s), Some(b.mean_solve_time_s)),
        max_solve_time_s: MetricDelta::new(Some(a.max_solve_time_s), Some(b.max_solve_time_s)),
    })
}
