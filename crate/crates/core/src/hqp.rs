//! Hierarchical QP: each priority level is a damped, slack-relaxed least-squares
//! QP solved in the null space of every higher level, with the higher levels'
//! inequality rows re-imposed at their frozen optimal slack.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::qp::{solve_qp, QpProblem, QpSettings, QpStatus, QpWarmStart};
use crate::tasks::{EqualityTask, InequalityConstraint};

/// Relative rank threshold of the null-space projector.
pub const NULL_SPACE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct PriorityLevel {
    pub tasks: Vec<EqualityTask>,
    pub constraints: Vec<InequalityConstraint>,
    /// Weight of the `||qdot||^2` regularizer.
    pub damping: f64,
}

impl PriorityLevel {
    pub fn new(tasks: Vec<EqualityTask>, constraints: Vec<InequalityConstraint>, damping: f64) -> Result<Self> {
        if !(damping > 0.0 && damping.is_finite()) {
            return Err(Error::Validation(format!("damping must be positive, got {damping}")));
        }
        let level = Self {
            tasks,
            constraints,
            damping,
        };
        if let Some(n) = level.columns() {
            let all_match = level.tasks.iter().all(|t| t.a.ncols() == n)
                && level.constraints.iter().all(|c| c.c.ncols() == n);
            if !all_match {
                return Err(Error::Validation(
                    "tasks and constraints of a level must share the joint count".into(),
                ));
            }
        }
        Ok(level)
    }

    fn columns(&self) -> Option<usize> {
        self.tasks
            .first()
            .map(|t| t.a.ncols())
            .or_else(|| self.constraints.first().map(|c| c.c.ncols()))
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty() && self.constraints.is_empty()
    }

    pub fn constraint_rows(&self) -> usize {
        self.constraints.iter().map(|c| c.rows()).sum()
    }

    /// All task matrices stacked vertically (unweighted).
    pub fn stacked_task_rows(&self, n: usize) -> DMatrix<f64> {
        stack_rows(self.tasks.iter().map(|t| &t.a), n)
    }
}

fn stack_rows<'a>(blocks: impl Iterator<Item = &'a DMatrix<f64>> + Clone, n: usize) -> DMatrix<f64> {
    let rows = blocks.clone().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, n);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), (b.nrows(), n)).copy_from(b);
        r += b.nrows();
    }
    out
}

/// Inequality rows of a solved higher level, expressed on the total joint
/// velocity and relaxed by that level's optimal slack.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenConstraint {
    pub c: DMatrix<f64>,
    pub d: DVector<f64>,
    pub slack: DVector<f64>,
}

/// QP for one level plus the layout of its decision vector `[qdot; w]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledLevel {
    pub problem: QpProblem,
    pub joint_dim: usize,
    pub slack_dim: usize,
}

/// Builds the QP of one level in the variables `x = [qdot_new; w]`, where the
/// total joint velocity is `projector * qdot_new + offset`.
///
/// The cost is `|| Abar x - bbar ||^2 / 2` with
///
/// ```text
/// Abar = [ sqrt(Kt_i) A_i N   0            ]   bbar = [ sqrt(Kt_i) (b_i - A_i offset) ]
///        [ sqrt(Kd) I         0            ]          [ 0                              ]
///        [ 0                  sqrt(Kw) I   ]          [ 0                              ]
/// ```
///
/// so `Q = Abar^T Abar` and `p = -Abar^T bbar`.
pub fn assemble_level(
    level: &PriorityLevel,
    projector: Option<&DMatrix<f64>>,
    offset: Option<&DVector<f64>>,
    higher: &[FrozenConstraint],
) -> Result<AssembledLevel> {
    let n = level
        .columns()
        .or_else(|| projector.map(|p| p.ncols()))
        .ok_or(Error::EmptyLevel(0))?;
    if level.is_empty() {
        return Err(Error::EmptyLevel(0));
    }
    let identity;
    let proj = match projector {
        Some(p) => {
            if p.nrows() != n || p.ncols() != n {
                return Err(Error::DimensionMismatch {
                    context: "null-space projector",
                    expected: n,
                    found: p.ncols(),
                });
            }
            p
        }
        None => {
            identity = DMatrix::identity(n, n);
            &identity
        }
    };
    let zero;
    let off = match offset {
        Some(o) => {
            if o.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "solution offset",
                    expected: n,
                    found: o.len(),
                });
            }
            o
        }
        None => {
            zero = DVector::zeros(n);
            &zero
        }
    };

    let k = level.constraint_rows();
    let nx = n + k;
    let task_rows: usize = level.tasks.iter().map(|t| t.dim()).sum();
    let rows = task_rows + n + k;
    let mut abar = DMatrix::zeros(rows, nx);
    let mut bbar = DVector::zeros(rows);

    let mut r = 0;
    for task in &level.tasks {
        let s = task.weight.sqrt();
        let m = task.dim();
        abar.view_mut((r, 0), (m, n)).copy_from(&(&task.a * proj * s));
        bbar.rows_mut(r, m).copy_from(&((&task.b - &task.a * off) * s));
        r += m;
    }
    let sd = level.damping.sqrt();
    for i in 0..n {
        abar[(r + i, i)] = sd;
    }
    r += n;
    let mut col = n;
    for con in &level.constraints {
        let sw = con.slack_weight.sqrt();
        for i in 0..con.rows() {
            abar[(r + i, col + i)] = sw;
        }
        r += con.rows();
        col += con.rows();
    }

    let q = abar.transpose() * &abar;
    let p = -(abar.transpose() * &bbar);

    // Inequalities: own rows with slack, then frozen higher-level rows.
    let mut c_rows: Vec<DVector<f64>> = Vec::new();
    let mut d_vals: Vec<f64> = Vec::new();
    let mut slack_col = n;
    for con in &level.constraints {
        let cn = &con.c * proj;
        let rhs = &con.d - &con.c * off;
        for i in 0..con.rows() {
            let mut row = DVector::zeros(nx);
            row.rows_mut(0, n).copy_from(&cn.row(i).transpose());
            row[slack_col + i] = -1.0;
            c_rows.push(row);
            d_vals.push(rhs[i]);
        }
        slack_col += con.rows();
    }
    for frozen in higher {
        let cn = &frozen.c * proj;
        let rhs = &frozen.d + &frozen.slack - &frozen.c * off;
        for i in 0..frozen.c.nrows() {
            // Rows the projector removes entirely carry no information.
            if cn.row(i).amax() < 1e-12 {
                continue;
            }
            let mut row = DVector::zeros(nx);
            row.rows_mut(0, n).copy_from(&cn.row(i).transpose());
            c_rows.push(row);
            d_vals.push(rhs[i]);
        }
    }
    let mut c = DMatrix::zeros(c_rows.len(), nx);
    for (i, row) in c_rows.iter().enumerate() {
        c.set_row(i, &row.transpose());
    }
    let d = DVector::from_vec(d_vals);

    Ok(AssembledLevel {
        problem: QpProblem::new(q, p, c, d)?,
        joint_dim: n,
        slack_dim: k,
    })
}

/// `N = I - A^+ A`, from a column-pivoted QR of `A^T`. Directions whose
/// `|R_ii|` falls below `tol * |R_00|` count as rank deficient.
///
/// nalgebra's SVD can return an inaccurate factorization for exactly
/// rank-deficient inputs, which would leak lower-level motion into higher
/// levels; pivoted QR is backward stable here.
pub fn null_space_projector(a: &DMatrix<f64>, n: usize, tol: f64) -> DMatrix<f64> {
    let mut proj = DMatrix::identity(n, n);
    if a.nrows() == 0 {
        return proj;
    }
    let qr = a.transpose().col_piv_qr();
    let r = qr.r();
    let lead = r[(0, 0)].abs();
    if lead <= 0.0 {
        return proj;
    }
    let rank = (0..r.nrows().min(r.ncols()))
        .take_while(|&i| r[(i, i)].abs() > tol * lead)
        .count();
    let basis = qr.q().columns(0, rank).into_owned();
    proj -= &basis * basis.transpose();
    // Exactly symmetric.
    (&proj + proj.transpose()) * 0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolverStats {
    pub admm_iterations: usize,
    pub polished_levels: usize,
    pub solve_time_s: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchySolution {
    pub qdot: DVector<f64>,
    pub slacks_per_level: Vec<DVector<f64>>,
    /// `|| A_i qdot - b_i ||` for each task of each level, at the final `qdot`.
    pub level_residuals: Vec<Vec<f64>>,
    pub stats: SolverStats,
}

/// Stateful hierarchy solver carrying per-level QP warm starts between calls.
#[derive(Debug, Clone)]
pub struct HierarchySolver {
    pub settings: QpSettings,
    pub null_space_tol: f64,
    pub warm_start: bool,
    warm: Vec<Option<QpWarmStart>>,
}

impl Default for HierarchySolver {
    fn default() -> Self {
        Self::new(QpSettings::default())
    }
}

impl HierarchySolver {
    pub fn new(settings: QpSettings) -> Self {
        Self {
            settings,
            null_space_tol: NULL_SPACE_TOL,
            warm_start: true,
            warm: Vec::new(),
        }
    }

    pub fn cold(settings: QpSettings) -> Self {
        Self {
            warm_start: false,
            ..Self::new(settings)
        }
    }

    pub fn reset(&mut self) {
        self.warm.clear();
    }

    pub fn solve(&mut self, levels: &[PriorityLevel]) -> Result<HierarchySolution> {
        let started = Instant::now();
        let n = levels
            .iter()
            .find_map(|l| l.columns())
            .ok_or_else(|| Error::Validation("hierarchy has no tasks or constraints".into()))?;
        if let Some(i) = levels.iter().position(PriorityLevel::is_empty) {
            return Err(Error::EmptyLevel(i));
        }
        if let Some(bad) = levels.iter().find_map(|l| l.columns().filter(|&c| c != n)) {
            return Err(Error::DimensionMismatch {
                context: "priority level columns",
                expected: n,
                found: bad,
            });
        }
        self.warm.resize(levels.len(), None);

        let mut projector = DMatrix::identity(n, n);
        let mut offset = DVector::zeros(n);
        let mut frozen: Vec<FrozenConstraint> = Vec::new();
        let mut higher_rows: Vec<DMatrix<f64>> = Vec::new();
        let mut slacks = Vec::with_capacity(levels.len());
        let mut stats = SolverStats {
            converged: true,
            ..Default::default()
        };

        for (p, level) in levels.iter().enumerate() {
            let assembled = assemble_level(level, Some(&projector), Some(&offset), &frozen)
                .map_err(|e| match e {
                    Error::EmptyLevel(_) => Error::EmptyLevel(p),
                    other => other,
                })?;
            let warm = if self.warm_start { self.warm[p].as_ref() } else { None };
            let sol = solve_qp(&assembled.problem, warm, &self.settings)?;
            stats.admm_iterations += sol.admm_iterations;
            stats.polished_levels += usize::from(sol.polished);
            if sol.status == QpStatus::MaxIterations {
                stats.converged = false;
            }

            let step = sol.x.rows(0, n).into_owned();
            let w = sol.x.rows(n, assembled.slack_dim).into_owned();
            offset += &projector * step;

            let mut row = 0;
            for con in &level.constraints {
                frozen.push(FrozenConstraint {
                    c: con.c.clone(),
                    d: con.d.clone(),
                    slack: w.rows(row, con.rows()).into_owned(),
                });
                row += con.rows();
            }
            slacks.push(w);
            self.warm[p] = Some(sol.warm_start);

            if p + 1 < levels.len() && !level.tasks.is_empty() {
                higher_rows.push(level.stacked_task_rows(n));
                let stacked = stack_rows(higher_rows.iter(), n);
                projector = null_space_projector(&stacked, n, self.null_space_tol);
            }
        }

        let level_residuals = levels
            .iter()
            .map(|l| l.tasks.iter().map(|t| t.residual_norm(&offset)).collect())
            .collect();
        stats.solve_time_s = started.elapsed().as_secs_f64();
        Ok(HierarchySolution {
            qdot: offset,
            slacks_per_level: slacks,
            level_residuals,
            stats,
        })
    }
}

/// One-shot hierarchy solve without warm-start state.
pub fn solve_hierarchy(levels: &[PriorityLevel], settings: &QpSettings) -> Result<HierarchySolution> {
    HierarchySolver::cold(*settings).solve(levels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task(a: &[f64], rows: usize, b: &[f64], w: f64) -> EqualityTask {
        let cols = a.len() / rows;
        EqualityTask::new(DMatrix::from_row_slice(rows, cols, a), DVector::from_row_slice(b), w).unwrap()
    }

    #[test]
    fn identity_stacking() {
        let e = [0.3, -0.2, 0.7];
        let level = PriorityLevel::new(vec![task(&[1., 0., 0., 0., 1., 0., 0., 0., 1.], 3, &e, 1.0)], vec![], 1e-12).unwrap();
        let asm = assemble_level(&level, None, None, &[]).unwrap();
        assert!((&asm.problem.q - DMatrix::identity(3, 3)).amax() < 1e-11);
        for (p, e) in asm.problem.p.iter().zip(e) {
            assert!((p + e).abs() < 1e-15);
        }
    }

    #[test]
    fn weighted_normal_equations() {
        let a1 = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.5, -1.0]);
        let a2 = DMatrix::from_row_slice(1, 2, &[3.0, 1.0]);
        let kd = 1e-3;
        let level = PriorityLevel::new(
            vec![
                EqualityTask::new(a1.clone(), DVector::from_vec(vec![1.0, 2.0]), 1.0).unwrap(),
                EqualityTask::new(a2.clone(), DVector::from_vec(vec![0.5]), 0.01).unwrap(),
            ],
            vec![],
            kd,
        )
        .unwrap();
        let asm = assemble_level(&level, None, None, &[]).unwrap();
        let expected = a1.transpose() * &a1 + a2.transpose() * &a2 * 0.01 + DMatrix::identity(2, 2) * kd;
        assert!((&asm.problem.q - expected).amax() < 1e-14);
    }

    #[test]
    fn identity_projector_matches_top_level() {
        let level = PriorityLevel::new(vec![task(&[1.0, 2.0], 1, &[0.4], 1.0)], vec![], 1e-5).unwrap();
        let a = assemble_level(&level, None, None, &[]).unwrap();
        let b = assemble_level(&level, Some(&DMatrix::identity(2, 2)), Some(&DVector::zeros(2)), &[]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn slack_block_and_rows() {
        let con = InequalityConstraint::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 0.0]),
            DVector::from_vec(vec![1.0, 1.0]),
            1e-5,
        )
        .unwrap();
        let level = PriorityLevel::new(vec![task(&[1.0, 0.0], 1, &[3.0], 1.0)], vec![con], 1e-5).unwrap();
        let asm = assemble_level(&level, None, None, &[]).unwrap();
        assert_eq!(asm.problem.n(), 4);
        assert_eq!(asm.slack_dim, 2);
        assert_eq!(asm.problem.c.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0, -1.0, 0.0]);
        assert!((asm.problem.q[(2, 2)] - 1e-5).abs() < 1e-18);
    }

    #[test]
    fn empty_level_rejected() {
        let level = PriorityLevel::new(vec![], vec![], 1e-5).unwrap();
        assert!(matches!(
            assemble_level(&level, Some(&DMatrix::identity(2, 2)), None, &[]),
            Err(Error::EmptyLevel(_))
        ));
        let ok = PriorityLevel::new(vec![task(&[1.0, 0.0], 1, &[1.0], 1.0)], vec![], 1e-5).unwrap();
        assert!(matches!(
            HierarchySolver::default().solve(&[ok, level]),
            Err(Error::EmptyLevel(1))
        ));
    }

    #[test]
    fn projector_axis_row() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        let n = null_space_projector(&a, 3, NULL_SPACE_TOL);
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0, 1.0]));
        assert!((n - expected).amax() < 1e-15);
    }

    #[test]
    fn projector_full_rank_is_zero() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 0.0, 1.0, -1.0, 1.0, 0.0, 3.0]);
        assert!(null_space_projector(&a, 3, NULL_SPACE_TOL).amax() < 1e-14);
    }

    #[test]
    fn lexicographic_two_levels() {
        let l1 = PriorityLevel::new(vec![task(&[1.0, 0.0], 1, &[1.0], 1.0)], vec![], 1e-12).unwrap();
        let l2 = PriorityLevel::new(vec![task(&[1.0, 0.0, 0.0, 1.0], 2, &[0.0, 0.0], 1.0)], vec![], 1e-12).unwrap();
        let sol = solve_hierarchy(&[l1, l2], &QpSettings::default()).unwrap();
        assert!((sol.qdot[0] - 1.0).abs() < 1e-9);
        assert!(sol.qdot[1].abs() < 1e-9);
    }

    #[test]
    fn depth_one_is_damped_least_squares() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, 0.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![0.5, -0.3]);
        let kd = 1e-3;
        let level = PriorityLevel::new(vec![EqualityTask::new(a.clone(), b.clone(), 1.0).unwrap()], vec![], kd).unwrap();
        let sol = solve_hierarchy(&[level], &QpSettings::default()).unwrap();
        let dls = (a.transpose() * &a + DMatrix::identity(3, 3) * kd)
            .cholesky()
            .unwrap()
            .solve(&(a.transpose() * b));
        assert!((sol.qdot - dls).amax() < 1e-12);
    }
}
