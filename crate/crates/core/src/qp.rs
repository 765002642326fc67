//! Dense strictly convex QP solver.
//!
//! Solves
//!
//! ```text
//! minimize    1/2 x^T Q x + p^T x
//! subject to  C x <= d
//! ```
//!
//! with an operator-splitting (ADMM) iteration in the OSQP form, followed by a
//! polishing stage that guesses the active set, solves the equality-constrained
//! KKT system exactly and accepts the result only if it certifies optimality.
//! Polishing is attempted first from the warm-start active set, so a warm
//! start with an unchanged active set costs zero ADMM iterations.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub q: DMatrix<f64>,
    pub p: DVector<f64>,
    pub c: DMatrix<f64>,
    pub d: DVector<f64>,
}

impl QpProblem {
    pub fn new(q: DMatrix<f64>, p: DVector<f64>, c: DMatrix<f64>, d: DVector<f64>) -> Result<Self> {
        let n = q.nrows();
        if q.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "QP Hessian columns",
                expected: n,
                found: q.ncols(),
            });
        }
        if p.len() != n {
            return Err(Error::DimensionMismatch {
                context: "QP linear term",
                expected: n,
                found: p.len(),
            });
        }
        if c.ncols() != n || c.nrows() != d.len() {
            return Err(Error::DimensionMismatch {
                context: "QP inequality rows",
                expected: n,
                found: c.ncols(),
            });
        }
        Ok(Self { q, p, c, d })
    }

    /// Problem without inequality rows.
    pub fn unconstrained(q: DMatrix<f64>, p: DVector<f64>) -> Result<Self> {
        let n = q.nrows();
        Self::new(q, p, DMatrix::zeros(0, n), DVector::zeros(0))
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn m(&self) -> usize {
        self.c.nrows()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + self.p.dot(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings {
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iter: usize,
    pub rho: f64,
    pub sigma: f64,
    /// Over-relaxation parameter in (0, 2).
    pub alpha: f64,
    /// ADMM iterations between convergence checks / polish attempts.
    pub check_interval: usize,
    pub max_polish_rounds: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            eps_abs: 1e-8,
            eps_rel: 1e-8,
            max_iter: 4000,
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            check_interval: 25,
            max_polish_rounds: 12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Solved,
    /// Iteration budget exhausted; the solution holds the best iterate.
    MaxIterations,
}

/// Primal/dual state reused across consecutive solves of similar problems.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QpWarmStart {
    pub x: DVector<f64>,
    pub z: DVector<f64>,
    pub y: DVector<f64>,
    pub active: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Multipliers of `C x <= d`, non-negative.
    pub y: DVector<f64>,
    pub status: QpStatus,
    pub admm_iterations: usize,
    pub polished: bool,
    pub warm_start: QpWarmStart,
}

/// Stationarity, primal and complementarity residuals (infinity norms).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
}

pub(crate) fn kkt_residuals(problem: &QpProblem, x: &DVector<f64>, y: &DVector<f64>) -> KktResiduals {
    let cx = &problem.c * x;
    let grad = &problem.q * x + &problem.p + problem.c.transpose() * y;
    let primal = (&cx - &problem.d).iter().fold(0.0f64, |a, &v| a.max(v));
    let dual = y.iter().fold(0.0f64, |a, &v| a.max(-v));
    let complementarity = y
        .iter()
        .zip(cx.iter().zip(problem.d.iter()))
        .fold(0.0f64, |a, (&yi, (&ci, &di))| a.max((yi * (di - ci)).abs()));
    KktResiduals {
        stationarity: grad.amax(),
        primal,
        dual,
        complementarity,
    }
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.amax()
    }
}

/// Scaled acceptance test shared by the ADMM and polish stages.
fn certified(problem: &QpProblem, x: &DVector<f64>, y: &DVector<f64>, s: &QpSettings) -> bool {
    let r = kkt_residuals(problem, x, y);
    let qx = &problem.q * x;
    let cty = problem.c.transpose() * y;
    let cx = &problem.c * x;
    let dual_scale = inf_norm(&qx).max(inf_norm(&problem.p)).max(inf_norm(&cty));
    let prim_scale = inf_norm(&cx).max(inf_norm(&problem.d));
    r.stationarity <= s.eps_abs + s.eps_rel * dual_scale
        && r.primal <= s.eps_abs + s.eps_rel * prim_scale
        && r.dual <= s.eps_abs
        && r.complementarity <= s.eps_abs + s.eps_rel * prim_scale.max(dual_scale)
}

struct Polisher<'a> {
    problem: &'a QpProblem,
    q_chol: Cholesky<f64, Dyn>,
}

impl<'a> Polisher<'a> {
    fn new(problem: &'a QpProblem) -> Result<Self> {
        let q_chol = problem
            .q
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Validation("QP Hessian is not positive definite".into()))?;
        Ok(Self { problem, q_chol })
    }

    /// Equality-constrained minimizer with the rows in `active` held tight.
    fn solve_active(&self, active: &[bool]) -> Option<(DVector<f64>, DVector<f64>)> {
        let pr = self.problem;
        let idx: Vec<usize> = (0..pr.m()).filter(|&i| active[i]).collect();
        let x0 = -self.q_chol.solve(&pr.p);
        let mut y = DVector::zeros(pr.m());
        if idx.is_empty() {
            return Some((x0, y));
        }
        let ca = pr.c.select_rows(idx.iter());
        let da = DVector::from_iterator(idx.len(), idx.iter().map(|&i| pr.d[i]));
        // C_A Q^-1 C_A^T lambda = C_A x0 - d_A
        let qinv_cat = self.q_chol.solve(&ca.transpose());
        let schur = &ca * &qinv_cat;
        let rhs = &ca * &x0 - da;
        let lambda = match schur.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => schur.full_piv_lu().solve(&rhs)?,
        };
        if !lambda.iter().all(|v| v.is_finite()) {
            return None;
        }
        let x = x0 - qinv_cat * &lambda;
        for (k, &i) in idx.iter().enumerate() {
            y[i] = lambda[k];
        }
        Some((x, y))
    }

    /// Primal-dual active-set refinement starting from `active`.
    fn polish(&self, mut active: Vec<bool>, settings: &QpSettings) -> Option<(DVector<f64>, DVector<f64>, Vec<bool>)> {
        let pr = self.problem;
        let tol = settings.eps_abs;
        let mut seen: Vec<Vec<bool>> = Vec::new();
        for _ in 0..settings.max_polish_rounds {
            let (x, y) = self.solve_active(&active)?;
            let slack = &pr.d - &pr.c * &x;
            let mut next = active.clone();
            let mut changed = false;
            for i in 0..pr.m() {
                if active[i] && y[i] < -tol {
                    next[i] = false;
                    changed = true;
                } else if !active[i] && slack[i] < -tol {
                    next[i] = true;
                    changed = true;
                }
            }
            if !changed {
                let mut y = y;
                y.iter_mut().for_each(|v| *v = v.max(0.0));
                if certified(pr, &x, &y, settings) {
                    return Some((x, y, active));
                }
                return None;
            }
            if seen.contains(&next) {
                return None;
            }
            seen.push(active);
            active = next;
        }
        None
    }
}

fn admm_matrix(problem: &QpProblem, sigma: f64, rho: f64) -> Result<Cholesky<f64, Dyn>> {
    let n = problem.n();
    let k = &problem.q + DMatrix::identity(n, n) * sigma + problem.c.transpose() * &problem.c * rho;
    k.cholesky()
        .ok_or_else(|| Error::Validation("ADMM system matrix is not positive definite".into()))
}

/// Solves `problem`, optionally warm-started from a previous solution.
pub fn solve_qp(problem: &QpProblem, warm_start: Option<&QpWarmStart>, settings: &QpSettings) -> Result<QpSolution> {
    let n = problem.n();
    let m = problem.m();
    let polisher = Polisher::new(problem)?;

    let warm = warm_start.filter(|w| w.x.len() == n && w.z.len() == m && w.y.len() == m && w.active.len() == m);

    let initial_active = warm.map_or_else(|| vec![false; m], |w| w.active.clone());
    if let Some((x, y, active)) = polisher.polish(initial_active, settings) {
        let z = &problem.c * &x;
        return Ok(QpSolution {
            warm_start: QpWarmStart {
                x: x.clone(),
                z,
                y: y.clone(),
                active,
            },
            x,
            y,
            status: QpStatus::Solved,
            admm_iterations: 0,
            polished: true,
        });
    }

    let (mut x, mut z, mut y) = match warm {
        Some(w) => (w.x.clone(), w.z.clone(), w.y.clone()),
        None => (DVector::zeros(n), DVector::zeros(m), DVector::zeros(m)),
    };
    // z must start feasible
    for i in 0..m {
        z[i] = z[i].min(problem.d[i]);
    }

    let mut rho = settings.rho;
    let sigma = settings.sigma;
    let alpha = settings.alpha;
    let mut kkt = admm_matrix(problem, sigma, rho)?;
    let ct = problem.c.transpose();

    let mut iterations = 0;
    while iterations < settings.max_iter {
        iterations += 1;
        let rhs = &x * sigma - &problem.p + &ct * (&z * rho - &y);
        let x_tilde = kkt.solve(&rhs);
        let z_tilde = &problem.c * &x_tilde;
        x = &x_tilde * alpha + &x * (1.0 - alpha);
        let z_relaxed = &z_tilde * alpha + &z * (1.0 - alpha);
        let mut z_next = &z_relaxed + &y / rho;
        for i in 0..m {
            z_next[i] = z_next[i].min(problem.d[i]);
        }
        y += (&z_relaxed - &z_next) * rho;
        z = z_next;

        if iterations % settings.check_interval != 0 {
            continue;
        }

        let cx = &problem.c * &x;
        let prim_res = inf_norm(&(&cx - &z));
        let qx = &problem.q * &x;
        let cty = &ct * &y;
        let dual_res = inf_norm(&(&qx + &problem.p + &cty));
        let prim_scale = inf_norm(&cx).max(inf_norm(&z));
        let dual_scale = inf_norm(&qx).max(inf_norm(&problem.p)).max(inf_norm(&cty));

        // Active rows: OSQP's upper-bound test d - z < y.
        let active: Vec<bool> = (0..m).map(|i| problem.d[i] - z[i] < y[i]).collect();
        if let Some((xp, yp, active)) = polisher.polish(active, settings) {
            let zp = &problem.c * &xp;
            return Ok(QpSolution {
                warm_start: QpWarmStart {
                    x: xp.clone(),
                    z: zp,
                    y: yp.clone(),
                    active,
                },
                x: xp,
                y: yp,
                status: QpStatus::Solved,
                admm_iterations: iterations,
                polished: true,
            });
        }

        let y_clamped = y.map(|v| v.max(0.0));
        if prim_res <= settings.eps_abs + settings.eps_rel * prim_scale
            && dual_res <= settings.eps_abs + settings.eps_rel * dual_scale
            && certified(problem, &x, &y_clamped, settings)
        {
            let active: Vec<bool> = (0..m).map(|i| problem.d[i] - z[i] < y[i]).collect();
            return Ok(QpSolution {
                warm_start: QpWarmStart {
                    x: x.clone(),
                    z,
                    y: y_clamped.clone(),
                    active,
                },
                x,
                y: y_clamped,
                status: QpStatus::Solved,
                admm_iterations: iterations,
                polished: false,
            });
        }

        // Step-size adaptation balancing normalized residuals.
        if m > 0 {
            let p_norm = prim_res / prim_scale.max(1e-30);
            let d_norm = dual_res / dual_scale.max(1e-30);
            let ratio = (p_norm / d_norm.max(1e-30)).sqrt();
            let new_rho = (rho * ratio).clamp(1e-6, 1e6);
            if new_rho > 5.0 * rho || new_rho < rho / 5.0 {
                rho = new_rho;
                kkt = admm_matrix(problem, sigma, rho)?;
            }
        }
    }

    let y_clamped = y.map(|v| v.max(0.0));
    let active: Vec<bool> = (0..m).map(|i| problem.d[i] - z[i] < y[i]).collect();
    Ok(QpSolution {
        warm_start: QpWarmStart {
            x: x.clone(),
            z,
            y: y_clamped.clone(),
            active,
        },
        x,
        y: y_clamped,
        status: QpStatus::MaxIterations,
        admm_iterations: iterations,
        polished: false,
    })
}

/// Runs the ADMM iteration only (no polishing). Used by tests and benchmarks
/// to exercise the splitting scheme on its own.
pub fn solve_qp_admm_only(problem: &QpProblem, settings: &QpSettings) -> Result<QpSolution> {
    let mut s = *settings;
    s.max_polish_rounds = 0;
    solve_qp(problem, None, &s)
}
