#![allow(dead_code)]

use std::path::PathBuf;

use hqp_ik::chain::{FRAME_EE, FRAME_RCM_POST, FRAME_RCM_PRE};
use hqp_ik::harness::Scenario;
use hqp_ik::tasks::rcm_state;
use hqp_ik::{load_chain, load_chain_file, KinematicChain, QpProblem, Transform};
use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn shipped_chains() -> Vec<KinematicChain> {
    ["kc1.json", "kc2.json"]
        .iter()
        .map(|f| load_chain_file(data_dir().join("chains").join(f)).unwrap())
        .collect()
}

pub const SCENARIOS: [&str; 4] = [
    "kc1_constrained_helix",
    "kc2_constrained_helix",
    "kc1_unconstrained_lissajous",
    "kc2_unconstrained_lissajous",
];

pub fn scenario(name: &str) -> Scenario {
    Scenario::load(data_dir().join("scenarios").join(format!("{name}.json"))).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform configuration inside the limits, shrunk by `margin` on each side.
pub fn random_q(chain: &KinematicChain, rng: &mut impl Rng, margin: f64) -> DVector<f64> {
    let lo = chain.lower_limits();
    let hi = chain.upper_limits();
    DVector::from_fn(chain.dof(), |i, _| rng.gen_range(lo[i] + margin..hi[i] - margin))
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn random_vector(n: usize, rng: &mut impl Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

/// Planar arm with revolute z joints and the given link lengths.
/// `rcm_pre` sits at the base of the last link, `rcm_post` and `ee` at its tip.
pub fn planar_arm(links: &[f64]) -> KinematicChain {
    let mut joints = Vec::new();
    let mut offset = 0.0;
    for l in links {
        joints.push(format!(
            r#"{{"type": "revolute", "axis": [0,0,1], "origin_xyz": [{offset},0,0], "limit_lower": -3.1, "limit_upper": 3.1}}"#
        ));
        offset = *l;
    }
    let last = links.len() - 1;
    let pre_parent = if last == 0 { "null".to_string() } else { (last - 1).to_string() };
    let pre_xyz = if last == 0 { 0.0 } else { links[last - 1] };
    let doc = format!(
        r#"{{"name": "planar", "joints": [{}],
            "frames": {{
              "ee": {{"parent": {last}, "xyz": [{offset},0,0]}},
              "rcm_pre": {{"parent": {pre_parent}, "xyz": [{pre_xyz},0,0]}},
              "rcm_post": {{"parent": {last}, "xyz": [{offset},0,0]}}
            }}}}"#,
        joints.join(",")
    );
    load_chain(&doc).unwrap()
}

/// Strictly convex random QP with `m` inequality rows, Hessian eigenvalues in [0.1, 10].
pub fn random_qp(n: usize, m: usize, rng: &mut impl Rng) -> QpProblem {
    let q = random_spd(n, 0.1, 10.0, rng);
    let p = random_vector(n, rng) * 2.0;
    let c = random_matrix(m, n, rng);
    // d >= C x0 for a random x0 keeps the problem feasible.
    let x0 = random_vector(n, rng) * 0.5;
    let d = &c * x0 + DVector::from_fn(m, |_, _| rng.gen_range(0.0..0.5));
    QpProblem::new(q, p, c, d).unwrap()
}

pub fn random_spd(n: usize, lo: f64, hi: f64, rng: &mut impl Rng) -> DMatrix<f64> {
    let qr = random_matrix(n, n, rng).qr();
    let u = qr.q();
    let eig = DVector::from_fn(n, |_, _| rng.gen_range(lo..hi));
    let q = &u * DMatrix::from_diagonal(&eig) * u.transpose();
    (&q + q.transpose()) * 0.5
}

/// Independent KKT check for `min 1/2 x'Qx + p'x  s.t.  Cx <= d`.
/// Returns the largest of stationarity, primal feasibility, dual
/// feasibility and complementarity violations.
pub fn kkt_violation(problem: &QpProblem, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let stationarity = (&problem.q * x + &problem.p + problem.c.transpose() * y).amax();
    let slack = &problem.d - &problem.c * x;
    let primal = slack.iter().fold(0.0f64, |acc, s| acc.max(-s));
    let dual = y.iter().fold(0.0f64, |acc, v| acc.max(-v));
    let complementarity = slack
        .iter()
        .zip(y.iter())
        .fold(0.0f64, |acc, (s, v)| acc.max((s * v).abs()));
    stationarity.max(primal).max(dual).max(complementarity)
}

/// Minimizes a convex function over a box by repeatedly evaluating a
/// uniform grid around the incumbent and shrinking it.
pub fn refine_grid_minimum(
    f: impl Fn(&DVector<f64>) -> f64,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    points: usize,
    rounds: usize,
) -> DVector<f64> {
    let n = lower.len();
    let mut center = (lower + upper) * 0.5;
    let mut half = (upper - lower) * 0.5;
    let total = points.pow(n as u32);
    let mut x = DVector::zeros(n);
    for _ in 0..rounds {
        let mut best = center.clone();
        let mut best_val = f(&center);
        for idx in 0..total {
            let mut r = idx;
            for i in 0..n {
                let k = r % points;
                r /= points;
                let s = -1.0 + 2.0 * k as f64 / (points - 1) as f64;
                x[i] = (center[i] + s * half[i]).clamp(lower[i], upper[i]);
            }
            let v = f(&x);
            if v < best_val {
                best_val = v;
                best.copy_from(&x);
            }
        }
        center = best;
        half *= 0.6;
    }
    center
}

pub fn p_rcm(chain: &KinematicChain, q: &DVector<f64>, trocar: &Vector3<f64>) -> Vector3<f64> {
    rcm_state(chain, q, trocar).unwrap().p_rcm
}

/// A trocar a few millimetres off the shaft at a random depth.
pub fn trocar_near_shaft(chain: &KinematicChain, q: &DVector<f64>, r: &mut impl Rng) -> Vector3<f64> {
    let kin = chain.kinematics(q).unwrap();
    let pre = kin.frame_position(FRAME_RCM_PRE).unwrap();
    let post = kin.frame_position(FRAME_RCM_POST).unwrap();
    let along = pre + (post - pre) * r.gen_range(0.2..0.8);
    along + Vector3::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)) * 5e-3
}

/// Central differences with Richardson extrapolation, halving the step until
/// successive estimates agree.
pub fn refined_derivative(f: impl Fn(f64) -> f64) -> f64 {
    let central = |h: f64| (f(h) - f(-h)) / (2.0 * h);
    let mut h = 1e-2;
    let mut prev = (4.0 * central(h / 2.0) - central(h)) / 3.0;
    for _ in 0..12 {
        h /= 2.0;
        let next = (4.0 * central(h / 2.0) - central(h)) / 3.0;
        if (next - prev).abs() <= 1e-10 * next.abs().max(1e-8) {
            return next;
        }
        prev = next;
    }
    prev
}

pub fn box_problem(n: usize, r: &mut impl Rng) -> (QpProblem, DVector<f64>, DVector<f64>) {
    let q = random_spd(n, 0.5, 4.0, r);
    let p = random_vector(n, r) * 3.0;
    let lo = DVector::from_fn(n, |_, _| r.gen_range(-1.0..-0.2));
    let hi = DVector::from_fn(n, |_, _| r.gen_range(0.2..1.0));
    let mut c = DMatrix::zeros(2 * n, n);
    let mut d = DVector::zeros(2 * n);
    for i in 0..n {
        c[(i, i)] = 1.0;
        d[i] = hi[i];
        c[(n + i, i)] = -1.0;
        d[n + i] = -lo[i];
    }
    (QpProblem::new(q, p, c, d).unwrap(), lo, hi)
}

/// Random configuration with the trocar between 1 nm and 5 mm off the shaft and
/// a desired pose near the current one.
pub fn random_surgical_setup(
    chain: &KinematicChain,
    r: &mut impl Rng,
) -> (DVector<f64>, Vector3<f64>, Transform) {
    let q = random_q(chain, r, 0.1);
    let kin = chain.kinematics(&q).unwrap();
    let pre = kin.frame_position(FRAME_RCM_PRE).unwrap();
    let post = kin.frame_position(FRAME_RCM_POST).unwrap();
    let trocar = pre + (post - pre) * r.gen_range(0.3..0.7)
        + Vector3::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)) * (10f64.powf(r.gen_range(-9.0..-2.3)) / 3f64.sqrt());
    let desired = kin.frame_pose(FRAME_EE).unwrap()
        * Transform::from_xyz_rpy(
            [r.gen_range(-0.01..0.01), r.gen_range(-0.01..0.01), r.gen_range(-0.01..0.01)],
            [r.gen_range(-0.05..0.05), r.gen_range(-0.05..0.05), r.gen_range(-0.05..0.05)],
        );
    (q, trocar, desired)
}

/// Central-difference Jacobian of the closest shaft point to `trocar`.
pub fn rcm_point_jacobian_fd(chain: &KinematicChain, q: &DVector<f64>, trocar: &Vector3<f64>, h: f64) -> DMatrix<f64> {
    let mut numeric = DMatrix::zeros(3, chain.dof());
    for i in 0..chain.dof() {
        let mut plus = q.clone();
        plus[i] += h;
        let mut minus = q.clone();
        minus[i] -= h;
        let d = (p_rcm(chain, &plus, trocar) - p_rcm(chain, &minus, trocar)) / (2.0 * h);
        numeric.set_column(i, &d);
    }
    numeric
}
