mod common;

use common::{box_problem, kkt_violation, random_qp, random_spd, random_vector, refine_grid_minimum, rng};
use hqp_ik::qp::QpWarmStart;
use hqp_ik::{solve_qp, QpProblem, QpSettings, QpStatus};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn random_problems_pass_the_kkt_checker() {
    let mut r = rng(31);
    let settings = QpSettings::default();
    for trial in 0..200 {
        let n = r.gen_range(1..=12);
        let m = r.gen_range(0..=2 * n + 2);
        let problem = random_qp(n, m, &mut r);
        let sol = solve_qp(&problem, None, &settings).unwrap();
        assert_eq!(sol.status, QpStatus::Solved, "trial {trial}");
        let v = kkt_violation(&problem, &sol.x, &sol.y);
        assert!(v <= 1e-8, "trial {trial} (n={n}, m={m}): KKT violation {v:e}");
    }
}

#[test]
fn box_problems_match_grid_search() {
    let mut r = rng(32);
    let settings = QpSettings::default();
    for n in 1..=6 {
        let instances = if n <= 4 { 5 } else { 2 };
        for _ in 0..instances {
            let (problem, lo, hi) = box_problem(n, &mut r);
            let sol = solve_qp(&problem, None, &settings).unwrap();
            let points = if n <= 4 { 7 } else { 5 };
            let grid = refine_grid_minimum(|x| problem.objective(x), &lo, &hi, points, 60);
            let dx = (&sol.x - &grid).amax();
            assert!(dx <= 1e-4, "n={n}: solver {:?} grid {:?}", sol.x.as_slice(), grid.as_slice());
            assert!(problem.objective(&sol.x) <= problem.objective(&grid) + 1e-12);
        }
    }
}

#[test]
fn unconstrained_problem_is_a_linear_solve() {
    let mut r = rng(33);
    for _ in 0..20 {
        let n = r.gen_range(1..10);
        let q = random_spd(n, 0.01, 10.0, &mut r);
        let p = random_vector(n, &mut r);
        let exact = q.clone().cholesky().unwrap().solve(&(-&p));
        let sol = solve_qp(&QpProblem::unconstrained(q, p).unwrap(), None, &QpSettings::default()).unwrap();
        assert!((sol.x - exact).amax() < 1e-10);
    }
}

#[test]
fn warm_and_cold_starts_agree() {
    let mut r = rng(34);
    let settings = QpSettings::default();
    for _ in 0..50 {
        let n = r.gen_range(2..10);
        let base = random_qp(n, n + 3, &mut r);
        let first = solve_qp(&base, None, &settings).unwrap();
        let mut next = base.clone();
        next.p += random_vector(n, &mut r) * 0.05;
        next.d += DVector::from_fn(next.d.len(), |_, _| r.gen_range(0.0..0.02));
        let cold = solve_qp(&next, None, &settings).unwrap();
        let warm = solve_qp(&next, Some(&first.warm_start), &settings).unwrap();
        assert!((&cold.x - &warm.x).amax() < 1e-8);
        assert!(kkt_violation(&next, &warm.x, &warm.y) < 1e-8);
    }
}

#[test]
fn stale_or_mismatched_warm_start_is_harmless() {
    let mut r = rng(35);
    let problem = random_qp(5, 8, &mut r);
    let bogus = QpWarmStart {
        x: DVector::from_element(3, 100.0),
        z: DVector::zeros(2),
        y: DVector::zeros(1),
        active: vec![true; 4],
    };
    let sol = solve_qp(&problem, Some(&bogus), &QpSettings::default()).unwrap();
    assert!(kkt_violation(&problem, &sol.x, &sol.y) < 1e-8);
}

#[test]
fn solves_are_deterministic() {
    let mut r = rng(36);
    let problem = random_qp(8, 12, &mut r);
    let a = solve_qp(&problem, None, &QpSettings::default()).unwrap();
    let b = solve_qp(&problem, None, &QpSettings::default()).unwrap();
    assert_eq!(a.x.as_slice(), b.x.as_slice());
    assert_eq!(a.y.as_slice(), b.y.as_slice());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn duals_are_nonnegative_and_complementary(seed in any::<u64>(), n in 1usize..8, m in 0usize..12) {
        let mut r = rng(seed);
        let problem = random_qp(n, m, &mut r);
        let sol = solve_qp(&problem, None, &QpSettings::default()).unwrap();
        prop_assert!(sol.y.iter().all(|v| *v >= 0.0));
        prop_assert!(kkt_violation(&problem, &sol.x, &sol.y) <= 1e-8);
    }
}
