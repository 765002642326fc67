mod common;

use common::{random_q, rng, shipped_chains};
use hqp_ik::chain::{FRAME_EE, FRAME_RCM_POST, FRAME_RCM_PRE};
use hqp_ik::{se3_exp, se3_log, Transform, Twist};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use proptest::prelude::*;
use rand::Rng;

const FRAMES: [&str; 3] = [FRAME_EE, FRAME_RCM_PRE, FRAME_RCM_POST];

/// Central differences of the frame origin and of the orientation
/// (rotation vector of `R(q+h) R(q-h)^T`), in base coordinates.
fn fd_jacobian(chain: &hqp_ik::KinematicChain, q: &DVector<f64>, frame: &str, h: f64) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(6, chain.dof());
    for i in 0..chain.dof() {
        let mut plus = q.clone();
        plus[i] += h;
        let mut minus = q.clone();
        minus[i] -= h;
        let tp = chain.forward_kinematics(&plus, frame).unwrap();
        let tm = chain.forward_kinematics(&minus, frame).unwrap();
        let lin = (tp.translation - tm.translation) / (2.0 * h);
        let rel = Transform::new(tp.rotation * tm.rotation.transpose(), Vector3::zeros());
        let ang = se3_log(&rel).unwrap().angular / (2.0 * h);
        out.fixed_view_mut::<3, 1>(0, i).copy_from(&lin);
        out.fixed_view_mut::<3, 1>(3, i).copy_from(&ang);
    }
    out
}

#[test]
fn jacobians_match_finite_differences() {
    let mut r = rng(11);
    for chain in shipped_chains() {
        for _ in 0..50 {
            let q = random_q(&chain, &mut r, 0.0);
            for frame in FRAMES {
                let analytic = chain.geometric_jacobian(&q, frame).unwrap().matrix;
                let numeric = fd_jacobian(&chain, &q, frame, 1e-6);
                let err = (&analytic - &numeric).amax();
                assert!(err < 1e-7, "{} {frame}: {err:e}", chain.name());
            }
        }
    }
}

#[test]
fn position_rows_are_the_top_block() {
    let mut r = rng(12);
    for chain in shipped_chains() {
        let q = random_q(&chain, &mut r, 0.0);
        for frame in FRAMES {
            let j = chain.geometric_jacobian(&q, frame).unwrap();
            let top = j.matrix.rows(0, 3).into_owned();
            assert!((j.position_rows() - top).amax() <= 1e-12);
            assert_eq!(j.ncols(), chain.dof());
        }
    }
}

#[test]
fn distal_joints_give_zero_columns() {
    let mut r = rng(13);
    for chain in shipped_chains() {
        let q = random_q(&chain, &mut r, 0.0);
        for frame in FRAMES {
            let parent = chain.frame(frame).unwrap().parent;
            let first_distal = parent.map_or(0, |p| p + 1);
            let j = chain.geometric_jacobian(&q, frame).unwrap().matrix;
            for c in first_distal..chain.dof() {
                assert_eq!(j.column(c).amax(), 0.0, "{} {frame} column {c}", chain.name());
            }
            // Perturbing a distal joint must not move the frame.
            for c in first_distal..chain.dof() {
                let mut moved = q.clone();
                moved[c] += 0.3;
                let a = chain.forward_kinematics(&q, frame).unwrap();
                let b = chain.forward_kinematics(&moved, frame).unwrap();
                assert!((a.translation - b.translation).norm() < 1e-15);
            }
        }
    }
}

#[test]
fn forward_kinematics_are_rigid_transforms() {
    let mut r = rng(14);
    for chain in shipped_chains() {
        for _ in 0..100 {
            let q = random_q(&chain, &mut r, 0.0);
            for frame in FRAMES {
                assert!(chain.forward_kinematics(&q, frame).unwrap().is_valid(1e-10));
            }
        }
    }
}

fn random_rotation_vector(r: &mut impl Rng, max_angle: f64) -> Vector3<f64> {
    let axis = Vector3::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
    let axis = if axis.norm() < 1e-6 { Vector3::x() } else { axis.normalize() };
    axis * r.gen_range(0.0..max_angle)
}

#[test]
fn log_exp_round_trip_on_random_poses() {
    let mut r = rng(15);
    for _ in 0..1000 {
        let xi = Twist::new(
            Vector3::new(r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0)),
            random_rotation_vector(&mut r, std::f64::consts::PI - 1e-3),
        );
        let t = se3_exp(&xi);
        assert!(t.is_valid(1e-10));
        let back = se3_exp(&se3_log(&t).unwrap());
        let err = (back.rotation - t.rotation).amax().max((back.translation - t.translation).amax());
        assert!(err <= 1e-9, "round trip error {err:e}");
    }
}

#[test]
fn log_near_identity_and_near_pi() {
    for angle in [0.0, 1e-12, 1e-9, 1e-7, 1e-4, 3.0, std::f64::consts::PI - 1e-5] {
        let xi = Twist::new(Vector3::new(0.1, -0.2, 0.3), Vector3::new(1.0, 2.0, -1.0).normalize() * angle);
        let t = se3_exp(&xi);
        let log = se3_log(&t).unwrap();
        assert!((log.to_vector() - xi.to_vector()).amax() < 1e-8, "angle {angle}");
    }
    let flip = Transform::new(Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0)), Vector3::zeros());
    assert!(se3_log(&flip).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn exp_log_inverse_for_small_twists(
        v in prop::array::uniform3(-1.0f64..1.0),
        w in prop::array::uniform3(-1.0f64..1.0),
    ) {
        let xi = Twist::new(Vector3::from(v), Vector3::from(w));
        let back = se3_log(&se3_exp(&xi)).unwrap();
        prop_assert!((back.to_vector() - xi.to_vector()).amax() < 1e-10);
    }

    #[test]
    fn jacobian_predicts_small_motions(seed in any::<u64>(), scale in 1e-5f64..1e-4) {
        let mut r = rng(seed);
        for chain in shipped_chains() {
            let q = random_q(&chain, &mut r, 0.05);
            let dq = common::random_vector(chain.dof(), &mut r) * scale;
            let j = chain.geometric_jacobian(&q, FRAME_EE).unwrap().matrix;
            let a = chain.forward_kinematics(&q, FRAME_EE).unwrap();
            let b = chain.forward_kinematics(&(&q + &dq), FRAME_EE).unwrap();
            let predicted = (&j * &dq).rows(0, 3).into_owned();
            let actual = b.translation - a.translation;
            // Second-order remainder bound for links of about a meter.
            prop_assert!((predicted - DVector::from_column_slice(actual.as_slice())).amax() < 10.0 * scale * scale * chain.dof() as f64);
        }
    }
}
