//! Random search for initial configurations, as used to pick the seeds in
//! `seed_scenarios.rs`.
//!
//! Each candidate is settled onto the first path pose and rejected if it ends
//! up closer than `MIN_MARGIN` to a joint limit. Survivors are run with and
//! without manipulability optimization and printed one per line; sort the
//! output by gain to rank them.
//!
//! Usage: cargo run --release --example search_seeds -- <chain file> <constrained|unconstrained> [tries] [rng seed]

use std::path::PathBuf;

use hqp_ik::chain::{load_chain_file, FRAME_RCM_POST, FRAME_RCM_PRE};
use hqp_ik::harness::{
    compare_runs, run_tracking, settle_configuration, Mode, PathSpec, Scenario, ScenarioConfig, TrackingReport,
};
use hqp_ik::{GainSet, KinematicChain, Transform};
use nalgebra::{DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Same path placement as `seed_scenarios.rs`.
const TIP: [f64; 3] = [0.55, 0.0, 0.05];
const HELIX_RADIUS: f64 = 0.035;
const LISSAJOUS_AMPLITUDES: [f64; 3] = [0.05, 0.03, 0.02];
const STEPS: usize = 2000;
const TROCAR_FRACTION: f64 = 0.6;

const MIN_MARGIN: f64 = 0.15;
/// Arm joints are sampled around an elbow-up posture, tool joints around zero.
const ARM_CENTER: [f64; 7] = [0.0, 0.5, 0.0, -1.6, 0.0, 1.04, 0.0];
const ARM_SPREAD: f64 = 1.2;
const TOOL_SPREAD: f64 = 0.9;

fn limit_margin(chain: &KinematicChain, q: &[f64]) -> f64 {
    let (lo, hi) = (chain.lower_limits(), chain.upper_limits());
    q.iter()
        .enumerate()
        .map(|(i, v)| (v - lo[i]).min(hi[i] - v))
        .fold(f64::INFINITY, f64::min)
}

fn run_margin(chain: &KinematicChain, r: &TrackingReport) -> f64 {
    r.q.iter().map(|q| limit_margin(chain, q)).fold(f64::INFINITY, f64::min)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let [chain_file, mode, rest @ ..] = args.as_slice() else {
        return Err("usage: search_seeds <chain file> <constrained|unconstrained> [tries] [rng seed]".into());
    };
    let mode = match mode.as_str() {
        "constrained" => Mode::Constrained,
        "unconstrained" => Mode::Unconstrained,
        other => return Err(format!("unknown mode `{other}`").into()),
    };
    let tries: usize = rest.first().map_or(Ok(100), |s| s.parse())?;
    let seed: u64 = rest.get(1).map_or(Ok(1), |s| s.parse())?;

    let chain = load_chain_file(PathBuf::from(chain_file))?;
    let gains = if chain.dof() >= 12 {
        GainSet::reference_twelve_dof()
    } else {
        GainSet::reference()
    };
    let tip = Vector3::from(TIP);
    let path = match mode {
        Mode::Constrained => PathSpec::helix((tip - Vector3::new(HELIX_RADIUS, 0.0, 0.0)).into(), HELIX_RADIUS, STEPS),
        Mode::Unconstrained => PathSpec::lissajous(TIP, LISSAJOUS_AMPLITUDES, STEPS),
    };
    let target = Transform::new(path.rotation(), tip);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for _ in 0..tries {
        let candidate: Vec<f64> = (0..chain.dof())
            .map(|i| match ARM_CENTER.get(i) {
                Some(c) => c + rng.gen_range(-ARM_SPREAD..ARM_SPREAD),
                None => rng.gen_range(-TOOL_SPREAD..TOOL_SPREAD),
            })
            .map(|v| (v * 100.0).round() / 100.0)
            .collect();
        let seed_q = DVector::from_vec(candidate.clone());
        let Ok(q0) = settle_configuration(&chain, &seed_q, &target, None, &gains, 1e-3, 20_000, 1e-12) else {
            continue;
        };
        if limit_margin(&chain, q0.as_slice()) < MIN_MARGIN {
            continue;
        }
        let trocar = match mode {
            Mode::Constrained => {
                let kin = chain.kinematics(&q0)?;
                let pre = kin.frame_position(FRAME_RCM_PRE)?;
                let post = kin.frame_position(FRAME_RCM_POST)?;
                Some((pre + (post - pre) * TROCAR_FRACTION).into())
            }
            Mode::Unconstrained => None,
        };
        let config = ScenarioConfig {
            name: "candidate".into(),
            chain: chain_file.clone(),
            mode,
            path: path.clone(),
            trocar,
            gains,
            dt: 1e-3,
            cycle_dt: 1e-3,
            optimize_manipulability: true,
            initial_q: q0.iter().copied().collect(),
        };
        let on_scenario = Scenario::new(config, chain.clone());
        let mut off_scenario = on_scenario.clone();
        off_scenario.config.optimize_manipulability = false;
        let (Ok(on), Ok(off)) = (run_tracking(&on_scenario), run_tracking(&off_scenario)) else {
            continue;
        };
        let cmp = compare_runs(&on, &off)?;
        println!(
            "gain {:+6.1}% max gain {:+6.1}% pose error {:.1e}/{:.1e} margin {:.2}/{:.2} seed {:?}",
            cmp.avg_manipulability.change_pct.unwrap_or(f64::NAN),
            cmp.max_manipulability.change_pct.unwrap_or(f64::NAN),
            off.aggregates.avg_pose_error,
            on.aggregates.avg_pose_error,
            run_margin(&chain, &off),
            run_margin(&chain, &on),
            candidate,
        );
    }
    Ok(())
}
