//! Produces scenario files with recorded initial configurations.
//!
//! For each scenario a seed configuration is driven onto the first path pose
//! (tool tip at `tip`, orientation fixed) with the RCM task disabled; in
//! constrained scenarios the trocar is then placed on the resulting shaft.
//!
//! Usage: cargo run --release --example seed_scenarios -- <data dir> [--evaluate]

use std::path::{Path, PathBuf};

use hqp_ik::chain::{load_chain_file, FRAME_RCM_POST, FRAME_RCM_PRE};
use hqp_ik::harness::{
    compare_runs, run_tracking, settle_configuration, Mode, PathKind, PathSpec, Scenario,
    ScenarioConfig,
};
use hqp_ik::{GainSet, Transform};
use nalgebra::{DVector, Vector3};

struct Seed {
    name: &'static str,
    chain: &'static str,
    mode: Mode,
    kind: PathKind,
    tip: [f64; 3],
    seed_q: Vec<f64>,
    /// Trocar position along the shaft, as a fraction from rcm_pre to rcm_post.
    trocar_fraction: f64,
}

fn seeds() -> Vec<Seed> {
    vec![
        Seed {
            name: "kc1_constrained_helix",
            chain: "kc1.json",
            mode: Mode::Constrained,
            kind: PathKind::Helix,
            tip: [0.55, 0.0, 0.05],
            seed_q: vec![1.09, 0.63, -0.42, -1.09, 0.81, 0.31, -0.03, -0.52, -0.55, 0.30],
            trocar_fraction: 0.6,
        },
        Seed {
            name: "kc2_constrained_helix",
            chain: "kc2.json",
            mode: Mode::Constrained,
            kind: PathKind::Helix,
            tip: [0.55, 0.0, 0.05],
            seed_q: vec![-0.77, 0.87, 0.08, -2.63, -0.26, 1.45, -0.17, -0.07, 0.52, 0.09, -0.27, 0.17],
            trocar_fraction: 0.6,
        },
        Seed {
            name: "kc1_unconstrained_lissajous",
            chain: "kc1.json",
            mode: Mode::Unconstrained,
            kind: PathKind::Lissajous,
            tip: [0.55, 0.0, 0.05],
            seed_q: vec![0.94, 1.43, 0.10, -2.02, 0.54, 2.00, -0.68, 0.51, -0.89, -0.60],
            trocar_fraction: 0.6,
        },
        Seed {
            name: "kc2_unconstrained_lissajous",
            chain: "kc2.json",
            mode: Mode::Unconstrained,
            kind: PathKind::Lissajous,
            tip: [0.55, 0.0, 0.05],
            seed_q: vec![-0.74, 0.76, 1.02, -2.09, 0.10, 0.33, 0.19, -0.19, 0.72, -0.34, -0.34, -0.65],
            trocar_fraction: 0.6,
        },
    ]
}

const HELIX_RADIUS: f64 = 0.035;
const LISSAJOUS_AMPLITUDES: [f64; 3] = [0.05, 0.03, 0.02];
const STEPS: usize = 2000;

fn build(seed: &Seed, data: &Path) -> Result<ScenarioConfig, Box<dyn std::error::Error>> {
    let chain = load_chain_file(data.join("chains").join(seed.chain))?;
    let gains = if chain.dof() >= 12 {
        GainSet::reference_twelve_dof()
    } else {
        GainSet::reference()
    };
    let tip = Vector3::from(seed.tip);
    let path = match seed.kind {
        PathKind::Helix => PathSpec::helix((tip - Vector3::new(HELIX_RADIUS, 0.0, 0.0)).into(), HELIX_RADIUS, STEPS),
        PathKind::Lissajous => PathSpec::lissajous(seed.tip, LISSAJOUS_AMPLITUDES, STEPS),
    };
    let target = Transform::new(path.rotation(), tip);
    let q0 = settle_configuration(
        &chain,
        &DVector::from_vec(seed.seed_q.clone()),
        &target,
        None,
        &gains,
        1e-3,
        20_000,
        1e-12,
    )?;
    let trocar = match seed.mode {
        Mode::Constrained => {
            let kin = chain.kinematics(&q0)?;
            let pre = kin.frame_position(FRAME_RCM_PRE)?;
            let post = kin.frame_position(FRAME_RCM_POST)?;
            let p = pre + (post - pre) * seed.trocar_fraction;
            Some([p.x, p.y, p.z])
        }
        Mode::Unconstrained => None,
    };
    Ok(ScenarioConfig {
        name: seed.name.to_string(),
        chain: format!("../chains/{}", seed.chain),
        mode: seed.mode,
        path,
        trocar,
        gains,
        dt: 1e-3,
        cycle_dt: 1e-3,
        optimize_manipulability: true,
        initial_q: q0.iter().copied().collect(),
    })
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let data = PathBuf::from(args.first().map(String::as_str).unwrap_or("data"));
    let evaluate = args.iter().any(|a| a == "--evaluate");
    let only: Option<&String> = args.iter().skip(1).find(|a| !a.starts_with("--"));

    for seed in seeds() {
        if only.is_some_and(|o| o != seed.name) {
            continue;
        }
        let config = build(&seed, &data)?;
        let out = data.join("scenarios").join(format!("{}.json", seed.name));
        std::fs::write(&out, serde_json::to_string_pretty(&config)? + "\n")?;
        println!("wrote {}", out.display());

        if evaluate {
            let scenario = Scenario::load(&out)?;
            let on = run_tracking(&scenario)?;
            let mut off_cfg = scenario.clone();
            off_cfg.config.optimize_manipulability = false;
            let off = run_tracking(&off_cfg)?;
            let cmp = compare_runs(&on, &off)?;
            println!(
                "  m avg {:.4} -> {:.4} ({:+.1}%), max {:.4} -> {:.4}, e_ee {:.2e}/{:.2e}, e_rcm {:?}/{:?}, t {:.0}us/{:.0}us",
                off.aggregates.avg_manipulability,
                on.aggregates.avg_manipulability,
                cmp.avg_manipulability.change_pct.unwrap_or(f64::NAN),
                off.aggregates.max_manipulability,
                on.aggregates.max_manipulability,
                off.aggregates.avg_pose_error,
                on.aggregates.avg_pose_error,
                off.aggregates.max_rcm_error,
                on.aggregates.max_rcm_error,
                off.aggregates.mean_solve_time_s * 1e6,
                on.aggregates.mean_solve_time_s * 1e6,
            );
        }
    }
    Ok(())
}
