mod common;

use common::{scenario, SCENARIOS};
use hqp_ik::chain::FRAME_EE;
use hqp_ik::harness::{
    compare_runs, read_report, report_to_csv, run_tracking, tracking_step, write_report, Mode, PathSpec,
    Scenario, SERIES_COLUMNS,
};
use hqp_ik::{Error, GainSet, HierarchySolver, ProblemOptions};

/// The first `steps` cycles of a shipped scenario, at its original step size.
fn short(name: &str, steps: usize) -> Scenario {
    let mut s = scenario(name);
    let path = &mut s.config.path;
    path.t_end = path.parameter(steps - 1);
    path.n_steps = steps;
    s
}

#[test]
fn shipped_scenarios_validate() {
    for name in SCENARIOS {
        let s = scenario(name);
        for check in s.check() {
            assert!(check.outcome.is_ok(), "{name}: {}: {:?}", check.name, check.outcome);
        }
        assert_eq!(s.config.name, name);
        assert_eq!(s.config.mode == Mode::Constrained, s.config.trocar.is_some());
    }
}

#[test]
fn static_target_at_rest_is_a_fixed_point() {
    for name in SCENARIOS {
        let s = scenario(name);
        let chain = &s.chain;
        let mut q = s.config.initial_configuration();
        let q0 = q.clone();
        let here = chain.forward_kinematics(&q, FRAME_EE).unwrap();
        let options = ProblemOptions {
            optimize_manipulability: false,
            ..s.config.options()
        };
        let mut solver = HierarchySolver::default();
        for _ in 0..10 {
            tracking_step(chain, &mut q, &here, s.config.trocar_point().as_ref(), &s.config.gains, &options, &mut solver)
                .unwrap();
        }
        assert!((&q - &q0).amax() < 1e-9, "{name} drifted by {:e}", (&q - &q0).amax());
    }
}

#[test]
fn runs_are_reproducible() {
    for name in SCENARIOS {
        let s = short(name, 150);
        let a = run_tracking(&s).unwrap().without_timing();
        let b = run_tracking(&s).unwrap().without_timing();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}

#[test]
fn zero_manipulability_weight_equals_off_run() {
    for name in SCENARIOS {
        let s = short(name, 150);
        let mut zero = s.clone();
        zero.config.apply_override("Kt3=0").unwrap();
        let mut off = s.clone();
        off.config.apply_override("optimize_manipulability=false").unwrap();
        let a = run_tracking(&zero).unwrap();
        let b = run_tracking(&off).unwrap();
        assert_eq!(a.series.m, b.series.m);
        assert_eq!(a.series.e_ee_norm, b.series.e_ee_norm);
        assert_eq!(a.series.e_rcm_norm, b.series.e_rcm_norm);
    }
}

#[test]
fn report_files_round_trip() {
    let s = short("kc1_constrained_helix", 40);
    let report = run_tracking(&s).unwrap();
    let dir = std::env::temp_dir().join(format!("hqp-ik-report-{}", std::process::id()));
    write_report(&report, &dir, "run").unwrap();
    let back = read_report(&dir.join("run.json")).unwrap();
    assert_eq!(back, report);
    assert_eq!(back.recompute_aggregates().unwrap(), report.aggregates);

    let csv = std::fs::read_to_string(dir.join("run.csv")).unwrap();
    assert_eq!(csv, report_to_csv(&report));
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), SERIES_COLUMNS.join(","));
    assert_eq!(lines.count(), 40);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn aggregates_match_the_series() {
    let report = run_tracking(&short("kc2_unconstrained_lissajous", 60)).unwrap();
    let s = &report.series;
    let mean = s.m.iter().sum::<f64>() / s.m.len() as f64;
    assert!((report.aggregates.avg_manipulability - mean).abs() < 1e-15);
    assert_eq!(report.aggregates.avg_rcm_error, None);
    assert_eq!(report.q.len(), 60);
    assert!(s.step.iter().enumerate().all(|(i, k)| i == *k));
}

#[test]
fn comparisons_require_the_same_scenario() {
    let a = run_tracking(&short("kc1_constrained_helix", 10)).unwrap();
    let b = run_tracking(&short("kc1_constrained_helix", 11)).unwrap();
    assert!(matches!(compare_runs(&a, &b), Err(Error::ScenarioMismatch(..))));
    let mut off = short("kc1_constrained_helix", 10);
    off.config.optimize_manipulability = false;
    let c = run_tracking(&off).unwrap();
    assert!(compare_runs(&a, &c).is_ok());
}

#[test]
fn invalid_scenarios_are_reported() {
    let mut s = scenario("kc1_constrained_helix");
    s.config.initial_q.pop();
    assert!(s.check().iter().any(|c| c.name == "initial_q dimension" && c.outcome.is_err()));
    assert!(matches!(run_tracking(&s), Err(Error::Validation(_))));

    let mut s = scenario("kc1_constrained_helix");
    s.config.trocar = Some([0.0, 0.0, 0.0]);
    assert!(s.check().iter().any(|c| c.name == "trocar" && c.outcome.is_err()));

    let mut s = scenario("kc2_unconstrained_lissajous");
    s.config.gains = GainSet { kd2: 0.0, ..s.config.gains };
    assert!(s.validate().is_err());

    let mut s = scenario("kc2_unconstrained_lissajous");
    s.config.path = PathSpec { amplitudes: vec![0.1], ..s.config.path.clone() };
    assert!(s.validate().is_err());
}
