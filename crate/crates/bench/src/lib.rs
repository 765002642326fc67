//! Fixtures shared by the criterion benches: shipped scenarios and a
//! deterministic generator of strictly convex QPs.

use std::path::PathBuf;

use hqp_ik::harness::Scenario;
use hqp_ik::{build_surgical_problem, QpProblem, SurgicalProblem, Transform};
use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CONSTRAINED: [&str; 2] = ["kc1_constrained_helix", "kc2_constrained_helix"];
pub const UNCONSTRAINED: [&str; 2] = ["kc1_unconstrained_lissajous", "kc2_unconstrained_lissajous"];

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn scenario(name: &str) -> Scenario {
    let path = data_dir().join("scenarios").join(format!("{name}.json"));
    Scenario::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// State at the first control cycle of a scenario.
pub struct CycleFixture {
    pub scenario: Scenario,
    pub q: DVector<f64>,
    pub desired: Transform,
    pub trocar: Option<Vector3<f64>>,
}

impl CycleFixture {
    pub fn new(name: &str) -> Self {
        let scenario = scenario(name);
        let cfg = &scenario.config;
        let desired = cfg.path.point(cfg.path.parameter(0));
        Self {
            q: cfg.initial_configuration(),
            trocar: cfg.trocar_point(),
            desired,
            scenario,
        }
    }

    pub fn problem(&self) -> SurgicalProblem {
        let cfg = &self.scenario.config;
        build_surgical_problem(
            &self.scenario.chain,
            &self.q,
            &self.desired,
            self.trocar.as_ref(),
            &cfg.gains,
            &cfg.options(),
        )
        .expect("shipped scenario builds")
    }
}

/// Strictly convex QP with `n` variables and `m` feasible inequality rows.
pub fn random_qp(n: usize, m: usize, seed: u64) -> QpProblem {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut uniform = |rows, cols| DMatrix::from_fn(rows, cols, |_, _| r.gen_range(-1.0..1.0));
    let a = uniform(n, n);
    let q = a.transpose() * &a + DMatrix::identity(n, n) * 0.1;
    let p = uniform(n, 1).column(0).into_owned();
    let c = uniform(m, n);
    let x0 = uniform(n, 1).column(0) * 0.5;
    let d = &c * x0 + DVector::from_element(m, 0.25);
    QpProblem::new(q, p, c, d).expect("well-formed problem")
}
