use std::path::{Path, PathBuf};

use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};

use super::path::PathSpec;
use crate::chain::{load_chain_file, KinematicChain};
use crate::error::{Error, Result};
use crate::problem::{GainSet, ProblemOptions};
use crate::tasks::rcm_state;

/// Largest RCM error tolerated at the start of a constrained run (m).
pub const MAX_INITIAL_RCM_ERROR: f64 = 5e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Constrained,
    Unconstrained,
}

/// Scenario file contents. `chain` is resolved relative to the scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub chain: String,
    pub mode: Mode,
    pub path: PathSpec,
    #[serde(default)]
    pub trocar: Option<[f64; 3]>,
    pub gains: GainSet,
    pub dt: f64,
    pub cycle_dt: f64,
    pub optimize_manipulability: bool,
    pub initial_q: Vec<f64>,
}

/// Keys accepted by [`ScenarioConfig::apply_override`].
pub const OVERRIDE_KEYS: [&str; 14] = [
    "Kt1", "Kt2", "Kt3", "Kr1", "Kr2", "Kr3", "Kd1", "Kd2", "Kw1", "Kw2", "dt", "cycle_dt",
    "optimize_manipulability", "n_steps",
];

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn options(&self) -> ProblemOptions {
        ProblemOptions {
            dt: self.dt,
            cycle_dt: self.cycle_dt,
            optimize_manipulability: self.optimize_manipulability,
        }
    }

    pub fn trocar_point(&self) -> Option<Vector3<f64>> {
        match self.mode {
            Mode::Constrained => self.trocar.map(Vector3::from),
            Mode::Unconstrained => None,
        }
    }

    pub fn initial_configuration(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.initial_q)
    }

    /// Applies a `key=value` override. Gain keys are case-insensitive.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (key, value) = spec
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("override `{spec}` is not of the form key=value")))?;
        let key = key.trim();
        let value = value.trim();
        let number = || {
            value
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("override {key}: `{value}` is not a number")))
        };
        match key {
            "dt" => self.dt = number()?,
            "cycle_dt" => self.cycle_dt = number()?,
            "n_steps" => {
                self.path.n_steps = value
                    .parse()
                    .map_err(|_| Error::Parse(format!("override n_steps: `{value}` is not an integer")))?
            }
            "optimize_manipulability" | "optimize" => {
                self.optimize_manipulability = value
                    .parse()
                    .map_err(|_| Error::Parse(format!("override {key}: `{value}` is not a boolean")))?
            }
            _ => {
                let v = number()?;
                if !self.gains.set(key, v) {
                    return Err(Error::Parse(format!(
                        "unknown override key `{key}` (expected one of {})",
                        OVERRIDE_KEYS.join(", ")
                    )));
                }
            }
        }
        Ok(())
    }

    /// Stable identifier of the scenario, ignoring the optimization flag.
    pub fn fingerprint(&self) -> String {
        let mut base = self.clone();
        base.optimize_manipulability = false;
        let canonical = serde_json::to_string(&base).expect("scenario serializes");
        format!("{:016x}", fnv1a(canonical.as_bytes()))
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// A scenario with its chain loaded.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub chain: KinematicChain,
    pub source: Option<PathBuf>,
}

impl Scenario {
    pub fn new(config: ScenarioConfig, chain: KinematicChain) -> Self {
        Self {
            config,
            chain,
            source: None,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let config = ScenarioConfig::from_json(&text)?;
        let chain_path = path.parent().unwrap_or_else(|| Path::new(".")).join(&config.chain);
        let chain = load_chain_file(&chain_path)?;
        Ok(Self {
            config,
            chain,
            source: Some(path.to_path_buf()),
        })
    }

    /// Runs every invariant check, returning one entry per check.
    pub fn check(&self) -> Vec<CheckResult> {
        let c = &self.config;
        let mut out = Vec::new();
        let mut push = |name: &'static str, r: std::result::Result<(), String>| {
            out.push(CheckResult {
                name,
                outcome: r,
            })
        };

        push("gains", c.gains.validate().map_err(|e| e.to_string()));
        push("path", c.path.validate().map_err(|e| e.to_string()));
        push(
            "time steps",
            if c.dt > 0.0 && c.cycle_dt > 0.0 && c.dt.is_finite() && c.cycle_dt.is_finite() {
                Ok(())
            } else {
                Err(format!("dt and cycle_dt must be positive (dt={}, cycle_dt={})", c.dt, c.cycle_dt))
            },
        );
        let q = c.initial_configuration();
        let dims_ok = q.len() == self.chain.dof();
        push(
            "initial_q dimension",
            if dims_ok {
                Ok(())
            } else {
                Err(format!("initial_q has {} entries, chain has {} joints", q.len(), self.chain.dof()))
            },
        );
        if dims_ok {
            push(
                "initial_q limits",
                if self.chain.within_limits(&q, 0.0) {
                    Ok(())
                } else {
                    Err("initial_q violates joint limits".into())
                },
            );
        }
        match c.mode {
            Mode::Constrained => match c.trocar {
                None => push("trocar", Err("constrained mode requires field `trocar`".into())),
                Some(t) if dims_ok => {
                    let r = rcm_state(&self.chain, &q, &Vector3::from(t))
                        .map_err(|e| e.to_string())
                        .and_then(|s| {
                            if s.error_norm() < MAX_INITIAL_RCM_ERROR {
                                Ok(())
                            } else {
                                Err(format!(
                                    "initial RCM error {:.3e} m exceeds {:.0e} m",
                                    s.error_norm(),
                                    MAX_INITIAL_RCM_ERROR
                                ))
                            }
                        });
                    push("trocar", r);
                }
                Some(_) => {}
            },
            Mode::Unconstrained => push("trocar", Ok(())),
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let failures: Vec<String> = self
            .check()
            .into_iter()
            .filter_map(|c| c.outcome.err().map(|e| format!("{}: {e}", c.name)))
            .collect();
        if failures.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(failures.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub outcome: std::result::Result<(), String>,
}
