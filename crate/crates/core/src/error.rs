use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("unknown frame `{0}`")]
    UnknownFrame(String),

    /// Rotation angle too close to pi for a unique logarithm.
    #[error("rotation angle {angle} is outside the principal branch of the SE(3) log")]
    LogBranch { angle: f64 },

    #[error("degenerate tool shaft: rcm_pre and rcm_post are {length:e} m apart")]
    DegenerateShaft { length: f64 },

    #[error("priority level {0} has no tasks and no constraints")]
    EmptyLevel(usize),

    #[error("QP solver stopped after {iterations} iterations without meeting tolerance")]
    MaxIterations { iterations: usize },

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("RCM error {error_m:e} m exceeds the {limit_m:e} m divergence limit")]
    RcmDivergence { error_m: f64, limit_m: f64 },

    #[error("reports come from different scenarios ({0} vs {1})")]
    ScenarioMismatch(String, String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
