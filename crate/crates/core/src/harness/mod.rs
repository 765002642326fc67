//! Path-tracking experiments: reference paths, scenario files, the closed-loop
//! tracking run, metrics and report files.

pub mod path;
pub mod report;
pub mod scenario;
pub mod tracking;

pub use path::{helix_point, lissajous_point, reference_orientation, PathKind, PathSpec};
pub use report::{read_report, report_to_csv, to_json, write_atomic, write_report};
pub use scenario::{CheckResult, Mode, Scenario, ScenarioConfig, OVERRIDE_KEYS};
pub use tracking::{
    compare_runs, run_tracking, run_tracking_with, settle_configuration, tracking_step, Aggregates,
    ComparisonSummary, MetricDelta, Series, StepOutcome, TrackingReport, SERIES_COLUMNS,
};
