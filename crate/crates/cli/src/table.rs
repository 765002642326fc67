use std::fmt::Write as _;

use hqp_ik::harness::{ComparisonSummary, Mode, TrackingReport};

/// Small magnitudes in scientific notation, the rest with four decimals.
pub fn number(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-3 {
        format!("{v:.3e}")
    } else {
        format!("{v:.4}")
    }
}

fn optional(v: Option<f64>, scale: f64) -> String {
    v.map_or_else(|| "-".to_string(), |v| number(v * scale))
}

fn percent(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |p| format!("{p:+.1}%"))
}

fn flag(on: bool) -> &'static str {
    if on {
        "on"
    } else {
        "off"
    }
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Constrained => "constrained",
        Mode::Unconstrained => "unconstrained",
    }
}

pub fn report_table(r: &TrackingReport) -> String {
    let a = &r.aggregates;
    let rows = [
        ("Avg. Manipulability", number(a.avg_manipulability)),
        ("Max. Manipulability", number(a.max_manipulability)),
        ("Avg. RCM error (mm)", optional(a.avg_rcm_error, 1e3)),
        ("Max. RCM error (mm)", optional(a.max_rcm_error, 1e3)),
        ("Avg. EE pose error", number(a.avg_pose_error)),
        ("Mean solve time (ms)", number(a.mean_solve_time_s * 1e3)),
        ("Max. solve time (ms)", number(a.max_solve_time_s * 1e3)),
    ];
    let mut out = format!(
        "{} ({}, {}, optimization {}, {} steps)\n",
        r.scenario,
        r.chain,
        mode_name(r.mode),
        flag(r.optimize_manipulability),
        a.steps
    );
    for (label, value) in rows {
        let _ = writeln!(out, "  {label:<22} {value:>12}");
    }
    out
}

pub fn comparison_table(c: &ComparisonSummary) -> String {
    let rows = [
        ("Avg. Manipulability", &c.avg_manipulability, 1.0),
        ("Max. Manipulability", &c.max_manipulability, 1.0),
        ("Avg. RCM error (mm)", &c.avg_rcm_error, 1e3),
        ("Avg. EE pose error", &c.avg_pose_error, 1.0),
        ("Mean solve time (ms)", &c.mean_solve_time_s, 1e3),
        ("Max. solve time (ms)", &c.max_solve_time_s, 1e3),
    ];
    let mut out = format!("{}\n", c.scenario);
    let _ = writeln!(
        out,
        "  {:<22} {:>22} {:>22} {:>9}",
        "", "Without optimization", "With optimization", "Change"
    );
    for (label, d, scale) in rows {
        let _ = writeln!(
            out,
            "  {label:<22} {:>22} {:>22} {:>9}",
            optional(d.without_optimization, scale),
            optional(d.with_optimization, scale),
            percent(d.change_pct)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(number(0.5), "0.5000");
        assert_eq!(number(2.5e-6), "2.500e-6");
        assert_eq!(number(0.0), "0.0000");
        assert_eq!(percent(Some(9.84)), "+9.8%");
        assert_eq!(percent(None), "-");
    }
}
