use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use hqp_ik::harness::{
    compare_runs, read_report, run_tracking, to_json, write_atomic, write_report, Mode, Scenario, TrackingReport,
};
use hqp_ik::Error;

use crate::svg::{histogram, line_chart, Line, Sample};
use crate::table::{comparison_table, report_table};
use crate::{pool, Failure};

const HISTOGRAM_BINS: usize = 30;

pub struct RunOptions {
    pub scenarios: Vec<PathBuf>,
    pub out: PathBuf,
    pub overrides: Vec<String>,
    pub deterministic: bool,
}

fn load_code(e: &Error) -> u8 {
    match e {
        Error::Parse(_) | Error::Io(_) => Failure::PARSE,
        _ => Failure::INVALID,
    }
}

fn io_failure(path: &Path, e: Error) -> Failure {
    Failure::new(Failure::INVALID, format!("{}: {e}", path.display()))
}

pub fn validate(paths: &[PathBuf], verbose: u8) -> Result<(), Failure> {
    let mut code = 0;
    for path in paths {
        println!("{}", path.display());
        let scenario = match Scenario::load(path) {
            Ok(s) => s,
            Err(e) => {
                println!("  FAIL load: {e}");
                code = code.max(load_code(&e));
                continue;
            }
        };
        println!("  PASS chain: {} ({} joints)", scenario.chain.name(), scenario.chain.dof());
        for check in scenario.check() {
            match check.outcome {
                Ok(()) => println!("  PASS {}", check.name),
                Err(msg) => {
                    println!("  FAIL {}: {msg}", check.name);
                    code = code.max(Failure::INVALID);
                }
            }
        }
        if verbose > 0 {
            eprintln!("{}: fingerprint {}", scenario.config.name, scenario.config.fingerprint());
        }
    }
    if code == 0 {
        Ok(())
    } else {
        Err(Failure::new(code, "validation failed"))
    }
}

fn load_for_run(path: &Path, overrides: &[String], verbose: u8) -> Result<Scenario, Failure> {
    let fail = |code, e: Error| Failure::new(code, format!("{}: {e}", path.display()));
    let mut scenario = Scenario::load(path).map_err(|e| fail(load_code(&e), e))?;
    for o in overrides {
        scenario.config.apply_override(o).map_err(|e| fail(Failure::PARSE, e))?;
    }
    scenario.validate().map_err(|e| fail(Failure::INVALID, e))?;
    if verbose > 0 {
        eprintln!(
            "loaded {}: scenario {}, fingerprint {}, {} steps",
            path.display(),
            scenario.config.name,
            scenario.config.fingerprint(),
            scenario.config.path.n_steps
        );
    }
    Ok(scenario)
}

fn load_all(opts: &RunOptions, verbose: u8) -> Result<Vec<Scenario>, Failure> {
    let scenarios = opts
        .scenarios
        .iter()
        .map(|p| load_for_run(p, &opts.overrides, verbose))
        .collect::<Result<Vec<_>, _>>()?;
    let mut names = HashSet::new();
    for s in &scenarios {
        if !names.insert(s.config.name.as_str()) {
            return Err(Failure::new(
                Failure::INVALID,
                format!("scenario name `{}` appears twice; reports would overwrite each other", s.config.name),
            ));
        }
    }
    std::fs::create_dir_all(&opts.out).map_err(|e| io_failure(&opts.out, e.into()))?;
    Ok(scenarios)
}

fn timed_run(scenario: &Scenario, verbose: u8) -> Result<TrackingReport, Error> {
    let started = Instant::now();
    let report = run_tracking(scenario)?;
    if verbose > 0 {
        eprintln!(
            "{} (optimization {}): {:.2} s, {} gradient flags",
            scenario.config.name,
            if scenario.config.optimize_manipulability { "on" } else { "off" },
            started.elapsed().as_secs_f64(),
            report.gradient_flags.len()
        );
    }
    Ok(report)
}

fn stable(report: &TrackingReport, deterministic: bool) -> TrackingReport {
    if deterministic {
        report.without_timing()
    } else {
        report.clone()
    }
}

fn run_failure(failed: usize) -> Result<(), Failure> {
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::new(Failure::RUN, format!("{failed} run(s) failed")))
    }
}

pub fn run(opts: &RunOptions, verbose: u8) -> Result<(), Failure> {
    let threads = pool::thread_limit()?;
    let scenarios = load_all(opts, verbose)?;
    let results = pool::map(&scenarios, threads, |s| timed_run(s, verbose));
    let mut failed = 0;
    for (scenario, result) in scenarios.iter().zip(results) {
        let name = &scenario.config.name;
        match result {
            Ok(report) => {
                write_report(&stable(&report, opts.deterministic), &opts.out, name)
                    .map_err(|e| io_failure(&opts.out, e))?;
                print!("{}", report_table(&report));
            }
            Err(e) => {
                eprintln!("{name}: {e}");
                failed += 1;
            }
        }
    }
    run_failure(failed)
}

pub fn compare(opts: &RunOptions, verbose: u8) -> Result<(), Failure> {
    let threads = pool::thread_limit()?;
    let scenarios = load_all(opts, verbose)?;
    let jobs: Vec<Scenario> = scenarios
        .iter()
        .flat_map(|s| {
            [true, false].map(|flag| {
                let mut job = s.clone();
                job.config.optimize_manipulability = flag;
                job
            })
        })
        .collect();
    let mut results = pool::map(&jobs, threads, |s| timed_run(s, verbose)).into_iter();
    let mut failed = 0;
    for scenario in &scenarios {
        let name = &scenario.config.name;
        let (on, off) = match (results.next().unwrap(), results.next().unwrap()) {
            (Ok(on), Ok(off)) => (on, off),
            (on, off) => {
                for e in [on.err(), off.err()].into_iter().flatten() {
                    eprintln!("{name}: {e}");
                }
                failed += 1;
                continue;
            }
        };
        let (on_out, off_out) = (stable(&on, opts.deterministic), stable(&off, opts.deterministic));
        let written = compare_runs(&on_out, &off_out).map_err(|e| Failure::new(Failure::RUN, e.to_string()))?;
        let write = || -> Result<(), Error> {
            write_report(&on_out, &opts.out, &format!("{name}_on"))?;
            write_report(&off_out, &opts.out, &format!("{name}_off"))?;
            write_atomic(
                &opts.out.join(format!("{name}_comparison.json")),
                to_json(&written)?.as_bytes(),
            )
        };
        write().map_err(|e| io_failure(&opts.out, e))?;
        let shown = compare_runs(&on, &off).map_err(|e| Failure::new(Failure::RUN, e.to_string()))?;
        print!("{}", comparison_table(&shown));
    }
    run_failure(failed)
}

fn series_label(report: &TrackingReport, path: &Path, distinct_flags: bool) -> String {
    if distinct_flags {
        if report.optimize_manipulability {
            "with optimization".into()
        } else {
            "without optimization".into()
        }
    } else {
        path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
    }
}

pub fn plot(paths: &[PathBuf], out: &Path, verbose: u8) -> Result<(), Failure> {
    let mut reports = Vec::with_capacity(paths.len());
    for path in paths {
        let report = read_report(path).map_err(|e| Failure::new(load_code(&e), format!("{}: {e}", path.display())))?;
        report
            .recompute_aggregates()
            .map_err(|e| Failure::new(Failure::INVALID, format!("{}: {e}", path.display())))?;
        if let Some(first) = reports.first().map(|r: &TrackingReport| &r.fingerprint) {
            if *first != report.fingerprint {
                return Err(Failure::new(
                    Failure::INVALID,
                    format!("{}: {}", path.display(), Error::ScenarioMismatch(first.clone(), report.fingerprint.clone())),
                ));
            }
        }
        reports.push(report);
    }

    let flags: HashSet<bool> = reports.iter().map(|r| r.optimize_manipulability).collect();
    let distinct = flags.len() == reports.len();
    let labels: Vec<String> = reports.iter().zip(paths).map(|(r, p)| series_label(r, p, distinct)).collect();
    let name = &reports[0].scenario;
    let constrained = reports[0].mode == Mode::Constrained;

    let lines = |f: &dyn Fn(&TrackingReport, usize) -> f64| -> Vec<Line> {
        reports
            .iter()
            .zip(&labels)
            .map(|(r, label)| Line {
                label: label.clone(),
                points: (0..r.series.len()).map(|i| (r.series.step[i] as f64, f(r, i))).collect(),
            })
            .collect()
    };
    let manipulability = line_chart(
        &format!("{name}: manipulability index"),
        "trajectory step",
        "manipulability m (dimensionless)",
        &lines(&|r, i| r.series.m[i]),
    );
    let rcm_title = if constrained {
        format!("{name}: RCM error")
    } else {
        format!("{name}: RCM error (no RCM constraint)")
    };
    let rcm = line_chart(&rcm_title, "trajectory step", "RCM error (mm)", &lines(&|r, i| r.series.e_rcm_norm[i] * 1e3));
    let samples: Vec<Sample> = reports
        .iter()
        .zip(&labels)
        .map(|(r, label)| Sample {
            label: label.clone(),
            values: r.series.solve_time_s.iter().map(|t| t * 1e3).collect(),
        })
        .collect();
    let timing = histogram(
        &format!("{name}: solve time per control cycle"),
        "solve time (ms)",
        "cycles (count)",
        &samples,
        HISTOGRAM_BINS,
    );

    std::fs::create_dir_all(out).map_err(|e| io_failure(out, e.into()))?;
    for (suffix, svg) in [("manipulability", manipulability), ("rcm_error", rcm), ("solve_time", timing)] {
        let file = out.join(format!("{name}_{suffix}.svg"));
        write_atomic(&file, svg.as_bytes()).map_err(|e| io_failure(&file, e))?;
        if verbose > 0 {
            eprintln!("wrote {}", file.display());
        }
        println!("{}", file.display());
    }
    Ok(())
}
