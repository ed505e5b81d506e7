//! Library side of the `bicopter` command-line tool.
//!
//! Each command writes its report to the supplied writers and returns an
//! [`ExitStatus`]; `main` only parses arguments and maps the status to a
//! process exit code.

pub mod config;

use std::io::Write;
use std::path::{Path, PathBuf};

use safe_bicopter::ctrl::{error_stack, ControllerConfig};
use safe_bicopter::derivcheck::{verify_derivatives_with, StackFn, DEFAULT_THRESHOLD};
use safe_bicopter::model::PlantParams;
use safe_bicopter::sim::{
    monitor_invariants, read_log, run_scenario, write_log, InvariantKind, MonitorReport,
    ScenarioLog,
};

pub use config::{ConfigError, PlanConfig, ScenarioConfig};

/// Environment variable naming a directory that relative output paths are
/// resolved against.
pub const OUT_DIR_ENV: &str = "BICOPTER_OUT_DIR";

pub const DEFAULT_LOG_NAME: &str = "bicopter_log.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    VerificationFailed = 1,
    InputError = 2,
    RuntimeError = 3,
}

impl ExitStatus {
    pub fn code(self) -> u8 {
        self as u8
    }
}

// Report output is best effort; a closed stdout must not turn a clean run
// into a failure.
macro_rules! say {
    ($w:expr, $($arg:tt)*) => {
        let _ = writeln!($w, $($arg)*);
    };
}

fn load(
    path: &Path,
    err: &mut dyn Write,
) -> Option<(ScenarioConfig, safe_bicopter::sim::Scenario)> {
    let cfg = match ScenarioConfig::load(path) {
        Ok(c) => c,
        Err(e) => {
            say!(err, "error: invalid config {}: {e}", path.display());
            return None;
        }
    };
    match cfg.to_scenario() {
        Ok(sc) => Some((cfg, sc)),
        Err(e) => {
            say!(err, "error: invalid config {}: {e}", path.display());
            None
        }
    }
}

/// Picks the log path: `--out`, then the config's `output`, then
/// [`DEFAULT_LOG_NAME`]. A relative result is placed under `out_dir` when
/// one is given.
pub fn resolve_output(
    flag: Option<&Path>,
    from_config: Option<&Path>,
    out_dir: Option<&Path>,
) -> PathBuf {
    let path = flag
        .or(from_config)
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_LOG_NAME));
    match out_dir {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path,
    }
}

fn summarize(log: &ScenarioLog, sc: &safe_bicopter::sim::Scenario, out: &mut dyn Write) {
    let Some(last) = log.last() else {
        say!(out, "rows: 0");
        return;
    };
    let mut max_r = [0.0f64; 2];
    let mut max_v = [0.0f64; 2];
    let mut min_det = f64::INFINITY;
    for r in &log.rows {
        for i in 0..2 {
            max_r[i] = max_r[i].max(r.x1[i].abs());
            max_v[i] = max_v[i].max(r.x2[i].abs());
        }
        min_det = min_det.min(r.det_psi.abs());
    }
    let safe = &sc.cfg.safe;
    say!(out, "rows: {} (t = 0 .. {})", log.rows.len(), last.t);
    say!(
        out,
        "final position error: {:.3e} m",
        (last.x1 - last.x_d1).norm()
    );
    say!(out, "final speed: {:.3e} m/s", last.x2.norm());
    say!(
        out,
        "max |r|: [{}, {}] (bound [{}, {}])",
        max_r[0],
        max_r[1],
        safe.xbar1[0],
        safe.xbar1[1]
    );
    say!(
        out,
        "max |v|: [{}, {}] (bound [{}, {}])",
        max_v[0],
        max_v[1],
        safe.xbar2[0],
        safe.xbar2[1]
    );
    say!(out, "min |det Psi|: {min_det:.6e}");
}

fn print_verdicts(report: &MonitorReport, out: &mut dyn Write) {
    let safe_violation = [InvariantKind::PositionBound, InvariantKind::VelocityBound]
        .into_iter()
        .filter_map(|k| report.first(k))
        .min_by_key(|v| v.row);
    match safe_violation {
        None => {
            say!(out, "safe-set: OK");
        }
        Some(v) => {
            say!(out, "safe-set: VIOLATED at t = {} ({})", v.t, v.detail);
        }
    }
    for kind in InvariantKind::ALL {
        match report.first(kind) {
            None => {
                say!(out, "  {}: OK", kind.name());
            }
            Some(v) => {
                say!(
                    out,
                    "  {}: VIOLATED at t = {} (row {}): {}",
                    kind.name(),
                    v.t,
                    v.row,
                    v.detail
                );
            }
        }
    }
}

/// Runs the scenario, writes the log, prints a summary and the monitor
/// verdicts.
pub fn cmd_simulate(
    config_path: &Path,
    out_flag: Option<&Path>,
    out_dir: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> ExitStatus {
    let Some((cfg, sc)) = load(config_path, err) else {
        return ExitStatus::InputError;
    };
    let path = resolve_output(out_flag, cfg.output.as_deref(), out_dir);
    let (log, failure) = match run_scenario(&sc) {
        Ok(log) => (log, None),
        Err(f) => (f.log.clone(), Some(f)),
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        if let Err(e) = std::fs::create_dir_all(parent) {
            say!(err, "error: cannot create {}: {e}", parent.display());
            return ExitStatus::RuntimeError;
        }
    }
    if let Err(e) = write_log(&log, &path) {
        say!(err, "error: cannot write log {}: {e}", path.display());
        return ExitStatus::RuntimeError;
    }
    summarize(&log, &sc, out);
    say!(out, "log: {}", path.display());
    if let Some(f) = failure {
        say!(out, "safe-set: ABORTED");
        say!(err, "error: {f}");
        return ExitStatus::RuntimeError;
    }
    let report = monitor_invariants(&log, &sc);
    print_verdicts(&report, out);
    if report.is_clean() {
        ExitStatus::Success
    } else {
        ExitStatus::VerificationFailed
    }
}

/// Re-runs the invariant monitors on an existing log.
pub fn cmd_check(
    log_path: &Path,
    config_path: &Path,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> ExitStatus {
    let Some((_, sc)) = load(config_path, err) else {
        return ExitStatus::InputError;
    };
    let log = match read_log(log_path) {
        Ok(l) => l,
        Err(e) => {
            say!(err, "error: cannot read log {}: {e}", log_path.display());
            return ExitStatus::InputError;
        }
    };
    let report = monitor_invariants(&log, &sc);
    say!(out, "rows checked: {}", report.rows_checked);
    print_verdicts(&report, out);
    if report.is_clean() {
        ExitStatus::Success
    } else {
        ExitStatus::VerificationFailed
    }
}

/// Finite-difference audit of every closed-form derivative.
pub fn cmd_verify_derivatives(
    seed: u64,
    count: usize,
    config_path: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> ExitStatus {
    let (cfg, params) = match config_path {
        None => (ControllerConfig::default(), PlantParams::default()),
        Some(p) => match load(p, err) {
            Some((_, sc)) => (sc.cfg, sc.params),
            None => return ExitStatus::InputError,
        },
    };
    verify_with(seed, count, &cfg, &params, &error_stack, out, err)
}

/// [`cmd_verify_derivatives`] against an arbitrary stack implementation.
pub fn verify_with(
    seed: u64,
    count: usize,
    cfg: &ControllerConfig,
    params: &PlantParams,
    stack_fn: &StackFn,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> ExitStatus {
    if count == 0 {
        say!(err, "error: --count must be at least 1");
        return ExitStatus::InputError;
    }
    let report =
        match verify_derivatives_with(seed, count, cfg, params, DEFAULT_THRESHOLD, stack_fn) {
            Ok(r) => r,
            Err(e) => {
                say!(err, "error: {e}");
                return ExitStatus::RuntimeError;
            }
        };
    say!(
        out,
        "seed {seed}, {count} states, threshold {:e}",
        report.threshold
    );
    for r in &report.results {
        say!(
            out,
            "{:<10} {:.3e}  {}",
            r.name,
            r.worst,
            if r.passed { "ok" } else { "FAIL" }
        );
    }
    if report.passed() {
        ExitStatus::Success
    } else {
        let names: Vec<_> = report.failing().map(|r| r.name).collect();
        say!(err, "derivative check failed: {}", names.join(", "));
        ExitStatus::VerificationFailed
    }
}

/// Prints the resolved waypoints, the reference duration, and the plan as a
/// config section.
pub fn cmd_plan(config_path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> ExitStatus {
    let Some((_, sc)) = load(config_path, err) else {
        return ExitStatus::InputError;
    };
    let plan = &sc.plan;
    say!(out, "waypoints: {}", plan.waypoints.len());
    for (i, p) in plan.waypoints.iter().enumerate() {
        say!(out, "  {i:>2}: ({}, {})", p[0], p[1]);
    }
    say!(out, "duration: {:.6} s", plan.total_duration());
    #[derive(serde::Serialize)]
    struct Section {
        plan: PlanConfig,
    }
    let section = Section {
        plan: ScenarioConfig::from_scenario(&sc, None).plan,
    };
    say!(
        out,
        "{}",
        serde_json::to_string_pretty(&section).expect("plan serialises")
    );
    ExitStatus::Success
}
