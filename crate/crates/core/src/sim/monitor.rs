use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Scenario, ScenarioLog};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorTolerances {
    /// Largest accepted closed-loop `V_dot`.
    pub v_dot_max: f64,
    /// Largest accepted per-step increase of `V` while the setpoint is fixed.
    pub v_step_increase: f64,
    /// Reference samples closer than this count as the same setpoint.
    pub setpoint_eps: f64,
}

impl Default for MonitorTolerances {
    fn default() -> Self {
        Self {
            v_dot_max: 1e-12,
            v_step_increase: 1e-6,
            setpoint_eps: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InvariantKind {
    PositionBound,
    VelocityBound,
    LyapunovRate,
    LyapunovDecrease,
}

impl InvariantKind {
    pub const ALL: [InvariantKind; 4] = [
        InvariantKind::PositionBound,
        InvariantKind::VelocityBound,
        InvariantKind::LyapunovRate,
        InvariantKind::LyapunovDecrease,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InvariantKind::PositionBound => "position-bound",
            InvariantKind::VelocityBound => "velocity-bound",
            InvariantKind::LyapunovRate => "lyapunov-rate",
            InvariantKind::LyapunovDecrease => "lyapunov-decrease",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: InvariantKind,
    pub row: usize,
    pub t: f64,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} violated at t = {} (row {}): {}",
            self.kind.name(),
            self.t,
            self.row,
            self.detail
        )
    }
}

/// First violation of each invariant, if any.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MonitorReport {
    pub rows_checked: usize,
    pub violations: Vec<Violation>,
}

impl MonitorReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn first(&self, kind: InvariantKind) -> Option<&Violation> {
        self.violations.iter().find(|v| v.kind == kind)
    }

    /// Earliest violation across all invariants.
    pub fn earliest(&self) -> Option<&Violation> {
        self.violations.iter().min_by_key(|v| v.row)
    }

    fn record(&mut self, v: Violation) {
        if self.first(v.kind).is_none() {
            self.violations.push(v);
        }
    }
}

/// Checks the safe-set bounds (strict), `V_dot <= v_dot_max`, and that `V`
/// never grows by more than `v_step_increase` between consecutive samples
/// sharing the same setpoint.
pub fn monitor_invariants(log: &ScenarioLog, sc: &Scenario) -> MonitorReport {
    let safe = &sc.cfg.safe;
    let tol = &sc.monitor_tolerances;
    let mut report = MonitorReport {
        rows_checked: log.rows.len(),
        ..Default::default()
    };
    for (k, row) in log.rows.iter().enumerate() {
        for i in 0..2 {
            if !(row.x1[i].abs() < safe.xbar1[i]) {
                report.record(Violation {
                    kind: InvariantKind::PositionBound,
                    row: k,
                    t: row.t,
                    detail: format!("|r{}| = {} >= {}", i + 1, row.x1[i].abs(), safe.xbar1[i]),
                });
            }
            if !(row.x2[i].abs() < safe.xbar2[i]) {
                report.record(Violation {
                    kind: InvariantKind::VelocityBound,
                    row: k,
                    t: row.t,
                    detail: format!("|v{}| = {} >= {}", i + 1, row.x2[i].abs(), safe.xbar2[i]),
                });
            }
        }
        if !(row.v_dot <= tol.v_dot_max) {
            report.record(Violation {
                kind: InvariantKind::LyapunovRate,
                row: k,
                t: row.t,
                detail: format!("V_dot = {:e} > {:e}", row.v_dot, tol.v_dot_max),
            });
        }
        if k > 0 {
            let prev = &log.rows[k - 1];
            let same_setpoint = (row.x_d1 - prev.x_d1).amax() < tol.setpoint_eps;
            let increase = row.v - prev.v;
            if same_setpoint && !(increase <= tol.v_step_increase) {
                report.record(Violation {
                    kind: InvariantKind::LyapunovDecrease,
                    row: k,
                    t: row.t,
                    detail: format!("V rose by {increase:e} with a fixed setpoint"),
                });
            }
        }
    }
    report
}
