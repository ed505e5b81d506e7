//! Fixed-step closed-loop simulation.
//!
//! Each step samples the reference, evaluates the controller at the current
//! state, records a [`LogRow`], and advances the plant with one classical RK4
//! step while the input is held constant.

mod log;
mod monitor;

pub use log::{read_log, write_log, LogError, LogRow, ScenarioLog, LOG_HEADER};
pub use monitor::{monitor_invariants, InvariantKind, MonitorReport, MonitorTolerances, Violation};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::ctrl::{control_from_stack, desired_z1, error_stack, ControllerConfig};
use crate::error::{positive, Error, Result};
use crate::model::{plant_derivative, ControlInput, PlantParams, PlantState};
use crate::traj::{Reference, WaypointPlan};

pub const DEFAULT_DT: f64 = 1e-3;
pub const MAX_DT: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub params: PlantParams,
    pub cfg: ControllerConfig,
    pub plan: WaypointPlan,
    pub x0: PlantState,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub monitor_tolerances: MonitorTolerances,
}

impl Scenario {
    /// Hover at the origin, then follow `plan`.
    pub fn new(params: PlantParams, cfg: ControllerConfig, plan: WaypointPlan, t_end: f64) -> Self {
        Self {
            params,
            cfg,
            x0: PlantState::hover_at(Vector2::zeros(), &params),
            plan,
            dt: DEFAULT_DT,
            t_end,
            monitor_tolerances: MonitorTolerances::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.cfg.validate()?;
        self.plan.validate(&self.cfg.safe, 0.0)?;
        positive("dt", self.dt)?;
        positive("t_end", self.t_end)?;
        if self.dt > MAX_DT {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("must be <= {MAX_DT}, got {}", self.dt),
            });
        }
        if !self.x0.is_finite() {
            return Err(Error::InvalidParameter {
                name: "x0",
                reason: "initial state must be finite".into(),
            });
        }
        let safe = &self.cfg.safe;
        for i in 0..2 {
            if !(self.x0.x1[i].abs() < safe.xbar1[i]) {
                return Err(Error::SafeSetViolation {
                    quantity: "position",
                    index: i,
                    value: self.x0.x1[i],
                    bound: safe.xbar1[i],
                });
            }
            if !(self.x0.x2[i].abs() < safe.xbar2[i]) {
                return Err(Error::SafeSetViolation {
                    quantity: "velocity",
                    index: i,
                    value: self.x0.x2[i],
                    bound: safe.xbar2[i],
                });
            }
        }
        if self.x0.thrust().abs() < self.cfg.f_epsilon {
            return Err(Error::InvalidParameter {
                name: "x0",
                reason: format!(
                    "initial thrust {} is inside the projection band (-{eps}, {eps}); \
                     the controller needs |F| >= f_epsilon",
                    self.x0.thrust(),
                    eps = self.cfg.f_epsilon
                ),
            });
        }
        Ok(())
    }

    /// Number of integration steps; the log holds one more row than this.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// One classical RK4 step with `u` held over the step.
pub fn rk4_step(
    state: &PlantState,
    u: &ControlInput,
    dt: f64,
    params: &PlantParams,
) -> Result<PlantState> {
    let f = |s: &PlantState| plant_derivative(s, u, params).to_flat();
    let x = state.to_flat();
    let k1 = f(state);
    let k2 = f(&PlantState::from_flat(&(x + k1 * (dt / 2.0))));
    let k3 = f(&PlantState::from_flat(&(x + k2 * (dt / 2.0))));
    let k4 = f(&PlantState::from_flat(&(x + k3 * dt)));
    let next = PlantState::from_flat(&(x + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0)));
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::IntegrationBlowup)
    }
}

/// Run that stopped early; `log` holds every row recorded before the error.
#[derive(Debug, Clone)]
pub struct SimFailure {
    pub log: ScenarioLog,
    pub error: Error,
}

impl std::fmt::Display for SimFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let t = self.log.rows.last().map_or(0.0, |r| r.t);
        write!(f, "simulation failed after t = {t}: {}", self.error)
    }
}

impl std::error::Error for SimFailure {}

/// Runs the closed loop from `x0` until `t_end`. Identical scenarios produce
/// bit-identical logs.
pub fn run_scenario(sc: &Scenario) -> std::result::Result<ScenarioLog, SimFailure> {
    let mut log = ScenarioLog::with_capacity(sc.steps() + 1);
    if let Err(error) = sc.validate() {
        return Err(SimFailure { log, error });
    }
    let reference = Reference::new(&sc.plan);
    let mut state = sc.x0;
    for k in 0..=sc.steps() {
        let t = k as f64 * sc.dt;
        let step = || -> Result<(LogRow, ControlInput)> {
            let x_d1 = reference.sample(t).x_d1;
            let z_d1 = desired_z1(&x_d1, &sc.cfg.safe)?;
            let stack = error_stack(&state, &z_d1, &sc.cfg, &sc.params)?;
            let u = control_from_stack(&stack, &sc.cfg.gains)?;
            Ok((LogRow::new(t, &state, &u, &x_d1, &stack), u))
        };
        let (row, u) = match step() {
            Ok(v) => v,
            Err(error) => return Err(SimFailure { log, error }),
        };
        log.rows.push(row);
        if k == sc.steps() {
            break;
        }
        state = match rk4_step(&state, &u, sc.dt, &sc.params) {
            Ok(s) => s,
            Err(error) => return Err(SimFailure { log, error }),
        };
    }
    Ok(log)
}
