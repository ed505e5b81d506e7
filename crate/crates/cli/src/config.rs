//! JSON scenario configuration.

use std::fmt;
use std::path::{Path, PathBuf};

use nalgebra::Vector2;
use safe_bicopter::ctrl::{ControlGains, ControllerConfig};
use safe_bicopter::model::{PlantParams, PlantState};
use safe_bicopter::sim::{MonitorTolerances, Scenario};
use safe_bicopter::traj::{plan_octagon, WaypointPlan};
use safe_bicopter::xform::SafeSet;
use safe_bicopter::Error;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub params: PlantParams,
    pub gains: ControlGains,
    pub bounds: Bounds,
    pub f_epsilon: f64,
    pub plan: PlanConfig,
    pub x0: InitialState,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub monitor: MonitorTolerances,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub position: [f64; 2],
    pub velocity: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlanConfig {
    Octagon {
        margin_fraction: f64,
        chamfer_fraction: f64,
        v_max: f64,
        a_max: f64,
    },
    Waypoints {
        points: Vec<[f64; 2]>,
        v_max: f64,
        a_max: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub position: [f64; 2],
    pub velocity: [f64; 2],
    pub theta: f64,
    pub thrust: f64,
    pub theta_rate: f64,
    pub thrust_rate: f64,
}

/// Parse or validation failure, tagged with the offending field path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }

    fn from_core(section: &str, err: Error) -> Self {
        let field = match &err {
            Error::InvalidParameter { name, .. } => format!("{section}.{name}"),
            Error::SafeSetViolation {
                quantity, index, ..
            } => format!("{section}.{quantity}[{index}]"),
            _ => section.to_string(),
        };
        Self::new(field, err.to_string())
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "`{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn v2(a: [f64; 2]) -> Vector2<f64> {
    Vector2::new(a[0], a[1])
}

fn arr(v: Vector2<f64>) -> [f64; 2] {
    [v[0], v[1]]
}

impl PlanConfig {
    pub fn resolve(&self, safe: &SafeSet) -> Result<WaypointPlan, ConfigError> {
        let plan = match self {
            PlanConfig::Octagon {
                margin_fraction,
                chamfer_fraction,
                v_max,
                a_max,
            } => plan_octagon(safe, *margin_fraction, *chamfer_fraction)
                .and_then(|p| WaypointPlan::new(p.waypoints, *v_max, *a_max)),
            PlanConfig::Waypoints {
                points,
                v_max,
                a_max,
            } => WaypointPlan::new(points.iter().copied().map(v2).collect(), *v_max, *a_max),
        };
        plan.map_err(|e| ConfigError::from_core("plan", e))
    }
}

impl InitialState {
    pub fn hover(position: [f64; 2], params: &PlantParams) -> Self {
        Self::from_state(&PlantState::hover_at(v2(position), params))
    }

    pub fn to_state(&self) -> PlantState {
        PlantState::new(
            v2(self.position),
            v2(self.velocity),
            Vector2::new(self.theta, self.thrust),
            Vector2::new(self.theta_rate, self.thrust_rate),
        )
    }

    pub fn from_state(s: &PlantState) -> Self {
        Self {
            position: arr(s.x1),
            velocity: arr(s.x2),
            theta: s.x3[0],
            thrust: s.x3[1],
            theta_rate: s.x4[0],
            thrust_rate: s.x4[1],
        }
    }
}

impl ScenarioConfig {
    /// Octagon scenario with every default, flown from hover at the origin.
    pub fn default_octagon() -> Self {
        let params = PlantParams::default();
        let safe = SafeSet::default();
        Self {
            schema_version: SCHEMA_VERSION,
            params,
            gains: ControlGains::default(),
            bounds: Bounds {
                position: arr(safe.xbar1),
                velocity: arr(safe.xbar2),
            },
            f_epsilon: safe_bicopter::ctrl::DEFAULT_F_EPSILON,
            plan: PlanConfig::Octagon {
                margin_fraction: safe_bicopter::traj::DEFAULT_MARGIN_FRACTION,
                chamfer_fraction: safe_bicopter::traj::DEFAULT_CHAMFER_FRACTION,
                v_max: safe_bicopter::traj::DEFAULT_V_MAX,
                a_max: safe_bicopter::traj::DEFAULT_A_MAX,
            },
            x0: InitialState::hover([0.0, 0.0], &params),
            dt: safe_bicopter::sim::DEFAULT_DT,
            t_end: 90.0,
            output: None,
            monitor: MonitorTolerances::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| ConfigError::new("<document>", e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::new(
                "schema_version",
                format!(
                    "unsupported version {}, expected {SCHEMA_VERSION}",
                    cfg.schema_version
                ),
            ));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("<file>", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn safe_set(&self) -> Result<SafeSet, ConfigError> {
        SafeSet::new(v2(self.bounds.position), v2(self.bounds.velocity)).map_err(|e| {
            let field = match &e {
                Error::InvalidParameter { name: "xbar1", .. } => "bounds.position",
                _ => "bounds.velocity",
            };
            ConfigError::new(field, e.to_string())
        })
    }

    /// Validated scenario. Every failure names the config field responsible.
    pub fn to_scenario(&self) -> Result<Scenario, ConfigError> {
        self.params
            .validate()
            .map_err(|e| ConfigError::from_core("params", e))?;
        let safe = self.safe_set()?;
        let cfg = ControllerConfig {
            gains: self.gains,
            safe,
            f_epsilon: self.f_epsilon,
        };
        cfg.validate()
            .map_err(|e| ConfigError::new("f_epsilon", e.to_string()))?;
        let plan = self.plan.resolve(&safe)?;
        plan.validate(&safe, 0.0)
            .map_err(|e| ConfigError::from_core("plan", e))?;
        let sc = Scenario {
            params: self.params,
            cfg,
            plan,
            x0: self.x0.to_state(),
            dt: self.dt,
            t_end: self.t_end,
            monitor_tolerances: self.monitor,
        };
        sc.validate().map_err(|e| match &e {
            Error::InvalidParameter { name: "x0", .. } => {
                ConfigError::new("x0.thrust", e.to_string())
            }
            Error::InvalidParameter { name, .. } => ConfigError::new(*name, e.to_string()),
            _ => ConfigError::from_core("x0", e),
        })?;
        Ok(sc)
    }

    /// Inverse of [`to_scenario`](Self::to_scenario). The plan is always
    /// written back as explicit waypoints.
    pub fn from_scenario(sc: &Scenario, output: Option<PathBuf>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            params: sc.params,
            gains: sc.cfg.gains,
            bounds: Bounds {
                position: arr(sc.cfg.safe.xbar1),
                velocity: arr(sc.cfg.safe.xbar2),
            },
            f_epsilon: sc.cfg.f_epsilon,
            plan: PlanConfig::Waypoints {
                points: sc.plan.waypoints.iter().copied().map(arr).collect(),
                v_max: sc.plan.v_max,
                a_max: sc.plan.a_max,
            },
            x0: InitialState::from_state(&sc.x0),
            dt: sc.dt,
            t_end: sc.t_end,
            output,
            monitor: sc.monitor_tolerances,
        }
    }
}
