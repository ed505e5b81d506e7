//! Planar bicopter with thrust dynamically extended by two integrators.
//!
//! The extended state is four stacked 2-vectors:
//!
//! | block | contents            |
//! |-------|---------------------|
//! | `x1`  | position `[r1, r2]` |
//! | `x2`  | velocity            |
//! | `x3`  | `[theta, F]`        |
//! | `x4`  | `[theta_dot, F_dot]`|
//!
//! and the input is `u = [F_ddot, M]`. With this extension the input map
//! [`g4`] is square and constant, which is what makes backstepping possible.

use nalgebra::{Matrix2, SVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{positive, Result};

pub const STANDARD_GRAVITY: f64 = 9.81;

/// Physical constants of the bicopter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantParams {
    /// Mass (kg).
    pub m: f64,
    /// Moment of inertia about the out-of-plane axis (kg m^2).
    #[serde(rename = "J")]
    pub j: f64,
    /// Arm length (m).
    pub l: f64,
    /// Gravitational acceleration (m/s^2).
    #[serde(default = "default_gravity")]
    pub g: f64,
}

fn default_gravity() -> f64 {
    STANDARD_GRAVITY
}

impl PlantParams {
    pub fn new(m: f64, j: f64, l: f64) -> Result<Self> {
        Self::with_gravity(m, j, l, STANDARD_GRAVITY)
    }

    pub fn with_gravity(m: f64, j: f64, l: f64, g: f64) -> Result<Self> {
        let p = Self { m, j, l, g };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        positive("m", self.m)?;
        positive("J", self.j)?;
        positive("l", self.l)?;
        positive("g", self.g)
    }

    /// Thrust that balances gravity.
    pub fn hover_thrust(&self) -> f64 {
        self.m * self.g
    }

    /// Gravity drift `f2 = [0, -g]`.
    pub fn drift(&self) -> Vector2<f64> {
        Vector2::new(0.0, -self.g)
    }
}

impl Default for PlantParams {
    /// The 1 kg / 0.2 kg m^2 / 0.2 m airframe used throughout the examples.
    fn default() -> Self {
        Self {
            m: 1.0,
            j: 0.2,
            l: 0.2,
            g: STANDARD_GRAVITY,
        }
    }
}

/// Extended plant state. Also used to carry its own time derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub x1: Vector2<f64>,
    pub x2: Vector2<f64>,
    pub x3: Vector2<f64>,
    pub x4: Vector2<f64>,
}

impl PlantState {
    pub fn new(x1: Vector2<f64>, x2: Vector2<f64>, x3: Vector2<f64>, x4: Vector2<f64>) -> Self {
        Self { x1, x2, x3, x4 }
    }

    pub fn zeros() -> Self {
        Self::from_flat(&SVector::zeros())
    }

    /// At rest at `position`, level, with hover thrust.
    pub fn hover_at(position: Vector2<f64>, params: &PlantParams) -> Self {
        Self {
            x1: position,
            x2: Vector2::zeros(),
            x3: Vector2::new(0.0, params.hover_thrust()),
            x4: Vector2::zeros(),
        }
    }

    pub fn theta(&self) -> f64 {
        self.x3[0]
    }

    pub fn thrust(&self) -> f64 {
        self.x3[1]
    }

    pub fn to_flat(&self) -> SVector<f64, 8> {
        SVector::<f64, 8>::from_iterator(
            self.x1
                .iter()
                .chain(self.x2.iter())
                .chain(self.x3.iter())
                .chain(self.x4.iter())
                .copied(),
        )
    }

    pub fn from_flat(v: &SVector<f64, 8>) -> Self {
        Self {
            x1: Vector2::new(v[0], v[1]),
            x2: Vector2::new(v[2], v[3]),
            x3: Vector2::new(v[4], v[5]),
            x4: Vector2::new(v[6], v[7]),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|v| v.is_finite())
    }
}

/// Plant input `u = [F_ddot, M]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlInput(pub Vector2<f64>);

impl ControlInput {
    pub fn new(thrust_accel: f64, moment: f64) -> Self {
        Self(Vector2::new(thrust_accel, moment))
    }

    pub fn zero() -> Self {
        Self(Vector2::zeros())
    }

    /// Second derivative of net thrust (N/s^2).
    pub fn thrust_accel(&self) -> f64 {
        self.0[0]
    }

    /// Net moment (N m).
    pub fn moment(&self) -> f64 {
        self.0[1]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Thrust acceleration `g2(x3) = m^-1 [-sin(theta), cos(theta)] F`.
pub fn g2(x3: &Vector2<f64>, params: &PlantParams) -> Vector2<f64> {
    let (s, c) = x3[0].sin_cos();
    Vector2::new(-s, c) * (x3[1] / params.m)
}

/// Constant input map `[[0, 1/J], [1, 0]]`.
pub fn g4(params: &PlantParams) -> Matrix2<f64> {
    Matrix2::new(0.0, 1.0 / params.j, 1.0, 0.0)
}

/// Jacobian of [`g2`] with respect to `x3`. Its determinant is `-F / m^2`, so
/// it is singular exactly when the net thrust vanishes.
pub fn n_matrix(x3: &Vector2<f64>, params: &PlantParams) -> Matrix2<f64> {
    let (s, c) = x3[0].sin_cos();
    let f = x3[1];
    Matrix2::new(-c * f, -s, -s * f, c) / params.m
}

/// Time derivative of [`n_matrix`] along `x3_dot = x4`.
pub fn n_matrix_dot(x3: &Vector2<f64>, x4: &Vector2<f64>, params: &PlantParams) -> Matrix2<f64> {
    let (s, c) = x3[0].sin_cos();
    let f = x3[1];
    let (w, f_dot) = (x4[0], x4[1]);
    Matrix2::new(
        s * w * f - c * f_dot,
        -c * w,
        -c * w * f - s * f_dot,
        -s * w,
    ) / params.m
}

/// Splits net thrust and moment into the two rotor forces `[f1, f2]`,
/// inverting `F = f1 + f2`, `M = (f2 - f1) l`.
pub fn rotor_forces(thrust: f64, moment: f64, params: &PlantParams) -> [f64; 2] {
    let d = moment / params.l;
    [(thrust - d) / 2.0, (thrust + d) / 2.0]
}

/// Net thrust and moment produced by rotor forces `[f1, f2]`.
pub fn net_wrench(forces: [f64; 2], params: &PlantParams) -> (f64, f64) {
    (forces[0] + forces[1], (forces[1] - forces[0]) * params.l)
}

/// Right-hand side of the extended equations of motion.
pub fn plant_derivative(state: &PlantState, u: &ControlInput, params: &PlantParams) -> PlantState {
    PlantState {
        x1: state.x2,
        x2: params.drift() + g2(&state.x3, params),
        x3: state.x4,
        x4: g4(params) * u.0,
    }
}
