//! Constraint-removing change of coordinates.
//!
//! Position and velocity are normalised by their bounds, `chi = x / xbar`, and
//! pushed through `atanh`, so the open box `|x| < xbar` maps onto the whole
//! plane:
//!
//! ```text
//! z1 = D(xbar1) atanh(x1 / xbar1)      x1 = D(xbar1) tanh(zeta1)
//! z2 = D(xbar2) atanh(x2 / xbar2)      x2 = D(xbar2) tanh(zeta2)
//! ```
//!
//! with `zeta = z / xbar`. Attitude and thrust (`z3`, `z4`) pass through
//! unchanged. Any trajectory of the transformed system that stays finite is
//! therefore a trajectory of the plant that never leaves the safe set.

use nalgebra::{Matrix2, SMatrix, SVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{positive, Error, Result};
use crate::model::{g2, n_matrix, PlantParams, PlantState};

pub const DEFAULT_CHI_CLAMP: f64 = 1e-9;
pub const DEFAULT_ZETA_CLAMP: f64 = 30.0;

/// Symmetric position/velocity box plus the numeric guards used near its
/// boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SafeSet {
    /// Position half-widths (m).
    pub xbar1: Vector2<f64>,
    /// Velocity half-widths (m/s).
    pub xbar2: Vector2<f64>,
    /// Normalised coordinates are clamped to `[-1 + chi_clamp, 1 - chi_clamp]`.
    #[serde(default = "default_chi_clamp")]
    pub chi_clamp: f64,
    /// Transformed coordinates are clamped to `[-zeta_clamp, zeta_clamp]`.
    #[serde(default = "default_zeta_clamp")]
    pub zeta_clamp: f64,
}

fn default_chi_clamp() -> f64 {
    DEFAULT_CHI_CLAMP
}

fn default_zeta_clamp() -> f64 {
    DEFAULT_ZETA_CLAMP
}

impl SafeSet {
    pub fn new(xbar1: Vector2<f64>, xbar2: Vector2<f64>) -> Result<Self> {
        let s = Self {
            xbar1,
            xbar2,
            chi_clamp: DEFAULT_CHI_CLAMP,
            zeta_clamp: DEFAULT_ZETA_CLAMP,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..2 {
            positive("xbar1", self.xbar1[i])?;
            positive("xbar2", self.xbar2[i])?;
        }
        if !(self.chi_clamp > 0.0 && self.chi_clamp < 1.0) {
            return Err(Error::InvalidParameter {
                name: "chi_clamp",
                reason: format!("must lie in (0, 1), got {}", self.chi_clamp),
            });
        }
        positive("zeta_clamp", self.zeta_clamp)
    }

    /// True when `(x1, x2)` lies strictly inside the box.
    pub fn contains(&self, x1: &Vector2<f64>, x2: &Vector2<f64>) -> bool {
        (0..2).all(|i| x1[i].abs() < self.xbar1[i] && x2[i].abs() < self.xbar2[i])
    }

    fn clamp_chi(&self, chi: f64) -> f64 {
        let lim = 1.0 - self.chi_clamp;
        chi.clamp(-lim, lim)
    }

    fn clamp_zeta(&self, zeta: f64) -> f64 {
        zeta.clamp(-self.zeta_clamp, self.zeta_clamp)
    }
}

impl Default for SafeSet {
    /// 7 m x 5 m position half-widths and 0.5 m/s velocity bounds.
    fn default() -> Self {
        Self {
            xbar1: Vector2::new(7.0, 5.0),
            xbar2: Vector2::new(0.5, 0.5),
            chi_clamp: DEFAULT_CHI_CLAMP,
            zeta_clamp: DEFAULT_ZETA_CLAMP,
        }
    }
}

/// Plant state expressed in transformed coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformedState {
    pub z1: Vector2<f64>,
    pub z2: Vector2<f64>,
    pub z3: Vector2<f64>,
    pub z4: Vector2<f64>,
    pub zeta1: Vector2<f64>,
    pub zeta2: Vector2<f64>,
}

impl TransformedState {
    /// Transforms a plant state, failing if position or velocity is on or
    /// outside the boundary of the safe set.
    pub fn from_plant(state: &PlantState, safe: &SafeSet) -> Result<Self> {
        let (z1, z2) = forward_map(&state.x1, &state.x2, safe)?;
        Ok(Self {
            z1,
            z2,
            z3: state.x3,
            z4: state.x4,
            zeta1: z1.component_div(&safe.xbar1),
            zeta2: z2.component_div(&safe.xbar2),
        })
    }
}

pub fn diag_of<const N: usize>(q: &SVector<f64, N>) -> SMatrix<f64, N, N> {
    SMatrix::from_diagonal(q)
}

pub fn diag_inv_of<const N: usize>(q: &SVector<f64, N>) -> Result<SMatrix<f64, N, N>> {
    if let Some(index) = q.iter().position(|&v| v == 0.0) {
        return Err(Error::ZeroDiagonal { index });
    }
    Ok(SMatrix::from_diagonal(&q.map(f64::recip)))
}

pub fn ch_of<const N: usize>(q: &SVector<f64, N>) -> SVector<f64, N> {
    q.map(f64::cosh)
}

pub fn sh_of<const N: usize>(q: &SVector<f64, N>) -> SVector<f64, N> {
    q.map(f64::sinh)
}

fn squash_in(
    quantity: &'static str,
    x: &Vector2<f64>,
    bound: &Vector2<f64>,
    safe: &SafeSet,
) -> Result<Vector2<f64>> {
    let mut out = Vector2::zeros();
    for i in 0..2 {
        let chi = x[i] / bound[i];
        if !(chi.abs() < 1.0) {
            return Err(Error::SafeSetViolation {
                quantity,
                index: i,
                value: x[i],
                bound: bound[i],
            });
        }
        let zeta = safe.clamp_zeta(safe.clamp_chi(chi).atanh());
        out[i] = bound[i] * zeta;
    }
    Ok(out)
}

/// Maps position and velocity into transformed coordinates `(z1, z2)`.
pub fn forward_map(
    x1: &Vector2<f64>,
    x2: &Vector2<f64>,
    safe: &SafeSet,
) -> Result<(Vector2<f64>, Vector2<f64>)> {
    Ok((
        squash_in("position", x1, &safe.xbar1, safe)?,
        squash_in("velocity", x2, &safe.xbar2, safe)?,
    ))
}

/// Maps transformed coordinates back into the safe set. Defined for every
/// finite input; the result always lies strictly inside the box.
pub fn inverse_map(
    z1: &Vector2<f64>,
    z2: &Vector2<f64>,
    safe: &SafeSet,
) -> (Vector2<f64>, Vector2<f64>) {
    let back = |z: &Vector2<f64>, bound: &Vector2<f64>| {
        Vector2::from_fn(|i, _| {
            let zeta = safe.clamp_zeta(z[i] / bound[i]);
            bound[i] * safe.clamp_chi(zeta.tanh())
        })
    };
    (back(z1, &safe.xbar1), back(z2, &safe.xbar2))
}

/// Transformed position drift `z1_dot = D(Ch zeta1)^2 D(xbar2) tanh(zeta2)`.
pub fn transformed_drift(
    zeta1: &Vector2<f64>,
    zeta2: &Vector2<f64>,
    safe: &SafeSet,
) -> Vector2<f64> {
    Vector2::from_fn(|i, _| {
        let c = zeta1[i].cosh();
        c * c * safe.xbar2[i] * zeta2[i].tanh()
    })
}

/// First and second time derivatives of the normalised transformed
/// coordinates along the plant flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZetaRates {
    pub zeta1_dot: Vector2<f64>,
    pub zeta2_dot: Vector2<f64>,
    pub zeta1_ddot: Vector2<f64>,
    pub zeta2_ddot: Vector2<f64>,
}

/// Closed-form `zeta` rates. None of them depend on the input `u`.
pub fn zeta_rates(
    zeta1: &Vector2<f64>,
    zeta2: &Vector2<f64>,
    z3: &Vector2<f64>,
    z4: &Vector2<f64>,
    safe: &SafeSet,
    params: &PlantParams,
) -> ZetaRates {
    let accel = params.drift() + g2(z3, params);
    let accel_dot = n_matrix(z3, params) * z4;

    let zeta1_dot = transformed_drift(zeta1, zeta2, safe).component_div(&safe.xbar1);
    let zeta2_dot = Vector2::from_fn(|i, _| {
        let c = zeta2[i].cosh();
        c * c * accel[i] / safe.xbar2[i]
    });
    let zeta1_ddot = Vector2::from_fn(|i, _| {
        let c1 = zeta1[i].cosh();
        let sech2 = zeta2[i].cosh().powi(-2);
        let tanh_rate = sech2 * zeta2_dot[i];
        safe.xbar2[i]
            * ((2.0 * zeta1[i]).sinh() * zeta1_dot[i] * zeta2[i].tanh() + c1 * c1 * tanh_rate)
            / safe.xbar1[i]
    });
    let zeta2_ddot = Vector2::from_fn(|i, _| {
        let c2 = zeta2[i].cosh();
        ((2.0 * zeta2[i]).sinh() * zeta2_dot[i] * accel[i] + c2 * c2 * accel_dot[i]) / safe.xbar2[i]
    });
    ZetaRates {
        zeta1_dot,
        zeta2_dot,
        zeta1_ddot,
        zeta2_ddot,
    }
}

pub(crate) fn diag2(v: Vector2<f64>) -> Matrix2<f64> {
    diag_of(&v)
}
