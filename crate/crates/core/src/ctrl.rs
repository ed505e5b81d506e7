//! Backstepping controller in transformed coordinates.
//!
//! The design stacks four error signals, each the residual of a virtual
//! control for the previous stage:
//!
//! ```text
//! e1 = z1 - z_d1
//! e2 = F1(zeta1, zeta2) + k1 e1
//! e3 = Q (f2 + g2(z3)) + k2 e2          Q = D(Ch zeta2)^2 D_I(Ch zeta1)^2 D_I(xbar2)^2
//! e4 = e2 - k1 e1 + e3_dot + k3 e3
//! ```
//!
//! With `V = |e1|^2/2 + sum log cosh(zeta2) + |e3|^2/2 + |e4|^2/2` one gets
//! `V_dot = -(|sqrt(k1) e1 - sqrt(k2) e2|^2) - k3|e3|^2 + e4' (Phi + Psi u)`,
//! and the static feedback `u = -Psi^-1 (Phi + k4 e4)` leaves only negative
//! squares. `k2 = 1/k1` is forced: it is what turns the cross terms into a
//! perfect square.
//!
//! Every derivative needed by `Phi` is evaluated in closed form from the
//! measured state; nothing is differentiated numerically at run time.
//!
//! Since `Q`, `F1` and all `zeta` quantities are diagonal or entrywise, the
//! chain rule is applied per axis on scalars, and the 2x2 matrices are only
//! assembled at the end.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{positive, Error, Result};
use crate::model::{g2, g4, n_matrix, n_matrix_dot, ControlInput, PlantParams, PlantState};
use crate::xform::{diag2, zeta_rates, SafeSet, TransformedState};

pub const DEFAULT_F_EPSILON: f64 = 0.1;

/// `|det Psi|` below this is reported as a singularity.
pub const PSI_DET_FLOOR: f64 = 1e-12;

/// Backstepping gains. `k2` is derived as `1/k1` and cannot be set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGains", into = "RawGains")]
pub struct ControlGains {
    k1: f64,
    k2: f64,
    k3: f64,
    k4: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGains {
    k1: f64,
    k3: f64,
    k4: f64,
}

impl TryFrom<RawGains> for ControlGains {
    type Error = Error;
    fn try_from(r: RawGains) -> Result<Self> {
        Self::new(r.k1, r.k3, r.k4)
    }
}

impl From<ControlGains> for RawGains {
    fn from(g: ControlGains) -> Self {
        Self {
            k1: g.k1,
            k3: g.k3,
            k4: g.k4,
        }
    }
}

impl ControlGains {
    pub fn new(k1: f64, k3: f64, k4: f64) -> Result<Self> {
        positive("k1", k1)?;
        positive("k3", k3)?;
        positive("k4", k4)?;
        Ok(Self {
            k1,
            k2: k1.recip(),
            k3,
            k4,
        })
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }
    pub fn k2(&self) -> f64 {
        self.k2
    }
    pub fn k3(&self) -> f64 {
        self.k3
    }
    pub fn k4(&self) -> f64 {
        self.k4
    }
}

impl Default for ControlGains {
    fn default() -> Self {
        Self::new(1.0, 1.0, 1.0).expect("unit gains are valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub gains: ControlGains,
    pub safe: SafeSet,
    /// Net thrust seen by the controller is kept outside `(-f_epsilon, f_epsilon)`.
    #[serde(default = "default_f_epsilon")]
    pub f_epsilon: f64,
}

fn default_f_epsilon() -> f64 {
    DEFAULT_F_EPSILON
}

impl ControllerConfig {
    pub fn new(gains: ControlGains, safe: SafeSet) -> Self {
        Self {
            gains,
            safe,
            f_epsilon: DEFAULT_F_EPSILON,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.safe.validate()?;
        positive("f_epsilon", self.f_epsilon)
    }
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self::new(ControlGains::default(), SafeSet::default())
    }
}

/// Every intermediate quantity of the control law at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStack {
    pub e1: Vector2<f64>,
    pub e2: Vector2<f64>,
    pub e3: Vector2<f64>,
    pub e4: Vector2<f64>,
    pub e2_dot: Vector2<f64>,
    pub e2_ddot: Vector2<f64>,
    pub e3_dot: Vector2<f64>,
    /// `z1_dot = F1(zeta1, zeta2)`.
    pub z1_dot: Vector2<f64>,
    pub zeta2: Vector2<f64>,
    pub q: Matrix2<f64>,
    pub q_dot: Matrix2<f64>,
    pub q_ddot: Matrix2<f64>,
    pub n: Matrix2<f64>,
    pub n_dot: Matrix2<f64>,
    pub phi: Vector2<f64>,
    pub psi: Matrix2<f64>,
    pub v: f64,
    pub v_dot: f64,
}

/// Keeps `|F| >= epsilon`, breaking the tie at zero toward positive thrust.
pub fn project_force(f: f64, epsilon: f64) -> f64 {
    if f.abs() >= epsilon {
        f
    } else if f < 0.0 {
        -epsilon
    } else {
        epsilon
    }
}

/// Plant state as seen by the controller: identical except for the
/// projected thrust.
pub fn projected_state(state: &PlantState, cfg: &ControllerConfig) -> PlantState {
    let mut s = *state;
    s.x3[1] = project_force(s.x3[1], cfg.f_epsilon);
    s
}

/// Setpoint in transformed coordinates. The reference must lie strictly
/// inside the position bounds.
pub fn desired_z1(x_d1: &Vector2<f64>, safe: &SafeSet) -> Result<Vector2<f64>> {
    let mut z = Vector2::zeros();
    for i in 0..2 {
        let bound = safe.xbar1[i];
        let chi = x_d1[i] / bound;
        if !(chi.abs() < 1.0) {
            return Err(Error::ReferenceInfeasible {
                index: i,
                value: x_d1[i],
                bound,
            });
        }
        z[i] = bound * chi.atanh();
    }
    Ok(z)
}

/// `V = |e1|^2/2 + sum log cosh(zeta2_i) + |e3|^2/2 + |e4|^2/2`.
pub fn lyapunov_v(
    e1: &Vector2<f64>,
    e3: &Vector2<f64>,
    e4: &Vector2<f64>,
    zeta2: &Vector2<f64>,
) -> f64 {
    0.5 * (e1.norm_squared() + e3.norm_squared() + e4.norm_squared())
        + zeta2.iter().map(|&z| log_cosh(z)).sum::<f64>()
}

/// `log(cosh(x))` without overflow for large `|x|`.
pub(crate) fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Closed-loop Lyapunov derivative
/// `-|sqrt(k1) e1 - sqrt(k2) e2|^2 - k3 |e3|^2 - k4 |e4|^2`.
pub fn lyapunov_v_dot_closed(
    e1: &Vector2<f64>,
    e2: &Vector2<f64>,
    e3: &Vector2<f64>,
    e4: &Vector2<f64>,
    gains: &ControlGains,
) -> f64 {
    let mixed = e1 * gains.k1.sqrt() - e2 * gains.k2.sqrt();
    -mixed.norm_squared() - gains.k3 * e3.norm_squared() - gains.k4 * e4.norm_squared()
}

/// Evaluates the full error stack, including `Phi` and `Psi`.
///
/// The thrust component is projected with [`project_force`] before anything
/// else is computed, so `N` (and hence `Psi`) is nonsingular whenever the
/// transformation is defined.
pub fn error_stack(
    state: &PlantState,
    z_d1: &Vector2<f64>,
    cfg: &ControllerConfig,
    params: &PlantParams,
) -> Result<ErrorStack> {
    let state = projected_state(state, cfg);
    let t = TransformedState::from_plant(&state, &cfg.safe)?;
    Ok(error_stack_transformed(&t, z_d1, cfg, params))
}

/// [`error_stack`] for a state already in transformed coordinates. The
/// thrust in `t.z3` is projected here as well.
pub fn error_stack_transformed(
    t: &TransformedState,
    z_d1: &Vector2<f64>,
    cfg: &ControllerConfig,
    params: &PlantParams,
) -> ErrorStack {
    let k = &cfg.gains;
    let safe = &cfg.safe;
    let mut t = *t;
    t.z3[1] = project_force(t.z3[1], cfg.f_epsilon);
    let rates = zeta_rates(&t.zeta1, &t.zeta2, &t.z3, &t.z4, safe, params);

    let n = n_matrix(&t.z3, params);
    let n_dot = n_matrix_dot(&t.z3, &t.z4, params);
    let accel = params.drift() + g2(&t.z3, params);
    let accel_dot = n * t.z4;

    let mut f1 = Vector2::zeros();
    let mut f1_dot = Vector2::zeros();
    let mut f1_ddot = Vector2::zeros();
    let mut q = Vector2::zeros();
    let mut q_dot = Vector2::zeros();
    let mut q_ddot = Vector2::zeros();

    for i in 0..2 {
        let (a1, a2) = (t.zeta1[i], t.zeta2[i]);
        let (d1, d2) = (rates.zeta1_dot[i], rates.zeta2_dot[i]);
        let (dd1, dd2) = (rates.zeta1_ddot[i], rates.zeta2_ddot[i]);
        let xbar2 = safe.xbar2[i];

        // F1 = xbar2 * A * B with A = cosh^2(zeta1), B = tanh(zeta2)
        let c1 = a1.cosh();
        let a = c1 * c1;
        let a_d = (2.0 * a1).sinh() * d1;
        let a_dd = 2.0 * (2.0 * a1).cosh() * d1 * d1 + (2.0 * a1).sinh() * dd1;
        let sech2 = a2.cosh().powi(-2);
        let b = a2.tanh();
        let b_d = sech2 * d2;
        let b_dd = sech2 * (dd2 - 2.0 * b * d2 * d2);
        f1[i] = xbar2 * a * b;
        f1_dot[i] = xbar2 * (a_d * b + a * b_d);
        f1_ddot[i] = xbar2 * (a_dd * b + 2.0 * a_d * b_d + a * b_dd);

        // Q_ii = P * R / xbar2^2 with P = cosh^2(zeta2), R = sech^2(zeta1)
        let c2 = a2.cosh();
        let p = c2 * c2;
        let p_d = (2.0 * a2).sinh() * d2;
        let p_dd = 2.0 * (2.0 * a2).cosh() * d2 * d2 + (2.0 * a2).sinh() * dd2;
        let r = 1.0 / a;
        let t1 = a1.tanh();
        let r_d = -2.0 * t1 * r * d1;
        let r_dd = -2.0 * (r * r * d1 * d1 + t1 * r_d * d1 + t1 * r * dd1);
        let w = 1.0 / (xbar2 * xbar2);
        q[i] = p * r * w;
        q_dot[i] = (p_d * r + p * r_d) * w;
        q_ddot[i] = (p_dd * r + 2.0 * p_d * r_d + p * r_dd) * w;
    }

    let e1 = t.z1 - z_d1;
    let e2 = f1 + e1 * k.k1;
    let e2_dot = f1_dot + f1 * k.k1;
    let e2_ddot = f1_ddot + f1_dot * k.k1;
    let e3 = q.component_mul(&accel) + e2 * k.k2;
    let e3_dot = q_dot.component_mul(&accel) + q.component_mul(&accel_dot) + e2_dot * k.k2;
    let e4 = e2 - e1 * k.k1 + e3_dot + e3 * k.k3;

    let n_z4 = n * t.z4;
    let n_dot_z4 = n_dot * t.z4;
    let phi = e3
        + (e2_dot - f1 * k.k1)
        + q_ddot.component_mul(&accel)
        + e2_ddot * k.k2
        + e3_dot * k.k3
        + q_dot.component_mul(&n_z4) * 2.0
        + q.component_mul(&n_dot_z4);
    let psi = diag2(q) * n * g4(params);

    ErrorStack {
        e1,
        e2,
        e3,
        e4,
        e2_dot,
        e2_ddot,
        e3_dot,
        z1_dot: f1,
        zeta2: t.zeta2,
        q: diag2(q),
        q_dot: diag2(q_dot),
        q_ddot: diag2(q_ddot),
        n,
        n_dot,
        phi,
        psi,
        v: lyapunov_v(&e1, &e3, &e4, &t.zeta2),
        v_dot: lyapunov_v_dot_closed(&e1, &e2, &e3, &e4, k),
    }
}

/// `(Phi, Psi)` at the given state; see [`error_stack`].
pub fn compute_phi_psi(
    state: &PlantState,
    z_d1: &Vector2<f64>,
    cfg: &ControllerConfig,
    params: &PlantParams,
) -> Result<(Vector2<f64>, Matrix2<f64>)> {
    let s = error_stack(state, z_d1, cfg, params)?;
    Ok((s.phi, s.psi))
}

/// Inverse of a 2x2 matrix by the adjugate formula.
pub fn invert_2x2(m: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    if !(det.abs() >= PSI_DET_FLOOR) {
        return Err(Error::ControllerSingularity { det });
    }
    Ok(Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det)
}

/// `u = -Psi^-1 (Phi + k4 e4)` applied to an already evaluated stack.
pub fn control_from_stack(stack: &ErrorStack, gains: &ControlGains) -> Result<ControlInput> {
    let inv = invert_2x2(&stack.psi)?;
    Ok(ControlInput(-(inv * (stack.phi + stack.e4 * gains.k4))))
}

/// Static state feedback driving the plant to `x_d1` without leaving the safe
/// set.
pub fn control_law(
    state: &PlantState,
    x_d1: &Vector2<f64>,
    cfg: &ControllerConfig,
    params: &PlantParams,
) -> Result<ControlInput> {
    let z_d1 = desired_z1(x_d1, &cfg.safe)?;
    let stack = error_stack(state, &z_d1, cfg, params)?;
    control_from_stack(&stack, &cfg.gains)
}

/// Lower bound on `|det Psi|` over every state the controller accepts.
///
/// `det Psi = q1 q2 F / (m^2 J)`, each `q_i >= sech^2(zeta1_max) / xbar2_i^2`,
/// and projection keeps `|F| >= epsilon`.
pub fn det_psi_floor(cfg: &ControllerConfig, params: &PlantParams) -> f64 {
    let safe = &cfg.safe;
    let zeta_max = (1.0 - safe.chi_clamp).atanh().min(safe.zeta_clamp);
    let sech2 = zeta_max.cosh().powi(-2);
    let q_min: f64 = (0..2)
        .map(|i| sech2 / (safe.xbar2[i] * safe.xbar2[i]))
        .product();
    q_min * cfg.f_epsilon / (params.m * params.m * params.j)
}
