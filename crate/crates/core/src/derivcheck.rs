//! Finite-difference audit of the closed-form derivatives.
//!
//! Every analytic derivative used by the controller is compared with a
//! central difference of its base quantity taken along the closed-loop flow,
//! `q_dot ~ (q(x + h f(x, u)) - q(x - h f(x, u))) / 2h`. The oracle only ever
//! evaluates base quantities, so it shares no derivative code with the
//! controller. The `e4` check adjudicates `Phi` and `Psi` together: the
//! analytic side is `Phi - e3 + Psi u`.

use nalgebra::{DMatrix, Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ctrl::{control_from_stack, error_stack, ControllerConfig, ErrorStack};
use crate::error::Result;
use crate::model::{g2, n_matrix, n_matrix_dot, plant_derivative, PlantParams, PlantState};
use crate::xform::{zeta_rates, TransformedState};

/// Step used by every central difference.
pub const FD_STEP: f64 = 1e-6;

/// Pass threshold on the worst relative error.
pub const DEFAULT_THRESHOLD: f64 = 1e-5;

/// Names of the audited quantities, in report order.
pub const QUANTITIES: [&str; 10] = [
    "N",
    "Ndot",
    "zeta1ddot",
    "zeta2ddot",
    "e2dot",
    "e2ddot",
    "e3dot",
    "Qdot",
    "Qddot",
    "e4dot",
];

/// Signature of the function producing an [`ErrorStack`]; swappable so the
/// audit itself can be tested against a deliberately broken stack.
pub type StackFn =
    dyn Fn(&PlantState, &Vector2<f64>, &ControllerConfig, &PlantParams) -> Result<ErrorStack>;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantityResult {
    pub name: &'static str,
    pub worst: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeReport {
    pub samples: usize,
    pub threshold: f64,
    pub results: Vec<QuantityResult>,
}

impl DerivativeReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn failing(&self) -> impl Iterator<Item = &QuantityResult> {
        self.results.iter().filter(|r| !r.passed)
    }

    pub fn worst(&self, name: &str) -> Option<f64> {
        self.results
            .iter()
            .find(|r| r.name == name)
            .map(|r| r.worst)
    }
}

/// `|approx - exact| / max(|exact|, 1)` in the Frobenius norm. The unit floor
/// keeps quantities that happen to be near zero from dominating.
pub fn relative_error(approx: &[f64], exact: &[f64]) -> f64 {
    let diff: f64 = approx
        .iter()
        .zip(exact)
        .map(|(a, e)| (a - e).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = exact.iter().map(|e| e * e).sum::<f64>().sqrt().max(1.0);
    diff / scale
}

/// Random state with position and velocity inside 90% of the bounds and net
/// thrust well outside the projection band.
pub fn random_interior_state(
    rng: &mut impl Rng,
    cfg: &ControllerConfig,
    params: &PlantParams,
) -> (PlantState, Vector2<f64>) {
    let safe = &cfg.safe;
    let mut unit = || rng.random_range(-0.9..0.9);
    let x1 = Vector2::new(unit() * safe.xbar1[0], unit() * safe.xbar1[1]);
    let x2 = Vector2::new(unit() * safe.xbar2[0], unit() * safe.xbar2[1]);
    let x_d1 = Vector2::new(unit() * safe.xbar1[0], unit() * safe.xbar1[1]);
    let theta = rng.random_range(-0.6..0.6);
    let thrust = params.hover_thrust() * rng.random_range(0.3..2.0);
    let x4 = Vector2::new(rng.random_range(-1.0..1.0), rng.random_range(-5.0..5.0));
    (
        PlantState::new(x1, x2, Vector2::new(theta, thrust), x4),
        x_d1,
    )
}

fn shift(state: &PlantState, dir: &PlantState, h: f64) -> PlantState {
    PlantState::from_flat(&(state.to_flat() + dir.to_flat() * h))
}

fn flat2(m: &Matrix2<f64>) -> Vec<f64> {
    m.iter().copied().collect()
}

fn flatv(v: &Vector2<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

/// Worst relative error per quantity at a single state.
fn check_state(
    state: &PlantState,
    z_d1: &Vector2<f64>,
    cfg: &ControllerConfig,
    params: &PlantParams,
    stack_fn: &StackFn,
) -> Result<[f64; 10]> {
    let h = FD_STEP;
    let stack = stack_fn(state, z_d1, cfg, params)?;
    let u = control_from_stack(&stack, &cfg.gains)?;
    let flow = plant_derivative(state, &u, params);
    let fwd = shift(state, &flow, h);
    let bwd = shift(state, &flow, -h);
    let sp = stack_fn(&fwd, z_d1, cfg, params)?;
    let sm = stack_fn(&bwd, z_d1, cfg, params)?;
    let fd = |a: Vec<f64>, b: Vec<f64>| -> Vec<f64> {
        a.iter().zip(&b).map(|(p, m)| (p - m) / (2.0 * h)).collect()
    };

    // N against a central-difference Jacobian of g2 in (theta, F)
    let x3 = state.x3;
    let mut jac = DMatrix::zeros(2, 2);
    for j in 0..2 {
        let mut dp = x3;
        let mut dm = x3;
        dp[j] += h;
        dm[j] -= h;
        let col = (g2(&dp, params) - g2(&dm, params)) / (2.0 * h);
        jac.set_column(j, &col);
    }
    let n = n_matrix(&x3, params);
    let err_n = relative_error(jac.as_slice(), &flat2(&n));

    let err_ndot = relative_error(
        &fd(
            flat2(&n_matrix(&fwd.x3, params)),
            flat2(&n_matrix(&bwd.x3, params)),
        ),
        &flat2(&n_matrix_dot(&x3, &state.x4, params)),
    );

    let rates = |s: &PlantState| -> Result<_> {
        let t = TransformedState::from_plant(s, &cfg.safe)?;
        Ok(zeta_rates(
            &t.zeta1, &t.zeta2, &t.z3, &t.z4, &cfg.safe, params,
        ))
    };
    let (r0, rp, rm) = (rates(state)?, rates(&fwd)?, rates(&bwd)?);
    let err_z1 = relative_error(
        &fd(flatv(&rp.zeta1_dot), flatv(&rm.zeta1_dot)),
        &flatv(&r0.zeta1_ddot),
    );
    let err_z2 = relative_error(
        &fd(flatv(&rp.zeta2_dot), flatv(&rm.zeta2_dot)),
        &flatv(&r0.zeta2_ddot),
    );

    let pair = |f: &dyn Fn(&ErrorStack) -> Vec<f64>, exact: Vec<f64>| {
        relative_error(&fd(f(&sp), f(&sm)), &exact)
    };
    let e4_dot = stack.phi - stack.e3 + stack.psi * u.0;
    Ok([
        err_n,
        err_ndot,
        err_z1,
        err_z2,
        pair(&|s| flatv(&s.e2), flatv(&stack.e2_dot)),
        pair(&|s| flatv(&s.e2_dot), flatv(&stack.e2_ddot)),
        pair(&|s| flatv(&s.e3), flatv(&stack.e3_dot)),
        pair(&|s| flat2(&s.q), flat2(&stack.q_dot)),
        pair(&|s| flat2(&s.q_dot), flat2(&stack.q_ddot)),
        pair(&|s| flatv(&s.e4), flatv(&e4_dot)),
    ])
}

/// Runs the audit on `count` seeded random states using the production
/// [`error_stack`].
pub fn verify_derivatives(
    seed: u64,
    count: usize,
    cfg: &ControllerConfig,
    params: &PlantParams,
) -> Result<DerivativeReport> {
    verify_derivatives_with(seed, count, cfg, params, DEFAULT_THRESHOLD, &error_stack)
}

pub fn verify_derivatives_with(
    seed: u64,
    count: usize,
    cfg: &ControllerConfig,
    params: &PlantParams,
    threshold: f64,
    stack_fn: &StackFn,
) -> Result<DerivativeReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0f64; 10];
    for _ in 0..count {
        let (state, x_d1) = random_interior_state(&mut rng, cfg, params);
        let z_d1 = crate::ctrl::desired_z1(&x_d1, &cfg.safe)?;
        let errs = check_state(&state, &z_d1, cfg, params, stack_fn)?;
        for (w, e) in worst.iter_mut().zip(errs) {
            // NaN must register as a failure
            *w = if e.is_nan() { f64::INFINITY } else { w.max(e) };
        }
    }
    Ok(DerivativeReport {
        samples: count,
        threshold,
        results: QUANTITIES
            .iter()
            .zip(worst)
            .map(|(&name, worst)| QuantityResult {
                name,
                worst,
                passed: worst < threshold,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(&[1e-7], &[0.0]), 1e-7);
        assert_eq!(relative_error(&[11.0], &[10.0]), 0.1);
    }

    #[test]
    fn audit_passes_on_production_stack() {
        let report =
            verify_derivatives(7, 25, &ControllerConfig::default(), &PlantParams::default())
                .unwrap();
        assert!(report.passed(), "{report:?}");
        assert_eq!(report.results.len(), QUANTITIES.len());
    }

    #[test]
    fn audit_is_deterministic() {
        let cfg = ControllerConfig::default();
        let p = PlantParams::default();
        assert_eq!(
            verify_derivatives(3, 5, &cfg, &p).unwrap(),
            verify_derivatives(3, 5, &cfg, &p).unwrap()
        );
    }

    #[test]
    fn audit_catches_broken_e3_dot() {
        let broken = |s: &PlantState, z: &Vector2<f64>, c: &ControllerConfig, p: &PlantParams| {
            let mut st = error_stack(s, z, c, p)?;
            st.e3_dot *= 1.001;
            Ok(st)
        };
        let report = verify_derivatives_with(
            1,
            10,
            &ControllerConfig::default(),
            &PlantParams::default(),
            DEFAULT_THRESHOLD,
            &broken,
        )
        .unwrap();
        let failing: Vec<_> = report.failing().map(|r| r.name).collect();
        assert!(failing.contains(&"e3dot"), "{failing:?}");
        assert!(!failing.contains(&"Qddot"));
    }
}
