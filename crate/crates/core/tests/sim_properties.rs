use nalgebra::Vector2;
use proptest::prelude::*;
use safe_bicopter::ctrl::ControllerConfig;
use safe_bicopter::model::{PlantParams, PlantState};
use safe_bicopter::sim::{monitor_invariants, read_log, run_scenario, write_log, Scenario};
use safe_bicopter::traj::WaypointPlan;
use safe_bicopter::xform::forward_map;

fn hold(target: [f64; 2], t_end: f64, dt: f64) -> Scenario {
    let mut sc = Scenario::new(
        PlantParams::default(),
        ControllerConfig::default(),
        WaypointPlan::hold(Vector2::new(target[0], target[1])),
        t_end,
    );
    sc.dt = dt;
    sc
}

#[test]
fn identical_scenarios_give_identical_logs() {
    let plan = WaypointPlan::new(
        vec![
            Vector2::zeros(),
            Vector2::new(1.0, 1.0),
            Vector2::new(-1.0, 0.5),
        ],
        0.4,
        0.5,
    )
    .unwrap();
    let sc = Scenario::new(
        PlantParams::default(),
        ControllerConfig::default(),
        plan,
        8.0,
    );
    let a = run_scenario(&sc).unwrap();
    let b = run_scenario(&sc).unwrap();
    let (mut ba, mut bb) = (Vec::new(), Vec::new());
    a.write_to(&mut ba).unwrap();
    b.write_to(&mut bb).unwrap();
    assert_eq!(ba, bb);
}

#[test]
fn halving_the_step_barely_moves_the_final_position() {
    let coarse = run_scenario(&hold([3.0, 2.0], 60.0, 1e-3)).unwrap();
    let fine = run_scenario(&hold([3.0, 2.0], 60.0, 5e-4)).unwrap();
    let a = coarse.last().unwrap();
    let b = fine.last().unwrap();
    assert_eq!(a.t, b.t);
    let d = (a.x1 - b.x1).norm();
    assert!(d < 1e-6, "final positions differ by {d:e}");
}

#[test]
fn equilibrium_reached_after_hold() {
    let sc = hold([3.0, 2.0], 60.0, 1e-3);
    let log = run_scenario(&sc).unwrap();
    let last = log.last().unwrap();
    let (_, z2) = forward_map(&last.x1, &last.x2, &sc.cfg.safe).unwrap();
    assert!(z2.norm() < 1e-6, "|z2| = {:e}", z2.norm());
    assert!(last.x4.norm() < 1e-6, "|z4| = {:e}", last.x4.norm());
    assert!(last.u.norm() < 1e-6, "|u| = {:e}", last.u.norm());
    assert!(last.x3[0].abs() < 1e-4);
    assert!((last.x3[1] - sc.params.hover_thrust()).abs() < 1e-4);
    assert!(monitor_invariants(&log, &sc).is_clean());
}

#[test]
fn simulated_log_survives_the_file() {
    let sc = hold([-2.0, 1.0], 1.5, 1e-3);
    let log = run_scenario(&sc).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    write_log(&log, &path).unwrap();
    assert_eq!(read_log(&path).unwrap(), log);
}

#[test]
fn log_rows_are_uniformly_spaced() {
    let sc = hold([1.0, 1.0], 0.25, 1e-3);
    let log = run_scenario(&sc).unwrap();
    assert_eq!(log.rows.len(), sc.steps() + 1);
    for (k, r) in log.rows.iter().enumerate() {
        assert_eq!(r.t, k as f64 * sc.dt);
    }
}

fn start_and_hold(start: [f64; 2], v0: [f64; 2], target: [f64; 2]) -> Scenario {
    let params = PlantParams::default();
    let mut sc = hold(target, 3.0, 1e-3);
    let mut x0 = PlantState::hover_at(Vector2::new(start[0], start[1]), &params);
    x0.x2 = Vector2::new(v0[0], v0[1]);
    sc.x0 = x0;
    sc
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    // Hover start and setpoint in the inner 80% of the box, at most 2 m
    // apart per axis: the state stays in the safe set and V never rises.
    // Jumps of about 5 m drive |v| onto its bound in floating point and the
    // run aborts, as in the 1 m/s octagon.
    #[test]
    fn short_setpoint_jump_is_clean(
        sx in -0.8..0.8f64, sy in -0.8..0.8f64,
        dx in -2.0..2.0f64, dy in -2.0..2.0f64,
        vx in -0.4..0.4f64, vy in -0.4..0.4f64,
    ) {
        let start = [7.0 * sx, 5.0 * sy];
        let target = [
            (start[0] + dx).clamp(-5.6, 5.6),
            (start[1] + dy).clamp(-4.0, 4.0),
        ];
        let sc = start_and_hold(start, [vx, vy], target);
        let log = run_scenario(&sc).unwrap();
        let report = monitor_invariants(&log, &sc);
        prop_assert!(report.is_clean(), "{:?}", report.earliest());
    }
}
