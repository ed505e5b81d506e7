//! Waypoint plans and a straight-line, trapezoidal-speed reference.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{positive, Error, Result};
use crate::xform::SafeSet;

pub const DEFAULT_MARGIN_FRACTION: f64 = 0.9;
pub const DEFAULT_CHAMFER_FRACTION: f64 = 0.5;
pub const DEFAULT_V_MAX: f64 = 1.0;
pub const DEFAULT_A_MAX: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointPlan {
    pub waypoints: Vec<Vector2<f64>>,
    /// Cruise speed of the reference (m/s).
    pub v_max: f64,
    /// Acceleration of the reference (m/s^2).
    pub a_max: f64,
}

impl WaypointPlan {
    pub fn new(waypoints: Vec<Vector2<f64>>, v_max: f64, a_max: f64) -> Result<Self> {
        let plan = Self {
            waypoints,
            v_max,
            a_max,
        };
        plan.check_shape()?;
        Ok(plan)
    }

    /// A plan that holds a single point forever.
    pub fn hold(point: Vector2<f64>) -> Self {
        Self {
            waypoints: vec![point],
            v_max: DEFAULT_V_MAX,
            a_max: DEFAULT_A_MAX,
        }
    }

    fn check_shape(&self) -> Result<()> {
        positive("v_max", self.v_max)?;
        positive("a_max", self.a_max)?;
        if self.waypoints.is_empty() {
            return Err(Error::Plan("plan has no waypoints".into()));
        }
        if let Some(i) = self
            .waypoints
            .iter()
            .position(|p| !p.iter().all(|v| v.is_finite()))
        {
            return Err(Error::Plan(format!("waypoint {i} is not finite")));
        }
        if let Some(i) = self.waypoints.windows(2).position(|w| w[0] == w[1]) {
            return Err(Error::Plan(format!("waypoints {i} and {} coincide", i + 1)));
        }
        Ok(())
    }

    /// Checks the plan shape and that every waypoint satisfies
    /// `|p_i| < xbar1_i - margin`.
    pub fn validate(&self, safe: &SafeSet, margin: f64) -> Result<()> {
        self.check_shape()?;
        if !(margin >= 0.0) {
            return Err(Error::Plan(format!("margin must be >= 0, got {margin}")));
        }
        for (k, p) in self.waypoints.iter().enumerate() {
            for i in 0..2 {
                if !(p[i].abs() < safe.xbar1[i] - margin) {
                    return Err(Error::Plan(format!(
                        "waypoint {k} component {i} = {} is not inside ±{} (margin {margin})",
                        p[i], safe.xbar1[i]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn segments(&self) -> Vec<SegmentProfile> {
        self.waypoints
            .windows(2)
            .map(|w| SegmentProfile::new(w[0], w[1], self.v_max, self.a_max))
            .collect()
    }

    /// Time at which the reference reaches the last waypoint.
    pub fn total_duration(&self) -> f64 {
        self.segments().iter().map(|s| s.duration).sum()
    }
}

/// Origin, the eight vertices of a chamfered rectangle, origin.
///
/// The rectangle has half-extents `margin_fraction * xbar1`; each corner is cut
/// back by `chamfer_fraction` of the half-extent along each axis. Vertices run
/// counter-clockwise starting at the lower vertex on the right edge.
pub fn plan_octagon(
    safe: &SafeSet,
    margin_fraction: f64,
    chamfer_fraction: f64,
) -> Result<WaypointPlan> {
    if !(margin_fraction > 0.0 && margin_fraction < 1.0) {
        return Err(Error::Plan(format!(
            "margin fraction must lie in (0, 1), got {margin_fraction}"
        )));
    }
    if !(chamfer_fraction > 0.0 && chamfer_fraction < 1.0) {
        return Err(Error::Plan(format!(
            "chamfer fraction must lie in (0, 1), got {chamfer_fraction}: \
             the chamfer would reach the half-extent"
        )));
    }
    let hx = margin_fraction * safe.xbar1[0];
    let hy = margin_fraction * safe.xbar1[1];
    let (cx, cy) = (chamfer_fraction * hx, chamfer_fraction * hy);
    let (ex, ey) = (hx - cx, hy - cy);
    let v = Vector2::new;
    let mut waypoints = vec![Vector2::zeros()];
    waypoints.extend([
        v(hx, -ey),
        v(hx, ey),
        v(ex, hy),
        v(-ex, hy),
        v(-hx, ey),
        v(-hx, -ey),
        v(-ex, -hy),
        v(ex, -hy),
    ]);
    waypoints.push(Vector2::zeros());
    WaypointPlan::new(waypoints, DEFAULT_V_MAX, DEFAULT_A_MAX)
}

/// Straight segment traversed with a trapezoidal (or triangular) speed
/// profile, starting and ending at rest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentProfile {
    pub from: Vector2<f64>,
    pub to: Vector2<f64>,
    pub distance: f64,
    pub peak_speed: f64,
    pub accel: f64,
    /// Duration of the acceleration (and of the deceleration) phase.
    pub ramp_time: f64,
    pub duration: f64,
}

impl SegmentProfile {
    pub fn new(from: Vector2<f64>, to: Vector2<f64>, v_max: f64, a_max: f64) -> Self {
        let distance = (to - from).norm();
        let peak_speed = v_max.min((distance * a_max).sqrt());
        let ramp_time = peak_speed / a_max;
        let duration = if distance >= v_max * v_max / a_max {
            distance / v_max + v_max / a_max
        } else {
            2.0 * (distance / a_max).sqrt()
        };
        Self {
            from,
            to,
            distance,
            peak_speed,
            accel: a_max,
            ramp_time,
            duration,
        }
    }

    /// Arc length covered after `t` seconds, clamped to `[0, distance]`.
    pub fn arc_length(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.duration);
        let s = if t <= self.ramp_time {
            0.5 * self.accel * t * t
        } else if t <= self.duration - self.ramp_time {
            0.5 * self.accel * self.ramp_time * self.ramp_time
                + self.peak_speed * (t - self.ramp_time)
        } else {
            let rem = self.duration - t;
            self.distance - 0.5 * self.accel * rem * rem
        };
        s.clamp(0.0, self.distance)
    }

    pub fn position(&self, t: f64) -> Vector2<f64> {
        if t >= self.duration {
            return self.to;
        }
        let frac = self.arc_length(t) / self.distance;
        self.from + (self.to - self.from) * frac
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSample {
    pub t: f64,
    pub x_d1: Vector2<f64>,
}

/// Plan with its segment timing precomputed.
#[derive(Debug, Clone)]
pub struct Reference {
    start: Vector2<f64>,
    segments: Vec<(f64, SegmentProfile)>,
    end_time: f64,
}

impl Reference {
    pub fn new(plan: &WaypointPlan) -> Self {
        let mut t0 = 0.0;
        let segments = plan
            .segments()
            .into_iter()
            .map(|s| {
                let start = t0;
                t0 += s.duration;
                (start, s)
            })
            .collect();
        Self {
            start: plan.waypoints[0],
            segments,
            end_time: t0,
        }
    }

    pub fn end_time(&self) -> f64 {
        self.end_time
    }

    pub fn sample(&self, t: f64) -> ReferenceSample {
        let x_d1 = match self.segments.iter().rev().find(|(start, _)| t >= *start) {
            Some((start, seg)) => seg.position(t - start),
            None => self.start,
        };
        ReferenceSample { t, x_d1 }
    }
}

/// Reference position at time `t`; holds the last waypoint after the plan
/// completes.
pub fn sample_reference(plan: &WaypointPlan, t: f64) -> ReferenceSample {
    Reference::new(plan).sample(t)
}
