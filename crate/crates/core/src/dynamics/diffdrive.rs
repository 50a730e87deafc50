//! Differential-drive robot on a terrain whose cheapest path is a sinusoid.
//!
//! State `(x, y, theta)`, action `(v, omega)` held for one timestep. Motion is
//! integrated exactly along the circular arc the action describes.

use std::f64::consts::PI;

use rand::RngCore;

use super::{check_action_bounds, wrap_angle, Interval, SystemModel};
use crate::error::{Error, Result};
use crate::vector::{ActionVec, StateVec};

/// Points sampled along an arc when integrating terrain cost.
const ARC_SAMPLES: usize = 5;

/// Terrain cost at `(x, y)`; the maximum `-1` is attained on `y = 50 + 20 sin(2 pi x / 100)`.
pub fn terrain_cost(x: f64, y: f64) -> f64 {
    -2.0 * (20.0 * (2.0 * PI * x / 100.0).sin() - y + 50.0).abs() - 1.0
}

/// `y` on the lowest-cost sinusoid at `x`.
pub fn optimal_path_y(x: f64) -> f64 {
    50.0 + 20.0 * (2.0 * PI * x / 100.0).sin()
}

/// RMS vertical deviation of `(x, y, ..)` states from the lowest-cost sinusoid.
pub fn sinusoid_rms<'a, I>(states: I) -> f64
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let (mut sum, mut n) = (0.0, 0usize);
    for s in states {
        let e = s[1] - optimal_path_y(s[0]);
        sum += e * e;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffDriveParams {
    pub axle_width: f64,
    pub wheel_radius: f64,
    pub dt: f64,
    pub max_linear_speed: f64,
    pub max_turn_rate: f64,
    /// Side of the square workspace `[0, size]^2`.
    pub workspace_size: f64,
    pub start_state: Vec<f64>,
    pub goal_state: Vec<f64>,
    pub goal_tolerance: f64,
    pub distance_weights: Vec<f64>,
}

impl Default for DiffDriveParams {
    fn default() -> Self {
        Self {
            axle_width: 0.2,
            wheel_radius: 0.1,
            dt: 0.5,
            max_linear_speed: 2.0,
            max_turn_rate: 1.0,
            workspace_size: 100.0,
            start_state: vec![0.0, 50.0, 0.0],
            goal_state: vec![100.0, 50.0, 0.0],
            goal_tolerance: 2.0,
            distance_weights: vec![1.0, 1.0, 0.5],
        }
    }
}

#[derive(Debug, Clone)]
pub struct DiffDrive {
    params: DiffDriveParams,
    state_bounds: [Interval; 3],
    action_bounds: [Interval; 2],
    start: StateVec,
    goal: StateVec,
}

impl DiffDrive {
    pub fn new(params: DiffDriveParams) -> Result<Self> {
        let positive = [
            ("axleWidth", params.axle_width),
            ("wheelRadius", params.wheel_radius),
            ("dt", params.dt),
            ("maxLinearSpeed", params.max_linear_speed),
            ("maxTurnRate", params.max_turn_rate),
            ("workspaceSize", params.workspace_size),
            ("goalTolerance", params.goal_tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if params.distance_weights.len() != 3
            || params.distance_weights.iter().any(|w| !(*w >= 0.0))
        {
            return Err(Error::InvalidParameter(
                "distanceWeights needs 3 nonnegative entries".into(),
            ));
        }
        let ws = Interval::new(0.0, params.workspace_size);
        let state_bounds = [ws, ws, Interval::new(-PI, PI)];
        let normalize = |v: &[f64], what: &str| -> Result<StateVec> {
            if v.len() != 3 {
                return Err(Error::InvalidParameter(format!(
                    "{what} needs 3 components"
                )));
            }
            StateVec::new(vec![ws.clamp(v[0]), ws.clamp(v[1]), wrap_angle(v[2])])
        };
        let start = normalize(&params.start_state, "startState")?;
        let goal = normalize(&params.goal_state, "goalState")?;
        let action_bounds = [
            Interval::new(0.0, params.max_linear_speed),
            Interval::symmetric(params.max_turn_rate),
        ];
        Ok(Self {
            params,
            state_bounds,
            action_bounds,
            start,
            goal,
        })
    }

    pub fn params(&self) -> &DiffDriveParams {
        &self.params
    }

    /// Pose after following `(v, omega)` for `t` seconds, before workspace clamping.
    fn arc_point(&self, s: &[f64], v: f64, omega: f64, t: f64) -> [f64; 3] {
        let (x, y, th) = (s[0], s[1], s[2]);
        if omega.abs() < 1e-9 {
            [x + v * t * th.cos(), y + v * t * th.sin(), th]
        } else {
            let th1 = th + omega * t;
            let r = v / omega;
            [
                x + r * (th1.sin() - th.sin()),
                y - r * (th1.cos() - th.cos()),
                th1,
            ]
        }
    }

    /// Left and right wheel angular rates realizing `(v, omega)`.
    pub fn wheel_rates(&self, v: f64, omega: f64) -> (f64, f64) {
        let half = 0.5 * self.params.axle_width;
        (
            (v - omega * half) / self.params.wheel_radius,
            (v + omega * half) / self.params.wheel_radius,
        )
    }
}

impl SystemModel for DiffDrive {
    fn name(&self) -> &str {
        "diffdrive"
    }

    fn state_bounds(&self) -> &[Interval] {
        &self.state_bounds
    }

    fn action_bounds(&self) -> &[Interval] {
        &self.action_bounds
    }

    fn angular_dims(&self) -> &[usize] {
        &[2]
    }

    fn distance_weights(&self) -> &[f64] {
        &self.params.distance_weights
    }

    fn sample_action(&self, rng: &mut dyn RngCore, _from: &StateVec) -> ActionVec {
        let a = self.action_bounds.iter().map(|b| b.sample(rng)).collect();
        ActionVec::new(a).expect("finite bounds")
    }

    /// Full speed (slowing only to avoid overshooting a close target) with a
    /// turn rate proportional to the heading error.
    fn steer(&self, from: &StateVec, toward: &StateVec) -> (StateVec, ActionVec) {
        let dt = self.params.dt;
        let (dx, dy) = (toward[0] - from[0], toward[1] - from[1]);
        let planar = dx.hypot(dy);
        let heading_err = if planar > 0.0 {
            wrap_angle(dy.atan2(dx) - from[2])
        } else {
            0.0
        };
        let omega = self.action_bounds[1].clamp(heading_err / dt);
        let v = self.action_bounds[0].clamp(planar / dt);
        let action = ActionVec::new(vec![v, omega]).expect("finite");
        let next = self
            .apply_action(from, &action)
            .expect("steering action within bounds");
        (next, action)
    }

    fn apply_action(&self, from: &StateVec, action: &ActionVec) -> Result<StateVec> {
        from.expect_dim(3)?;
        check_action_bounds(action, &self.action_bounds)?;
        let p = self.arc_point(from, action[0], action[1], self.params.dt);
        let ws = self.state_bounds[0];
        StateVec::new(vec![ws.clamp(p[0]), ws.clamp(p[1]), wrap_angle(p[2])])
    }

    /// `dt` times the mean terrain cost at the midpoints of five equal arc segments.
    fn trans_reward(&self, from: &StateVec, action: &ActionVec, _to: &StateVec) -> f64 {
        let dt = self.params.dt;
        let ws = self.state_bounds[0];
        let mut sum = 0.0;
        for k in 0..ARC_SAMPLES {
            let t = (k as f64 + 0.5) / ARC_SAMPLES as f64 * dt;
            let p = self.arc_point(from, action[0], action[1], t);
            sum += terrain_cost(ws.clamp(p[0]), ws.clamp(p[1]));
        }
        dt * sum / ARC_SAMPLES as f64
    }

    fn is_goal(&self, s: &[f64]) -> bool {
        self.distance(s, &self.goal) <= self.params.goal_tolerance
    }

    fn start_state(&self) -> &StateVec {
        &self.start
    }

    fn goal_state(&self) -> &StateVec {
        &self.goal
    }
}
