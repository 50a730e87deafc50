//! Two-link underactuated pendulum (acrobot).
//!
//! State `(theta1, theta2, omega1, omega2)` with `theta1` measured from the
//! downward vertical and `theta2` relative to link 1; torque acts on the
//! elbow only. Integrated with fixed-step RK4.

use std::f64::consts::PI;

use rand::{Rng, RngCore};

use super::{check_action_bounds, wrap_angle, Interval, SystemModel};
use crate::error::{Error, Result};
use crate::vector::{ActionVec, StateVec};

#[derive(Debug, Clone, PartialEq)]
pub struct AcrobotParams {
    pub m1: f64,
    pub m2: f64,
    pub l1: f64,
    pub l2: f64,
    pub lc1: f64,
    pub lc2: f64,
    /// Link inertias about their centers of mass.
    pub i1: f64,
    pub i2: f64,
    pub g: f64,
    pub tau_max: f64,
    pub dt: f64,
    pub substeps: usize,
    pub max_vel1: f64,
    pub max_vel2: f64,
    pub start_state: Vec<f64>,
    pub goal_state: Vec<f64>,
    /// Goal requires the tip above `goal_height_ratio * l1`.
    pub goal_height_ratio: f64,
    /// Goal requires both joint speeds below this.
    pub goal_max_speed: f64,
    pub distance_weights: Vec<f64>,
}

impl Default for AcrobotParams {
    fn default() -> Self {
        Self {
            m1: 1.0,
            m2: 1.0,
            l1: 1.0,
            l2: 1.0,
            lc1: 0.5,
            lc2: 0.5,
            i1: 1.0,
            i2: 1.0,
            g: 9.8,
            tau_max: 1.0,
            dt: 0.2,
            substeps: 4,
            max_vel1: 4.0 * PI,
            max_vel2: 9.0 * PI,
            start_state: vec![0.0, 0.0, 0.0, 0.0],
            goal_state: vec![PI, 0.0, 0.0, 0.0],
            goal_height_ratio: 1.5,
            goal_max_speed: 1.0,
            distance_weights: vec![1.0, 1.0, 0.1, 0.1],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Acrobot {
    params: AcrobotParams,
    state_bounds: [Interval; 4],
    action_bounds: [Interval; 1],
    torques: [f64; 3],
    start: StateVec,
    goal: StateVec,
}

impl Acrobot {
    pub fn new(params: AcrobotParams) -> Result<Self> {
        let positive = [
            ("m1", params.m1),
            ("m2", params.m2),
            ("l1", params.l1),
            ("l2", params.l2),
            ("lc1", params.lc1),
            ("lc2", params.lc2),
            ("I1", params.i1),
            ("I2", params.i2),
            ("tauMax", params.tau_max),
            ("dt", params.dt),
            ("maxVel1", params.max_vel1),
            ("maxVel2", params.max_vel2),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(params.g >= 0.0 && params.g.is_finite()) {
            return Err(Error::InvalidParameter("g must be nonnegative".into()));
        }
        if params.substeps == 0 {
            return Err(Error::InvalidParameter(
                "substeps must be at least 1".into(),
            ));
        }
        if params.distance_weights.len() != 4
            || params.distance_weights.iter().any(|w| !(*w >= 0.0))
        {
            return Err(Error::InvalidParameter(
                "distanceWeights needs 4 nonnegative entries".into(),
            ));
        }
        let state_bounds = [
            Interval::new(-PI, PI),
            Interval::new(-PI, PI),
            Interval::symmetric(params.max_vel1),
            Interval::symmetric(params.max_vel2),
        ];
        let normalize = |v: &[f64], what: &str| -> Result<StateVec> {
            if v.len() != 4 {
                return Err(Error::InvalidParameter(format!(
                    "{what} needs 4 components"
                )));
            }
            StateVec::new(vec![
                wrap_angle(v[0]),
                wrap_angle(v[1]),
                state_bounds[2].clamp(v[2]),
                state_bounds[3].clamp(v[3]),
            ])
        };
        let start = normalize(&params.start_state, "startState")?;
        let goal = normalize(&params.goal_state, "goalState")?;
        let tau = params.tau_max;
        Ok(Self {
            action_bounds: [Interval::symmetric(tau)],
            torques: [-tau, 0.0, tau],
            state_bounds,
            start,
            goal,
            params,
        })
    }

    pub fn params(&self) -> &AcrobotParams {
        &self.params
    }

    /// The discrete torque set used for sampling and steering.
    pub fn torques(&self) -> &[f64] {
        &self.torques
    }

    /// Joint accelerations from `M(q) qdd = [0, tau] - C(q, qd) - G(q)`.
    pub fn accelerations(&self, s: &[f64; 4], tau: f64) -> [f64; 2] {
        let p = &self.params;
        let (th1, th2, w1, w2) = (s[0], s[1], s[2], s[3]);
        let (s2, c2) = th2.sin_cos();
        let m11 = p.m1 * p.lc1 * p.lc1
            + p.m2 * (p.l1 * p.l1 + p.lc2 * p.lc2 + 2.0 * p.l1 * p.lc2 * c2)
            + p.i1
            + p.i2;
        let m12 = p.m2 * (p.lc2 * p.lc2 + p.l1 * p.lc2 * c2) + p.i2;
        let m22 = p.m2 * p.lc2 * p.lc2 + p.i2;
        let h = p.m2 * p.l1 * p.lc2 * s2;
        let phi2 = p.m2 * p.lc2 * p.g * (th1 + th2).sin();
        let phi1 = (p.m1 * p.lc1 + p.m2 * p.l1) * p.g * th1.sin() + phi2;
        let rhs1 = h * w2 * w2 + 2.0 * h * w1 * w2 - phi1;
        let rhs2 = tau - h * w1 * w1 - phi2;
        let det = m11 * m22 - m12 * m12;
        [
            (m22 * rhs1 - m12 * rhs2) / det,
            (m11 * rhs2 - m12 * rhs1) / det,
        ]
    }

    fn derivative(&self, s: &[f64; 4], tau: f64) -> [f64; 4] {
        let [a1, a2] = self.accelerations(s, tau);
        [s[2], s[3], a1, a2]
    }

    /// One RK4 step of length `h` without wrapping or clamping.
    pub fn rk4_step(&self, s: &[f64; 4], tau: f64, h: f64) -> [f64; 4] {
        let add = |a: &[f64; 4], k: &[f64; 4], f: f64| std::array::from_fn(|i| a[i] + f * k[i]);
        let k1 = self.derivative(s, tau);
        let k2 = self.derivative(&add(s, &k1, 0.5 * h), tau);
        let k3 = self.derivative(&add(s, &k2, 0.5 * h), tau);
        let k4 = self.derivative(&add(s, &k3, h), tau);
        std::array::from_fn(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
    }

    /// Kinetic plus potential energy, with zero potential at the hanging rest pose.
    pub fn energy(&self, s: &[f64]) -> f64 {
        let p = &self.params;
        let (th1, th2, w1, w2) = (s[0], s[1], s[2], s[3]);
        let c2 = th2.cos();
        let m11 = p.m1 * p.lc1 * p.lc1
            + p.m2 * (p.l1 * p.l1 + p.lc2 * p.lc2 + 2.0 * p.l1 * p.lc2 * c2)
            + p.i1
            + p.i2;
        let m12 = p.m2 * (p.lc2 * p.lc2 + p.l1 * p.lc2 * c2) + p.i2;
        let m22 = p.m2 * p.lc2 * p.lc2 + p.i2;
        let kinetic = 0.5 * (m11 * w1 * w1 + 2.0 * m12 * w1 * w2 + m22 * w2 * w2);
        let potential = p.m1 * p.g * p.lc1 * (1.0 - th1.cos())
            + p.m2 * p.g * (p.l1 + p.lc2 - p.l1 * th1.cos() - p.lc2 * (th1 + th2).cos());
        kinetic + potential
    }

    /// Height of the second link's tip above the pivot.
    pub fn tip_height(&self, s: &[f64]) -> f64 {
        -self.params.l1 * s[0].cos() - self.params.l2 * (s[0] + s[1]).cos()
    }
}

impl SystemModel for Acrobot {
    fn name(&self) -> &str {
        "acrobot"
    }

    fn state_bounds(&self) -> &[Interval] {
        &self.state_bounds
    }

    fn action_bounds(&self) -> &[Interval] {
        &self.action_bounds
    }

    fn angular_dims(&self) -> &[usize] {
        &[0, 1]
    }

    fn distance_weights(&self) -> &[f64] {
        &self.params.distance_weights
    }

    fn sample_action(&self, rng: &mut dyn RngCore, _from: &StateVec) -> ActionVec {
        let tau = self.torques[rng.gen_range(0..self.torques.len())];
        ActionVec::new(vec![tau]).expect("finite")
    }

    /// The torque from the discrete set whose successor lands closest to `toward`.
    fn steer(&self, from: &StateVec, toward: &StateVec) -> (StateVec, ActionVec) {
        let mut best: Option<(f64, StateVec, ActionVec)> = None;
        for &tau in &self.torques {
            let action = ActionVec::new(vec![tau]).expect("finite");
            let next = self
                .apply_action(from, &action)
                .expect("torque within bounds");
            let d = self.distance(&next, toward);
            if best.as_ref().map_or(true, |(bd, _, _)| d < *bd) {
                best = Some((d, next, action));
            }
        }
        let (_, next, action) = best.expect("torque set is nonempty");
        (next, action)
    }

    fn apply_action(&self, from: &StateVec, action: &ActionVec) -> Result<StateVec> {
        from.expect_dim(4)?;
        check_action_bounds(action, &self.action_bounds)?;
        let tau = action[0];
        let h = self.params.dt / self.params.substeps as f64;
        let mut s = [from[0], from[1], from[2], from[3]];
        for _ in 0..self.params.substeps {
            s = self.rk4_step(&s, tau, h);
        }
        StateVec::new(vec![
            wrap_angle(s[0]),
            wrap_angle(s[1]),
            self.state_bounds[2].clamp(s[2]),
            self.state_bounds[3].clamp(s[3]),
        ])
    }

    /// Elapsed time is the cost.
    fn trans_reward(&self, _from: &StateVec, _action: &ActionVec, _to: &StateVec) -> f64 {
        -self.params.dt
    }

    fn is_goal(&self, s: &[f64]) -> bool {
        self.tip_height(s) > self.params.goal_height_ratio * self.params.l1
            && s[2].abs() < self.params.goal_max_speed
            && s[3].abs() < self.params.goal_max_speed
    }

    fn start_state(&self) -> &StateVec {
        &self.start
    }

    fn goal_state(&self) -> &StateVec {
        &self.goal
    }

    /// Snaps to the nearest torque in the discrete set.
    fn clamp_action(&self, raw: &[f64]) -> ActionVec {
        let x = raw[0];
        let mut best = self.torques[1];
        for &t in &[0.0, -self.params.tau_max, self.params.tau_max] {
            if (t - x).abs() < (best - x).abs() {
                best = t;
            }
        }
        ActionVec::new(vec![best]).expect("finite")
    }
}
