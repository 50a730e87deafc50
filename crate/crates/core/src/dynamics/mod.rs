//! Physical systems the planner can drive.
//!
//! A [`SystemModel`] bundles everything system-specific: bounds, the distance
//! metric, sampling, steering, forward simulation, the immediate reward and the
//! goal predicate. Implementations are stateless after construction; random
//! sources are passed in per call.

mod acrobot;
mod diffdrive;
mod nullspace;

pub use acrobot::{Acrobot, AcrobotParams};
pub use diffdrive::{optimal_path_y, sinusoid_rms, terrain_cost, DiffDrive, DiffDriveParams};
pub use nullspace::{null_space_basis, NullSpace, NullSpaceParams};

use std::f64::consts::PI;

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::vector::{ActionVec, StateVec};

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn symmetric(half: f64) -> Self {
        Self {
            lo: -half,
            hi: half,
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        self.lo + rng.gen::<f64>() * self.width()
    }
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    if (-PI..PI).contains(&a) {
        return a;
    }
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can round up to exactly 2*pi
    if w >= PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// `sqrt(sum (w_i * d_i)^2)` with `d_i` wrapped on angular dimensions.
pub fn weighted_distance(a: &[f64], b: &[f64], weights: &[f64], angular: &[usize]) -> f64 {
    let mut sum = 0.0;
    for (i, ((x, y), w)) in a.iter().zip(b).zip(weights).enumerate() {
        let mut d = x - y;
        if angular.contains(&i) {
            d = wrap_angle(d);
        }
        sum += (w * d) * (w * d);
    }
    sum.sqrt()
}

pub trait SystemModel: Send + Sync {
    fn name(&self) -> &str;

    fn state_bounds(&self) -> &[Interval];

    fn action_bounds(&self) -> &[Interval];

    /// State dimensions that wrap on `[-pi, pi)`.
    fn angular_dims(&self) -> &[usize];

    fn distance_weights(&self) -> &[f64];

    fn state_dim(&self) -> usize {
        self.state_bounds().len()
    }

    fn action_dim(&self) -> usize {
        self.action_bounds().len()
    }

    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        weighted_distance(a, b, self.distance_weights(), self.angular_dims())
    }

    fn checked_distance(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        for v in [a, b] {
            if v.len() != self.state_dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.state_dim(),
                    got: v.len(),
                });
            }
        }
        Ok(self.distance(a, b))
    }

    fn sample_state(&self, rng: &mut dyn RngCore) -> StateVec {
        let s = self.state_bounds().iter().map(|b| b.sample(rng)).collect();
        StateVec::new(s).expect("bounds are finite")
    }

    fn sample_action(&self, rng: &mut dyn RngCore, from: &StateVec) -> ActionVec;

    /// One transition from `from` toward `toward`; the returned state equals
    /// `apply_action(from, action)`.
    fn steer(&self, from: &StateVec, toward: &StateVec) -> (StateVec, ActionVec);

    fn apply_action(&self, from: &StateVec, action: &ActionVec) -> Result<StateVec>;

    /// Immediate reward of the transition `from --action--> to`. Never positive.
    fn trans_reward(&self, from: &StateVec, action: &ActionVec, to: &StateVec) -> f64;

    fn is_goal(&self, s: &[f64]) -> bool;

    fn start_state(&self) -> &StateVec;

    fn goal_state(&self) -> &StateVec;

    /// Maps an arbitrary action proposal into the admissible action set.
    fn clamp_action(&self, raw: &[f64]) -> ActionVec {
        let a = raw
            .iter()
            .zip(self.action_bounds())
            .map(|(x, b)| b.clamp(*x))
            .collect();
        ActionVec::new(a).expect("clamped action is finite")
    }

    /// Diagonal of the state box in the weighted metric.
    fn state_diagonal(&self) -> f64 {
        self.state_bounds()
            .iter()
            .zip(self.distance_weights())
            .map(|(b, w)| (w * b.width()).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

pub(crate) fn check_action_bounds(action: &[f64], bounds: &[Interval]) -> Result<()> {
    if action.len() != bounds.len() {
        return Err(Error::DimensionMismatch {
            expected: bounds.len(),
            got: action.len(),
        });
    }
    for (index, (&value, b)) in action.iter().zip(bounds).enumerate() {
        let tol = 1e-12 * b.width().max(1.0);
        if !(value >= b.lo - tol && value <= b.hi + tol) {
            return Err(Error::ActionOutOfBounds {
                index,
                value,
                lo: b.lo,
                hi: b.hi,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_range() {
        for k in -20..=20 {
            let a = k as f64 * 0.77;
            let w = wrap_angle(a);
            assert!((-PI..PI).contains(&w));
            assert!(
                ((a - w) / (2.0 * PI)).fract().abs() < 1e-9
                    || ((a - w) / (2.0 * PI)).fract().abs() > 1.0 - 1e-9
            );
        }
        assert_eq!(wrap_angle(PI), -PI);
        assert_eq!(wrap_angle(0.5), 0.5);
    }

    #[test]
    fn distance_wraps_angles() {
        let d = weighted_distance(&[0.0, 0.0, 3.1], &[0.0, 0.0, -3.1], &[1.0, 1.0, 1.0], &[2]);
        assert!((d - (2.0 * PI - 6.2)).abs() < 1e-12);
        assert!((d - 0.0832).abs() < 1e-4);
        let d = weighted_distance(&[3.0, 4.0, 0.0], &[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0], &[2]);
        assert_eq!(d, 5.0);
        assert_eq!(
            weighted_distance(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], &[1.0, 1.0, 0.5], &[2]),
            0.0
        );
    }
}
