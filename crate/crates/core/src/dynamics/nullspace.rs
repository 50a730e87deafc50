//! Joint-space system whose velocities must satisfy `C * theta_dot = 0`.
//!
//! `C` is a `b x n` coupling matrix (the coupling inertia between a floating
//! base and the arm joints, for reactionless motion). Every admissible joint
//! rate is `theta_dot = sum_i alpha_i v_i` over an orthonormal basis `v_i` of
//! the null space of `C`; the action is the coefficient vector `alpha`, so the
//! constraint holds by construction.

use rand::{Rng, RngCore};

use super::{wrap_angle, Interval, SystemModel};
use crate::error::{Error, Result};
use crate::vector::{ActionVec, StateVec};

/// Relative threshold below which a Gram-Schmidt residual counts as dependent.
const RANK_TOL: f64 = 1e-10;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Removes the components along `basis` (orthonormal) from `v`, twice.
fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(v, q);
            v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
        }
    }
}

/// Orthonormal basis of the null space of the `rows.len() x n` matrix `rows`.
///
/// Rows are orthonormalized first, then the standard basis vectors are swept
/// in order and whatever survives projection is kept. The first nonzero
/// component of every returned vector is positive.
pub fn null_space_basis(rows: &[Vec<f64>], n: usize) -> Result<Vec<Vec<f64>>> {
    let mut row_basis: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    for row in rows {
        if row.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: row.len(),
            });
        }
        let scale = norm(row);
        let mut v = row.clone();
        orthogonalize(&mut v, &row_basis);
        let r = norm(&v);
        if scale == 0.0 || r <= RANK_TOL * scale {
            return Err(Error::RankDeficient);
        }
        v.iter_mut().for_each(|x| *x /= r);
        row_basis.push(v);
    }

    let mut all = row_basis;
    let mut null = Vec::with_capacity(n.saturating_sub(rows.len()));
    for k in 0..n {
        if all.len() == n {
            break;
        }
        let mut v = vec![0.0; n];
        v[k] = 1.0;
        orthogonalize(&mut v, &all);
        let r = norm(&v);
        if r <= 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= r);
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
        all.push(v.clone());
        null.push(v);
    }
    Ok(null)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NullSpaceParams {
    /// Row-major `b x n` coupling matrix.
    pub coupling_matrix: Vec<Vec<f64>>,
    /// Convergence rate of the joint-space control law.
    pub lambda: f64,
    /// Target joint configuration; also the goal state.
    pub theta_desired: Vec<f64>,
    pub dt: f64,
    pub start_state: Vec<f64>,
    /// Norm bound on the null-space coefficients.
    pub alpha_max: f64,
    pub goal_tolerance: f64,
}

impl Default for NullSpaceParams {
    /// Four joints, one constraint row drawn once from a seeded generator.
    /// The desired configuration lies on the start's constraint leaf.
    fn default() -> Self {
        Self {
            coupling_matrix: vec![vec![0.8839, 0.0695, 0.6305, -0.092]],
            lambda: 1.0,
            theta_desired: vec![0.532699, 0.847531, -0.975997, -0.930544],
            dt: 0.1,
            start_state: vec![0.0, 0.0, 0.0, 0.0],
            alpha_max: 2.0,
            goal_tolerance: 0.15,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NullSpace {
    params: NullSpaceParams,
    basis: Vec<Vec<f64>>,
    state_bounds: Vec<Interval>,
    action_bounds: Vec<Interval>,
    angular: Vec<usize>,
    weights: Vec<f64>,
    start: StateVec,
    goal: StateVec,
}

impl NullSpace {
    pub fn new(params: NullSpaceParams) -> Result<Self> {
        let n = params.theta_desired.len();
        if n == 0 {
            return Err(Error::InvalidParameter(
                "thetaDesired must be nonempty".into(),
            ));
        }
        let b = params.coupling_matrix.len();
        if b == 0 || b >= n {
            return Err(Error::InvalidParameter(format!(
                "coupling matrix needs 1..{n} rows for {n} joints, got {b}"
            )));
        }
        for (name, v) in [
            ("lambda", params.lambda),
            ("dt", params.dt),
            ("alphaMax", params.alpha_max),
            ("goalTolerance", params.goal_tolerance),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if params.start_state.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: params.start_state.len(),
            });
        }
        let basis = null_space_basis(&params.coupling_matrix, n)?;
        let u = basis.len();
        let wrap_all = |v: &[f64]| StateVec::new(v.iter().map(|x| wrap_angle(*x)).collect());
        Ok(Self {
            start: wrap_all(&params.start_state)?,
            goal: wrap_all(&params.theta_desired)?,
            state_bounds: vec![Interval::new(-std::f64::consts::PI, std::f64::consts::PI); n],
            action_bounds: vec![Interval::symmetric(params.alpha_max); u],
            angular: (0..n).collect(),
            weights: vec![1.0; n],
            basis,
            params,
        })
    }

    pub fn params(&self) -> &NullSpaceParams {
        &self.params
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    /// `theta_dot = sum_i alpha_i v_i`.
    pub fn joint_rates(&self, alpha: &[f64]) -> Vec<f64> {
        let mut rates = vec![0.0; self.state_bounds.len()];
        for (a, v) in alpha.iter().zip(&self.basis) {
            rates.iter_mut().zip(v).for_each(|(r, x)| *r += a * x);
        }
        rates
    }

    /// `C * theta_dot`, the coupling momentum the constraint drives to zero.
    pub fn coupling_momentum(&self, rates: &[f64]) -> Vec<f64> {
        self.params
            .coupling_matrix
            .iter()
            .map(|row| dot(row, rates))
            .collect()
    }

    /// Least-squares null-space coefficients for the rate `-lambda * (current - target)`,
    /// scaled back onto the norm ball when they exceed `alpha_max`.
    pub fn control_coefficients(&self, current: &[f64], target: &[f64]) -> Vec<f64> {
        let required: Vec<f64> = current
            .iter()
            .zip(target)
            .map(|(c, t)| -self.params.lambda * wrap_angle(c - t))
            .collect();
        let mut alpha: Vec<f64> = self.basis.iter().map(|v| dot(v, &required)).collect();
        let r = norm(&alpha);
        if r > self.params.alpha_max {
            let k = self.params.alpha_max / r;
            alpha.iter_mut().for_each(|a| *a *= k);
        }
        alpha
    }

    fn integrate(&self, from: &[f64], alpha: &[f64]) -> StateVec {
        let rates = self.joint_rates(alpha);
        let next = from
            .iter()
            .zip(&rates)
            .map(|(t, r)| wrap_angle(t + r * self.params.dt))
            .collect();
        StateVec::new(next).expect("finite")
    }
}

impl SystemModel for NullSpace {
    fn name(&self) -> &str {
        "nullspace"
    }

    fn state_bounds(&self) -> &[Interval] {
        &self.state_bounds
    }

    fn action_bounds(&self) -> &[Interval] {
        &self.action_bounds
    }

    fn angular_dims(&self) -> &[usize] {
        &self.angular
    }

    fn distance_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Uniform over the coefficient ball of radius `alpha_max`.
    fn sample_action(&self, rng: &mut dyn RngCore, _from: &StateVec) -> ActionVec {
        let r = self.params.alpha_max;
        loop {
            let alpha: Vec<f64> = (0..self.basis.len())
                .map(|_| r * (2.0 * rng.gen::<f64>() - 1.0))
                .collect();
            if norm(&alpha) <= r {
                return ActionVec::new(alpha).expect("finite");
            }
        }
    }

    fn steer(&self, from: &StateVec, toward: &StateVec) -> (StateVec, ActionVec) {
        let alpha = self.control_coefficients(from, toward);
        let next = self.integrate(from, &alpha);
        (next, ActionVec::new(alpha).expect("finite"))
    }

    fn apply_action(&self, from: &StateVec, action: &ActionVec) -> Result<StateVec> {
        from.expect_dim(self.state_bounds.len())?;
        super::check_action_bounds(action, &self.action_bounds)?;
        let r = norm(action);
        if r > self.params.alpha_max * (1.0 + 1e-12) {
            return Err(Error::ActionOutOfBounds {
                index: 0,
                value: r,
                lo: 0.0,
                hi: self.params.alpha_max,
            });
        }
        Ok(self.integrate(from, action))
    }

    /// Effort plus elapsed time: `-(|theta_dot| + 1) * dt`.
    fn trans_reward(&self, _from: &StateVec, action: &ActionVec, _to: &StateVec) -> f64 {
        -(norm(&self.joint_rates(action)) + 1.0) * self.params.dt
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

    /// Clamps each coefficient, then rescales onto the norm ball.
    fn clamp_action(&self, raw: &[f64]) -> ActionVec {
        let mut alpha: Vec<f64> = raw
            .iter()
            .zip(&self.action_bounds)
            .map(|(x, b)| b.clamp(*x))
            .collect();
        let r = norm(&alpha);
        if r > self.params.alpha_max {
            let k = self.params.alpha_max / r;
            alpha.iter_mut().for_each(|a| *a *= k);
        }
        ActionVec::new(alpha).expect("finite")
    }
}
