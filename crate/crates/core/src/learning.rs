//! Value and policy learning from the search tree.
//!
//! State values are learned with TD(0) along each new solution path. The
//! greedy policy is rebuilt from the whole tree: transitions are grouped by
//! the proximity of their source states and each group contributes the action
//! whose child scores best under `reward + gamma * V(child)`.

use std::collections::{HashMap, VecDeque};

use rand::seq::index;
use rand::RngCore;

use crate::approximator::{Mlp, TrainParams, TrainSample};
use crate::dynamics::SystemModel;
use crate::error::{Error, Result};
use crate::tree::{NodeId, SampleType, Trajectory, Tree, TreeNode};
use crate::vector::StateVec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnParams {
    /// TD step size, in `(0, 1]`.
    pub eta: f64,
    /// Discount factor, in `(0, 1]`.
    pub gamma: f64,
    pub goal_reward: f64,
    /// Source states within this distance of a group's representative share the group.
    pub group_radius: f64,
}

impl Default for LearnParams {
    fn default() -> Self {
        Self {
            eta: 0.1,
            gamma: 0.99,
            goal_reward: 0.0,
            group_radius: 1.0,
        }
    }
}

impl LearnParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "eta must lie in (0, 1], got {}",
                self.eta
            )));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must lie in (0, 1], got {}",
                self.gamma
            )));
        }
        if !self.goal_reward.is_finite() {
            return Err(Error::InvalidParameter("goalReward must be finite".into()));
        }
        if !(self.group_radius > 0.0 && self.group_radius.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "groupRadius must be positive, got {}",
                self.group_radius
            )));
        }
        Ok(())
    }
}

/// 2% of the weighted state-space diagonal.
pub fn default_group_radius(system: &dyn SystemModel) -> f64 {
    0.02 * system.state_diagonal()
}

/// TD(0) targets along a solution path, terminal first.
///
/// Walking back from the goal, each node's target is
/// `(1 - eta) V(s) + eta * next`, after which `next` becomes
/// `reward(parent -> s) + gamma * V(s)`. All estimates come from the network
/// as it was before this update.
pub fn td_targets(
    value_net: &Mlp,
    trajectory: &Trajectory,
    params: &LearnParams,
    system: &dyn SystemModel,
) -> Result<Vec<TrainSample>> {
    let terminal = trajectory.nodes.last().ok_or(Error::NotAtGoal)?;
    if !system.is_goal(&terminal.state) {
        return Err(Error::NotAtGoal);
    }
    let states: Vec<&[f64]> = trajectory
        .nodes
        .iter()
        .rev()
        .map(|n| n.state.as_slice())
        .collect();
    let values = value_net.map_first_output(states.iter().copied())?;
    let mut next = params.goal_reward;
    let mut samples = Vec::with_capacity(trajectory.nodes.len());
    for (node, v) in trajectory.nodes.iter().rev().zip(values) {
        let target = (1.0 - params.eta) * v + params.eta * next;
        samples.push(TrainSample::new(node.state.to_vec(), vec![target]));
        next = node.trans_cost + params.gamma * v;
    }
    Ok(samples)
}

/// Warm-start retraining with a bounded replay buffer.
///
/// Each retrain fits the fresh samples plus uniformly drawn replay samples,
/// up to `max_batch` in total. With `capacity == 0` nothing is kept between
/// calls.
#[derive(Debug, Clone)]
pub struct Retrainer {
    pub params: TrainParams,
    capacity: usize,
    max_batch: usize,
    buffer: VecDeque<TrainSample>,
}

impl Retrainer {
    pub fn new(params: TrainParams, capacity: usize, max_batch: usize) -> Self {
        Self {
            params,
            capacity,
            max_batch: max_batch.max(1),
            buffer: VecDeque::new(),
        }
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    pub fn retrain(
        &mut self,
        net: &mut Mlp,
        fresh: Vec<TrainSample>,
        rng: &mut dyn RngCore,
    ) -> Result<f64> {
        if fresh.is_empty() {
            return Err(Error::EmptySamples);
        }
        let batch: Vec<TrainSample> = if fresh.len() >= self.max_batch {
            let mut picked = index::sample(rng, fresh.len(), self.max_batch).into_vec();
            picked.sort_unstable();
            picked.into_iter().map(|i| fresh[i].clone()).collect()
        } else {
            let room = (self.max_batch - fresh.len()).min(self.buffer.len());
            let mut batch = fresh.clone();
            if room > 0 {
                let mut picked = index::sample(rng, self.buffer.len(), room).into_vec();
                picked.sort_unstable();
                batch.extend(picked.into_iter().map(|i| self.buffer[i].clone()));
            }
            batch
        };
        if self.capacity > 0 {
            self.buffer.extend(fresh);
            while self.buffer.len() > self.capacity {
                self.buffer.pop_front();
            }
        }
        net.train(&batch, &self.params, rng)
    }
}

/// Retrains the value net on the TD targets of one solution path.
pub fn update_state_values(
    value_net: &mut Mlp,
    retrainer: &mut Retrainer,
    trajectory: &Trajectory,
    params: &LearnParams,
    system: &dyn SystemModel,
    rng: &mut dyn RngCore,
) -> Result<(usize, f64)> {
    let samples = td_targets(value_net, trajectory, params, system)?;
    let n = samples.len();
    let loss = retrainer.retrain(value_net, samples, rng)?;
    Ok((n, loss))
}

/// Leader clustering of tree states, maintained incrementally in id order.
///
/// A node joins the lowest-numbered existing group whose representative lies
/// within `radius`; otherwise it founds a new group. A spatial hash over the
/// weighted state coordinates keeps lookups local.
#[derive(Debug, Clone)]
pub struct StateGroups {
    radius: f64,
    scale: Vec<f64>,
    lo: Vec<f64>,
    /// Cell count along each angular dimension, `None` for linear ones.
    wrap_cells: Vec<Option<i64>>,
    representatives: Vec<NodeId>,
    rep_states: Vec<StateVec>,
    node_group: Vec<usize>,
    cells: HashMap<Vec<i64>, Vec<usize>>,
}

impl StateGroups {
    pub fn new(system: &dyn SystemModel, radius: f64) -> Self {
        assert!(radius > 0.0, "group radius must be positive");
        let dim = system.state_dim();
        let angular = system.angular_dims();
        let mut scale = Vec::with_capacity(dim);
        let mut wrap_cells = Vec::with_capacity(dim);
        for (i, w) in system.distance_weights().iter().enumerate() {
            let s = w / radius;
            scale.push(s);
            wrap_cells.push(if angular.contains(&i) && s > 0.0 {
                Some((s * 2.0 * std::f64::consts::PI).ceil().max(1.0) as i64)
            } else {
                None
            });
        }
        Self {
            radius,
            scale,
            lo: system.state_bounds().iter().map(|b| b.lo).collect(),
            wrap_cells,
            representatives: Vec::new(),
            rep_states: Vec::new(),
            node_group: Vec::new(),
            cells: HashMap::new(),
        }
    }

    /// Groups every node of `tree`.
    pub fn build(tree: &Tree, system: &dyn SystemModel, radius: f64) -> Self {
        let mut groups = Self::new(system, radius);
        groups.sync(tree, system);
        groups
    }

    /// Assigns groups to any nodes added since the last call.
    pub fn sync(&mut self, tree: &Tree, system: &dyn SystemModel) {
        for node in &tree.nodes()[self.node_group.len()..] {
            self.insert(node, system);
        }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.representatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.representatives.is_empty()
    }

    pub fn group_of(&self, id: NodeId) -> usize {
        self.node_group[id.0]
    }

    pub fn representative(&self, group: usize) -> NodeId {
        self.representatives[group]
    }

    pub fn representative_state(&self, group: usize) -> &StateVec {
        &self.rep_states[group]
    }

    fn cell(&self, s: &[f64]) -> Vec<i64> {
        s.iter()
            .enumerate()
            .map(|(i, x)| {
                let c = ((x - self.lo[i]) * self.scale[i]).floor() as i64;
                match self.wrap_cells[i] {
                    Some(n) => c.rem_euclid(n),
                    None => c,
                }
            })
            .collect()
    }

    fn neighbor_offsets(&self, i: usize) -> Vec<i64> {
        if self.scale[i] == 0.0 {
            return vec![0];
        }
        match self.wrap_cells[i] {
            // Across the wrap seam one partial cell can sit between two full
            // ones, so angular dimensions look two cells each way.
            Some(n) if n <= 5 => (0..n).collect(),
            Some(_) => vec![-2, -1, 0, 1, 2],
            None => vec![-1, 0, 1],
        }
    }

    fn insert(&mut self, node: &TreeNode, system: &dyn SystemModel) {
        debug_assert_eq!(node.id.0, self.node_group.len());
        let home = self.cell(&node.state);
        let mut best: Option<usize> = None;
        let mut key = home.clone();
        let offsets: Vec<Vec<i64>> = (0..home.len()).map(|i| self.neighbor_offsets(i)).collect();
        let mut counter = vec![0usize; home.len()];
        'outer: loop {
            for i in 0..home.len() {
                let off = offsets[i][counter[i]];
                key[i] = match self.wrap_cells[i] {
                    Some(n) if n <= 5 => off,
                    Some(n) => (home[i] + off).rem_euclid(n),
                    None => home[i] + off,
                };
            }
            if let Some(members) = self.cells.get(&key) {
                for &g in members {
                    if best.map_or(true, |b| g < b)
                        && system.distance(&self.rep_states[g], &node.state) <= self.radius
                    {
                        best = Some(g);
                    }
                }
            }
            for i in 0..home.len() {
                counter[i] += 1;
                if counter[i] < offsets[i].len() {
                    continue 'outer;
                }
                counter[i] = 0;
            }
            break;
        }
        let group = match best {
            Some(g) => g,
            None => {
                let g = self.representatives.len();
                self.representatives.push(node.id);
                self.rep_states.push(node.state.clone());
                self.cells.entry(home).or_default().push(g);
                g
            }
        };
        self.node_group.push(group);
    }
}

/// The best transition found for one state group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupChoice {
    pub group: usize,
    pub representative: NodeId,
    pub child: NodeId,
    pub quality: f64,
}

/// For every group with outgoing transitions, the child maximizing
/// `reward + gamma * V(child)`; ties go to the smallest child id.
pub fn greedy_choices(
    value_net: &Mlp,
    tree: &Tree,
    groups: &StateGroups,
    params: &LearnParams,
) -> Result<Vec<GroupChoice>> {
    let children = &tree.nodes()[1..];
    let values = value_net.map_first_output(children.iter().map(|n| n.state.as_slice()))?;
    let mut best: Vec<Option<(f64, NodeId)>> = vec![None; groups.len()];
    for (node, v) in children.iter().zip(values) {
        let parent = node.parent.expect("non-root node has a parent");
        let g = groups.group_of(parent);
        let q = node.trans_cost + params.gamma * v;
        if best[g].map_or(true, |(bq, _)| q > bq) {
            best[g] = Some((q, node.id));
        }
    }
    Ok(best
        .into_iter()
        .enumerate()
        .filter_map(|(group, b)| {
            b.map(|(quality, child)| GroupChoice {
                group,
                representative: groups.representative(group),
                child,
                quality,
            })
        })
        .collect())
}

/// One `(representative state -> greedy action)` sample per group.
pub fn policy_samples(
    choices: &[GroupChoice],
    tree: &Tree,
    groups: &StateGroups,
) -> Vec<TrainSample> {
    choices
        .iter()
        .map(|c| {
            let action = tree
                .node(c.child)
                .action
                .as_ref()
                .expect("non-root node has an action");
            TrainSample::new(
                groups.representative_state(c.group).to_vec(),
                action.to_vec(),
            )
        })
        .collect()
}

/// Rebuilds greedy-action samples over the whole tree and retrains the policy net.
pub fn update_policy(
    policy_net: &mut Mlp,
    value_net: &Mlp,
    tree: &Tree,
    groups: &StateGroups,
    params: &LearnParams,
    retrainer: &mut Retrainer,
    rng: &mut dyn RngCore,
) -> Result<(usize, f64)> {
    let choices = greedy_choices(value_net, tree, groups, params)?;
    let samples = policy_samples(&choices, tree, groups);
    if samples.is_empty() {
        return Ok((0, 0.0));
    }
    let n = samples.len();
    let loss = retrainer.retrain(policy_net, samples, rng)?;
    Ok((n, loss))
}

/// Anything that proposes an action for a state.
pub trait Policy {
    fn propose(&self, state: &StateVec) -> Result<Vec<f64>>;
}

impl Policy for Mlp {
    fn propose(&self, state: &StateVec) -> Result<Vec<f64>> {
        self.forward(state)
    }
}

impl<F> Policy for F
where
    F: Fn(&StateVec) -> Vec<f64>,
{
    fn propose(&self, state: &StateVec) -> Result<Vec<f64>> {
        Ok(self(state))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyRollout {
    pub trajectory: Trajectory,
    pub success: bool,
}

impl GreedyRollout {
    /// The trajectory return on success, negative infinity otherwise.
    pub fn score(&self) -> f64 {
        if self.success {
            self.trajectory.total_return
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Follows `policy` from the start state until the goal or `max_steps` transitions.
pub fn evaluate_greedy(
    policy: &dyn Policy,
    system: &dyn SystemModel,
    params: &LearnParams,
    max_steps: usize,
) -> Result<GreedyRollout> {
    let start = system.start_state().clone();
    let mut nodes = vec![TreeNode {
        id: NodeId::ROOT,
        parent: None,
        state: start,
        action: None,
        trans_cost: 0.0,
        sample_type: SampleType::Root,
    }];
    let mut success = system.is_goal(&nodes[0].state);
    while !success && nodes.len() <= max_steps {
        let prev = nodes.last().unwrap();
        let action = system.clamp_action(&policy.propose(&prev.state)?);
        let state = system.apply_action(&prev.state, &action)?;
        let trans_cost = system.trans_reward(&prev.state, &action, &state);
        success = system.is_goal(&state);
        let id = NodeId(nodes.len());
        nodes.push(TreeNode {
            id,
            parent: Some(prev.id),
            state,
            action: Some(action),
            trans_cost,
            sample_type: SampleType::GreedyAction,
        });
    }
    Ok(GreedyRollout {
        trajectory: Trajectory::from_nodes(nodes, params.gamma, params.goal_reward),
        success,
    })
}
