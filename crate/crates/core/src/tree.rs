//! Append-only search tree.
//!
//! Nodes are stored contiguously by id and never removed, so a node's parent
//! id is always smaller than its own. Every query that can tie resolves to the
//! smallest [`NodeId`].

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::vector::{ActionVec, StateVec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);

    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// How a node was created.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SampleType {
    RandState,
    GoalState,
    RandAction,
    GreedyAction,
    Root,
}

impl SampleType {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleType::RandState => "rand_state",
            SampleType::GoalState => "goal_state",
            SampleType::RandAction => "rand_action",
            SampleType::GreedyAction => "greedy_action",
            SampleType::Root => "root",
        }
    }
}

impl fmt::Display for SampleType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SampleType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "rand_state" => SampleType::RandState,
            "goal_state" => SampleType::GoalState,
            "rand_action" => SampleType::RandAction,
            "greedy_action" => SampleType::GreedyAction,
            "root" => SampleType::Root,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown sample type `{other}`"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub state: StateVec,
    /// Action applied at the parent to reach this node. `None` for the root.
    pub action: Option<ActionVec>,
    /// Immediate reward of the transition from the parent (nonpositive for the shipped systems).
    pub trans_cost: f64,
    pub sample_type: SampleType,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<TreeNode>,
    action_dim: Option<usize>,
}

impl Tree {
    pub fn new(root: StateVec) -> Self {
        let root = TreeNode {
            id: NodeId::ROOT,
            parent: None,
            state: root,
            action: None,
            trans_cost: 0.0,
            sample_type: SampleType::Root,
        };
        Self {
            nodes: vec![root],
            action_dim: None,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// Always false: a tree owns its root from construction.
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.nodes[0].state.dim()
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn get(&self, id: NodeId) -> Option<&TreeNode> {
        self.nodes.get(id.0)
    }

    /// Panics on an unknown id; use [`Tree::get`] for untrusted ids.
    pub fn node(&self, id: NodeId) -> &TreeNode {
        &self.nodes[id.0]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn add(
        &mut self,
        parent: NodeId,
        state: StateVec,
        action: ActionVec,
        trans_cost: f64,
        sample_type: SampleType,
    ) -> Result<NodeId> {
        if parent.0 >= self.nodes.len() {
            return Err(Error::UnknownNode(parent.0));
        }
        state.expect_dim(self.state_dim())?;
        match self.action_dim {
            Some(dim) => action.expect_dim(dim)?,
            None => self.action_dim = Some(action.dim()),
        }
        if !trans_cost.is_finite() {
            return Err(Error::NonFinite {
                index: 0,
                value: trans_cost,
            });
        }
        let id = NodeId(self.nodes.len());
        self.nodes.push(TreeNode {
            id,
            parent: Some(parent),
            state,
            action: Some(action),
            trans_cost,
            sample_type,
        });
        Ok(id)
    }

    /// Exhaustive nearest-node query under `dist`; ties go to the smallest id.
    pub fn nearest<D>(&self, query: &[f64], dist: D) -> NodeId
    where
        D: Fn(&[f64], &[f64]) -> f64,
    {
        let mut best = NodeId::ROOT;
        let mut best_d = f64::INFINITY;
        for node in &self.nodes {
            let d = dist(&node.state, query);
            if d < best_d {
                best_d = d;
                best = node.id;
            }
        }
        best
    }

    pub fn random_node(&self, rng: &mut dyn RngCore) -> NodeId {
        NodeId(rng.gen_range(0..self.nodes.len()))
    }

    /// Node ids from the root to `terminal`, inclusive.
    pub fn path_ids(&self, terminal: NodeId) -> Result<Vec<NodeId>> {
        let mut node = self.get(terminal).ok_or(Error::UnknownNode(terminal.0))?;
        let mut ids = vec![node.id];
        while let Some(parent) = node.parent {
            node = &self.nodes[parent.0];
            ids.push(node.id);
        }
        ids.reverse();
        Ok(ids)
    }

    pub fn extract_trajectory(
        &self,
        terminal: NodeId,
        gamma: f64,
        goal_reward: f64,
    ) -> Result<Trajectory> {
        let nodes: Vec<TreeNode> = self
            .path_ids(terminal)?
            .into_iter()
            .map(|id| self.nodes[id.0].clone())
            .collect();
        Ok(Trajectory::from_nodes(nodes, gamma, goal_reward))
    }

    /// Discounted return of the path ending at `terminal` without cloning it.
    pub fn path_return(&self, terminal: NodeId, gamma: f64, goal_reward: f64) -> Result<f64> {
        let ids = self.path_ids(terminal)?;
        Ok(discounted_return(
            ids[1..].iter().map(|id| self.nodes[id.0].trans_cost),
            gamma,
            goal_reward,
        ))
    }
}

/// `sum_k gamma^k * c_{k+1} + gamma^L * goal_reward` for per-step rewards `c`.
pub fn discounted_return<I>(step_rewards: I, gamma: f64, goal_reward: f64) -> f64
where
    I: IntoIterator<Item = f64>,
{
    let mut total = 0.0;
    let mut discount = 1.0;
    for r in step_rewards {
        total += discount * r;
        discount *= gamma;
    }
    total + discount * goal_reward
}

/// A root-to-terminal path with its discounted return.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub nodes: Vec<TreeNode>,
    pub total_return: f64,
}

impl Trajectory {
    pub fn from_nodes(nodes: Vec<TreeNode>, gamma: f64, goal_reward: f64) -> Self {
        let total_return = discounted_return(
            nodes.iter().skip(1).map(|n| n.trans_cost),
            gamma,
            goal_reward,
        );
        Self {
            nodes,
            total_return,
        }
    }

    /// Number of transitions.
    pub fn steps(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    pub fn terminal(&self) -> &TreeNode {
        self.nodes.last().expect("trajectory has at least one node")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn s(v: &[f64]) -> StateVec {
        StateVec::from_slice(v).unwrap()
    }

    fn a(v: &[f64]) -> ActionVec {
        ActionVec::from_slice(v).unwrap()
    }

    fn euclid(p: &[f64], q: &[f64]) -> f64 {
        p.iter()
            .zip(q)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn create_sets_up_root() {
        let tree = Tree::new(s(&[0.0, 0.0, 0.0]));
        assert_eq!(tree.len(), 1);
        assert_eq!(tree.root().parent, None);
        assert_eq!(tree.root().trans_cost, 0.0);
        assert_eq!(tree.root().sample_type, SampleType::Root);

        let tree = Tree::new(s(&[10.0, 50.0, 0.0]));
        assert_eq!(tree.root().state.as_slice(), &[10.0, 50.0, 0.0]);
        assert!(StateVec::new(vec![0.0, f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn add_appends() {
        let mut tree = Tree::new(s(&[0.0]));
        let id = tree
            .add(NodeId(0), s(&[1.0]), a(&[1.0]), -1.0, SampleType::RandState)
            .unwrap();
        assert_eq!(id, NodeId(1));
        let node = tree.node(id);
        assert_eq!(node.parent, Some(NodeId(0)));
        assert_eq!(node.trans_cost, -1.0);
        assert_eq!(node.action.as_ref().unwrap().as_slice(), &[1.0]);

        tree.add(NodeId(1), s(&[2.0]), a(&[1.0]), -1.0, SampleType::RandState)
            .unwrap();
        assert!(matches!(
            tree.add(NodeId(5), s(&[0.0]), a(&[0.0]), 0.0, SampleType::RandAction),
            Err(Error::UnknownNode(5))
        ));
        assert!(matches!(
            tree.add(
                NodeId(0),
                s(&[0.0, 1.0]),
                a(&[0.0]),
                0.0,
                SampleType::RandAction
            ),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            tree.add(
                NodeId(0),
                s(&[0.0]),
                a(&[0.0, 2.0]),
                0.0,
                SampleType::RandAction
            ),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn sequential_ids() {
        let mut tree = Tree::new(s(&[0.0]));
        for i in 1..=100 {
            let id = tree
                .add(
                    NodeId(i - 1),
                    s(&[i as f64]),
                    a(&[0.0]),
                    0.0,
                    SampleType::RandAction,
                )
                .unwrap();
            assert_eq!(id, NodeId(i));
        }
        assert_eq!(tree.len(), 101);
    }

    #[test]
    fn nearest_simple() {
        let mut tree = Tree::new(s(&[0.0, 0.0]));
        tree.add(
            NodeId(0),
            s(&[10.0, 0.0]),
            a(&[0.0]),
            0.0,
            SampleType::RandState,
        )
        .unwrap();
        assert_eq!(tree.nearest(&[2.0, 1.0], euclid), NodeId(0));
        assert_eq!(tree.nearest(&[8.0, 1.0], euclid), NodeId(1));

        let single = Tree::new(s(&[3.0, 3.0]));
        assert_eq!(single.nearest(&[-40.0, 7.0], euclid), NodeId(0));
    }

    #[test]
    fn nearest_ties_go_to_smallest_id() {
        let mut tree = Tree::new(s(&[-1.0]));
        tree.add(NodeId(0), s(&[1.0]), a(&[0.0]), 0.0, SampleType::RandState)
            .unwrap();
        tree.add(NodeId(0), s(&[-1.0]), a(&[0.0]), 0.0, SampleType::RandState)
            .unwrap();
        assert_eq!(tree.nearest(&[0.0], euclid), NodeId(0));
        assert_eq!(tree.nearest(&[1.0], euclid), NodeId(1));
    }

    #[test]
    fn random_node_single_and_reproducible() {
        let tree = Tree::new(s(&[0.0]));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            assert_eq!(tree.random_node(&mut rng), NodeId(0));
        }

        let mut tree = Tree::new(s(&[0.0]));
        for i in 1..4 {
            tree.add(
                NodeId(0),
                s(&[i as f64]),
                a(&[0.0]),
                0.0,
                SampleType::RandAction,
            )
            .unwrap();
        }
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|_| tree.random_node(&mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(11), draw(11));
    }

    #[test]
    fn random_node_is_uniform() {
        let mut tree = Tree::new(s(&[0.0]));
        for i in 1..4 {
            tree.add(
                NodeId(0),
                s(&[i as f64]),
                a(&[0.0]),
                0.0,
                SampleType::RandAction,
            )
            .unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut counts = [0usize; 4];
        let draws = 40_000;
        for _ in 0..draws {
            counts[tree.random_node(&mut rng).0] += 1;
        }
        for c in counts {
            let freq = c as f64 / draws as f64;
            assert!((freq - 0.25).abs() <= 0.02, "frequency {freq}");
        }
    }

    #[test]
    fn trajectory_returns() {
        let mut tree = Tree::new(s(&[0.0]));
        let t = tree.extract_trajectory(NodeId(0), 0.9, 4.0).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.total_return, 4.0);

        let a_id = tree
            .add(NodeId(0), s(&[1.0]), a(&[1.0]), -1.0, SampleType::RandState)
            .unwrap();
        let b_id = tree
            .add(a_id, s(&[2.0]), a(&[1.0]), -2.0, SampleType::RandState)
            .unwrap();
        let t = tree.extract_trajectory(b_id, 1.0, 0.0).unwrap();
        assert_eq!(
            t.nodes.iter().map(|n| n.id).collect::<Vec<_>>(),
            vec![NodeId(0), a_id, b_id]
        );
        assert_eq!(t.total_return, -3.0);
        let t = tree.extract_trajectory(b_id, 0.5, 0.0).unwrap();
        assert_eq!(t.total_return, -2.0);
        assert_eq!(tree.path_return(b_id, 0.5, 0.0).unwrap(), -2.0);
        assert!(matches!(
            tree.extract_trajectory(NodeId(9), 1.0, 0.0),
            Err(Error::UnknownNode(9))
        ));
    }
}
