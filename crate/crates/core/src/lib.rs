//! Quality-biased rapidly-exploring random trees.
//!
//! An incremental RRT that keeps growing after the goal is reached, learns a
//! state-value function from every solution path with TD(0), distills a greedy
//! policy from the whole tree, and spends a growing share of its extends on
//! that policy. Three benchmark systems ship with the crate: a differential
//! drive robot on a cost terrain, an acrobot, and a joint-space system whose
//! velocities are confined to the null space of a coupling matrix.

pub mod approximator;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod learning;
pub mod planner;
pub mod tree;
pub mod vector;

pub use approximator::{Gradients, Mlp, TrainParams, TrainSample};
pub use dynamics::{Interval, SystemModel};
pub use error::{Error, Result};
pub use learning::{LearnParams, StateGroups};
pub use planner::{
    BiasSchedule, NetParams, PlannerConfig, PlannerResult, RunRecord, SampleKind, Termination,
};
pub use tree::{NodeId, SampleType, Trajectory, Tree, TreeNode};
pub use vector::{ActionVec, StateVec};
