//! The qRRT outer loop and its goal-biased RRT baseline.

use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::approximator::{Mlp, TrainParams};
use crate::dynamics::SystemModel;
use crate::error::{Error, Result};
use crate::learning::{self, default_group_radius, LearnParams, Retrainer, StateGroups};
use crate::tree::{NodeId, SampleType, Trajectory, Tree};
use crate::vector::{ActionVec, StateVec};

/// Sampling probabilities for the four extend operations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasSchedule {
    pub goal_bias: f64,
    pub quality_bias_initial: f64,
    pub quality_bias_increment: f64,
    /// Episodes between quality-bias increments.
    pub quality_bias_interval: u64,
    pub quality_bias_max: f64,
    /// Share of the exploration remainder spent on random-action extends.
    pub rand_action_share: f64,
}

impl Default for BiasSchedule {
    fn default() -> Self {
        Self {
            goal_bias: 0.01,
            quality_bias_initial: 0.0,
            quality_bias_increment: 0.003,
            quality_bias_interval: 10,
            quality_bias_max: 0.5,
            rand_action_share: 0.5,
        }
    }
}

impl BiasSchedule {
    /// No goal or quality bias; every extend explores.
    pub fn exploration_only(rand_action_share: f64) -> Self {
        Self {
            goal_bias: 0.0,
            quality_bias_initial: 0.0,
            quality_bias_increment: 0.0,
            quality_bias_interval: 1,
            quality_bias_max: 0.0,
            rand_action_share,
        }
    }

    pub fn quality_bias(&self, episode: u64) -> f64 {
        let steps = if self.quality_bias_interval == 0 {
            0
        } else {
            episode / self.quality_bias_interval
        };
        (self.quality_bias_initial + self.quality_bias_increment * steps as f64)
            .min(self.quality_bias_max)
    }

    /// The largest quality bias the schedule can reach.
    pub fn quality_bias_ceiling(&self) -> f64 {
        if self.quality_bias_increment > 0.0 {
            self.quality_bias_max
        } else {
            self.quality_bias_initial.min(self.quality_bias_max)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let shares = [
            ("goalBias", self.goal_bias),
            ("qualityBiasInitial", self.quality_bias_initial),
            ("qualityBiasIncrement", self.quality_bias_increment),
            ("qualityBiasMax", self.quality_bias_max),
            ("randActionShare", self.rand_action_share),
        ];
        for (name, v) in shares {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        if self.quality_bias_interval == 0 {
            return Err(Error::InvalidParameter(
                "qualityBiasInterval must be at least 1".into(),
            ));
        }
        if self.goal_bias + self.quality_bias_ceiling() > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "goalBias + qualityBias can reach {} > 1",
                self.goal_bias + self.quality_bias_ceiling()
            )));
        }
        Ok(())
    }

    /// Draws an extend type for `episode` from one uniform variate.
    pub fn sample_kind(&self, episode: u64, rng: &mut dyn RngCore) -> SampleKind {
        gen_sample_type(
            self.goal_bias,
            self.quality_bias(episode),
            self.rand_action_share,
            rng,
        )
    }
}

/// Greedy with probability `quality_bias`, goal with `goal_bias`, and the
/// remainder split between random actions (`rand_action_share`) and random states.
pub fn gen_sample_type(
    goal_bias: f64,
    quality_bias: f64,
    rand_action_share: f64,
    rng: &mut dyn RngCore,
) -> SampleKind {
    let u: f64 = rng.gen();
    if u < quality_bias {
        return SampleKind::GreedyAction;
    }
    if u < quality_bias + goal_bias {
        return SampleKind::GoalState;
    }
    let rest = 1.0 - quality_bias - goal_bias;
    if rest > 0.0 && (u - quality_bias - goal_bias) / rest < rand_action_share {
        SampleKind::RandAction
    } else {
        SampleKind::RandState
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SampleKind {
    RandState,
    GoalState,
    RandAction,
    GreedyAction,
}

impl SampleKind {
    pub const ALL: [SampleKind; 4] = [
        SampleKind::RandState,
        SampleKind::GoalState,
        SampleKind::RandAction,
        SampleKind::GreedyAction,
    ];

    pub fn sample_type(self) -> SampleType {
        match self {
            SampleKind::RandState => SampleType::RandState,
            SampleKind::GoalState => SampleType::GoalState,
            SampleKind::RandAction => SampleType::RandAction,
            SampleKind::GreedyAction => SampleType::GreedyAction,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Network shape and training settings shared by the value and policy nets.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    pub hidden: Vec<usize>,
    pub train: TrainParams,
    /// Value samples kept for replay.
    pub replay_capacity: usize,
    /// Cap on samples per retrain, fresh plus replayed.
    pub max_train_batch: usize,
}

impl Default for NetParams {
    fn default() -> Self {
        Self {
            hidden: vec![32, 32],
            train: TrainParams::default(),
            replay_capacity: 10_000,
            max_train_batch: 1024,
        }
    }
}

/// Any bound reached stops the run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Termination {
    pub max_iterations: Option<u64>,
    pub max_episodes: Option<u64>,
    pub max_wall_seconds: Option<f64>,
}

impl Termination {
    fn reached(&self, iterations: u64, episodes: u64, started: Instant) -> bool {
        self.max_iterations.is_some_and(|m| iterations >= m)
            || self.max_episodes.is_some_and(|m| episodes >= m)
            || self
                .max_wall_seconds
                .is_some_and(|m| started.elapsed().as_secs_f64() >= m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerConfig {
    pub schedule: BiasSchedule,
    pub learn: LearnParams,
    pub net: NetParams,
    pub termination: Termination,
    pub seed: u64,
    pub greedy_max_steps: usize,
    /// Greedy extends chained per draw; 1 gives single-step extends.
    pub greedy_sequence: usize,
    /// When false, `wall_ms` is recorded as 0 so episode records replay byte for byte.
    pub record_wall_time: bool,
}

impl PlannerConfig {
    /// Defaults with the group radius scaled to `system`.
    pub fn for_system(system: &dyn SystemModel) -> Self {
        Self {
            schedule: BiasSchedule::default(),
            learn: LearnParams {
                group_radius: default_group_radius(system),
                ..LearnParams::default()
            },
            net: NetParams::default(),
            termination: Termination {
                max_episodes: Some(300),
                ..Termination::default()
            },
            seed: 0,
            greedy_max_steps: 500,
            greedy_sequence: 1,
            record_wall_time: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.learn.validate()?;
        let t = &self.termination;
        if t.max_iterations.is_none() && t.max_episodes.is_none() && t.max_wall_seconds.is_none() {
            return Err(Error::InvalidParameter(
                "at least one termination bound must be set".into(),
            ));
        }
        if t.max_wall_seconds.is_some_and(|s| !(s >= 0.0)) {
            return Err(Error::InvalidParameter(
                "maxWallSeconds must be nonnegative".into(),
            ));
        }
        if self.greedy_max_steps == 0 {
            return Err(Error::InvalidParameter(
                "greedyMaxSteps must be at least 1".into(),
            ));
        }
        if self.greedy_sequence == 0 {
            return Err(Error::InvalidParameter(
                "greedySequence must be at least 1".into(),
            ));
        }
        let tp = &self.net.train;
        if !(tp.learning_rate >= 0.0 && tp.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learningRate must be finite and nonnegative, got {}",
                tp.learning_rate
            )));
        }
        if tp.batch_size == 0 {
            return Err(Error::InvalidParameter(
                "batchSize must be at least 1".into(),
            ));
        }
        if self.net.max_train_batch == 0 {
            return Err(Error::InvalidParameter(
                "maxTrainBatch must be at least 1".into(),
            ));
        }
        if self.net.hidden.contains(&0) {
            return Err(Error::InvalidParameter(
                "hidden layer sizes must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A node produced by an extend, not yet attached to the tree.
#[derive(Debug, Clone, PartialEq)]
pub struct NewNode {
    pub parent: NodeId,
    pub state: StateVec,
    pub action: ActionVec,
    pub trans_cost: f64,
    pub sample_type: SampleType,
}

impl NewNode {
    pub fn attach(self, tree: &mut Tree) -> Result<NodeId> {
        tree.add(
            self.parent,
            self.state,
            self.action,
            self.trans_cost,
            self.sample_type,
        )
    }
}

fn steer_from_nearest(
    tree: &Tree,
    system: &dyn SystemModel,
    target: &StateVec,
    sample_type: SampleType,
) -> NewNode {
    let parent = tree.nearest(target, |a, b| system.distance(a, b));
    let from = &tree.node(parent).state;
    let (state, action) = system.steer(from, target);
    let trans_cost = system.trans_reward(from, &action, &state);
    NewNode {
        parent,
        state,
        action,
        trans_cost,
        sample_type,
    }
}

fn apply_from(
    tree: &Tree,
    system: &dyn SystemModel,
    parent: NodeId,
    action: ActionVec,
    sample_type: SampleType,
) -> Result<NewNode> {
    let from = &tree.node(parent).state;
    let state = system.apply_action(from, &action)?;
    let trans_cost = system.trans_reward(from, &action, &state);
    Ok(NewNode {
        parent,
        state,
        action,
        trans_cost,
        sample_type,
    })
}

/// Steers the nearest node toward a uniformly sampled state.
pub fn ext_rand_state(tree: &Tree, system: &dyn SystemModel, rng: &mut dyn RngCore) -> NewNode {
    let target = system.sample_state(rng);
    steer_from_nearest(tree, system, &target, SampleType::RandState)
}

/// Steers the node nearest the goal toward it.
pub fn ext_goal_state(tree: &Tree, system: &dyn SystemModel) -> NewNode {
    steer_from_nearest(tree, system, system.goal_state(), SampleType::GoalState)
}

/// Applies a random action at a uniformly chosen node.
pub fn ext_rand_action(
    tree: &Tree,
    system: &dyn SystemModel,
    rng: &mut dyn RngCore,
) -> Result<NewNode> {
    let parent = tree.random_node(rng);
    let action = system.sample_action(rng, &tree.node(parent).state);
    apply_from(tree, system, parent, action, SampleType::RandAction)
}

/// Applies the policy's action at `parent`.
pub fn ext_greedy_action_from(
    tree: &Tree,
    system: &dyn SystemModel,
    policy: &Mlp,
    parent: NodeId,
) -> Result<NewNode> {
    let raw = policy.forward(&tree.node(parent).state)?;
    let action = system.clamp_action(&raw);
    apply_from(tree, system, parent, action, SampleType::GreedyAction)
}

/// Applies the policy's action at a uniformly chosen node.
pub fn ext_greedy_action(
    tree: &Tree,
    system: &dyn SystemModel,
    policy: &Mlp,
    rng: &mut dyn RngCore,
) -> Result<NewNode> {
    let parent = tree.random_node(rng);
    ext_greedy_action_from(tree, system, policy, parent)
}

/// The highest-return trajectory among `end_nodes`; ties go to the smallest id.
pub fn get_max_traj(
    tree: &Tree,
    end_nodes: &[NodeId],
    gamma: f64,
    goal_reward: f64,
) -> Result<Trajectory> {
    let mut best: Option<(f64, NodeId)> = None;
    for &id in end_nodes {
        let r = tree.path_return(id, gamma, goal_reward)?;
        let better = match best {
            None => true,
            Some((br, bid)) => r > br || (r == br && id < bid),
        };
        if better {
            best = Some((r, id));
        }
    }
    let (_, id) = best.ok_or(Error::NoEndNodes)?;
    tree.extract_trajectory(id, gamma, goal_reward)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BestSource {
    TreeSolution,
    GreedyRollout,
}

impl BestSource {
    pub fn as_str(self) -> &'static str {
        match self {
            BestSource::TreeSolution => "tree",
            BestSource::GreedyRollout => "greedy",
        }
    }
}

/// Metrics recorded at the end of one episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunRecord {
    pub episode: u64,
    /// Iterations (nodes added) so far, including the goal-reaching one.
    pub iteration: u64,
    pub tree_size: usize,
    pub best_return: f64,
    /// Negative infinity when the rollout failed or was not run.
    pub greedy_return: f64,
    pub greedy_success: bool,
    pub value_loss: f64,
    pub policy_loss: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone)]
pub struct PlannerResult {
    pub best: Option<Trajectory>,
    pub best_source: Option<BestSource>,
    /// Trajectory to the first goal-reaching node.
    pub first_solution: Option<Trajectory>,
    pub records: Vec<RunRecord>,
    pub tree: Tree,
    pub end_nodes: Vec<NodeId>,
    pub value_net: Mlp,
    pub policy_net: Mlp,
    pub iterations: u64,
    /// Nodes created per extend type, indexed as [`SampleKind::ALL`].
    pub kind_counts: [u64; 4],
}

impl PlannerResult {
    pub fn best_return(&self) -> f64 {
        self.best
            .as_ref()
            .map_or(f64::NEG_INFINITY, |t| t.total_return)
    }

    pub fn count(&self, kind: SampleKind) -> u64 {
        self.kind_counts[kind.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Quality,
    Baseline,
}

/// Quality-biased RRT.
pub fn qrrt_plan(system: &dyn SystemModel, config: &PlannerConfig) -> Result<PlannerResult> {
    plan(system, config, Mode::Quality)
}

/// Goal-biased incremental RRT: the same loop with no quality bias and no learning.
pub fn baseline_plan(system: &dyn SystemModel, config: &PlannerConfig) -> Result<PlannerResult> {
    plan(system, config, Mode::Baseline)
}

fn plan(system: &dyn SystemModel, config: &PlannerConfig, mode: Mode) -> Result<PlannerResult> {
    config.validate()?;
    let started = Instant::now();
    let learn = &config.learn;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut train_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(3));
    let mut value_net = Mlp::value_net(
        system.state_bounds(),
        &config.net.hidden,
        config.seed.wrapping_add(1),
    )?;
    let mut policy_net = Mlp::policy_net(
        system.state_bounds(),
        system.action_bounds(),
        &config.net.hidden,
        config.seed.wrapping_add(2),
    )?;
    let mut value_trainer = Retrainer::new(
        config.net.train,
        config.net.replay_capacity,
        config.net.max_train_batch,
    );
    let mut policy_trainer = Retrainer::new(config.net.train, 0, config.net.max_train_batch);

    let mut tree = Tree::new(system.start_state().clone());
    let mut groups = StateGroups::new(system, learn.group_radius);
    let mut end_nodes = Vec::new();
    let mut best_end: Option<(f64, NodeId)> = None;
    let mut best: Option<(Trajectory, BestSource)> = None;
    let mut first_solution = None;
    let mut records = Vec::new();
    let mut kind_counts = [0u64; 4];
    let mut iterations = 0u64;
    let mut episode = 0u64;
    let mut chain: Option<(NodeId, usize)> = None;

    while !config.termination.reached(iterations, episode, started) {
        let new = match chain.take() {
            Some((parent, left)) => {
                if left > 1 {
                    chain = Some((parent, left - 1));
                }
                kind_counts[SampleKind::GreedyAction.index()] += 1;
                ext_greedy_action_from(&tree, system, &policy_net, parent)?
            }
            None => {
                let kind = match mode {
                    Mode::Quality => config.schedule.sample_kind(episode, &mut rng),
                    Mode::Baseline => gen_sample_type(
                        config.schedule.goal_bias,
                        0.0,
                        config.schedule.rand_action_share,
                        &mut rng,
                    ),
                };
                kind_counts[kind.index()] += 1;
                match kind {
                    SampleKind::RandState => ext_rand_state(&tree, system, &mut rng),
                    SampleKind::GoalState => ext_goal_state(&tree, system),
                    SampleKind::RandAction => ext_rand_action(&tree, system, &mut rng)?,
                    SampleKind::GreedyAction => {
                        let node = ext_greedy_action(&tree, system, &policy_net, &mut rng)?;
                        if config.greedy_sequence > 1 {
                            chain = Some((NodeId(tree.len()), config.greedy_sequence - 1));
                        }
                        node
                    }
                }
            }
        };
        let at_goal = system.is_goal(&new.state);
        let id = new.attach(&mut tree)?;
        iterations += 1;
        if at_goal {
            chain = None;
        } else if let Some((_, left)) = chain {
            chain = Some((id, left));
        }
        if !at_goal {
            continue;
        }

        end_nodes.push(id);
        let ret = tree.path_return(id, learn.gamma, learn.goal_reward)?;
        if best_end.map_or(true, |(r, _)| ret > r) {
            best_end = Some((ret, id));
        }
        let solution = tree.extract_trajectory(id, learn.gamma, learn.goal_reward)?;
        if first_solution.is_none() {
            first_solution = Some(solution.clone());
        }

        let (mut value_loss, mut policy_loss) = (0.0, 0.0);
        let mut greedy = None;
        if mode == Mode::Quality {
            value_loss = learning::update_state_values(
                &mut value_net,
                &mut value_trainer,
                &solution,
                learn,
                system,
                &mut train_rng,
            )?
            .1;
            groups.sync(&tree, system);
            policy_loss = learning::update_policy(
                &mut policy_net,
                &value_net,
                &tree,
                &groups,
                learn,
                &mut policy_trainer,
                &mut train_rng,
            )?
            .1;
            greedy = Some(learning::evaluate_greedy(
                &policy_net,
                system,
                learn,
                config.greedy_max_steps,
            )?);
        }

        let (tree_best_return, tree_best_id) = best_end.expect("an end node exists");
        if best
            .as_ref()
            .map_or(true, |(t, _)| tree_best_return > t.total_return)
        {
            best = Some((
                tree.extract_trajectory(tree_best_id, learn.gamma, learn.goal_reward)?,
                BestSource::TreeSolution,
            ));
        }
        let (greedy_return, greedy_success) = match &greedy {
            Some(g) => (g.score(), g.success),
            None => (f64::NEG_INFINITY, false),
        };
        if let Some(g) = greedy {
            if g.success
                && best
                    .as_ref()
                    .map_or(true, |(t, _)| g.score() > t.total_return)
            {
                best = Some((g.trajectory, BestSource::GreedyRollout));
            }
        }

        records.push(RunRecord {
            episode,
            iteration: iterations,
            tree_size: tree.len(),
            best_return: best
                .as_ref()
                .map_or(f64::NEG_INFINITY, |(t, _)| t.total_return),
            greedy_return,
            greedy_success,
            value_loss,
            policy_loss,
            wall_ms: if config.record_wall_time {
                started.elapsed().as_millis() as u64
            } else {
                0
            },
        });
        episode += 1;
    }

    let (best, best_source) = match best {
        Some((t, s)) => (Some(t), Some(s)),
        None => (None, None),
    };
    Ok(PlannerResult {
        best,
        best_source,
        first_solution,
        records,
        tree,
        end_nodes,
        value_net,
        policy_net,
        iterations,
        kind_counts,
    })
}
