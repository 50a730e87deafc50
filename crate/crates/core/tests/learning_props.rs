use proptest::prelude::*;
use qrrt_core::dynamics::{DiffDrive, DiffDriveParams};
use qrrt_core::learning::{evaluate_greedy, greedy_choices, policy_samples, td_targets};
use qrrt_core::{
    ActionVec, LearnParams, Mlp, NodeId, SampleType, StateGroups, StateVec, SystemModel, Tree,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn diffdrive() -> DiffDrive {
    DiffDrive::new(DiffDriveParams::default()).unwrap()
}

/// A chain from x = 100 - 2n to the goal at x = 100 with the given rewards.
fn chain(costs: &[f64]) -> (Tree, NodeId) {
    let n = costs.len();
    let mut tree = Tree::new(StateVec::from_slice(&[100.0 - 2.0 * n as f64, 50.0, 0.0]).unwrap());
    let act = ActionVec::from_slice(&[2.0, 0.0]).unwrap();
    let mut last = NodeId::ROOT;
    for (i, c) in costs.iter().enumerate() {
        let x = 100.0 - 2.0 * (n - i - 1) as f64;
        last = tree
            .add(
                last,
                StateVec::from_slice(&[x, 50.0, 0.0]).unwrap(),
                act.clone(),
                *c,
                SampleType::RandState,
            )
            .unwrap();
    }
    (tree, last)
}

/// Value net with a nonpositive output everywhere: a tanh net shifted below zero.
fn nonpositive_net(seed: u64, depth: f64) -> Mlp {
    let sys = diffdrive();
    let mut net = Mlp::value_net(sys.state_bounds(), &[6], seed).unwrap();
    let out = &mut net.layers_mut()[1];
    let bound: f64 = out.weights.iter().map(|w| w.abs()).sum();
    out.bias[0] = -bound - depth;
    net
}

proptest! {
    #[test]
    fn td_targets_stay_in_value_range(
        costs in proptest::collection::vec(-10.0f64..0.0, 1..25),
        eta in 0.01f64..=1.0,
        gamma in 0.01f64..=1.0,
        seed in 0u64..1000,
        depth in 0.0f64..20.0,
    ) {
        let sys = diffdrive();
        let (tree, goal) = chain(&costs);
        let traj = tree.extract_trajectory(goal, gamma, 0.0).unwrap();
        let net = nonpositive_net(seed, depth);
        let params = LearnParams { eta, gamma, goal_reward: 0.0, group_radius: 1.0 };
        let estimates: Vec<f64> = traj.nodes.iter().map(|n| net.value(&n.state).unwrap()).collect();
        prop_assert!(estimates.iter().all(|v| *v <= 0.0));
        let min_v = estimates.iter().copied().fold(f64::INFINITY, f64::min);
        let min_c = costs.iter().copied().fold(f64::INFINITY, f64::min);
        let floor = (1.0 - eta) * min_v + eta * (min_c + gamma * min_v);
        let samples = td_targets(&net, &traj, &params, &sys).unwrap();
        prop_assert_eq!(samples.len(), costs.len() + 1);
        for s in samples {
            prop_assert!(s.target[0] <= 0.0);
            prop_assert!(s.target[0] >= floor - 1e-12);
        }
    }

    #[test]
    fn greedy_choice_ignores_value_shift(seed in 0u64..1000, shift in -500.0f64..500.0) {
        let sys = diffdrive();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tree = Tree::new(sys.start_state().clone());
        for _ in 0..150 {
            let p = NodeId(rng.gen_range(0..tree.len()));
            let from = tree.node(p).state.clone();
            let act = sys.sample_action(&mut rng, &from);
            let to = sys.apply_action(&from, &act).unwrap();
            let r = sys.trans_reward(&from, &act, &to);
            tree.add(p, to, act, r, SampleType::RandAction).unwrap();
        }
        let params = LearnParams { group_radius: 1.5, ..LearnParams::default() };
        let groups = StateGroups::build(&tree, &sys, params.group_radius);
        let net = Mlp::value_net(sys.state_bounds(), &[8], seed).unwrap();
        let mut shifted = net.clone();
        shifted.output_offset_mut()[0] += shift;
        let a = greedy_choices(&net, &tree, &groups, &params).unwrap();
        let b = greedy_choices(&shifted, &tree, &groups, &params).unwrap();
        prop_assert_eq!(a.iter().map(|c| c.child).collect::<Vec<_>>(), b.iter().map(|c| c.child).collect::<Vec<_>>());

        // One sample per group with outgoing transitions, each a member action.
        let samples = policy_samples(&a, &tree, &groups);
        prop_assert_eq!(samples.len(), a.len());
        for (c, s) in a.iter().zip(&samples) {
            let child = tree.node(c.child);
            prop_assert_eq!(groups.group_of(child.parent.unwrap()), c.group);
            prop_assert_eq!(child.action.as_ref().unwrap().to_vec(), s.target.clone());
            prop_assert!(sys.distance(&tree.node(child.parent.unwrap()).state, groups.representative_state(c.group)) <= params.group_radius);
        }
    }

    #[test]
    fn greedy_rollout_is_deterministic(seed in 0u64..1000) {
        let sys = diffdrive();
        let net = Mlp::policy_net(sys.state_bounds(), sys.action_bounds(), &[8, 8], seed).unwrap();
        let params = LearnParams::default();
        let a = evaluate_greedy(&net, &sys, &params, 50).unwrap();
        let b = evaluate_greedy(&net, &sys, &params, 50).unwrap();
        prop_assert_eq!(&a, &b);
        for w in a.trajectory.nodes.windows(2) {
            let replay = sys.apply_action(&w[0].state, w[1].action.as_ref().unwrap()).unwrap();
            prop_assert_eq!(&replay, &w[1].state);
        }
    }
}
