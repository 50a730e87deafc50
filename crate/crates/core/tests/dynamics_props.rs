use proptest::prelude::*;
use qrrt_core::dynamics::{
    Acrobot, AcrobotParams, DiffDrive, DiffDriveParams, NullSpace, NullSpaceParams,
};
use qrrt_core::{StateVec, SystemModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn systems() -> Vec<Box<dyn SystemModel>> {
    vec![
        Box::new(DiffDrive::new(DiffDriveParams::default()).unwrap()),
        Box::new(Acrobot::new(AcrobotParams::default()).unwrap()),
        Box::new(NullSpace::new(NullSpaceParams::default()).unwrap()),
    ]
}

fn in_bounds(sys: &dyn SystemModel, s: &[f64]) -> bool {
    s.iter()
        .zip(sys.state_bounds())
        .all(|(x, b)| x.is_finite() && *x >= b.lo && *x <= b.hi)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transitions_stay_in_bounds_and_replay(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for sys in systems() {
            let from = sys.sample_state(&mut rng);
            let action = sys.sample_action(&mut rng, &from);
            for (a, b) in action.iter().zip(sys.action_bounds()) {
                prop_assert!(*a >= b.lo && *a <= b.hi);
            }
            let to = sys.apply_action(&from, &action).unwrap();
            prop_assert!(in_bounds(sys.as_ref(), &to), "{} {:?}", sys.name(), to);
            prop_assert!(sys.trans_reward(&from, &action, &to) <= 0.0);
            prop_assert_eq!(sys.apply_action(&from, &action).unwrap(), to);

            let target = sys.sample_state(&mut rng);
            let (next, steer_action) = sys.steer(&from, &target);
            prop_assert_eq!(&sys.apply_action(&from, &steer_action).unwrap(), &next);
        }
    }

    #[test]
    fn distances_are_metric_like(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for sys in systems() {
            let a = sys.sample_state(&mut rng);
            let b = sys.sample_state(&mut rng);
            let c = sys.sample_state(&mut rng);
            prop_assert_eq!(sys.distance(&a, &a), 0.0);
            prop_assert!((sys.distance(&a, &b) - sys.distance(&b, &a)).abs() < 1e-12);
            prop_assert!(sys.distance(&a, &c) <= sys.distance(&a, &b) + sys.distance(&b, &c) + 1e-9);
        }
    }

    #[test]
    fn nullspace_rates_are_reactionless(seed in 0u64..10_000) {
        let sys = NullSpace::new(NullSpaceParams::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let from = sys.sample_state(&mut rng);
        let target = sys.sample_state(&mut rng);
        let (_, alpha) = sys.steer(&from, &target);
        let random = sys.sample_action(&mut rng, &from);
        for a in [alpha, random] {
            let momentum = sys.coupling_momentum(&sys.joint_rates(&a));
            prop_assert!(momentum.iter().all(|m| m.abs() <= 1e-9));
        }
    }

    #[test]
    fn clamped_actions_apply(seed in 0u64..10_000, raw in proptest::collection::vec(-10.0f64..10.0, 4)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for sys in systems() {
            let from = sys.sample_state(&mut rng);
            let action = sys.clamp_action(&raw[..sys.action_dim()]);
            prop_assert!(sys.apply_action(&from, &action).is_ok());
        }
    }

    #[test]
    fn diffdrive_step_is_bounded(x in 0.0f64..100.0, y in 0.0f64..100.0, th in -3.14f64..3.14, tx in 0.0f64..100.0, ty in 0.0f64..100.0) {
        let sys = DiffDrive::new(DiffDriveParams::default()).unwrap();
        let from = StateVec::from_slice(&[x, y, th]).unwrap();
        let (next, _) = sys.steer(&from, &StateVec::from_slice(&[tx, ty, 0.0]).unwrap());
        let p = sys.params();
        prop_assert!((next[0] - x).hypot(next[1] - y) <= p.max_linear_speed * p.dt + 1e-9);
    }
}

#[test]
fn acrobot_energy_is_conserved_without_torque() {
    let sys = Acrobot::new(AcrobotParams::default()).unwrap();
    let mut s = [1.0, -0.5, 0.0, 0.0];
    let e0 = sys.energy(&s);
    for _ in 0..10_000 {
        s = sys.rk4_step(&s, 0.0, 1e-3);
    }
    assert!(((sys.energy(&s) - e0) / e0).abs() < 1e-3);
}
