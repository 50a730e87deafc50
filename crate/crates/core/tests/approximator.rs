use proptest::prelude::*;
use qrrt_core::{Interval, Mlp, TrainParams, TrainSample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest scale-aware difference between backprop and central differences.
fn gradient_check_error(net: &Mlp, sample: &TrainSample) -> f64 {
    let h = 1e-5;
    let grads = net.gradient(sample).unwrap();
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for l in 0..net.layers().len() {
        let n_w = net.layers()[l].weights.len();
        let n_b = net.layers()[l].bias.len();
        for k in 0..n_w + n_b {
            let read = |m: &mut Mlp| {
                if k < n_w {
                    m.layers_mut()[l].weights[k]
                } else {
                    m.layers_mut()[l].bias[k - n_w]
                }
            };
            let write = |m: &mut Mlp, v: f64| {
                if k < n_w {
                    m.layers_mut()[l].weights[k] = v
                } else {
                    m.layers_mut()[l].bias[k - n_w] = v
                }
            };
            let orig = read(&mut probe);
            write(&mut probe, orig + h);
            let up = probe.loss(sample).unwrap();
            write(&mut probe, orig - h);
            let down = probe.loss(sample).unwrap();
            write(&mut probe, orig);
            let numeric = (up - down) / (2.0 * h);
            let analytic = if k < n_w {
                grads.weights[l][k]
            } else {
                grads.biases[l][k - n_w]
            };
            let err = (numeric - analytic).abs() / 1f64.max(numeric.abs()).max(analytic.abs());
            worst = worst.max(err);
        }
    }
    worst
}

fn random_net(rng: &mut ChaCha8Rng, seed: u64) -> Mlp {
    let depth = rng.gen_range(2..=3);
    let sizes: Vec<usize> = (0..=depth).map(|_| rng.gen_range(1..=8)).collect();
    let mut net = Mlp::new(&sizes, seed).unwrap();
    for layer in net.layers_mut() {
        layer
            .bias
            .iter_mut()
            .for_each(|b| *b = rng.gen_range(-0.5..0.5));
    }
    net
}

fn random_sample(rng: &mut ChaCha8Rng, net: &Mlp) -> TrainSample {
    TrainSample::new(
        (0..net.input_dim())
            .map(|_| rng.gen_range(-1.5..1.5))
            .collect(),
        (0..net.output_dim())
            .map(|_| rng.gen_range(-2.0..2.0))
            .collect(),
    )
}

#[test]
fn backprop_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for n in 0..20 {
        let net = random_net(&mut rng, n);
        for _ in 0..20 {
            let sample = random_sample(&mut rng, &net);
            worst = worst.max(gradient_check_error(&net, &sample));
        }
    }
    assert!(worst < 1e-5, "worst relative error {worst:e}");
}

#[test]
fn scaled_nets_pass_gradient_check() {
    let bounds = [Interval::new(0.0, 100.0), Interval::new(-3.0, 3.0)];
    let actions = [Interval::new(0.0, 2.0)];
    let net = Mlp::policy_net(&bounds, &actions, &[5, 4], 9).unwrap();
    let sample = TrainSample::new(vec![40.0, 1.0], vec![1.7]);
    assert!(gradient_check_error(&net, &sample) < 1e-5);
}

#[test]
fn zero_error_sample_has_zero_gradient() {
    let net = Mlp::new(&[2, 6, 1], 3).unwrap();
    let x = vec![0.3, -0.7];
    let y = net.forward(&x).unwrap();
    let g = net.gradient(&TrainSample::new(x, y)).unwrap();
    assert_eq!(g.max_abs(), 0.0);
}

#[test]
fn fits_constant_target() {
    let mut net = Mlp::new(&[2, 8, 1], 1).unwrap();
    let samples: Vec<_> = (0..50)
        .map(|_| TrainSample::new(vec![0.2, -0.4], vec![3.0]))
        .collect();
    let params = TrainParams {
        learning_rate: 1e-2,
        epochs: 500,
        batch_size: 10,
    };
    let loss = net
        .train(&samples, &params, &mut ChaCha8Rng::seed_from_u64(0))
        .unwrap();
    assert!(loss < 1e-4, "loss {loss}");
}

#[test]
fn fits_linear_function() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let samples: Vec<_> = (0..200)
        .map(|_| {
            let x: f64 = rng.gen_range(-1.0..1.0);
            TrainSample::new(vec![x], vec![2.0 * x])
        })
        .collect();
    let mut net = Mlp::new(&[1, 16, 1], 2).unwrap();
    let params = TrainParams {
        learning_rate: 5e-2,
        epochs: 500,
        batch_size: 16,
    };
    let loss = net.train(&samples, &params, &mut rng).unwrap();
    assert!(loss < 1e-3, "loss {loss}");
}

#[test]
fn more_epochs_lower_loss() {
    let mut data_rng = ChaCha8Rng::seed_from_u64(99);
    let samples: Vec<_> = (0..100)
        .map(|_| {
            let x: f64 = data_rng.gen_range(-1.0..1.0);
            let y: f64 = data_rng.gen_range(-1.0..1.0);
            TrainSample::new(vec![x, y], vec![(2.0 * x).sin() + 0.5 * y * y])
        })
        .collect();
    let mut wins = 0;
    for seed in 0..10 {
        let params = |epochs| TrainParams {
            learning_rate: 1e-2,
            epochs,
            batch_size: 16,
        };
        let mut short = Mlp::new(&[2, 16, 1], seed).unwrap();
        let mut long = short.clone();
        short
            .train(&samples, &params(10), &mut ChaCha8Rng::seed_from_u64(seed))
            .unwrap();
        long.train(&samples, &params(100), &mut ChaCha8Rng::seed_from_u64(seed))
            .unwrap();
        if long.mean_loss(&samples).unwrap() < short.mean_loss(&samples).unwrap() {
            wins += 1;
        }
    }
    assert!(wins >= 9, "{wins} of 10");
}

#[test]
fn training_is_deterministic() {
    let samples: Vec<_> = (0..40)
        .map(|i| TrainSample::new(vec![i as f64 / 40.0], vec![(i % 3) as f64]))
        .collect();
    let run = || {
        let mut net = Mlp::new(&[1, 6, 6, 1], 4).unwrap();
        net.train(
            &samples,
            &TrainParams::default(),
            &mut ChaCha8Rng::seed_from_u64(8),
        )
        .unwrap();
        net
    };
    assert_eq!(run(), run());
}

#[test]
fn train_rejects_empty_samples() {
    let mut net = Mlp::new(&[1, 2, 1], 0).unwrap();
    assert!(net
        .train(
            &[],
            &TrainParams::default(),
            &mut ChaCha8Rng::seed_from_u64(0)
        )
        .is_err());
}

proptest! {
    #[test]
    fn policy_outputs_stay_in_bounds(seed in 0u64..500, x in -1e3f64..1e3, y in -1e3f64..1e3, w in -50f64..50.0) {
        let states = [Interval::new(0.0, 100.0), Interval::new(0.0, 100.0)];
        let actions = [Interval::new(0.0, 2.0), Interval::new(-1.0, 1.0)];
        let mut net = Mlp::policy_net(&states, &actions, &[8], seed).unwrap();
        net.layers_mut()[1].weights.iter_mut().for_each(|v| *v *= w);
        let out = net.forward(&[x, y]).unwrap();
        for (o, b) in out.iter().zip(&actions) {
            prop_assert!(o.is_finite() && *o >= b.lo && *o <= b.hi);
        }
    }

    #[test]
    fn forward_is_finite(seed in 0u64..1000, input in proptest::collection::vec(-1e6f64..1e6, 3)) {
        let net = Mlp::new(&[3, 32, 32, 1], seed).unwrap();
        prop_assert!(net.forward(&input).unwrap()[0].is_finite());
    }

    #[test]
    fn checkpoint_round_trips(seed in 0u64..1000) {
        let net = Mlp::value_net(&[Interval::new(-1.0, 4.0), Interval::new(0.0, 9.0)], &[3, 2], seed).unwrap();
        let mut buf = Vec::new();
        net.write_checkpoint(&mut buf).unwrap();
        let back = Mlp::read_checkpoint(buf.as_slice()).unwrap();
        prop_assert_eq!(back, net);
    }
}
