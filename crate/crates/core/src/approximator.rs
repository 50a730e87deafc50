//! Feed-forward network used for both the value function and the policy.
//!
//! Inputs pass through a fixed affine map (state bounds to `[-1, 1]`), then
//! tanh hidden layers and a linear output layer, then a fixed affine output
//! map. Policy nets additionally clamp their output to the action box.
//! Training is plain mini-batch gradient descent on mean squared error and
//! warm-starts from the current weights.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::Interval;
use crate::error::{Error, Result};

const CHECKPOINT_MAGIC: &str = "qrrt-mlp 1";

/// Dense layer; `weights` is row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

impl TrainSample {
    pub fn new(input: Vec<f64>, target: Vec<f64>) -> Self {
        Self { input, target }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 50,
            batch_size: 32,
        }
    }
}

/// Gradient of the loss with respect to every weight and bias, laid out like the layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net
                .layers
                .iter()
                .map(|l| vec![0.0; l.weights.len()])
                .collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    fn clear(&mut self) {
        self.weights
            .iter_mut()
            .chain(self.biases.iter_mut())
            .for_each(|g| g.fill(0.0));
    }

    pub fn max_abs(&self) -> f64 {
        self.weights
            .iter()
            .chain(&self.biases)
            .flatten()
            .fold(0.0, |m, g| m.max(g.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
    input_scale: Vec<f64>,
    input_offset: Vec<f64>,
    output_scale: Vec<f64>,
    output_offset: Vec<f64>,
    output_clamp: Option<Vec<Interval>>,
}

/// Per-layer activations reused across samples.
struct Scratch {
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Scratch {
    fn new(net: &Mlp) -> Self {
        let mut acts = vec![vec![0.0; net.input_dim()]];
        acts.extend(net.layers.iter().map(|l| vec![0.0; l.outputs]));
        let deltas = net.layers.iter().map(|l| vec![0.0; l.outputs]).collect();
        Self { acts, deltas }
    }
}

fn affine_to_unit(bounds: &[Interval]) -> (Vec<f64>, Vec<f64>) {
    bounds
        .iter()
        .map(|b| {
            let w = b.width();
            if w > 0.0 {
                (2.0 / w, -(b.lo + b.hi) / w)
            } else {
                (0.0, 0.0)
            }
        })
        .unzip()
}

impl Mlp {
    /// Weights uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, biases zero, identity scaling.
    pub fn new(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut net.layers {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            layer
                .weights
                .iter_mut()
                .for_each(|w| *w = rng.gen_range(-bound..=bound));
        }
        Ok(net)
    }

    /// All parameters zero, identity scaling.
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidLayout(format!(
                "need at least 2 layer sizes, got {}",
                layer_sizes.len()
            )));
        }
        if layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidLayout("layer sizes must be positive".into()));
        }
        let layers = layer_sizes
            .windows(2)
            .map(|w| Layer::zeros(w[0], w[1]))
            .collect();
        let (n_in, n_out) = (layer_sizes[0], *layer_sizes.last().unwrap());
        Ok(Self {
            layers,
            input_scale: vec![1.0; n_in],
            input_offset: vec![0.0; n_in],
            output_scale: vec![1.0; n_out],
            output_offset: vec![0.0; n_out],
            output_clamp: None,
        })
    }

    /// State -> scalar value network with inputs normalized from `state_bounds`.
    pub fn value_net(state_bounds: &[Interval], hidden: &[usize], seed: u64) -> Result<Self> {
        let sizes: Vec<usize> = std::iter::once(state_bounds.len())
            .chain(hidden.iter().copied())
            .chain(std::iter::once(1))
            .collect();
        Ok(Self::new(&sizes, seed)?.with_input_bounds(state_bounds))
    }

    /// State -> action network whose outputs map `[-1, 1]` onto `action_bounds` and are clamped there.
    pub fn policy_net(
        state_bounds: &[Interval],
        action_bounds: &[Interval],
        hidden: &[usize],
        seed: u64,
    ) -> Result<Self> {
        let sizes: Vec<usize> = std::iter::once(state_bounds.len())
            .chain(hidden.iter().copied())
            .chain(std::iter::once(action_bounds.len()))
            .collect();
        Ok(Self::new(&sizes, seed)?
            .with_input_bounds(state_bounds)
            .with_output_bounds(action_bounds))
    }

    pub fn with_input_bounds(mut self, bounds: &[Interval]) -> Self {
        assert_eq!(bounds.len(), self.input_dim());
        let (scale, offset) = affine_to_unit(bounds);
        self.input_scale = scale;
        self.input_offset = offset;
        self
    }

    pub fn with_output_bounds(mut self, bounds: &[Interval]) -> Self {
        assert_eq!(bounds.len(), self.output_dim());
        self.output_scale = bounds.iter().map(|b| 0.5 * b.width()).collect();
        self.output_offset = bounds.iter().map(|b| b.mid()).collect();
        self.output_clamp = Some(bounds.to_vec());
        self
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.outputs))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().outputs
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn output_offset_mut(&mut self) -> &mut [f64] {
        &mut self.output_offset
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        Ok(())
    }

    fn check_sample(&self, sample: &TrainSample) -> Result<()> {
        self.check_input(&sample.input)?;
        if sample.target.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                got: sample.target.len(),
            });
        }
        Ok(())
    }

    /// Fills `scratch.acts`; the last entry holds the raw (pre-scaling) output.
    fn forward_into(&self, input: &[f64], scratch: &mut Scratch) {
        for (i, x) in input.iter().enumerate() {
            scratch.acts[0][i] = self.input_scale[i] * x + self.input_offset[i];
        }
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let (prev, rest) = scratch.acts.split_at_mut(l + 1);
            let a_in = &prev[l];
            let a_out = &mut rest[0];
            for (o, out) in a_out.iter_mut().enumerate() {
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                let z = layer.bias[o] + row.iter().zip(a_in).map(|(w, a)| w * a).sum::<f64>();
                *out = if l == last { z } else { z.tanh() };
            }
        }
    }

    fn scaled_output(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .enumerate()
            .map(|(k, z)| self.output_scale[k] * z + self.output_offset[k])
            .collect()
    }

    /// Network output after output scaling and clamping.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut scratch = Scratch::new(self);
        self.forward_into(input, &mut scratch);
        let mut y = self.scaled_output(scratch.acts.last().unwrap());
        if let Some(bounds) = &self.output_clamp {
            y.iter_mut().zip(bounds).for_each(|(v, b)| *v = b.clamp(*v));
        }
        Ok(y)
    }

    /// Convenience for single-output networks.
    pub fn value(&self, input: &[f64]) -> Result<f64> {
        Ok(self.forward(input)?[0])
    }

    /// First clamped output for each input, sharing one scratch buffer.
    pub fn map_first_output<'a, I>(&self, inputs: I) -> Result<Vec<f64>>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut scratch = Scratch::new(self);
        inputs
            .into_iter()
            .map(|x| {
                self.check_input(x)?;
                self.forward_into(x, &mut scratch);
                let y =
                    self.output_scale[0] * scratch.acts.last().unwrap()[0] + self.output_offset[0];
                Ok(match &self.output_clamp {
                    Some(b) => b[0].clamp(y),
                    None => y,
                })
            })
            .collect()
    }

    /// Squared error `mean_k (y_k - t_k)^2` on the unclamped scaled output.
    pub fn loss(&self, sample: &TrainSample) -> Result<f64> {
        self.check_sample(sample)?;
        let mut scratch = Scratch::new(self);
        self.forward_into(&sample.input, &mut scratch);
        Ok(self.loss_from(&scratch, &sample.target))
    }

    fn loss_from(&self, scratch: &Scratch, target: &[f64]) -> f64 {
        let raw = scratch.acts.last().unwrap();
        let m = raw.len() as f64;
        raw.iter()
            .enumerate()
            .map(|(k, z)| {
                let e = self.output_scale[k] * z + self.output_offset[k] - target[k];
                e * e
            })
            .sum::<f64>()
            / m
    }

    pub fn mean_loss(&self, samples: &[TrainSample]) -> Result<f64> {
        if samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        let mut scratch = Scratch::new(self);
        let mut total = 0.0;
        for s in samples {
            self.check_sample(s)?;
            self.forward_into(&s.input, &mut scratch);
            total += self.loss_from(&scratch, &s.target);
        }
        Ok(total / samples.len() as f64)
    }

    /// Backpropagation; adds `weight * dLoss/dparam` into `grads` and returns the loss.
    fn accumulate_gradient(
        &self,
        sample: &TrainSample,
        weight: f64,
        scratch: &mut Scratch,
        grads: &mut Gradients,
    ) -> f64 {
        self.forward_into(&sample.input, scratch);
        let loss = self.loss_from(scratch, &sample.target);
        let last = self.layers.len() - 1;
        let m = self.output_dim() as f64;
        {
            let raw = &scratch.acts[last + 1];
            for (k, d) in scratch.deltas[last].iter_mut().enumerate() {
                let e = self.output_scale[k] * raw[k] + self.output_offset[k] - sample.target[k];
                *d = 2.0 * e * self.output_scale[k] / m;
            }
        }
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let a_in = &scratch.acts[l];
            let (lower, upper) = scratch.deltas.split_at_mut(l);
            let delta = &upper[0];
            let gw = &mut grads.weights[l];
            let gb = &mut grads.biases[l];
            for (o, d) in delta.iter().enumerate() {
                gb[o] += weight * d;
                let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                row.iter_mut()
                    .zip(a_in)
                    .for_each(|(g, a)| *g += weight * d * a);
            }
            if l > 0 {
                let prev = &mut lower[l - 1];
                for (i, p) in prev.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for (o, d) in delta.iter().enumerate() {
                        s += layer.weights[o * layer.inputs + i] * d;
                    }
                    let a = a_in[i];
                    *p = s * (1.0 - a * a);
                }
            }
        }
        loss
    }

    /// Exact gradient of [`Mlp::loss`] for one sample.
    pub fn gradient(&self, sample: &TrainSample) -> Result<Gradients> {
        self.check_sample(sample)?;
        let mut scratch = Scratch::new(self);
        let mut grads = Gradients::zeros_like(self);
        self.accumulate_gradient(sample, 1.0, &mut scratch, &mut grads);
        Ok(grads)
    }

    fn step(&mut self, grads: &Gradients, learning_rate: f64) {
        for (l, layer) in self.layers.iter_mut().enumerate() {
            layer
                .weights
                .iter_mut()
                .zip(&grads.weights[l])
                .for_each(|(w, g)| *w -= learning_rate * g);
            layer
                .bias
                .iter_mut()
                .zip(&grads.biases[l])
                .for_each(|(b, g)| *b -= learning_rate * g);
        }
    }

    /// Mini-batch gradient descent over `samples`; returns the mean loss after the last epoch.
    pub fn train(
        &mut self,
        samples: &[TrainSample],
        params: &TrainParams,
        rng: &mut dyn RngCore,
    ) -> Result<f64> {
        if samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        if !(params.learning_rate >= 0.0 && params.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning rate {}",
                params.learning_rate
            )));
        }
        if params.batch_size == 0 {
            return Err(Error::InvalidParameter(
                "batch size must be positive".into(),
            ));
        }
        for s in samples {
            self.check_sample(s)?;
        }
        let mut order: Vec<usize> = (0..samples.len()).collect();
        let mut scratch = Scratch::new(self);
        let mut grads = Gradients::zeros_like(self);
        for _ in 0..params.epochs {
            order.shuffle(rng);
            for batch in order.chunks(params.batch_size) {
                grads.clear();
                let w = 1.0 / batch.len() as f64;
                for &i in batch {
                    self.accumulate_gradient(&samples[i], w, &mut scratch, &mut grads);
                }
                self.step(&grads, params.learning_rate);
            }
        }
        self.mean_loss(samples)
    }

    /// Text checkpoint: header, scaling maps, then each layer's weights row by row and its bias.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let line = |values: &[f64]| {
            values
                .iter()
                .map(|v| format!("{v:.16e}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut out = String::new();
        let sizes = self
            .layer_sizes()
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(out, "{CHECKPOINT_MAGIC}").unwrap();
        writeln!(out, "layers {sizes}").unwrap();
        writeln!(out, "input_scale {}", line(&self.input_scale)).unwrap();
        writeln!(out, "input_offset {}", line(&self.input_offset)).unwrap();
        writeln!(out, "output_scale {}", line(&self.output_scale)).unwrap();
        writeln!(out, "output_offset {}", line(&self.output_offset)).unwrap();
        match &self.output_clamp {
            None => writeln!(out, "output_clamp none").unwrap(),
            Some(b) => {
                let flat: Vec<f64> = b.iter().flat_map(|i| [i.lo, i.hi]).collect();
                writeln!(out, "output_clamp {}", line(&flat)).unwrap()
            }
        }
        for (l, layer) in self.layers.iter().enumerate() {
            writeln!(out, "weights {l} {} {}", layer.outputs, layer.inputs).unwrap();
            for row in layer.weights.chunks(layer.inputs) {
                writeln!(out, "{}", line(row)).unwrap();
            }
            writeln!(out, "bias {l} {}", layer.outputs).unwrap();
            writeln!(out, "{}", line(&layer.bias)).unwrap();
        }
        w.write_all(out.as_bytes())
    }

    pub fn read_checkpoint<R: BufRead>(r: R) -> Result<Self> {
        let lines: Vec<String> = r
            .lines()
            .collect::<std::io::Result<_>>()
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut it = lines.iter().map(|s| s.trim()).filter(|s| !s.is_empty());
        let mut next = |what: &str| {
            it.next()
                .ok_or_else(|| Error::Checkpoint(format!("missing {what}")))
        };
        if next("header")? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("not a network checkpoint".into()));
        }
        let nums = |s: &str| -> Result<Vec<f64>> {
            s.split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| Error::Checkpoint(format!("bad number `{t}`")))
                })
                .collect()
        };
        let tagged = |line: &str, tag: &str| -> Result<String> {
            line.strip_prefix(tag)
                .map(|rest| rest.to_string())
                .ok_or_else(|| Error::Checkpoint(format!("expected `{tag}`, found `{line}`")))
        };
        let sizes: Vec<usize> = tagged(next("layers")?, "layers")?
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::Checkpoint(format!("bad size `{t}`")))
            })
            .collect::<Result<_>>()?;
        let mut net = Self::zeros(&sizes)?;
        let expect_len = |v: Vec<f64>, n: usize, what: &str| -> Result<Vec<f64>> {
            if v.len() == n {
                Ok(v)
            } else {
                Err(Error::Checkpoint(format!(
                    "{what}: expected {n} values, got {}",
                    v.len()
                )))
            }
        };
        let (n_in, n_out) = (net.input_dim(), net.output_dim());
        net.input_scale = expect_len(
            nums(&tagged(next("input_scale")?, "input_scale")?)?,
            n_in,
            "input_scale",
        )?;
        net.input_offset = expect_len(
            nums(&tagged(next("input_offset")?, "input_offset")?)?,
            n_in,
            "input_offset",
        )?;
        net.output_scale = expect_len(
            nums(&tagged(next("output_scale")?, "output_scale")?)?,
            n_out,
            "output_scale",
        )?;
        net.output_offset = expect_len(
            nums(&tagged(next("output_offset")?, "output_offset")?)?,
            n_out,
            "output_offset",
        )?;
        let clamp = tagged(next("output_clamp")?, "output_clamp")?;
        net.output_clamp = if clamp.trim() == "none" {
            None
        } else {
            let flat = expect_len(nums(&clamp)?, 2 * n_out, "output_clamp")?;
            Some(flat.chunks(2).map(|c| Interval::new(c[0], c[1])).collect())
        };
        for l in 0..net.layers.len() {
            let (outputs, inputs) = (net.layers[l].outputs, net.layers[l].inputs);
            let header = next("weights header")?;
            if header != format!("weights {l} {outputs} {inputs}") {
                return Err(Error::Checkpoint(format!("unexpected `{header}`")));
            }
            let mut weights = Vec::with_capacity(outputs * inputs);
            for _ in 0..outputs {
                weights.extend(expect_len(
                    nums(next("weight row")?)?,
                    inputs,
                    "weight row",
                )?);
            }
            let header = next("bias header")?;
            if header != format!("bias {l} {outputs}") {
                return Err(Error::Checkpoint(format!("unexpected `{header}`")));
            }
            net.layers[l].weights = weights;
            net.layers[l].bias = expect_len(nums(next("bias")?)?, outputs, "bias")?;
        }
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_checkpoint(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_checkpoint(std::io::BufReader::new(file))
    }
}
