//! Fully connected classifier with hand-written backpropagation.
//!
//! Parameter layout, layer by layer: the `fan_out × fan_in` weight matrix in
//! row-major order, followed by the `fan_out` biases.

use serde::{Deserialize, Serialize};

use crate::data::Batch;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::tensor::ParamVector;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

fn default_init_scale() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSpec {
    pub layer_sizes: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
    /// Multiplies the He standard deviation `√(2 / fan_in)` at init.
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>, activation: Activation) -> Result<Self> {
        let spec = Self {
            layer_sizes,
            activation,
            init_scale: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_init_scale(mut self, scale: f64) -> Result<Self> {
        self.init_scale = scale;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::invalid("an MLP needs at least input and output layers"));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::invalid("layer sizes must be positive"));
        }
        if *self.layer_sizes.last().unwrap() < 2 {
            return Err(Error::invalid("output layer needs at least 2 classes"));
        }
        if !(self.init_scale >= 0.0) || !self.init_scale.is_finite() {
            return Err(Error::invalid("init_scale must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn n_classes(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// `D = Σ (fan_in + 1) · fan_out`.
    pub fn num_params(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| (w[0] + 1) * w[1])
            .sum()
    }

    /// `(fan_in, fan_out, offset)` of each layer's block in the parameter vector.
    fn layers(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let mut offset = 0;
        self.layer_sizes.windows(2).map(move |w| {
            let start = offset;
            offset += (w[0] + 1) * w[1];
            (w[0], w[1], start)
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    /// Mean cross-entropy in nats.
    pub cross_entropy: f64,
    pub accuracy: f64,
    pub n_examples: usize,
}

/// Weights ~ N(0, (init_scale · √(2 / fan_in))²), biases zero.
pub fn init_params(spec: &MlpSpec, stream: &mut RngStream) -> Result<ParamVector> {
    spec.validate()?;
    let mut values = vec![0.0; spec.num_params()];
    for (fan_in, fan_out, offset) in spec.layers() {
        let std = spec.init_scale * (2.0 / fan_in as f64).sqrt();
        for v in &mut values[offset..offset + fan_in * fan_out] {
            *v = stream.gaussian(0.0, std)?;
        }
    }
    ParamVector::new(values)
}

fn check_inputs(spec: &MlpSpec, w: &ParamVector, batch: &Batch) -> Result<()> {
    w.check_len(spec.num_params())?;
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if batch.dim() != spec.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.input_dim(),
            found: batch.dim(),
        });
    }
    if let Some(&l) = batch.labels().iter().find(|&&l| l >= spec.n_classes()) {
        return Err(Error::invalid(format!(
            "label {l} out of range for {} classes",
            spec.n_classes()
        )));
    }
    Ok(())
}

/// Post-activation outputs of every layer, batch-major. The last entry holds
/// the logits.
fn forward_all(spec: &MlpSpec, w: &[f64], batch: &Batch) -> Vec<Vec<f64>> {
    let n = batch.len();
    let n_layers = spec.layer_sizes.len() - 1;
    let mut acts = Vec::with_capacity(n_layers + 1);
    acts.push(batch.inputs().to_vec());
    for (layer, (fan_in, fan_out, offset)) in spec.layers().enumerate() {
        let weights = &w[offset..offset + fan_in * fan_out];
        let biases = &w[offset + fan_in * fan_out..offset + (fan_in + 1) * fan_out];
        let input = &acts[layer];
        let mut out = vec![0.0; n * fan_out];
        let hidden = layer + 1 < n_layers;
        for b in 0..n {
            let x = &input[b * fan_in..(b + 1) * fan_in];
            let y = &mut out[b * fan_out..(b + 1) * fan_out];
            for o in 0..fan_out {
                let row = &weights[o * fan_in..(o + 1) * fan_in];
                let z = biases[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                y[o] = if hidden { spec.activation.apply(z) } else { z };
            }
        }
        acts.push(out);
    }
    acts
}

/// Per-example cross-entropy terms and softmax probabilities from logits.
fn softmax_terms(logits: &[f64], labels: &[usize], k: usize) -> (LossReport, Vec<f64>) {
    let n = labels.len();
    let mut probs = vec![0.0; logits.len()];
    let mut total = 0.0;
    let mut correct = 0usize;
    for (b, &label) in labels.iter().enumerate() {
        let z = &logits[b * k..(b + 1) * k];
        let mut argmax = 0;
        for j in 1..k {
            if z[j] > z[argmax] {
                argmax = j;
            }
        }
        let m = z[argmax];
        let sum_exp: f64 = z.iter().map(|v| (v - m).exp()).sum();
        let lse = m + sum_exp.ln();
        total += lse - z[label];
        if argmax == label {
            correct += 1;
        }
        for j in 0..k {
            probs[b * k + j] = (z[j] - lse).exp();
        }
    }
    (
        LossReport {
            cross_entropy: total / n as f64,
            accuracy: correct as f64 / n as f64,
            n_examples: n,
        },
        probs,
    )
}

/// Mean cross-entropy and argmax accuracy (ties go to the lowest class index).
pub fn forward_loss(spec: &MlpSpec, w: &ParamVector, batch: &Batch) -> Result<LossReport> {
    check_inputs(spec, w, batch)?;
    let acts = forward_all(spec, w.as_slice(), batch);
    let (report, _) = softmax_terms(acts.last().unwrap(), batch.labels(), spec.n_classes());
    Ok(report)
}

/// Loss report plus the exact gradient of the mean cross-entropy.
pub fn backward(
    spec: &MlpSpec,
    w: &ParamVector,
    batch: &Batch,
) -> Result<(LossReport, ParamVector)> {
    check_inputs(spec, w, batch)?;
    let params = w.as_slice();
    let acts = forward_all(spec, params, batch);
    let k = spec.n_classes();
    let (report, probs) = softmax_terms(acts.last().unwrap(), batch.labels(), k);
    let n = batch.len();
    let inv_n = 1.0 / n as f64;

    // dL/dlogits
    let mut delta = probs;
    for (b, &label) in batch.labels().iter().enumerate() {
        delta[b * k + label] -= 1.0;
    }
    for d in &mut delta {
        *d *= inv_n;
    }

    let mut grad = vec![0.0; params.len()];
    let layers: Vec<_> = spec.layers().collect();
    for (layer, &(fan_in, fan_out, offset)) in layers.iter().enumerate().rev() {
        let input = &acts[layer];
        let weights = &params[offset..offset + fan_in * fan_out];
        {
            let (gw, gb) = grad[offset..offset + (fan_in + 1) * fan_out].split_at_mut(fan_in * fan_out);
            for b in 0..n {
                let x = &input[b * fan_in..(b + 1) * fan_in];
                let d = &delta[b * fan_out..(b + 1) * fan_out];
                for o in 0..fan_out {
                    let dz = d[o];
                    if dz == 0.0 {
                        continue;
                    }
                    gb[o] += dz;
                    for (g, xi) in gw[o * fan_in..(o + 1) * fan_in].iter_mut().zip(x) {
                        *g += dz * xi;
                    }
                }
            }
        }
        if layer == 0 {
            break;
        }
        let mut prev = vec![0.0; n * fan_in];
        for b in 0..n {
            let d = &delta[b * fan_out..(b + 1) * fan_out];
            let p = &mut prev[b * fan_in..(b + 1) * fan_in];
            for o in 0..fan_out {
                let dz = d[o];
                if dz == 0.0 {
                    continue;
                }
                for (pi, wi) in p.iter_mut().zip(&weights[o * fan_in..(o + 1) * fan_in]) {
                    *pi += dz * wi;
                }
            }
            for (pi, &a) in p.iter_mut().zip(&input[b * fan_in..(b + 1) * fan_in]) {
                *pi *= spec.activation.derivative_from_output(a);
            }
        }
        delta = prev;
    }
    Ok((report, ParamVector::from_vec_unchecked(grad)))
}

/// Something with a loss and gradient over parameter space.
pub trait Objective: Sync {
    fn dim(&self) -> usize;

    fn loss(&self, w: &ParamVector) -> Result<f64> {
        Ok(self.loss_and_grad(w)?.0)
    }

    fn loss_and_grad(&self, w: &ParamVector) -> Result<(f64, ParamVector)>;
}

/// Mean cross-entropy of an MLP on a fixed batch.
#[derive(Clone, Copy, Debug)]
pub struct MlpObjective<'a> {
    pub spec: &'a MlpSpec,
    pub batch: &'a Batch,
}

impl<'a> MlpObjective<'a> {
    pub fn new(spec: &'a MlpSpec, batch: &'a Batch) -> Self {
        Self { spec, batch }
    }
}

impl Objective for MlpObjective<'_> {
    fn dim(&self) -> usize {
        self.spec.num_params()
    }

    fn loss(&self, w: &ParamVector) -> Result<f64> {
        Ok(forward_loss(self.spec, w, self.batch)?.cross_entropy)
    }

    fn loss_and_grad(&self, w: &ParamVector) -> Result<(f64, ParamVector)> {
        let (report, grad) = backward(self.spec, w, self.batch)?;
        Ok((report.cross_entropy, grad))
    }
}
