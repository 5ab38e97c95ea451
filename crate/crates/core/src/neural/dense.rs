use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{uniform_fan_in, Activation, ParamGroup};
use crate::error::{shape_check, Error, Result};

/// `a = σ(W·x + b)` with `W` stored row-major as `[n_out × n_in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseCache {
    pub input: Vec<f64>,
    pub pre: Vec<f64>,
    pub output: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(n_in: usize, n_out: usize, activation: Activation) -> Self {
        Self {
            n_in,
            n_out,
            weights: vec![0.0; n_in * n_out],
            bias: vec![0.0; n_out],
            activation,
        }
    }

    pub fn random<R: Rng + ?Sized>(n_in: usize, n_out: usize, activation: Activation, rng: &mut R) -> Self {
        Self {
            n_in,
            n_out,
            weights: uniform_fan_in(rng, n_in, n_in * n_out),
            bias: uniform_fan_in(rng, n_in, n_out),
            activation,
        }
    }

    pub fn n_params(&self) -> usize {
        self.n_out * (self.n_in + 1)
    }

    pub fn forward(&self, input: &[f64]) -> Result<DenseCache> {
        shape_check("dense layer input", self.n_in, input.len())?;
        let pre: Vec<f64> = self
            .weights
            .chunks_exact(self.n_in.max(1))
            .take(self.n_out)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect();
        let output = pre.iter().map(|&z| self.activation.apply(z)).collect();
        Ok(DenseCache {
            input: input.to_vec(),
            pre,
            output,
        })
    }

    pub fn output(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(input)?.output)
    }

    /// Accumulates `∂L/∂(W, b)` into `grad` (weights then bias) and returns `∂L/∂x`.
    pub fn backward(&self, cache: &DenseCache, grad_out: &[f64], grad: &mut [f64]) -> Vec<f64> {
        debug_assert_eq!(grad.len(), self.n_params());
        let (gw, gb) = grad.split_at_mut(self.n_in * self.n_out);
        let mut grad_in = vec![0.0; self.n_in];
        for o in 0..self.n_out {
            let delta = grad_out[o] * self.activation.derivative(cache.pre[o], cache.output[o]);
            if delta == 0.0 {
                continue;
            }
            gb[o] += delta;
            let row = &self.weights[o * self.n_in..(o + 1) * self.n_in];
            let grow = &mut gw[o * self.n_in..(o + 1) * self.n_in];
            for i in 0..self.n_in {
                grow[i] += delta * cache.input[i];
                grad_in[i] += delta * row[i];
            }
        }
        grad_in
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.weights);
        out.extend_from_slice(&self.bias);
    }

    /// Reads `n_params()` values from the front of `src`, returning the remainder.
    pub fn load_from<'a>(&mut self, src: &'a [f64]) -> Result<&'a [f64]> {
        if src.len() < self.n_params() {
            return Err(Error::Shape(format!(
                "dense layer needs {} parameters, {} left",
                self.n_params(),
                src.len()
            )));
        }
        let (w, rest) = src.split_at(self.weights.len());
        let (b, rest) = rest.split_at(self.bias.len());
        self.weights.copy_from_slice(w);
        self.bias.copy_from_slice(b);
        Ok(rest)
    }

    pub fn param_groups(&self, prefix: &str) -> Vec<ParamGroup> {
        vec![
            ParamGroup::classical(format!("{prefix}.weight"), vec![self.n_out, self.n_in]),
            ParamGroup::classical(format!("{prefix}.bias"), vec![self.n_out]),
        ]
    }
}

/// Runs `layers` in order, returning the final output and every layer's cache.
pub fn ffnn_forward(layers: &[DenseLayer], input: &[f64]) -> Result<(Vec<f64>, Vec<DenseCache>)> {
    let mut caches: Vec<DenseCache> = Vec::with_capacity(layers.len());
    for layer in layers {
        let x = caches.last().map_or(input, |c| c.output.as_slice());
        let cache = layer.forward(x)?;
        caches.push(cache);
    }
    let out = caches.last().map_or_else(|| input.to_vec(), |c| c.output.clone());
    Ok((out, caches))
}

/// Backpropagates `grad_out` through `layers`, accumulating into `grad`.
pub fn ffnn_backward(layers: &[DenseLayer], caches: &[DenseCache], grad_out: &[f64], grad: &mut [f64]) -> Vec<f64> {
    let mut offsets = Vec::with_capacity(layers.len());
    let mut acc = 0;
    for l in layers {
        offsets.push(acc);
        acc += l.n_params();
    }
    let mut g = grad_out.to_vec();
    for (k, layer) in layers.iter().enumerate().rev() {
        let slice = &mut grad[offsets[k]..offsets[k] + layer.n_params()];
        g = layer.backward(&caches[k], &g, slice);
    }
    g
}

/// Feed-forward regressor: hidden layers with a shared activation and a
/// linear scalar output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ffnn {
    pub layers: Vec<DenseLayer>,
}

impl Ffnn {
    pub fn new<R: Rng + ?Sized>(n_in: usize, hidden: &[usize], activation: Activation, rng: &mut R) -> Self {
        let mut sizes = vec![n_in];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let act = if k == last { Activation::Identity } else { activation };
                DenseLayer::random(w[0], w[1], act, rng)
            })
            .collect();
        Self { layers }
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(DenseLayer::n_params).sum()
    }

    pub fn forward(&self, x: &[f64]) -> Result<(f64, Vec<DenseCache>)> {
        let (out, caches) = ffnn_forward(&self.layers, x)?;
        Ok((out[0], caches))
    }

    pub fn backward(&self, caches: &[DenseCache], d_out: f64, grad: &mut [f64]) {
        ffnn_backward(&self.layers, caches, &[d_out], grad);
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        self.layers.iter().for_each(|l| l.flatten_into(out));
    }

    pub fn load_from<'a>(&mut self, mut src: &'a [f64]) -> Result<&'a [f64]> {
        for l in &mut self.layers {
            src = l.load_from(src)?;
        }
        Ok(src)
    }

    pub fn param_groups(&self) -> Vec<ParamGroup> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(k, l)| l.param_groups(&format!("layer{k}")))
            .collect()
    }
}
