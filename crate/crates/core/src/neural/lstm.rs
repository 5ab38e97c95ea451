use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{sigmoid, uniform_fan_in, Activation, DenseCache, DenseLayer, ParamGroup};
use crate::error::{shape_check, Error, Result};

/// One LSTM layer. Gate rows are stacked `[f; i; C̃; o]`, each
/// `[hidden × (hidden + n_in)]`, acting on the concatenation `[h_prev, x_t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayer {
    pub n_in: usize,
    pub hidden: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmStep {
    pub z: Vec<f64>,
    pub f: Vec<f64>,
    pub i: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

impl LstmLayer {
    pub fn zeros(n_in: usize, hidden: usize) -> Self {
        Self {
            n_in,
            hidden,
            weights: vec![0.0; 4 * hidden * (hidden + n_in)],
            bias: vec![0.0; 4 * hidden],
        }
    }

    pub fn random<R: Rng + ?Sized>(n_in: usize, hidden: usize, rng: &mut R) -> Self {
        let fan_in = hidden + n_in;
        Self {
            n_in,
            hidden,
            weights: uniform_fan_in(rng, fan_in, 4 * hidden * fan_in),
            bias: uniform_fan_in(rng, fan_in, 4 * hidden),
        }
    }

    pub fn n_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn width(&self) -> usize {
        self.hidden + self.n_in
    }

    pub fn cell_forward(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<LstmStep> {
        shape_check("lstm input", self.n_in, x.len())?;
        shape_check("lstm hidden state", self.hidden, h_prev.len())?;
        shape_check("lstm cell state", self.hidden, c_prev.len())?;
        let h = self.hidden;
        let width = self.width();
        let mut z = Vec::with_capacity(width);
        z.extend_from_slice(h_prev);
        z.extend_from_slice(x);
        let pre: Vec<f64> = (0..4 * h)
            .map(|r| {
                let row = &self.weights[r * width..(r + 1) * width];
                row.iter().zip(&z).map(|(w, v)| w * v).sum::<f64>() + self.bias[r]
            })
            .collect();
        let f: Vec<f64> = pre[..h].iter().map(|&v| sigmoid(v)).collect();
        let i: Vec<f64> = pre[h..2 * h].iter().map(|&v| sigmoid(v)).collect();
        let g: Vec<f64> = pre[2 * h..3 * h].iter().map(|&v| v.tanh()).collect();
        let o: Vec<f64> = pre[3 * h..].iter().map(|&v| sigmoid(v)).collect();
        let c: Vec<f64> = (0..h).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let h_t = (0..h).map(|k| o[k] * tanh_c[k]).collect();
        Ok(LstmStep {
            z,
            f,
            i,
            g,
            o,
            c_prev: c_prev.to_vec(),
            c,
            tanh_c,
            h: h_t,
        })
    }

    /// Backward through one step given `∂L/∂h_t` and `∂L/∂c_t`. Accumulates
    /// into `grad` and returns `(∂L/∂x_t, ∂L/∂h_prev, ∂L/∂c_prev)`.
    pub fn cell_backward(
        &self,
        step: &LstmStep,
        dh: &[f64],
        dc_next: &[f64],
        grad: &mut [f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let h = self.hidden;
        let width = self.width();
        let mut dpre = vec![0.0; 4 * h];
        let mut dc_prev = vec![0.0; h];
        for k in 0..h {
            let do_ = dh[k] * step.tanh_c[k];
            let dc = dc_next[k] + dh[k] * step.o[k] * (1.0 - step.tanh_c[k] * step.tanh_c[k]);
            let df = dc * step.c_prev[k];
            let di = dc * step.g[k];
            let dg = dc * step.i[k];
            dc_prev[k] = dc * step.f[k];
            dpre[k] = df * step.f[k] * (1.0 - step.f[k]);
            dpre[h + k] = di * step.i[k] * (1.0 - step.i[k]);
            dpre[2 * h + k] = dg * (1.0 - step.g[k] * step.g[k]);
            dpre[3 * h + k] = do_ * step.o[k] * (1.0 - step.o[k]);
        }
        let (gw, gb) = grad.split_at_mut(self.weights.len());
        let mut dz = vec![0.0; width];
        for (r, &d) in dpre.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            gb[r] += d;
            let row = &self.weights[r * width..(r + 1) * width];
            let grow = &mut gw[r * width..(r + 1) * width];
            for c in 0..width {
                grow[c] += d * step.z[c];
                dz[c] += d * row[c];
            }
        }
        let dx = dz.split_off(h);
        (dx, dz, dc_prev)
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.weights);
        out.extend_from_slice(&self.bias);
    }

    pub fn load_from<'a>(&mut self, src: &'a [f64]) -> Result<&'a [f64]> {
        if src.len() < self.n_params() {
            return Err(Error::Shape(format!(
                "lstm layer needs {} parameters, {} left",
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
}

/// Stacked LSTM over a window with a linear scalar readout on the final hidden state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lstm {
    pub layers: Vec<LstmLayer>,
    pub readout: DenseLayer,
}

#[derive(Debug, Clone)]
pub struct LstmCache {
    /// `steps[layer][t]`
    pub steps: Vec<Vec<LstmStep>>,
    pub readout: DenseCache,
}

impl Lstm {
    pub fn new<R: Rng + ?Sized>(n_in: usize, hidden: usize, n_layers: usize, rng: &mut R) -> Self {
        let layers = (0..n_layers)
            .map(|k| LstmLayer::random(if k == 0 { n_in } else { hidden }, hidden, rng))
            .collect();
        let readout = DenseLayer::random(hidden, 1, Activation::Identity, rng);
        Self { layers, readout }
    }

    pub fn zeros(n_in: usize, hidden: usize, n_layers: usize) -> Self {
        Self {
            layers: (0..n_layers)
                .map(|k| LstmLayer::zeros(if k == 0 { n_in } else { hidden }, hidden))
                .collect(),
            readout: DenseLayer::zeros(hidden, 1, Activation::Identity),
        }
    }

    pub fn hidden(&self) -> usize {
        self.readout.n_in
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(LstmLayer::n_params).sum::<usize>() + self.readout.n_params()
    }

    /// Zero initial state; returns the scalar readout of `h_T` of the top layer.
    pub fn sequence_forward(&self, window: &[Vec<f64>]) -> Result<(f64, LstmCache)> {
        if window.is_empty() {
            return Err(Error::Shape("empty window".into()));
        }
        let hidden = self.hidden();
        let mut inputs: Vec<Vec<f64>> = window.to_vec();
        let mut steps = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let mut h = vec![0.0; hidden];
            let mut c = vec![0.0; hidden];
            let mut layer_steps = Vec::with_capacity(inputs.len());
            for x in &inputs {
                let step = layer.cell_forward(x, &h, &c)?;
                h.clone_from(&step.h);
                c.clone_from(&step.c);
                layer_steps.push(step);
            }
            inputs = layer_steps.iter().map(|s| s.h.clone()).collect();
            steps.push(layer_steps);
        }
        let readout = self.readout.forward(inputs.last().expect("non-empty"))?;
        Ok((readout.output[0], LstmCache { steps, readout }))
    }

    /// Full BPTT of `∂L/∂prediction = d_out` into `grad`.
    pub fn sequence_backward(&self, cache: &LstmCache, d_out: f64, grad: &mut [f64]) {
        let hidden = self.hidden();
        let t_len = cache.steps[0].len();
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut acc = 0;
        for l in &self.layers {
            offsets.push(acc);
            acc += l.n_params();
        }
        let dh_top = self
            .readout
            .backward(&cache.readout, &[d_out], &mut grad[acc..acc + self.readout.n_params()]);

        // Gradient arriving at each step's h from the layer above (or the readout).
        let mut from_above: Vec<Vec<f64>> = vec![vec![0.0; hidden]; t_len];
        from_above[t_len - 1] = dh_top;
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let slice = &mut grad[offsets[k]..offsets[k] + layer.n_params()];
            let mut dh_next = vec![0.0; hidden];
            let mut dc_next = vec![0.0; hidden];
            let mut below = vec![Vec::new(); t_len];
            for t in (0..t_len).rev() {
                let dh: Vec<f64> = from_above[t].iter().zip(&dh_next).map(|(a, b)| a + b).collect();
                let (dx, dh_prev, dc_prev) = layer.cell_backward(&cache.steps[k][t], &dh, &dc_next, slice);
                below[t] = dx;
                dh_next = dh_prev;
                dc_next = dc_prev;
            }
            from_above = below;
        }
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        self.layers.iter().for_each(|l| l.flatten_into(out));
        self.readout.flatten_into(out);
    }

    pub fn load_from<'a>(&mut self, mut src: &'a [f64]) -> Result<&'a [f64]> {
        for l in &mut self.layers {
            src = l.load_from(src)?;
        }
        self.readout.load_from(src)
    }

    pub fn param_groups(&self) -> Vec<ParamGroup> {
        let mut groups = Vec::new();
        for (k, l) in self.layers.iter().enumerate() {
            groups.push(ParamGroup::classical(
                format!("lstm{k}.weight"),
                vec![4 * l.hidden, l.hidden + l.n_in],
            ));
            groups.push(ParamGroup::classical(format!("lstm{k}.bias"), vec![4 * l.hidden]));
        }
        groups.extend(self.readout.param_groups("readout"));
        groups
    }
}
