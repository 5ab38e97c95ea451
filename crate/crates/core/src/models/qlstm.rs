//! LSTM cell whose gate transforms are ring-RX variational circuits placed
//! between classical dense layers.
//!
//! ```text
//! v   = fc_in([h_prev, x])
//! f   = σ(fc_out(VQC₁(v)))      i = σ(fc_out(VQC₂(v)))
//! C̃   = tanh(fc_out(VQC₃(v)))   o = σ(fc_out(VQC₄(v)))
//! c   = f∘c_prev + i∘C̃
//! p   = proj(o∘tanh(c))
//! h   = fc_out(VQC₅(p))         y = readout(fc_out(VQC₆(p)))
//! ```
//!
//! `fc_out` is one shared layer unless `per_gate_fc_out` is set, in which case
//! each of the six circuits has its own.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{shape_check, Error, Result};
use crate::neural::{sigmoid, Activation, DenseCache, DenseLayer, ParamGroup};
use crate::vqc::{evaluate, parameter_shift_grad, CircuitTemplate, ParamVector};

pub const N_VQC: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Qlstm {
    pub n_in: usize,
    pub hidden: usize,
    pub template: CircuitTemplate,
    pub fc_in: DenseLayer,
    pub vqc_params: Vec<ParamVector>,
    pub fc_out: Vec<DenseLayer>,
    pub proj: DenseLayer,
    pub readout: DenseLayer,
}

#[derive(Debug, Clone)]
pub struct QlstmStep {
    pub fc_in: DenseCache,
    /// Expectation vectors of VQC₁…VQC₆.
    pub expectations: [Vec<f64>; N_VQC],
    /// `fc_out` caches for the six circuits.
    pub fc_out: [DenseCache; N_VQC],
    pub f: Vec<f64>,
    pub i: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub proj: DenseCache,
    pub readout: DenseCache,
    pub h: Vec<f64>,
    pub y: f64,
}

/// Offsets of each block in the flat parameter vector.
struct Layout {
    fc_in: usize,
    vqc: [usize; N_VQC],
    fc_out: Vec<usize>,
    proj: usize,
    readout: usize,
    total: usize,
}

impl Qlstm {
    pub fn new<R: Rng + ?Sized>(
        n_in: usize,
        hidden: usize,
        n_qubits: usize,
        n_layers: usize,
        per_gate_fc_out: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let template = CircuitTemplate::ring_rx(n_qubits, n_layers)?;
        let fc_in = DenseLayer::random(hidden + n_in, n_qubits, Activation::Identity, rng);
        let vqc_params = (0..N_VQC)
            .map(|_| ParamVector::random(template.total_params(), rng))
            .collect();
        let n_out = if per_gate_fc_out { N_VQC } else { 1 };
        let fc_out = (0..n_out)
            .map(|_| DenseLayer::random(n_qubits, hidden, Activation::Identity, rng))
            .collect();
        let proj = DenseLayer::random(hidden, n_qubits, Activation::Identity, rng);
        let readout = DenseLayer::random(hidden, 1, Activation::Identity, rng);
        Ok(Self {
            n_in,
            hidden,
            template,
            fc_in,
            vqc_params,
            fc_out,
            proj,
            readout,
        })
    }

    /// Every classical weight and every circuit angle set to zero.
    pub fn zeros(n_in: usize, hidden: usize, n_qubits: usize, n_layers: usize, per_gate_fc_out: bool) -> Result<Self> {
        let template = CircuitTemplate::ring_rx(n_qubits, n_layers)?;
        let n_out = if per_gate_fc_out { N_VQC } else { 1 };
        Ok(Self {
            n_in,
            hidden,
            fc_in: DenseLayer::zeros(hidden + n_in, n_qubits, Activation::Identity),
            vqc_params: vec![ParamVector::zeros(template.total_params()); N_VQC],
            fc_out: vec![DenseLayer::zeros(n_qubits, hidden, Activation::Identity); n_out],
            proj: DenseLayer::zeros(hidden, n_qubits, Activation::Identity),
            readout: DenseLayer::zeros(hidden, 1, Activation::Identity),
            template,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.template.n_qubits
    }

    fn fc_out_for(&self, k: usize) -> usize {
        if self.fc_out.len() == 1 {
            0
        } else {
            k
        }
    }

    fn layout(&self) -> Layout {
        let mut at = 0;
        let mut take = |n: usize| {
            at += n;
            at - n
        };
        let fc_in = take(self.fc_in.n_params());
        let vqc = std::array::from_fn(|k| take(self.vqc_params[k].len()));
        let fc_out = self.fc_out.iter().map(|l| take(l.n_params())).collect();
        let proj = take(self.proj.n_params());
        let readout = take(self.readout.n_params());
        Layout {
            fc_in,
            vqc,
            fc_out,
            proj,
            readout,
            total: at,
        }
    }

    pub fn n_params(&self) -> usize {
        self.layout().total
    }

    pub fn n_quantum_params(&self) -> usize {
        self.vqc_params.iter().map(|p| p.len()).sum()
    }

    fn vqc(&self, k: usize, input: &[f64]) -> Result<Vec<f64>> {
        evaluate(&self.template, &self.vqc_params[k], input)
    }

    pub fn cell_forward(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<QlstmStep> {
        shape_check("qlstm input", self.n_in, x.len())?;
        shape_check("qlstm hidden state", self.hidden, h_prev.len())?;
        shape_check("qlstm cell state", self.hidden, c_prev.len())?;
        let mut z = h_prev.to_vec();
        z.extend_from_slice(x);
        let fc_in = self.fc_in.forward(&z)?;
        let v = &fc_in.output;

        let mut expectations: [Vec<f64>; N_VQC] = Default::default();
        let mut outs: Vec<DenseCache> = Vec::with_capacity(N_VQC);
        for k in 0..4 {
            expectations[k] = self.vqc(k, v)?;
            outs.push(self.fc_out[self.fc_out_for(k)].forward(&expectations[k])?);
        }
        let f: Vec<f64> = outs[0].output.iter().map(|&a| sigmoid(a)).collect();
        let i: Vec<f64> = outs[1].output.iter().map(|&a| sigmoid(a)).collect();
        let g: Vec<f64> = outs[2].output.iter().map(|&a| a.tanh()).collect();
        let o: Vec<f64> = outs[3].output.iter().map(|&a| sigmoid(a)).collect();
        let c: Vec<f64> = (0..self.hidden).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let u: Vec<f64> = (0..self.hidden).map(|k| o[k] * tanh_c[k]).collect();
        let proj = self.proj.forward(&u)?;
        for k in 4..N_VQC {
            expectations[k] = self.vqc(k, &proj.output)?;
            outs.push(self.fc_out[self.fc_out_for(k)].forward(&expectations[k])?);
        }
        let h = outs[4].output.clone();
        let readout = self.readout.forward(&outs[5].output)?;
        let y = readout.output[0];
        let fc_out: [DenseCache; N_VQC] = outs.try_into().expect("six caches");
        Ok(QlstmStep {
            fc_in,
            expectations,
            fc_out,
            f,
            i,
            g,
            o,
            c_prev: c_prev.to_vec(),
            c,
            tanh_c,
            proj,
            readout,
            h,
            y,
        })
    }

    pub fn sequence_forward(&self, window: &[Vec<f64>]) -> Result<(f64, Vec<QlstmStep>)> {
        if window.is_empty() {
            return Err(Error::Shape("empty window".into()));
        }
        let mut h = vec![0.0; self.hidden];
        let mut c = vec![0.0; self.hidden];
        let mut steps = Vec::with_capacity(window.len());
        for x in window {
            let step = self.cell_forward(x, &h, &c)?;
            h.clone_from(&step.h);
            c.clone_from(&step.c);
            steps.push(step);
        }
        let y = steps.last().expect("non-empty").y;
        Ok((y, steps))
    }

    /// Backward through a circuit: classical parts by backprop, circuit angles
    /// and circuit inputs by the shift rule. Returns `∂L/∂(circuit input)`.
    fn vqc_backward(&self, k: usize, input: &[f64], d_expect: &[f64], grad: &mut [f64], layout: &Layout) -> Result<Vec<f64>> {
        let sg = parameter_shift_grad(&self.template, &self.vqc_params[k], input, d_expect)?;
        let off = layout.vqc[k];
        for (g, d) in grad[off..off + sg.params.len()].iter_mut().zip(&sg.params) {
            *g += d;
        }
        Ok(sg.inputs)
    }

    fn fc_out_backward(&self, k: usize, cache: &DenseCache, d_out: &[f64], grad: &mut [f64], layout: &Layout) -> Vec<f64> {
        let idx = self.fc_out_for(k);
        let layer = &self.fc_out[idx];
        let off = layout.fc_out[idx];
        layer.backward(cache, d_out, &mut grad[off..off + layer.n_params()])
    }

    /// Full-window gradient of the final output given `∂L/∂y_T = d_out`.
    pub fn sequence_backward(&self, steps: &[QlstmStep], d_out: f64, grad: &mut [f64]) -> Result<()> {
        let layout = self.layout();
        shape_check("qlstm gradient buffer", layout.total, grad.len())?;
        let hidden = self.hidden;
        let mut dh = vec![0.0; hidden];
        let mut dc = vec![0.0; hidden];
        for (t, s) in steps.iter().enumerate().rev() {
            let mut dp = vec![0.0; self.n_qubits()];
            if t + 1 == steps.len() && d_out != 0.0 {
                let r = &self.readout;
                let d6 = r.backward(&s.readout, &[d_out], &mut grad[layout.readout..layout.readout + r.n_params()]);
                let de6 = self.fc_out_backward(5, &s.fc_out[5], &d6, grad, &layout);
                let dp6 = self.vqc_backward(5, &s.proj.output, &de6, grad, &layout)?;
                add_into(&mut dp, &dp6);
            }
            if dh.iter().any(|&v| v != 0.0) {
                let de5 = self.fc_out_backward(4, &s.fc_out[4], &dh, grad, &layout);
                let dp5 = self.vqc_backward(4, &s.proj.output, &de5, grad, &layout)?;
                add_into(&mut dp, &dp5);
            }
            let p = &self.proj;
            let du = p.backward(&s.proj, &dp, &mut grad[layout.proj..layout.proj + p.n_params()]);

            let mut da: [Vec<f64>; 4] = Default::default();
            let mut dc_prev = vec![0.0; hidden];
            for k in 0..4 {
                da[k] = vec![0.0; hidden];
            }
            for k in 0..hidden {
                let d_o = du[k] * s.tanh_c[k];
                let d_c = dc[k] + du[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
                da[0][k] = d_c * s.c_prev[k] * s.f[k] * (1.0 - s.f[k]);
                da[1][k] = d_c * s.g[k] * s.i[k] * (1.0 - s.i[k]);
                da[2][k] = d_c * s.i[k] * (1.0 - s.g[k] * s.g[k]);
                da[3][k] = d_o * s.o[k] * (1.0 - s.o[k]);
                dc_prev[k] = d_c * s.f[k];
            }
            let mut dv = vec![0.0; self.n_qubits()];
            for (k, d) in da.iter().enumerate() {
                if d.iter().all(|&v| v == 0.0) {
                    continue;
                }
                let de = self.fc_out_backward(k, &s.fc_out[k], d, grad, &layout);
                let dvk = self.vqc_backward(k, &s.fc_in.output, &de, grad, &layout)?;
                add_into(&mut dv, &dvk);
            }
            let fi = &self.fc_in;
            let dz = fi.backward(&s.fc_in, &dv, &mut grad[layout.fc_in..layout.fc_in + fi.n_params()]);
            dh = dz[..hidden].to_vec();
            dc = dc_prev;
        }
        Ok(())
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        self.fc_in.flatten_into(out);
        self.vqc_params.iter().for_each(|p| out.extend_from_slice(p));
        self.fc_out.iter().for_each(|l| l.flatten_into(out));
        self.proj.flatten_into(out);
        self.readout.flatten_into(out);
    }

    pub fn load_from<'a>(&mut self, src: &'a [f64]) -> Result<&'a [f64]> {
        let mut src = self.fc_in.load_from(src)?;
        for p in &mut self.vqc_params {
            if src.len() < p.len() {
                return Err(Error::Shape("qlstm circuit parameters truncated".into()));
            }
            let (head, rest) = src.split_at(p.len());
            p.0.copy_from_slice(head);
            src = rest;
        }
        for l in &mut self.fc_out {
            src = l.load_from(src)?;
        }
        src = self.proj.load_from(src)?;
        self.readout.load_from(src)
    }

    pub fn param_groups(&self) -> Vec<ParamGroup> {
        let mut g = self.fc_in.param_groups("fc_in");
        for (k, p) in self.vqc_params.iter().enumerate() {
            g.push(ParamGroup::quantum(format!("vqc{}", k + 1), vec![p.len()]));
        }
        if self.fc_out.len() == 1 {
            g.extend(self.fc_out[0].param_groups("fc_out"));
        } else {
            for (k, l) in self.fc_out.iter().enumerate() {
                g.extend(l.param_groups(&format!("fc_out{}", k + 1)));
            }
        }
        g.extend(self.proj.param_groups("proj"));
        g.extend(self.readout.param_groups("readout"));
        g
    }
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}
