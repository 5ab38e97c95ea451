//! Variational circuit templates, evaluation and parameter-shift gradients.
//!
//! A [`CircuitTemplate`] is an ordered list of segments: angle embeddings
//! that read entries of an input vector, and ansatz blocks that read
//! consecutive ranges of a flat parameter vector. Evaluating a template
//! returns `⟨Z_i⟩` for every qubit.

use std::f64::consts::{FRAC_PI_2, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{shape_check, Error, Result};
use crate::par;
use crate::sim::{Gate, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

/// Feature map applied to an input before it becomes a rotation angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Identity,
    #[default]
    Arctan,
}

impl Transform {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Arctan => x.atan(),
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Transform::Identity => 1.0,
            Transform::Arctan => 1.0 / (1.0 + x * x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnsatzKind {
    StronglyEntangling,
    RingRx,
}

impl AnsatzKind {
    pub fn params_per_layer(self, n_qubits: usize) -> usize {
        match self {
            AnsatzKind::StronglyEntangling => 3 * n_qubits,
            AnsatzKind::RingRx => n_qubits,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "segment", rename_all = "snake_case")]
pub enum Segment {
    Embedding {
        axis: Axis,
        /// `feature_slots[q]` is the input index encoded on qubit `q`.
        feature_slots: Vec<usize>,
        transform: Transform,
    },
    Ansatz {
        kind: AnsatzKind,
        n_layers: usize,
        param_offset: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitTemplate {
    pub n_qubits: usize,
    pub n_inputs: usize,
    pub segments: Vec<Segment>,
}

impl CircuitTemplate {
    /// One embedding of all inputs followed by `n_layers` strongly-entangling layers.
    pub fn linear(n_qubits: usize, n_layers: usize, axis: Axis, transform: Transform) -> Result<Self> {
        let t = Self {
            n_qubits,
            n_inputs: n_qubits,
            segments: vec![
                full_embedding(n_qubits, axis, transform),
                Segment::Ansatz {
                    kind: AnsatzKind::StronglyEntangling,
                    n_layers,
                    param_offset: 0,
                },
            ],
        };
        t.validate()?;
        Ok(t)
    }

    /// Data re-uploading: `n_layers` repetitions of [embedding; one strongly-entangling layer].
    pub fn non_linear(n_qubits: usize, n_layers: usize, axis: Axis, transform: Transform) -> Result<Self> {
        let per_layer = AnsatzKind::StronglyEntangling.params_per_layer(n_qubits);
        let segments = (0..n_layers)
            .flat_map(|l| {
                [
                    full_embedding(n_qubits, axis, transform),
                    Segment::Ansatz {
                        kind: AnsatzKind::StronglyEntangling,
                        n_layers: 1,
                        param_offset: l * per_layer,
                    },
                ]
            })
            .collect();
        let t = Self {
            n_qubits,
            n_inputs: n_qubits,
            segments,
        };
        t.validate()?;
        Ok(t)
    }

    /// RX input encoding followed by `n_layers` of RX rotations and a CNOT ring.
    pub fn ring_rx(n_qubits: usize, n_layers: usize) -> Result<Self> {
        let t = Self {
            n_qubits,
            n_inputs: n_qubits,
            segments: vec![
                full_embedding(n_qubits, Axis::X, Transform::Identity),
                Segment::Ansatz {
                    kind: AnsatzKind::RingRx,
                    n_layers,
                    param_offset: 0,
                },
            ],
        };
        t.validate()?;
        Ok(t)
    }

    pub fn total_params(&self) -> usize {
        self.segments
            .iter()
            .map(|s| match *s {
                Segment::Ansatz { kind, n_layers, .. } => kind.params_per_layer(self.n_qubits) * n_layers,
                Segment::Embedding { .. } => 0,
            })
            .sum()
    }

    pub fn embedding_count(&self) -> usize {
        self.segments
            .iter()
            .filter(|s| matches!(s, Segment::Embedding { .. }))
            .count()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_qubits > crate::sim::MAX_QUBITS {
            return Err(Error::Config(format!("template qubit count {} out of range", self.n_qubits)));
        }
        let mut ranges = Vec::new();
        for seg in &self.segments {
            match seg {
                Segment::Embedding { feature_slots, .. } => {
                    if feature_slots.len() > self.n_qubits {
                        return Err(Error::Config(format!(
                            "embedding of {} features exceeds {} qubits",
                            feature_slots.len(),
                            self.n_qubits
                        )));
                    }
                    if let Some(bad) = feature_slots.iter().find(|&&s| s >= self.n_inputs) {
                        return Err(Error::Config(format!(
                            "feature slot {bad} exceeds input dimension {}",
                            self.n_inputs
                        )));
                    }
                }
                Segment::Ansatz {
                    kind,
                    n_layers,
                    param_offset,
                } => {
                    if *n_layers == 0 {
                        return Err(Error::Config("ansatz with zero layers".into()));
                    }
                    let len = kind.params_per_layer(self.n_qubits) * n_layers;
                    ranges.push((*param_offset, param_offset + len));
                }
            }
        }
        ranges.sort_unstable();
        let mut next = 0;
        for (start, end) in ranges {
            if start != next {
                return Err(Error::Config(format!(
                    "ansatz parameter ranges must tile [0, total): gap or overlap at {start}"
                )));
            }
            next = end;
        }
        Ok(())
    }

    /// Flattened gate list for concrete parameters and inputs.
    pub fn gates(&self, params: &[f64], inputs: &[f64]) -> Result<Vec<Gate>> {
        Ok(self.compile(params, inputs)?.gates)
    }

    fn compile(&self, params: &[f64], inputs: &[f64]) -> Result<Compiled> {
        shape_check("template parameters", self.total_params(), params.len())?;
        shape_check("template inputs", self.n_inputs, inputs.len())?;
        let mut gates = Vec::new();
        let mut sources = Vec::new();
        for seg in &self.segments {
            match seg {
                Segment::Embedding {
                    axis,
                    feature_slots,
                    transform,
                } => {
                    let features: Vec<f64> = feature_slots.iter().map(|&s| inputs[s]).collect();
                    gates.extend(angle_embedding(&features, self.n_qubits, *axis, *transform)?);
                    sources.extend(feature_slots.iter().map(|&s| Source::Input {
                        index: s,
                        scale: transform.derivative(inputs[s]),
                    }));
                }
                Segment::Ansatz {
                    kind,
                    n_layers,
                    param_offset,
                } => {
                    let len = kind.params_per_layer(self.n_qubits) * n_layers;
                    let slice = &params[*param_offset..param_offset + len];
                    let block = match kind {
                        AnsatzKind::StronglyEntangling => strongly_entangling(self.n_qubits, *n_layers, slice)?,
                        AnsatzKind::RingRx => ring_rx_ansatz(self.n_qubits, *n_layers, slice)?,
                    };
                    // Both builders emit rotations in parameter order.
                    let mut p = *param_offset;
                    for g in &block {
                        sources.push(match g {
                            Gate::Cnot { .. } => Source::Fixed,
                            _ => {
                                p += 1;
                                Source::Param(p - 1)
                            }
                        });
                    }
                    gates.extend(block);
                }
            }
        }
        Ok(Compiled {
            n_qubits: self.n_qubits,
            gates,
            sources,
        })
    }
}

fn full_embedding(n_qubits: usize, axis: Axis, transform: Transform) -> Segment {
    Segment::Embedding {
        axis,
        feature_slots: (0..n_qubits).collect(),
        transform,
    }
}

/// Compact JSON form of a template used in experiment configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemplateSpec {
    pub kind: TemplateKind,
    pub qubits: usize,
    pub layers: usize,
    #[serde(default = "default_axis")]
    pub axis: Axis,
    #[serde(default)]
    pub transform: Transform,
}

fn default_axis() -> Axis {
    Axis::X
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    Linear,
    NonLinear,
    RingRx,
}

impl TemplateSpec {
    pub fn build(&self) -> Result<CircuitTemplate> {
        match self.kind {
            TemplateKind::Linear => CircuitTemplate::linear(self.qubits, self.layers, self.axis, self.transform),
            TemplateKind::NonLinear => {
                CircuitTemplate::non_linear(self.qubits, self.layers, self.axis, self.transform)
            }
            TemplateKind::RingRx => CircuitTemplate::ring_rx(self.qubits, self.layers),
        }
    }
}

/// Flat vector of rotation angles in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    /// Independent uniform draws from `[0, 2π)`.
    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        Self((0..len).map(|_| rng.random::<f64>() * TAU).collect())
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }
}

impl std::ops::Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// One rotation per feature, on qubits `0..features.len()`.
pub fn angle_embedding(features: &[f64], n_qubits: usize, axis: Axis, transform: Transform) -> Result<Vec<Gate>> {
    if features.len() > n_qubits {
        return Err(Error::Shape(format!(
            "{} features cannot be embedded on {n_qubits} qubits",
            features.len()
        )));
    }
    Ok(features
        .iter()
        .enumerate()
        .map(|(q, &x)| {
            let angle = transform.apply(x);
            match axis {
                Axis::X => Gate::Rx { target: q, angle },
                Axis::Y => Gate::Ry { target: q, angle },
            }
        })
        .collect())
}

/// Per layer `l`: RZ·RY·RZ on each qubit, then CNOT(q, q + r mod n) with
/// `r = l mod (n-1) + 1`. A single qubit gets no entanglers.
pub fn strongly_entangling(n_qubits: usize, n_layers: usize, params: &[f64]) -> Result<Vec<Gate>> {
    shape_check("strongly-entangling parameters", n_layers * n_qubits * 3, params.len())?;
    let mut gates = Vec::with_capacity(n_layers * n_qubits * 4);
    for l in 0..n_layers {
        for q in 0..n_qubits {
            let p = &params[(l * n_qubits + q) * 3..][..3];
            gates.push(Gate::Rz { target: q, angle: p[0] });
            gates.push(Gate::Ry { target: q, angle: p[1] });
            gates.push(Gate::Rz { target: q, angle: p[2] });
        }
        if n_qubits > 1 {
            let r = l % (n_qubits - 1) + 1;
            gates.extend((0..n_qubits).map(|q| Gate::Cnot {
                control: q,
                target: (q + r) % n_qubits,
            }));
        }
    }
    Ok(gates)
}

/// Per layer: RX on each qubit, then CNOT(q, q + 1 mod n) around the ring.
pub fn ring_rx_ansatz(n_qubits: usize, n_layers: usize, params: &[f64]) -> Result<Vec<Gate>> {
    shape_check("ring-RX parameters", n_layers * n_qubits, params.len())?;
    let mut gates = Vec::with_capacity(n_layers * n_qubits * 2);
    for l in 0..n_layers {
        gates.extend((0..n_qubits).map(|q| Gate::Rx {
            target: q,
            angle: params[l * n_qubits + q],
        }));
        if n_qubits > 1 {
            gates.extend((0..n_qubits).map(|q| Gate::Cnot {
                control: q,
                target: (q + 1) % n_qubits,
            }));
        }
    }
    Ok(gates)
}

#[derive(Debug, Clone, Copy)]
enum Source {
    Fixed,
    Param(usize),
    /// `scale` is the derivative of the feature map at the input value.
    Input { index: usize, scale: f64 },
}

struct Compiled {
    n_qubits: usize,
    gates: Vec<Gate>,
    sources: Vec<Source>,
}

impl Compiled {
    fn run_from(&self, mut state: StateVector, start: usize) -> Result<StateVector> {
        state.apply_all(&self.gates[start..])?;
        Ok(state)
    }
}

/// `⟨Z_i⟩` of every qubit after running the template from `|0…0⟩`.
pub fn evaluate(template: &CircuitTemplate, params: &[f64], inputs: &[f64]) -> Result<Vec<f64>> {
    let compiled = template.compile(params, inputs)?;
    let state = compiled.run_from(StateVector::zero(compiled.n_qubits)?, 0)?;
    Ok(state.expectation_z_all())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftGradient {
    pub params: Vec<f64>,
    pub inputs: Vec<f64>,
}

/// Gradient of `f = Σ_i w_i ⟨Z_i⟩` with respect to the template parameters
/// and inputs, by the two-term shift rule on every rotation.
pub fn parameter_shift_grad(
    template: &CircuitTemplate,
    params: &[f64],
    inputs: &[f64],
    output_weights: &[f64],
) -> Result<ShiftGradient> {
    shift_grad(template, params, inputs, output_weights, true)
}

/// As [`parameter_shift_grad`], optionally skipping the input-gradient circuits.
pub fn shift_grad(
    template: &CircuitTemplate,
    params: &[f64],
    inputs: &[f64],
    output_weights: &[f64],
    with_inputs: bool,
) -> Result<ShiftGradient> {
    shape_check("output weights", template.n_qubits, output_weights.len())?;
    let compiled = template.compile(params, inputs)?;

    // State just before every differentiable gate.
    let mut prefixes = Vec::new();
    let mut state = StateVector::zero(compiled.n_qubits)?;
    for (k, (gate, source)) in compiled.gates.iter().zip(&compiled.sources).enumerate() {
        let wanted = match source {
            Source::Fixed => false,
            Source::Param(_) => true,
            Source::Input { .. } => with_inputs,
        };
        if wanted {
            prefixes.push((k, state.clone()));
        }
        state.apply_in_place(gate)?;
    }

    let objective = |s: &StateVector| -> f64 {
        s.expectation_z_all()
            .iter()
            .zip(output_weights)
            .map(|(z, w)| z * w)
            .sum()
    };
    let shifted = |k: usize, prefix: &StateVector| -> Result<f64> {
        let gate = compiled.gates[k];
        let angle = gate.angle().expect("differentiable gate is a rotation");
        let mut plus = prefix.clone();
        plus.apply_in_place(&gate.with_angle(angle + FRAC_PI_2))?;
        let plus = compiled.run_from(plus, k + 1)?;
        let mut minus = prefix.clone();
        minus.apply_in_place(&gate.with_angle(angle - FRAC_PI_2))?;
        let minus = compiled.run_from(minus, k + 1)?;
        Ok(0.5 * (objective(&plus) - objective(&minus)))
    };

    let work = (prefixes.len() * compiled.gates.len()) << compiled.n_qubits;
    let derivs: Vec<Result<f64>> = if work >= PARALLEL_WORK {
        par::map_slice(&prefixes, |(k, prefix)| shifted(*k, prefix))
    } else {
        prefixes.iter().map(|(k, prefix)| shifted(*k, prefix)).collect()
    };

    let mut grad = ShiftGradient {
        params: vec![0.0; params.len()],
        inputs: vec![0.0; inputs.len()],
    };
    for ((k, _), d) in prefixes.iter().zip(derivs) {
        let d = d?;
        match compiled.sources[*k] {
            Source::Param(p) => grad.params[p] += d,
            Source::Input { index, scale } => grad.inputs[index] += d * scale,
            Source::Fixed => unreachable!(),
        }
    }
    Ok(grad)
}

// Below this many amplitude-gate updates threading costs more than it saves.
const PARALLEL_WORK: usize = 1 << 15;
