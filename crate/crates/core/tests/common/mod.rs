//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use num_complex::Complex64;
use qcal_core::sim::Gate;

type Matrix = Vec<Vec<Complex64>>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn pauli(kind: char) -> [[Complex64; 2]; 2] {
    let (o, z, i) = (c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0));
    match kind {
        'x' => [[z, o], [o, z]],
        'y' => [[z, -i], [i, z]],
        'z' => [[o, z], [z, -o]],
        _ => unreachable!(),
    }
}

/// `cos(θ/2)·I − i·sin(θ/2)·P`
fn rotation(kind: char, theta: f64) -> [[Complex64; 2]; 2] {
    let p = pauli(kind);
    let (cos, sin) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let mut m = [[c(0.0, 0.0); 2]; 2];
    for r in 0..2 {
        for k in 0..2 {
            let id = if r == k { cos } else { 0.0 };
            m[r][k] = c(id, 0.0) - c(0.0, sin) * p[r][k];
        }
    }
    m
}

fn bit(i: usize, q: usize) -> usize {
    (i >> q) & 1
}

/// Full `2^n × 2^n` matrix of one gate, little-endian qubit order.
pub fn gate_matrix(n: usize, gate: &Gate) -> Matrix {
    let dim = 1 << n;
    let mut m = vec![vec![c(0.0, 0.0); dim]; dim];
    let single = |m: &mut Matrix, t: usize, u: [[Complex64; 2]; 2]| {
        for i in 0..dim {
            for j in 0..dim {
                if (i ^ j) & !(1 << t) == 0 {
                    m[i][j] = u[bit(i, t)][bit(j, t)];
                }
            }
        }
    };
    match *gate {
        Gate::Rx { target, angle } => single(&mut m, target, rotation('x', angle)),
        Gate::Ry { target, angle } => single(&mut m, target, rotation('y', angle)),
        Gate::Rz { target, angle } => single(&mut m, target, rotation('z', angle)),
        Gate::Cnot { control, target } => {
            for j in 0..dim {
                let i = if bit(j, control) == 1 { j ^ (1 << target) } else { j };
                m[i][j] = c(1.0, 0.0);
            }
        }
    }
    m
}

fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let mut out = vec![vec![c(0.0, 0.0); n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k] == c(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

/// `U_k ⋯ U_1 |0…0⟩` with the unitary product formed explicitly.
pub fn oracle_state(n: usize, gates: &[Gate]) -> Vec<Complex64> {
    let dim = 1 << n;
    let mut u: Matrix = (0..dim)
        .map(|i| (0..dim).map(|j| c(if i == j { 1.0 } else { 0.0 }, 0.0)).collect())
        .collect();
    for g in gates {
        u = matmul(&gate_matrix(n, g), &u);
    }
    (0..dim).map(|i| u[i][0]).collect()
}

pub fn oracle_expectation_z(state: &[Complex64], q: usize) -> f64 {
    state
        .iter()
        .enumerate()
        .map(|(i, a)| a.norm_sqr() * if bit(i, q) == 0 { 1.0 } else { -1.0 })
        .sum()
}

/// Central finite difference of `f` with respect to every coordinate of `x`.
pub fn central_diff(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|k| {
            probe[k] = x[k] + h;
            let up = f(&probe);
            probe[k] = x[k] - h;
            let down = f(&probe);
            probe[k] = x[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `max_k |a_k − b_k| / max(|b_k|, floor)`
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(floor))
        .fold(0.0, f64::max)
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn norm_rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

pub mod checks {
    use std::f64::consts::PI;
    use std::time::{Duration, Instant};

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use qcal_core::data::{build_dataset, chronological_split, synthesize, CalibrationDataset, SynthProfile};
    use qcal_core::experiments::{make_folds, FoldMode, FoldSpec};
    use qcal_core::models::{evaluate_model, train, Calibrator, ModelConfig, Network, PresetName};
    use qcal_core::neural::{loss, rmse, Activation, LossKind};
    use qcal_core::sim::{Gate, StateVector};
    use qcal_core::vqc::{evaluate, parameter_shift_grad, Axis, CircuitTemplate, ParamVector, Transform};

    use super::{central_diff, norm_rel_err, oracle_state};

    pub fn random_gate(n: usize, rng: &mut impl Rng) -> Gate {
        let target = rng.random_range(0..n);
        let angle = rng.random_range(-2.0 * PI..2.0 * PI);
        let kinds = if n > 1 { 4 } else { 3 };
        match rng.random_range(0..kinds) {
            0 => Gate::Rx { target, angle },
            1 => Gate::Ry { target, angle },
            2 => Gate::Rz { target, angle },
            _ => {
                let control = (target + rng.random_range(1..n)) % n;
                Gate::Cnot { control, target }
            }
        }
    }

    pub fn random_circuit(rng: &mut impl Rng) -> (usize, Vec<Gate>) {
        let n = rng.random_range(1..=3);
        let len = rng.random_range(1..=12);
        (n, (0..len).map(|_| random_gate(n, rng)).collect())
    }

    /// Largest elementwise amplitude deviation from the dense oracle.
    pub fn simulator_vs_oracle(cases: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for _ in 0..cases {
            let (n, gates) = random_circuit(&mut rng);
            let mut s = StateVector::zero(n).unwrap();
            s.apply_all(&gates).unwrap();
            for (a, b) in s.amplitudes().iter().zip(oracle_state(n, &gates)) {
                worst = worst.max((a - b).norm());
            }
        }
        worst
    }

    pub fn random_template(rng: &mut impl Rng) -> CircuitTemplate {
        let n = rng.random_range(1..=4);
        let layers = rng.random_range(1..=3);
        let axis = if rng.random() { Axis::X } else { Axis::Y };
        let transform = if rng.random() { Transform::Arctan } else { Transform::Identity };
        match rng.random_range(0..3) {
            0 => CircuitTemplate::linear(n, layers, axis, transform),
            1 => CircuitTemplate::non_linear(n, layers, axis, transform),
            _ => CircuitTemplate::ring_rx(n, layers),
        }
        .unwrap()
    }

    /// Largest |shift rule − central difference| over parameters and inputs.
    pub fn shift_rule_vs_fd(templates: usize, h: f64, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for _ in 0..templates {
            let t = random_template(&mut rng);
            let params = ParamVector::random(t.total_params(), &mut rng).0;
            let inputs: Vec<f64> = (0..t.n_inputs).map(|_| rng.random_range(-1.5..1.5)).collect();
            let w: Vec<f64> = (0..t.n_qubits).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f = |p: &[f64], x: &[f64]| -> f64 {
                evaluate(&t, p, x).unwrap().iter().zip(&w).map(|(z, w)| z * w).sum()
            };
            let g = parameter_shift_grad(&t, &params, &inputs, &w).unwrap();
            let fd_p = central_diff(&params, h, |p| f(p, &inputs));
            let fd_x = central_diff(&inputs, h, |x| f(&params, x));
            for (a, b) in g.params.iter().chain(&g.inputs).zip(fd_p.iter().chain(&fd_x)) {
                worst = worst.max((a - b).abs());
            }
        }
        worst
    }

    pub fn random_window(t: usize, n_features: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
        (0..t)
            .map(|_| (0..n_features).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    /// Norm-wise relative error between backprop and central differences of
    /// the network output.
    pub fn network_fd_error(net: &Network, window: &[Vec<f64>], h: f64) -> f64 {
        let (_, grad) = net.forward_backward(window, |_| 1.0).unwrap();
        let mut probe = net.clone();
        let fd = central_diff(&net.params(), h, |p| {
            probe.set_params(p).unwrap();
            probe.forward(window).unwrap()
        });
        norm_rel_err(&grad, &fd)
    }

    /// Twenty FFNN configurations, the first being 4→30→15→5→1.
    pub fn ffnn_gradients(seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let acts = [Activation::Tanh, Activation::Sigmoid, Activation::Identity];
        let mut worst = 0.0f64;
        for case in 0..20 {
            let (n_in, hidden, activation) = if case == 0 {
                (4, vec![30, 15, 5], Activation::Tanh)
            } else {
                let depth = rng.random_range(1..=3);
                (
                    rng.random_range(1..=5),
                    (0..depth).map(|_| rng.random_range(1..=8)).collect(),
                    acts[rng.random_range(0..acts.len())],
                )
            };
            let net = ModelConfig::Ffnn { hidden, activation }.init(n_in, &mut rng).unwrap();
            let window = random_window(1, n_in, &mut rng);
            worst = worst.max(network_fd_error(&net, &window, 1e-6));
        }
        worst
    }

    /// Ten LSTM configurations with hidden ≤ 8 and T ≤ 5.
    pub fn lstm_gradients(seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for _ in 0..10 {
            let n_in = rng.random_range(1..=4);
            let cfg = ModelConfig::Lstm {
                hidden: rng.random_range(1..=8),
                layers: rng.random_range(1..=2),
            };
            let net = cfg.init(n_in, &mut rng).unwrap();
            let window = random_window(rng.random_range(1..=5), n_in, &mut rng);
            worst = worst.max(network_fd_error(&net, &window, 1e-6));
        }
        worst
    }

    /// 2 qubits, 1 layer, hidden 2, T = 2, with shared and per-gate `fc_out`.
    pub fn qlstm_gradients(seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for per_gate_fc_out in [false, true] {
            for _ in 0..3 {
                let cfg = ModelConfig::Qlstm {
                    qubits: 2,
                    layers: 1,
                    hidden: 2,
                    per_gate_fc_out,
                };
                let net = cfg.init(1, &mut rng).unwrap();
                let window = random_window(2, 1, &mut rng);
                worst = worst.max(network_fd_error(&net, &window, 1e-5));
            }
        }
        worst
    }

    pub fn check_folds(n: usize, spec: &FoldSpec) -> Result<(), String> {
        let folds = make_folds(n, spec).map_err(|e| e.to_string())?;
        if folds.len() != spec.k {
            return Err(format!("n={n} k={}: {} folds", spec.k, folds.len()));
        }
        let mut seen = vec![false; n];
        for (i, f) in folds.iter().enumerate() {
            let want = n / spec.k + usize::from(i < n % spec.k);
            if f.len() != want {
                return Err(format!("n={n} k={}: fold {i} has {} rows, want {want}", spec.k, f.len()));
            }
            if f.windows(2).any(|w| w[0] >= w[1]) {
                return Err(format!("n={n} k={}: fold {i} not ascending", spec.k));
            }
            for &j in f {
                if std::mem::replace(&mut seen[j], true) {
                    return Err(format!("n={n} k={}: index {j} repeated", spec.k));
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(format!("n={n} k={}: index missing", spec.k));
        }
        if spec.mode == FoldMode::Contiguous {
            let flat = folds.concat();
            if flat != (0..n).collect::<Vec<_>>() {
                return Err(format!("n={n} k={}: contiguous folds out of order", spec.k));
            }
        }
        Ok(())
    }

    /// Exhaustive over both modes and `1 ≤ k ≤ n ≤ max_n`; also checks that
    /// `k = 0` and `k > n` are rejected.
    pub fn fold_invariants(max_n: usize) -> Result<usize, String> {
        let mut checked = 0;
        for n in 1..=max_n {
            for mode in [FoldMode::Shuffled, FoldMode::Contiguous] {
                for k in 1..=n {
                    check_folds(n, &FoldSpec { k, mode, seed: n as u64 })?;
                    checked += 1;
                }
                for k in [0, n + 1] {
                    if make_folds(n, &FoldSpec { k, mode, seed: 0 }).is_ok() {
                        return Err(format!("n={n} k={k} accepted"));
                    }
                }
            }
        }
        Ok(checked)
    }

    pub fn synthetic_dataset(seed: u64, hours: usize) -> CalibrationDataset {
        let c = synthesize(seed, hours, &SynthProfile::default()).unwrap();
        build_dataset(&c.low_cost, &c.reference).unwrap().0
    }

    #[derive(Debug, Clone)]
    pub struct EndToEnd {
        pub preset: PresetName,
        pub metric: &'static str,
        pub model: f64,
        pub benchmark: f64,
        pub elapsed: Duration,
    }

    impl EndToEnd {
        pub fn reduction(&self) -> f64 {
            1.0 - self.model / self.benchmark
        }
    }

    /// Trains a preset on the chronological split and compares its test loss
    /// with the raw sensor loss on the same rows. VQR is compared by RMSE,
    /// the others by L1.
    pub fn end_to_end(ds: &CalibrationDataset, preset: PresetName) -> EndToEnd {
        let start = Instant::now();
        let p = preset.preset();
        let (tr, te) = chronological_split(ds, p.train_fraction).unwrap();
        let cal = Calibrator::init(&p.model, &tr, &p.train).unwrap();
        let (cal, _) = train(cal, &tr, &p.train).unwrap();
        let (m, preds) = evaluate_model(&cal, &te).unwrap();
        let raw: Vec<f64> = preds.iter().map(|p| p.raw_pm25).collect();
        let reference: Vec<f64> = preds.iter().map(|p| p.reference_pm25).collect();
        let (metric, model, benchmark) = if preset == PresetName::Vqr {
            ("RMSE", m.rmse, rmse(&raw, &reference).unwrap())
        } else {
            ("L1", m.l1, loss(LossKind::L1, &raw, &reference).unwrap())
        };
        EndToEnd {
            preset,
            metric,
            model,
            benchmark,
            elapsed: start.elapsed(),
        }
    }
}
