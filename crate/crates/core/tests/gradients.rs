mod common;

use common::checks::{
    ffnn_gradients, lstm_gradients, network_fd_error, qlstm_gradients, random_window, shift_rule_vs_fd, synthetic_dataset,
};
use qcal_core::models::{batch_gradient, train, Calibrator, ModelConfig, PresetName, Sample, VqrArchitecture};
use qcal_core::par::{set_execution, Execution};
use qcal_core::vqc::{Axis, Transform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn shift_rule_matches_finite_differences() {
    let err = shift_rule_vs_fd(50, 1e-6, 10);
    assert!(err < 1e-5, "{err:e}");
}

#[test]
fn ffnn_backprop() {
    let err = ffnn_gradients(11);
    assert!(err < 1e-4, "{err:e}");
}

#[test]
fn lstm_bptt() {
    let err = lstm_gradients(12);
    assert!(err < 1e-4, "{err:e}");
}

#[test]
fn qlstm_hybrid() {
    let err = qlstm_gradients(13);
    assert!(err < 1e-3, "{err:e}");
}

#[test]
fn vqr_hybrid() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for architecture in [VqrArchitecture::Linear, VqrArchitecture::NonLinear] {
        for axis in [Axis::X, Axis::Y] {
            let cfg = ModelConfig::Vqr {
                qubits: 3,
                layers: 2,
                architecture,
                axis,
                transform: Transform::Arctan,
            };
            let net = cfg.init(3, &mut rng).unwrap();
            let err = network_fd_error(&net, &random_window(1, 3, &mut rng), 1e-6);
            assert!(err < 1e-3, "{architecture:?} {axis:?}: {err:e}");
        }
    }
}

#[test]
fn batch_gradient_independent_of_execution_mode() {
    let ds = synthetic_dataset(5, 96);
    for preset in [PresetName::Ffnn, PresetName::Lstm, PresetName::QlstmDesk, PresetName::Vqr] {
        let p = preset.preset();
        let cal = Calibrator::init(&p.model, &ds, &p.train).unwrap();
        let samples = cal.samples(&ds).unwrap();
        let batch: Vec<&Sample> = samples.iter().take(16).collect();
        set_execution(Execution::Sequential);
        let (ps, gs) = batch_gradient(&cal.network, &batch, p.train.loss).unwrap();
        set_execution(Execution::Parallel);
        let (pp, gp) = batch_gradient(&cal.network, &batch, p.train.loss).unwrap();
        assert_eq!(ps, pp);
        for (a, b) in gs.iter().zip(&gp) {
            assert!((a - b).abs() < 1e-9, "{preset:?}");
        }
    }
}

#[test]
fn training_histories_are_bitwise_reproducible() {
    let ds = synthetic_dataset(6, 96);
    for preset in [PresetName::Ffnn, PresetName::QlstmDesk] {
        let mut p = preset.preset();
        p.train.epochs = 2;
        let run = || {
            let cal = Calibrator::init(&p.model, &ds, &p.train).unwrap();
            let (cal, h) = train(cal, &ds, &p.train).unwrap();
            (cal.network.params(), h.epoch_loss)
        };
        let (a, b) = (run(), run());
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.0), bits(&b.0));
        assert_eq!(bits(&a.1), bits(&b.1));
    }
}
