mod common;

use common::checks::{check_folds, fold_invariants, random_window, synthetic_dataset};
use proptest::prelude::*;
use qcal_core::data::{make_windows, FeatureSet};
use qcal_core::experiments::{cross_validate, FoldMode, FoldSpec};
use qcal_core::models::{ModelConfig, Network, PresetName, VqrArchitecture};
use qcal_core::vqc::{Axis, Transform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn qlstm_gates_stay_in_range(seed in any::<u64>(), scale in 0.1f64..50.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = ModelConfig::Qlstm { qubits: 3, layers: 2, hidden: 4, per_gate_fc_out: seed % 2 == 0 };
        let Network::Qlstm(m) = cfg.init(2, &mut rng).unwrap() else { unreachable!() };
        let mut h = vec![0.0; 4];
        let mut c = vec![0.0; 4];
        for x in random_window(4, 2, &mut rng) {
            let x: Vec<f64> = x.iter().map(|v| v * scale).collect();
            let s = m.cell_forward(&x, &h, &c).unwrap();
            for v in s.f.iter().chain(&s.i).chain(&s.o) {
                prop_assert!(*v > 0.0 && *v < 1.0);
            }
            for v in &s.g {
                prop_assert!(*v > -1.0 && *v < 1.0);
            }
            h = s.h;
            c = s.c;
        }
    }

    #[test]
    fn vqr_raw_output_bounded(seed in any::<u64>(), scale in 0.1f64..100.0, nonlinear in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = ModelConfig::Vqr {
            qubits: 4,
            layers: 3,
            architecture: if nonlinear { VqrArchitecture::NonLinear } else { VqrArchitecture::Linear },
            axis: Axis::Y,
            transform: Transform::Identity,
        };
        let net = cfg.init(4, &mut rng).unwrap();
        let w: Vec<Vec<f64>> = random_window(1, 4, &mut rng).into_iter().map(|r| r.iter().map(|v| v * scale).collect()).collect();
        let y = net.forward(&w).unwrap();
        prop_assert!((-1.0..=1.0).contains(&y));
    }

    #[test]
    fn folds_partition(n in 1usize..400, k_frac in 0.0f64..1.0, shuffled in any::<bool>(), seed in any::<u64>()) {
        let k = 1 + ((n - 1) as f64 * k_frac) as usize;
        let mode = if shuffled { FoldMode::Shuffled } else { FoldMode::Contiguous };
        prop_assert_eq!(check_folds(n, &FoldSpec { k, mode, seed }), Ok(()));
    }
}

#[test]
fn folds_exhaustive_to_200() {
    assert_eq!(fold_invariants(200), Ok(2 * (200 * 201 / 2)));
}

#[test]
fn windows_end_at_their_target() {
    let ds = synthetic_dataset(8, 120);
    for t in 1..=5 {
        for w in make_windows(&ds, t, FeatureSet::All).unwrap() {
            let row = ds.rows.iter().find(|r| r.timestamp == w.end()).unwrap();
            assert_eq!(w.target, row.reference);
            assert_eq!(w.timestamps.len(), t);
            assert!(w.timestamps.windows(2).all(|p| p[1] - p[0] == 3600));
        }
    }
}

#[test]
fn cross_validation_average_is_fold_mean() {
    let ds = synthetic_dataset(9, 120);
    let mut p = PresetName::Ffnn.preset();
    p.train.epochs = 3;
    let spec = FoldSpec { k: 4, mode: FoldMode::Shuffled, seed: 2 };
    let r = cross_validate(&p.model, &p.train, &ds, &spec, 20).unwrap();
    let folds: Vec<_> = r.folds.iter().map(|f| f.metrics.unwrap()).collect();
    let avg = r.average.unwrap();
    let mean = |f: fn(&qcal_core::models::Metrics) -> f64| folds.iter().map(f).sum::<f64>() / folds.len() as f64;
    assert!((avg.l1 - mean(|m| m.l1)).abs() < 1e-12);
    assert!((avg.mse - mean(|m| m.mse)).abs() < 1e-12);
    for m in folds.iter().chain(std::iter::once(&avg)) {
        assert!((m.rmse - m.mse.sqrt()).abs() < 1e-12);
    }
}
