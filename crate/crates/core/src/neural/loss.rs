use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    L1,
    Mse,
}

fn check(p: &[f64], t: &[f64]) -> Result<()> {
    if p.is_empty() || p.len() != t.len() {
        return Err(Error::Shape(format!(
            "loss needs equal non-empty vectors, got {} and {}",
            p.len(),
            t.len()
        )));
    }
    Ok(())
}

/// Mean absolute or mean squared error.
pub fn loss(kind: LossKind, predictions: &[f64], targets: &[f64]) -> Result<f64> {
    check(predictions, targets)?;
    let n = predictions.len() as f64;
    let sum: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| match kind {
            LossKind::L1 => (p - t).abs(),
            LossKind::Mse => (p - t) * (p - t),
        })
        .sum();
    Ok(sum / n)
}

pub fn rmse(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    Ok(loss(LossKind::Mse, predictions, targets)?.sqrt())
}

/// Derivative of the per-sample loss with respect to the prediction.
/// The L1 subgradient at a zero residual is 0.
pub fn loss_grad(kind: LossKind, prediction: f64, target: f64) -> f64 {
    let r = prediction - target;
    match kind {
        LossKind::L1 => {
            if r > 0.0 {
                1.0
            } else if r < 0.0 {
                -1.0
            } else {
                0.0
            }
        }
        LossKind::Mse => 2.0 * r,
    }
}
