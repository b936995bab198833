use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::models::DirectionPrediction;

fn check(a: usize, b: usize) -> Result<(), EvalError> {
    if a != b {
        return Err(EvalError::LengthMismatch { left: a, right: b });
    }
    if a == 0 {
        return Err(EvalError::EmptyInput);
    }
    Ok(())
}

pub fn mse(preds: &[f64], actuals: &[f64]) -> Result<f64, EvalError> {
    check(preds.len(), actuals.len())?;
    Ok(preds.iter().zip(actuals).map(|(p, a)| (p - a) * (p - a)).sum::<f64>() / preds.len() as f64)
}

pub fn mae(preds: &[f64], actuals: &[f64]) -> Result<f64, EvalError> {
    check(preds.len(), actuals.len())?;
    Ok(preds.iter().zip(actuals).map(|(p, a)| (p - a).abs()).sum::<f64>() / preds.len() as f64)
}

pub fn accuracy(preds: &[u8], actuals: &[u8]) -> Result<f64, EvalError> {
    check(preds.len(), actuals.len())?;
    Ok(preds.iter().zip(actuals).filter(|(p, a)| p == a).count() as f64 / preds.len() as f64)
}

/// F1 of class 1; zero when there are no true positives.
pub fn f1_score(preds: &[u8], actuals: &[u8]) -> Result<f64, EvalError> {
    check(preds.len(), actuals.len())?;
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, &a) in preds.iter().zip(actuals) {
        match (p, a) {
            (1, 1) => tp += 1,
            (1, _) => fp += 1,
            (_, 1) => fn_ += 1,
            _ => {}
        }
    }
    if tp == 0 {
        return Ok(0.0);
    }
    Ok(2.0 * tp as f64 / (2 * tp + fp + fn_) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricKind {
    Regression,
    /// Inputs are 0/1 labels.
    Classification,
}

/// Either error metrics or label metrics, per [`MetricKind`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarMetrics {
    pub mse: Option<f64>,
    pub mae: Option<f64>,
    pub accuracy: Option<f64>,
    pub f1: Option<f64>,
}

pub fn compute_metrics(preds: &[f64], actuals: &[f64], kind: MetricKind) -> Result<ScalarMetrics, EvalError> {
    match kind {
        MetricKind::Regression => Ok(ScalarMetrics {
            mse: Some(mse(preds, actuals)?),
            mae: Some(mae(preds, actuals)?),
            accuracy: None,
            f1: None,
        }),
        MetricKind::Classification => {
            let p: Vec<u8> = preds.iter().map(|&v| u8::from(v > 0.5)).collect();
            let a: Vec<u8> = actuals.iter().map(|&v| u8::from(v > 0.5)).collect();
            Ok(ScalarMetrics {
                mse: None,
                mae: None,
                accuracy: Some(accuracy(&p, &a)?),
                f1: Some(f1_score(&p, &a)?),
            })
        }
    }
}

/// Metrics of a combined two-stage prediction. `mse`/`mae` are on
/// reconstructed closes; `delta_mse`/`delta_mae` on the deltas themselves.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub mse: f64,
    pub mae: f64,
    pub delta_mse: f64,
    pub delta_mae: f64,
    pub accuracy: f64,
    pub f1: f64,
    pub n: usize,
}

/// `|magnitude| * multiplier`, elementwise.
pub fn combine(magnitudes: &[f64], directions: &[DirectionPrediction]) -> Result<Vec<f64>, EvalError> {
    if magnitudes.len() != directions.len() {
        return Err(EvalError::LengthMismatch {
            left: magnitudes.len(),
            right: directions.len(),
        });
    }
    Ok(magnitudes
        .iter()
        .zip(directions)
        .map(|(m, d)| m.abs() * f64::from(d.multiplier))
        .collect())
}
