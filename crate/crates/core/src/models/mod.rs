//! Regression (magnitude) and classification (direction) model families.
//!
//! Every family is fit through the same entry points,
//! [`FittedRegressor::fit`] and [`FittedClassifier::fit`], which take a
//! [`DeltaSeries`] plus the range of target delta indices to train on. A
//! prediction for target `t` only ever reads delta and sentiment indices
//! `< t`, and fitting only reads indices `<= train.end - 1`.

pub mod arima;
pub mod checkpoint;
pub mod classification;
pub mod forest;
pub mod gbt;
pub mod logreg;
pub mod lstm;
pub mod ma;
pub mod optimize;
pub mod regression;
pub mod svm;
pub mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{DeltaSeries, FeatureError};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointHeader, CHECKPOINT_SCHEMA_VERSION};
pub use classification::{clf_grid, ClassifierFamily, ClassifierSpec, DirectionPrediction, FittedClassifier};
pub use regression::{grid, FittedRegressor, RegressorFamily, RegressorSpec, TargetKind};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("fit did not converge: {0}")]
    NonConvergence(String),
    #[error("degenerate training data: {0}")]
    DegenerateTraining(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("empty training data")]
    EmptyTraining,
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Scalar hyperparameter value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Int(i64),
    Float(f64),
    Text(String),
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Param::Int(v) => write!(f, "{v}"),
            Param::Float(v) => write!(f, "{v}"),
            Param::Text(v) => f.write_str(v),
        }
    }
}

impl From<i64> for Param {
    fn from(v: i64) -> Self {
        Param::Int(v)
    }
}

impl From<f64> for Param {
    fn from(v: f64) -> Self {
        Param::Float(v)
    }
}

impl From<&str> for Param {
    fn from(v: &str) -> Self {
        Param::Text(v.to_string())
    }
}

pub type Hyperparams = BTreeMap<String, Param>;

/// `k1=v1,k2=v2` in key order; empty maps render as `default`.
pub fn hyperparams_label(h: &Hyperparams) -> String {
    if h.is_empty() {
        return "default".into();
    }
    h.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(",")
}

pub(crate) fn get_usize(h: &Hyperparams, key: &str, default: usize) -> Result<usize, ModelError> {
    match h.get(key) {
        None => Ok(default),
        Some(Param::Int(v)) if *v >= 0 => Ok(*v as usize),
        Some(other) => Err(ModelError::InvalidHyperparameter(format!(
            "{key} must be a non-negative integer, got {other}"
        ))),
    }
}

pub(crate) fn get_f64(h: &Hyperparams, key: &str, default: f64) -> Result<f64, ModelError> {
    match h.get(key) {
        None => Ok(default),
        Some(Param::Float(v)) => Ok(*v),
        Some(Param::Int(v)) => Ok(*v as f64),
        Some(other) => Err(ModelError::InvalidHyperparameter(format!(
            "{key} must be numeric, got {other}"
        ))),
    }
}

pub(crate) fn get_text<'a>(h: &'a Hyperparams, key: &str, default: &'a str) -> Result<&'a str, ModelError> {
    match h.get(key) {
        None => Ok(default),
        Some(Param::Text(v)) => Ok(v),
        Some(other) => Err(ModelError::InvalidHyperparameter(format!(
            "{key} must be text, got {other}"
        ))),
    }
}

/// Cartesian product of named value lists, in the given key order with the
/// last key varying fastest.
pub(crate) fn cartesian(axes: &[(&str, Vec<Param>)]) -> Vec<Hyperparams> {
    let mut out = vec![Hyperparams::new()];
    for (key, values) in axes {
        out = out
            .into_iter()
            .flat_map(|h| {
                values.iter().map(move |v| {
                    let mut h = h.clone();
                    h.insert(key.to_string(), v.clone());
                    h
                })
            })
            .collect();
    }
    out
}

/// Identifies the rows a model was trained on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataFingerprint {
    pub first_date: Option<NaiveDate>,
    pub last_date: Option<NaiveDate>,
    pub rows: usize,
    pub hash: String,
}

impl DataFingerprint {
    /// Fingerprint of delta indices `..train.end`: everything a fit may read.
    pub fn of(series: &DeltaSeries, train: &Range<usize>) -> Self {
        let end = train.end.min(series.len());
        DataFingerprint {
            first_date: series.dates.first().copied(),
            last_date: end.checked_sub(1).map(|i| series.dates[i]),
            rows: end,
            hash: series.fingerprint(0..end),
        }
    }
}

/// Deterministic per-purpose seed derived from the run seed and a label.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let h = crate::hashing::sha256_hex(format!("{seed}:{label}").as_bytes());
    u64::from_str_radix(&h[..16], 16).unwrap_or(seed)
}

pub(crate) fn validate_train(series: &DeltaSeries, lookback: usize, train: &Range<usize>) -> Result<(), ModelError> {
    if train.start >= train.end {
        return Err(ModelError::EmptyTraining);
    }
    if train.start < lookback || train.end > series.len() {
        return Err(FeatureError::TargetOutOfRange {
            target: if train.start < lookback {
                train.start
            } else {
                train.end - 1
            },
            lookback,
            available: series.len(),
        }
        .into());
    }
    Ok(())
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cartesian_order_and_count() {
        let g = cartesian(&[
            ("a", vec![Param::Int(1), Param::Int(2)]),
            ("b", vec!["x".into(), "y".into(), "z".into()]),
        ]);
        assert_eq!(g.len(), 6);
        assert_eq!(hyperparams_label(&g[0]), "a=1,b=x");
        assert_eq!(hyperparams_label(&g[1]), "a=1,b=y");
        assert_eq!(hyperparams_label(&g[5]), "a=2,b=z");
    }

    #[test]
    fn param_json_shape() {
        let mut h = Hyperparams::new();
        h.insert("C".into(), Param::Float(0.1));
        h.insert("depth".into(), Param::Int(3));
        h.insert("gamma".into(), "scale".into());
        let s = serde_json::to_string(&h).unwrap();
        assert_eq!(s, r#"{"C":0.1,"depth":3,"gamma":"scale"}"#);
        let back: Hyperparams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, h);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0);
        assert!(sigmoid(800.0) <= 1.0);
    }
}
