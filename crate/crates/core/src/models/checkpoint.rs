//! Self-describing checkpoint envelope shared by regressors and
//! classifiers.
//!
//! A checkpoint is one JSON document:
//!
//! ```text
//! {
//!   "header": {
//!     "schema_version": 1,
//!     "stage": "regression" | "classification",
//!     "family": "ARIMA",
//!     "hyperparameters": {"d": 0, "p": 1, "q": 0},
//!     "uses_sentiment": false,
//!     "target": "signed",          // regression only
//!     "lookback": 5,
//!     "seed": 42,
//!     "data_fingerprint": {"first_date", "last_date", "rows", "hash"},
//!     "content_hash": "<sha256 of the canonical state JSON>"
//!   },
//!   "state": { "kind": "arima", ... }
//! }
//! ```
//!
//! Floats are written with shortest round-trip formatting, so a loaded
//! model predicts bit-identically to the saved one.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::classification::{ClassifierSpec, ClassifierState, FittedClassifier};
use super::regression::{FittedRegressor, RegressorSpec, RegressorState, TargetKind};
use super::{DataFingerprint, Hyperparams, ModelError};
use crate::hashing::{canonical_json, sha256_hex};

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Regression,
    Classification,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub schema_version: u32,
    pub stage: Stage,
    pub family: String,
    pub hyperparameters: Hyperparams,
    pub uses_sentiment: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetKind>,
    pub lookback: usize,
    pub seed: u64,
    pub data_fingerprint: DataFingerprint,
    pub content_hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub state: Value,
}

/// Models that can be written into a checkpoint envelope.
pub trait Checkpointable: Sized {
    fn header(&self) -> CheckpointHeader;
    fn state_json(&self) -> Value;
    fn from_parts(header: &CheckpointHeader, state: Value) -> Result<Self, ModelError>;

    fn to_checkpoint(&self) -> Checkpoint {
        let state = self.state_json();
        let mut header = self.header();
        header.content_hash = hash_state(&state);
        Checkpoint { header, state }
    }

    /// Hash of the fitted state alone.
    fn content_hash(&self) -> String {
        hash_state(&self.state_json())
    }
}

fn hash_state(state: &Value) -> String {
    sha256_hex(canonical_json(state).expect("a JSON value re-serializes").as_bytes())
}

fn corrupt(msg: impl Into<String>) -> ModelError {
    ModelError::CorruptCheckpoint(msg.into())
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("model state is JSON-serializable")
}

fn from_value<T: DeserializeOwned>(v: Value) -> Result<T, ModelError> {
    serde_json::from_value(v).map_err(|e| corrupt(format!("state does not decode: {e}")))
}

impl Checkpointable for FittedRegressor {
    fn header(&self) -> CheckpointHeader {
        CheckpointHeader {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            stage: Stage::Regression,
            family: self.spec.family.name().into(),
            hyperparameters: self.spec.hyperparameters.clone(),
            uses_sentiment: self.spec.uses_sentiment,
            target: Some(self.spec.target),
            lookback: self.lookback,
            seed: self.seed,
            data_fingerprint: self.fingerprint.clone(),
            content_hash: String::new(),
        }
    }

    fn state_json(&self) -> Value {
        to_value(&self.state)
    }

    fn from_parts(h: &CheckpointHeader, state: Value) -> Result<Self, ModelError> {
        if h.stage != Stage::Regression {
            return Err(corrupt("not a regression checkpoint"));
        }
        let family = h.family.parse().map_err(corrupt)?;
        Ok(FittedRegressor {
            spec: RegressorSpec {
                family,
                hyperparameters: h.hyperparameters.clone(),
                uses_sentiment: h.uses_sentiment,
                target: h.target.unwrap_or_default(),
            },
            lookback: h.lookback,
            seed: h.seed,
            fingerprint: h.data_fingerprint.clone(),
            state: from_value::<RegressorState>(state)?,
        })
    }
}

impl Checkpointable for FittedClassifier {
    fn header(&self) -> CheckpointHeader {
        CheckpointHeader {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            stage: Stage::Classification,
            family: self.spec.family.name().into(),
            hyperparameters: self.spec.hyperparameters.clone(),
            uses_sentiment: self.spec.uses_sentiment,
            target: None,
            lookback: self.lookback,
            seed: self.seed,
            data_fingerprint: self.fingerprint.clone(),
            content_hash: String::new(),
        }
    }

    fn state_json(&self) -> Value {
        to_value(&self.state)
    }

    fn from_parts(h: &CheckpointHeader, state: Value) -> Result<Self, ModelError> {
        if h.stage != Stage::Classification {
            return Err(corrupt("not a classification checkpoint"));
        }
        let family = h.family.parse().map_err(corrupt)?;
        Ok(FittedClassifier {
            spec: ClassifierSpec {
                family,
                hyperparameters: h.hyperparameters.clone(),
                uses_sentiment: h.uses_sentiment,
            },
            lookback: h.lookback,
            seed: h.seed,
            fingerprint: h.data_fingerprint.clone(),
            state: from_value::<ClassifierState>(state)?,
        })
    }
}

pub fn encode_checkpoint<M: Checkpointable>(model: &M) -> String {
    let mut s = serde_json::to_string_pretty(&model.to_checkpoint()).expect("checkpoint serializes");
    s.push('\n');
    s
}

pub fn decode_checkpoint<M: Checkpointable>(text: &str) -> Result<M, ModelError> {
    let raw: Value = serde_json::from_str(text).map_err(|e| corrupt(format!("not valid JSON: {e}")))?;
    let version = raw
        .pointer("/header/schema_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| corrupt("missing header.schema_version"))?;
    if version != u64::from(CHECKPOINT_SCHEMA_VERSION) {
        return Err(corrupt(format!(
            "schema version {version} is not supported (expected {CHECKPOINT_SCHEMA_VERSION})"
        )));
    }
    let ck: Checkpoint = serde_json::from_value(raw).map_err(|e| corrupt(format!("bad envelope: {e}")))?;
    let actual = hash_state(&ck.state);
    if actual != ck.header.content_hash {
        return Err(corrupt(format!(
            "content hash mismatch: header {} but state hashes to {actual}",
            ck.header.content_hash
        )));
    }
    M::from_parts(&ck.header, ck.state)
}

pub fn save_checkpoint<M: Checkpointable>(model: &M, path: &Path) -> Result<(), ModelError> {
    crate::ingestion::write_atomic(path, encode_checkpoint(model).as_bytes())
        .map_err(|e| ModelError::Io(std::io::Error::other(e.to_string())))
}

pub fn load_checkpoint<M: Checkpointable>(path: &Path) -> Result<M, ModelError> {
    decode_checkpoint(&std::fs::read_to_string(path)?)
}

/// Header only, without decoding the state.
pub fn read_header(path: &Path) -> Result<CheckpointHeader, ModelError> {
    let raw: Value =
        serde_json::from_str(&std::fs::read_to_string(path)?).map_err(|e| corrupt(format!("not valid JSON: {e}")))?;
    serde_json::from_value(raw.get("header").cloned().unwrap_or(Value::Null))
        .map_err(|e| corrupt(format!("bad header: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::regression::tests::series;
    use crate::models::{grid, RegressorFamily};

    fn fitted() -> (FittedRegressor, crate::features::DeltaSeries) {
        let s = series((0..60).map(|i| (i as f64 * 0.9).sin()).collect(), vec![0.0; 60]);
        let spec =
            RegressorSpec::new(RegressorFamily::Gbtreg, grid(RegressorFamily::Gbtreg)[0].clone(), false).unwrap();
        (FittedRegressor::fit(&spec, &s, 5, 5..45, 42).unwrap(), s)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (m, s) = fitted();
        let back: FittedRegressor = decode_checkpoint(&encode_checkpoint(&m)).unwrap();
        let t: Vec<usize> = (45..60).collect();
        assert_eq!(m.predict(&s, &t).unwrap(), back.predict(&s, &t).unwrap());
        assert_eq!(back, m);
    }

    #[test]
    fn truncation_is_detected() {
        let (m, _) = fitted();
        let text = encode_checkpoint(&m);
        let cut = &text[..text.len() / 2];
        assert!(matches!(
            decode_checkpoint::<FittedRegressor>(cut),
            Err(ModelError::CorruptCheckpoint(_))
        ));
    }

    #[test]
    fn tampering_is_detected() {
        let (m, _) = fitted();
        let mut ck = m.to_checkpoint();
        ck.state["model"]["init"] = serde_json::json!(123.0);
        let text = serde_json::to_string(&ck).unwrap();
        let err = decode_checkpoint::<FittedRegressor>(&text).unwrap_err();
        assert!(err.to_string().contains("hash mismatch"));
    }

    #[test]
    fn version_mismatch_names_versions() {
        let (m, _) = fitted();
        let mut ck = m.to_checkpoint();
        ck.header.schema_version = 99;
        let err = decode_checkpoint::<FittedRegressor>(&serde_json::to_string(&ck).unwrap()).unwrap_err();
        assert!(err.to_string().contains("schema version 99"), "{err}");
    }
}
