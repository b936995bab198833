//! Supervised-learning inputs built from aligned panels.
//!
//! Index conventions: a [`DeltaSeries`] built from a panel with `n + 1` rows
//! has `n` deltas, `deltas[i] = close[i + 1] - close[i]`, dated at panel row
//! `i + 1`. A supervised example targets delta index `t` and sees only delta
//! (and sentiment) indices `t - L .. t`.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hashing::hash_f64s;
use crate::ingestion::EtfId;
use crate::sentiment::AlignedPanel;

pub const DEFAULT_LOOKBACK: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("panel has {0} row(s); at least 2 are needed for a delta")]
    TooShortPanel(usize),
    #[error("{deltas} deltas is not enough history for lookback {lookback}")]
    InsufficientHistory { deltas: usize, lookback: usize },
    #[error("target index {target} needs lookback {lookback} but only {available} prior deltas exist")]
    TargetOutOfRange {
        target: usize,
        lookback: usize,
        available: usize,
    },
    #[error("cannot fit a standardizer on an empty slice")]
    EmptySlice,
    #[error("standardizer used before fit")]
    NotFitted,
    #[error("expected {expected} columns, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaSeries {
    pub etf: EtfId,
    /// Date of each delta (panel dates from index 1).
    pub dates: Vec<NaiveDate>,
    pub deltas: Vec<f64>,
    /// Sentiment of the panel row each delta is dated at.
    pub sentiments: Vec<f64>,
    /// Panel closes, one longer than `deltas`.
    pub closes: Vec<f64>,
}

impl DeltaSeries {
    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    /// Series on consecutive calendar days from `start`, with closes
    /// reconstructed from `first_close`.
    pub fn from_deltas(
        etf: EtfId,
        start: NaiveDate,
        first_close: f64,
        deltas: Vec<f64>,
        sentiments: Vec<f64>,
    ) -> Result<Self, FeatureError> {
        if sentiments.len() != deltas.len() {
            return Err(FeatureError::ShapeMismatch {
                expected: deltas.len(),
                got: sentiments.len(),
            });
        }
        Ok(DeltaSeries {
            etf,
            dates: (1..=deltas.len())
                .map(|i| start + chrono::Days::new(i as u64))
                .collect(),
            closes: reconstruct_closes(first_close, &deltas),
            deltas,
            sentiments,
        })
    }

    /// `closes[0] + cumsum(deltas)`.
    pub fn reconstruct(&self) -> Vec<f64> {
        reconstruct_closes(self.closes[0], &self.deltas)
    }

    /// Close immediately before delta `t`, i.e. the last price known when
    /// predicting it.
    pub fn close_before(&self, t: usize) -> f64 {
        self.closes[t]
    }

    /// Close on the date of delta `t`.
    pub fn close_at(&self, t: usize) -> f64 {
        self.closes[t + 1]
    }

    /// Copy restricted to delta indices `..end` (closes `..=end`).
    pub fn truncated(&self, end: usize) -> DeltaSeries {
        let end = end.min(self.len());
        DeltaSeries {
            etf: self.etf.clone(),
            dates: self.dates[..end].to_vec(),
            deltas: self.deltas[..end].to_vec(),
            sentiments: self.sentiments[..end].to_vec(),
            closes: self.closes[..=end].to_vec(),
        }
    }

    /// Hash of the rows with delta index in `range`.
    pub fn fingerprint(&self, range: std::ops::Range<usize>) -> String {
        let r = range.start.min(self.len())..range.end.min(self.len());
        hash_f64s([&self.deltas[r.clone()], &self.sentiments[r]])
    }
}

pub fn reconstruct_closes(first_close: f64, deltas: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(deltas.len() + 1);
    let mut p = first_close;
    out.push(p);
    for d in deltas {
        p += d;
        out.push(p);
    }
    out
}

pub fn to_deltas(panel: &AlignedPanel) -> Result<DeltaSeries, FeatureError> {
    let rows = panel.rows();
    if rows.len() < 2 {
        return Err(FeatureError::TooShortPanel(rows.len()));
    }
    let closes: Vec<f64> = rows.iter().map(|r| r.close).collect();
    Ok(DeltaSeries {
        etf: panel.etf().clone(),
        dates: rows[1..].iter().map(|r| r.date).collect(),
        deltas: closes.windows(2).map(|w| w[1] - w[0]).collect(),
        sentiments: rows[1..].iter().map(|r| r.sentiment).collect(),
        closes,
    })
}

/// Samples × lookback × features, stored flat in timestep-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowedDataset {
    pub lookback: usize,
    pub n_features: usize,
    pub feature_names: Vec<String>,
    data: Vec<f64>,
    pub targets: Vec<f64>,
    /// Delta index of each target.
    pub target_index: Vec<usize>,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Window `i` as `lookback` rows of `n_features` values.
    pub fn window(&self, i: usize) -> &[f64] {
        let w = self.lookback * self.n_features;
        &self.data[i * w..(i + 1) * w]
    }

    pub fn value(&self, i: usize, step: usize, feature: usize) -> f64 {
        self.window(i)[step * self.n_features + feature]
    }

    /// Channel-major flattening: all steps of feature 0, then feature 1.
    pub fn flatten(&self, i: usize) -> Vec<f64> {
        (0..self.n_features)
            .flat_map(|f| (0..self.lookback).map(move |s| (s, f)))
            .map(|(s, f)| self.value(i, s, f))
            .collect()
    }

    /// Delta indices feeding window `i`.
    pub fn feature_steps(&self, i: usize) -> std::ops::Range<usize> {
        let t = self.target_index[i];
        t - self.lookback..t
    }
}

/// Flattened lag features, one row per example.
#[derive(Clone, Debug, PartialEq)]
pub struct LaggedMatrix {
    pub n_cols: usize,
    pub feature_names: Vec<String>,
    data: Vec<f64>,
    pub targets: Vec<f64>,
    pub target_index: Vec<usize>,
}

impl LaggedMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self, FeatureError> {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for r in &rows {
            if r.len() != n_cols {
                return Err(FeatureError::ShapeMismatch {
                    expected: n_cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(LaggedMatrix {
            n_cols,
            feature_names: (0..n_cols).map(|i| format!("x{i}")).collect(),
            data,
            target_index: (0..targets.len()).collect(),
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

fn check_history(series: &DeltaSeries, lookback: usize) -> Result<(), FeatureError> {
    if lookback == 0 || series.len() <= lookback {
        return Err(FeatureError::InsufficientHistory {
            deltas: series.len(),
            lookback,
        });
    }
    Ok(())
}

fn check_targets(series: &DeltaSeries, lookback: usize, targets: &[usize]) -> Result<(), FeatureError> {
    for &t in targets {
        if t < lookback || t >= series.len() {
            return Err(FeatureError::TargetOutOfRange {
                target: t,
                lookback,
                available: t.min(series.len()),
            });
        }
    }
    Ok(())
}

fn names(lookback: usize, with_sentiment: bool) -> Vec<String> {
    let mut out: Vec<String> = (1..=lookback).rev().map(|k| format!("delta_lag{k}")).collect();
    if with_sentiment {
        out.extend((1..=lookback).rev().map(|k| format!("sentiment_lag{k}")));
    }
    out
}

/// All windows of length `lookback`: `|deltas| - lookback` examples.
pub fn make_windows(
    series: &DeltaSeries,
    lookback: usize,
    with_sentiment: bool,
) -> Result<WindowedDataset, FeatureError> {
    check_history(series, lookback)?;
    let targets: Vec<usize> = (lookback..series.len()).collect();
    windows_for(series, lookback, with_sentiment, &targets)
}

/// Windows for the given target delta indices.
pub fn windows_for(
    series: &DeltaSeries,
    lookback: usize,
    with_sentiment: bool,
    targets: &[usize],
) -> Result<WindowedDataset, FeatureError> {
    check_targets(series, lookback, targets)?;
    let f = if with_sentiment { 2 } else { 1 };
    let mut data = Vec::with_capacity(targets.len() * lookback * f);
    for &t in targets {
        for s in t - lookback..t {
            data.push(series.deltas[s]);
            if with_sentiment {
                data.push(series.sentiments[s]);
            }
        }
    }
    Ok(WindowedDataset {
        lookback,
        n_features: f,
        feature_names: if with_sentiment {
            vec!["delta".into(), "sentiment".into()]
        } else {
            vec!["delta".into()]
        },
        data,
        targets: targets.iter().map(|&t| series.deltas[t]).collect(),
        target_index: targets.to_vec(),
    })
}

pub fn make_lagged(series: &DeltaSeries, lookback: usize, with_sentiment: bool) -> Result<LaggedMatrix, FeatureError> {
    check_history(series, lookback)?;
    let targets: Vec<usize> = (lookback..series.len()).collect();
    lagged_for(series, lookback, with_sentiment, &targets)
}

pub fn lagged_for(
    series: &DeltaSeries,
    lookback: usize,
    with_sentiment: bool,
    targets: &[usize],
) -> Result<LaggedMatrix, FeatureError> {
    check_targets(series, lookback, targets)?;
    let n_cols = lookback * if with_sentiment { 2 } else { 1 };
    let mut data = Vec::with_capacity(targets.len() * n_cols);
    for &t in targets {
        data.extend_from_slice(&series.deltas[t - lookback..t]);
        if with_sentiment {
            data.extend_from_slice(&series.sentiments[t - lookback..t]);
        }
    }
    Ok(LaggedMatrix {
        n_cols,
        feature_names: names(lookback, with_sentiment),
        data,
        targets: targets.iter().map(|&t| series.deltas[t]).collect(),
        target_index: targets.to_vec(),
    })
}

/// 1 = up (delta > 0), 0 = down or unchanged.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectionLabels {
    pub labels: Vec<u8>,
    pub up: usize,
    pub down: usize,
}

pub fn direction_label(delta: f64) -> u8 {
    u8::from(delta > 0.0)
}

pub fn make_direction_labels(series: &DeltaSeries) -> DirectionLabels {
    labels_from(&series.deltas)
}

pub fn labels_from(deltas: &[f64]) -> DirectionLabels {
    let labels: Vec<u8> = deltas.iter().map(|&d| direction_label(d)).collect();
    let up = labels.iter().filter(|&&l| l == 1).count();
    DirectionLabels {
        down: labels.len() - up,
        up,
        labels,
    }
}

/// Per-column z-scoring with population standard deviation. Columns with
/// zero spread map to zero.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// Identifies the rows the statistics were computed from.
    pub scope: String,
    pub n_rows: usize,
    fitted: bool,
}

impl Standardizer {
    /// Fit on `rows` (flat, `n_cols` per row). `scope` labels the slice,
    /// e.g. the fold's training target range.
    pub fn fit(rows: &[f64], n_cols: usize, scope: impl Into<String>) -> Result<Self, FeatureError> {
        if n_cols == 0 || rows.is_empty() {
            return Err(FeatureError::EmptySlice);
        }
        if !rows.len().is_multiple_of(n_cols) {
            return Err(FeatureError::ShapeMismatch {
                expected: n_cols,
                got: rows.len() % n_cols,
            });
        }
        let n = rows.len() / n_cols;
        let mut means = vec![0.0; n_cols];
        for r in rows.chunks(n_cols) {
            for (m, v) in means.iter_mut().zip(r) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n as f64);
        let mut vars = vec![0.0; n_cols];
        for r in rows.chunks(n_cols) {
            for ((s, v), m) in vars.iter_mut().zip(r).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let stds = vars.into_iter().map(|s| (s / n as f64).sqrt()).collect();
        Ok(Standardizer {
            means,
            stds,
            scope: scope.into(),
            n_rows: n,
            fitted: true,
        })
    }

    pub fn is_fitted(&self) -> bool {
        self.fitted
    }

    pub fn n_cols(&self) -> usize {
        self.means.len()
    }

    fn degenerate(&self, j: usize) -> bool {
        self.stds[j] <= 1e-12 * self.means[j].abs().max(1.0)
    }

    pub fn transform_in_place(&self, rows: &mut [f64]) -> Result<(), FeatureError> {
        if !self.fitted {
            return Err(FeatureError::NotFitted);
        }
        let k = self.n_cols();
        if !rows.len().is_multiple_of(k) {
            return Err(FeatureError::ShapeMismatch {
                expected: k,
                got: rows.len() % k,
            });
        }
        for r in rows.chunks_mut(k) {
            for (j, v) in r.iter_mut().enumerate() {
                *v = if self.degenerate(j) {
                    0.0
                } else {
                    (*v - self.means[j]) / self.stds[j]
                };
            }
        }
        Ok(())
    }

    pub fn transform(&self, rows: &[f64]) -> Result<Vec<f64>, FeatureError> {
        let mut out = rows.to_vec();
        self.transform_in_place(&mut out)?;
        Ok(out)
    }

    /// Maps a standardized value of column `j` back to the original scale.
    pub fn inverse(&self, j: usize, z: f64) -> f64 {
        if self.degenerate(j) {
            self.means[j]
        } else {
            z * self.stds[j] + self.means[j]
        }
    }
}
