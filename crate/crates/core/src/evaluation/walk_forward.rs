use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::EvalError;

/// One expanding-window split over sample indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Range<usize>,
    pub test: Range<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkForwardPlan {
    pub n_total: usize,
    pub horizon: usize,
    pub min_train: usize,
    pub folds: Vec<Fold>,
}

/// Fold expressed in target delta indices, `lookback` past the sample index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetFold {
    pub train: Range<usize>,
    pub test: Range<usize>,
}

/// Fold `j` trains on `[0, min_train + j*horizon)` and tests on the next
/// `horizon` samples; a shorter final block is kept. At least one test
/// sample must remain after `min_train`.
pub fn make_walk_forward(n: usize, horizon: usize, min_train: usize) -> Result<WalkForwardPlan, EvalError> {
    if horizon == 0 || min_train == 0 || min_train >= n {
        return Err(EvalError::InsufficientData { n, min_train, horizon });
    }
    let folds = (min_train..n)
        .step_by(horizon)
        .map(|k| Fold {
            train: 0..k,
            test: k..(k + horizon).min(n),
        })
        .collect();
    Ok(WalkForwardPlan {
        n_total: n,
        horizon,
        min_train,
        folds,
    })
}

impl WalkForwardPlan {
    /// Sample `i` predicts delta `i + lookback`.
    pub fn target_folds(&self, lookback: usize) -> Vec<TargetFold> {
        let shift = |r: &Range<usize>| r.start + lookback..r.end + lookback;
        self.folds
            .iter()
            .map(|f| TargetFold {
                train: shift(&f.train),
                test: shift(&f.test),
            })
            .collect()
    }

    /// Plan over the samples of a series with `n_deltas` deltas, with
    /// `min_train = ceil(fraction * samples)`.
    pub fn for_series(
        n_deltas: usize,
        lookback: usize,
        horizon: usize,
        min_train_fraction: f64,
    ) -> Result<Self, EvalError> {
        let n = n_deltas.saturating_sub(lookback);
        let min_train = ((min_train_fraction * n as f64).ceil() as usize).max(1);
        make_walk_forward(n, horizon, min_train)
    }
}
