use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{f1_score, mse};
use super::walk_forward::TargetFold;
use super::EvalError;
use crate::features::{direction_label, DeltaSeries};
use crate::models::{
    derive_seed, hyperparams_label, ClassifierFamily, ClassifierSpec, DirectionPrediction, FittedClassifier,
    FittedRegressor, Hyperparams, RegressorFamily, RegressorSpec, TargetKind,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    Minimize,
    Maximize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub hyperparameters: Hyperparams,
    pub fold_scores: Vec<f64>,
    pub mean: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct GridResult<T> {
    pub best_index: usize,
    pub candidates: Vec<CandidateScore>,
    pub best_payload: T,
}

/// Evaluate every candidate and pick the best mean fold score; the first
/// candidate wins ties. `eval` returns per-fold scores and a payload kept
/// for the winner.
pub fn grid_search<T, F>(grid: &[Hyperparams], objective: Objective, eval: F) -> Result<GridResult<T>, EvalError>
where
    T: Send,
    F: Fn(&Hyperparams) -> Result<(Vec<f64>, T), String> + Sync,
{
    if grid.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    let outcomes: Vec<Result<(Vec<f64>, T), String>> = grid.par_iter().map(&eval).collect();
    let mut candidates = Vec::with_capacity(grid.len());
    let mut payloads = Vec::with_capacity(grid.len());
    for (h, out) in grid.iter().zip(outcomes) {
        match out {
            Ok((scores, payload)) if !scores.is_empty() && scores.iter().all(|s| s.is_finite()) => {
                let mean = scores.iter().sum::<f64>() / scores.len() as f64;
                candidates.push(CandidateScore {
                    hyperparameters: h.clone(),
                    fold_scores: scores,
                    mean: Some(mean),
                    error: None,
                });
                payloads.push(Some(payload));
            }
            Ok((scores, _)) => {
                candidates.push(CandidateScore {
                    hyperparameters: h.clone(),
                    fold_scores: scores,
                    mean: None,
                    error: Some("no finite fold scores".into()),
                });
                payloads.push(None);
            }
            Err(e) => {
                candidates.push(CandidateScore {
                    hyperparameters: h.clone(),
                    fold_scores: Vec::new(),
                    mean: None,
                    error: Some(e),
                });
                payloads.push(None);
            }
        }
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let Some(m) = c.mean else { continue };
        let better = match (best, objective) {
            (None, _) => true,
            (Some((_, b)), Objective::Minimize) => m < b,
            (Some((_, b)), Objective::Maximize) => m > b,
        };
        if better {
            best = Some((i, m));
        }
    }
    let (best_index, _) = best.ok_or(EvalError::AllCandidatesFailed(grid.len()))?;
    let best_payload = payloads.swap_remove(best_index).expect("winner has a payload");
    Ok(GridResult {
        best_index,
        candidates,
        best_payload,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Failed { reason: String },
}

impl CellStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, CellStatus::Ok)
    }
}

/// Out-of-fold results of the best candidate for one regressor family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressorTuning {
    pub best: Option<Hyperparams>,
    pub candidates: Vec<CandidateScore>,
    pub targets: Vec<usize>,
    pub predictions: Vec<f64>,
    pub fold_sizes: Vec<usize>,
    /// Best candidate refit on the last fold's training slice.
    pub model: Option<FittedRegressor>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierTuning {
    pub best: Option<Hyperparams>,
    pub candidates: Vec<CandidateScore>,
    pub targets: Vec<usize>,
    pub predictions: Vec<DirectionPrediction>,
    pub fold_sizes: Vec<usize>,
    pub model: Option<FittedClassifier>,
}

fn seed_for(seed: u64, series: &DeltaSeries, family: &str, sentiment: bool, h: &Hyperparams) -> u64 {
    derive_seed(
        seed,
        &format!("{}/{family}/{sentiment}/{}", series.etf.symbol, hyperparams_label(h)),
    )
}

/// Grid search one regressor family over `folds`, selecting by mean fold
/// MSE of the regression target.
#[allow(clippy::too_many_arguments)]
pub fn tune_regressor(
    series: &DeltaSeries,
    family: RegressorFamily,
    uses_sentiment: bool,
    target: TargetKind,
    grid: &[Hyperparams],
    folds: &[TargetFold],
    lookback: usize,
    seed: u64,
) -> (CellStatus, RegressorTuning) {
    type Payload = (Vec<f64>, Option<FittedRegressor>);
    let eval = |h: &Hyperparams| -> Result<(Vec<f64>, Payload), String> {
        let spec = RegressorSpec::new(family, h.clone(), uses_sentiment)
            .map_err(|e| e.to_string())?
            .with_target(target);
        let s = seed_for(seed, series, family.name(), uses_sentiment, h);
        let mut scores = Vec::with_capacity(folds.len());
        let mut preds = Vec::new();
        let mut last = None;
        for f in folds {
            let model = FittedRegressor::fit(&spec, series, lookback, f.train.clone(), s).map_err(|e| e.to_string())?;
            let t: Vec<usize> = f.test.clone().collect();
            let p = model.predict(series, &t).map_err(|e| e.to_string())?;
            let actual: Vec<f64> = t
                .iter()
                .map(|&i| match target {
                    TargetKind::Signed => series.deltas[i],
                    TargetKind::Absolute => series.deltas[i].abs(),
                })
                .collect();
            scores.push(mse(&p, &actual).map_err(|e| e.to_string())?);
            preds.extend(p);
            last = Some(model);
        }
        Ok((scores, (preds, last)))
    };
    let targets: Vec<usize> = folds.iter().flat_map(|f| f.test.clone()).collect();
    let fold_sizes = folds.iter().map(|f| f.test.len()).collect();
    match grid_search(grid, Objective::Minimize, eval) {
        Ok(r) => {
            let (predictions, model) = r.best_payload;
            (
                CellStatus::Ok,
                RegressorTuning {
                    best: Some(r.candidates[r.best_index].hyperparameters.clone()),
                    candidates: r.candidates,
                    targets,
                    predictions,
                    fold_sizes,
                    model,
                },
            )
        }
        Err(e) => (
            CellStatus::Failed { reason: e.to_string() },
            RegressorTuning {
                best: None,
                candidates: Vec::new(),
                targets,
                predictions: Vec::new(),
                fold_sizes,
                model: None,
            },
        ),
    }
}

/// Grid search one classifier family, selecting by mean fold F1.
pub fn tune_classifier(
    series: &DeltaSeries,
    family: ClassifierFamily,
    uses_sentiment: bool,
    grid: &[Hyperparams],
    folds: &[TargetFold],
    lookback: usize,
    seed: u64,
) -> (CellStatus, ClassifierTuning) {
    type Payload = (Vec<DirectionPrediction>, Option<FittedClassifier>);
    let eval = |h: &Hyperparams| -> Result<(Vec<f64>, Payload), String> {
        let spec = ClassifierSpec::new(family, h.clone(), uses_sentiment).map_err(|e| e.to_string())?;
        let s = seed_for(seed, series, family.name(), uses_sentiment, h);
        let mut scores = Vec::with_capacity(folds.len());
        let mut preds = Vec::new();
        let mut last = None;
        for f in folds {
            let model =
                FittedClassifier::fit(&spec, series, lookback, f.train.clone(), s).map_err(|e| e.to_string())?;
            let t: Vec<usize> = f.test.clone().collect();
            let p = model.predict(series, &t).map_err(|e| e.to_string())?;
            let labels: Vec<u8> = p.iter().map(|d| d.label).collect();
            let actual: Vec<u8> = t.iter().map(|&i| direction_label(series.deltas[i])).collect();
            scores.push(f1_score(&labels, &actual).map_err(|e| e.to_string())?);
            preds.extend(p);
            last = Some(model);
        }
        Ok((scores, (preds, last)))
    };
    let targets: Vec<usize> = folds.iter().flat_map(|f| f.test.clone()).collect();
    let fold_sizes = folds.iter().map(|f| f.test.len()).collect();
    match grid_search(grid, Objective::Maximize, eval) {
        Ok(r) => {
            let (predictions, model) = r.best_payload;
            (
                CellStatus::Ok,
                ClassifierTuning {
                    best: Some(r.candidates[r.best_index].hyperparameters.clone()),
                    candidates: r.candidates,
                    targets,
                    predictions,
                    fold_sizes,
                    model,
                },
            )
        }
        Err(e) => (
            CellStatus::Failed { reason: e.to_string() },
            ClassifierTuning {
                best: None,
                candidates: Vec::new(),
                targets,
                predictions: Vec::new(),
                fold_sizes,
                model: None,
            },
        ),
    }
}
