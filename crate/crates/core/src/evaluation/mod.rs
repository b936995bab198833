//! Walk-forward validation, grid search, metrics, two-stage combination and
//! the sentiment ablation.

mod ablation;
mod metrics;
mod search;
mod summary;
mod walk_forward;

use thiserror::Error;

pub use ablation::{
    assemble_combo, classifier_outcome, combo_grid, combos_from, regressor_outcome, run_ablation, AblationConfig,
    AblationReport, ClassifierOutcome, ComboResult, PredictionRow, RegressorOutcome, Roster, Variant,
};
pub use metrics::{accuracy, combine, compute_metrics, f1_score, mae, mse, MetricKind, MetricSet, ScalarMetrics};
pub use search::{
    grid_search, tune_classifier, tune_regressor, CandidateScore, CellStatus, ClassifierTuning, GridResult, Objective,
    RegressorTuning,
};
pub use summary::{
    read_prediction_csv, render_summary_csv, render_summary_text, summarize, write_prediction_csv, Mark, SummaryCell,
    SummaryRow, SummaryTable,
};
pub use walk_forward::{make_walk_forward, Fold, TargetFold, WalkForwardPlan};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("insufficient data: {n} samples cannot hold min_train {min_train} plus horizon {horizon}")]
    InsufficientData { n: usize, min_train: usize, horizon: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("empty grid")]
    EmptyGrid,
    #[error("all {0} candidates failed")]
    AllCandidatesFailed(usize),
    #[error("incomplete run: {0}")]
    IncompleteRun(String),
    #[error("csv: {0}")]
    Csv(String),
}
