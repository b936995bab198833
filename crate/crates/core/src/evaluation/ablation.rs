use std::collections::BTreeMap;
use std::fmt;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{accuracy, combine, f1_score, mae, mse, MetricSet};
use super::search::{tune_classifier, tune_regressor, CellStatus, ClassifierTuning, RegressorTuning};
use super::summary::{summarize, SummaryTable};
use super::walk_forward::{TargetFold, WalkForwardPlan};
use super::EvalError;
use crate::features::{direction_label, DeltaSeries};
use crate::models::{
    clf_grid, grid, ClassifierFamily, ClassifierSpec, Hyperparams, RegressorFamily, RegressorSpec, TargetKind,
    DEFAULT_SEED,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    PriceOnly,
    WithSentiment,
}

impl Variant {
    pub const BOTH: [Variant; 2] = [Variant::PriceOnly, Variant::WithSentiment];

    pub fn name(self) -> &'static str {
        match self {
            Variant::PriceOnly => "price_only",
            Variant::WithSentiment => "with_sentiment",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    pub lookback: usize,
    pub horizon: usize,
    pub min_train_fraction: f64,
    pub seed: u64,
    pub target: TargetKind,
    /// Whether the with-sentiment variant feeds sentiment to the regressor.
    pub sentiment_in_regression: bool,
    /// Whether the with-sentiment variant feeds sentiment to the classifier.
    pub sentiment_in_classification: bool,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig {
            lookback: 5,
            horizon: 20,
            min_train_fraction: 0.6,
            seed: DEFAULT_SEED,
            target: TargetKind::Signed,
            sentiment_in_regression: true,
            sentiment_in_classification: true,
        }
    }
}

/// Model families to evaluate and optional grid overrides keyed by family
/// name.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Roster {
    pub regressors: Vec<RegressorFamily>,
    pub classifiers: Vec<ClassifierFamily>,
    pub grids: BTreeMap<String, Vec<Hyperparams>>,
}

impl Roster {
    pub fn full() -> Self {
        Roster {
            regressors: vec![
                RegressorFamily::Ma5,
                RegressorFamily::Arima,
                RegressorFamily::Svr,
                RegressorFamily::Gbtreg,
                RegressorFamily::Lstmreg,
            ],
            classifiers: ClassifierFamily::ALL.to_vec(),
            grids: BTreeMap::new(),
        }
    }

    /// The family actually fit for a roster row under `variant`, and
    /// whether it sees sentiment. `None` means the cell does not exist.
    pub fn regressor_cell(
        row: RegressorFamily,
        variant: Variant,
        cfg: &AblationConfig,
    ) -> Option<(RegressorFamily, bool)> {
        let with = variant == Variant::WithSentiment && cfg.sentiment_in_regression;
        match row {
            RegressorFamily::Ma5 => (variant == Variant::PriceOnly).then_some((row, false)),
            RegressorFamily::Arima | RegressorFamily::Sarimax => Some(if with {
                (RegressorFamily::Sarimax, true)
            } else {
                (RegressorFamily::Arima, false)
            }),
            _ => Some((row, with)),
        }
    }

    pub fn classifier_cell(
        family: ClassifierFamily,
        variant: Variant,
        cfg: &AblationConfig,
    ) -> (ClassifierFamily, bool) {
        (
            family,
            variant == Variant::WithSentiment && cfg.sentiment_in_classification,
        )
    }

    pub fn regressor_grid(&self, family: RegressorFamily, row: RegressorFamily) -> Vec<Hyperparams> {
        self.grids
            .get(family.name())
            .or_else(|| self.grids.get(row.name()))
            .cloned()
            .unwrap_or_else(|| grid(family))
    }

    pub fn classifier_grid(&self, family: ClassifierFamily) -> Vec<Hyperparams> {
        self.grids
            .get(family.name())
            .cloned()
            .unwrap_or_else(|| clf_grid(family))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressorOutcome {
    pub etf: String,
    /// Roster row the cell belongs to.
    pub row: RegressorFamily,
    pub family: RegressorFamily,
    pub variant: Variant,
    pub uses_sentiment: bool,
    pub target: TargetKind,
    pub status: CellStatus,
    pub tuning: RegressorTuning,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierOutcome {
    pub etf: String,
    pub family: ClassifierFamily,
    pub variant: Variant,
    pub uses_sentiment: bool,
    pub status: CellStatus,
    pub tuning: ClassifierTuning,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub etf: String,
    pub date: NaiveDate,
    pub actual_delta: f64,
    pub predicted_magnitude: f64,
    /// 1 = up, 0 = down or neutral.
    pub predicted_direction: u8,
    pub combined_delta: f64,
    pub actual_close: f64,
    pub predicted_close: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComboResult {
    pub etf: String,
    pub classifier: ClassifierFamily,
    pub regressor: RegressorFamily,
    pub variant: Variant,
    pub classifier_spec: Option<ClassifierSpec>,
    pub regressor_spec: Option<RegressorSpec>,
    #[serde(flatten)]
    pub status: CellStatus,
    pub metrics: Option<MetricSet>,
    pub per_fold: Vec<MetricSet>,
    #[serde(skip)]
    pub predictions: Vec<PredictionRow>,
}

impl ComboResult {
    /// File-system friendly label, e.g. `LOGREG__ARIMA__with_sentiment`.
    pub fn label(&self) -> String {
        format!("{}__{}__{}", self.classifier, self.regressor, self.variant)
    }
}

fn failed_combo(etf: &str, c: ClassifierFamily, r: RegressorFamily, v: Variant, reason: String) -> ComboResult {
    ComboResult {
        etf: etf.into(),
        classifier: c,
        regressor: r,
        variant: v,
        classifier_spec: None,
        regressor_spec: None,
        status: CellStatus::Failed { reason },
        metrics: None,
        per_fold: Vec::new(),
        predictions: Vec::new(),
    }
}

fn block_metrics(rows: &[PredictionRow]) -> Result<MetricSet, EvalError> {
    let col = |f: fn(&PredictionRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let (pc, ac) = (col(|r| r.predicted_close), col(|r| r.actual_close));
    let (pd, ad) = (col(|r| r.combined_delta), col(|r| r.actual_delta));
    let pl: Vec<u8> = rows.iter().map(|r| r.predicted_direction).collect();
    let al: Vec<u8> = rows.iter().map(|r| direction_label(r.actual_delta)).collect();
    Ok(MetricSet {
        mse: mse(&pc, &ac)?,
        mae: mae(&pc, &ac)?,
        delta_mse: mse(&pd, &ad)?,
        delta_mae: mae(&pd, &ad)?,
        accuracy: accuracy(&pl, &al)?,
        f1: f1_score(&pl, &al)?,
        n: rows.len(),
    })
}

/// Combine a tuned regressor and classifier for the same ETF and variant.
///
/// Within each test block the predicted close path starts from the last
/// close before the block and accumulates combined deltas.
pub fn assemble_combo(series: &DeltaSeries, reg: &RegressorOutcome, clf: &ClassifierOutcome) -> ComboResult {
    let etf = series.etf.symbol.as_str();
    let fail = |reason: String| failed_combo(etf, clf.family, reg.row, reg.variant, reason);
    if let CellStatus::Failed { reason } = &reg.status {
        return fail(format!("regressor {} failed: {reason}", reg.family));
    }
    if let CellStatus::Failed { reason } = &clf.status {
        return fail(format!("classifier {} failed: {reason}", clf.family));
    }
    let (rt, ct) = (&reg.tuning, &clf.tuning);
    if rt.targets != ct.targets || rt.fold_sizes != ct.fold_sizes {
        return fail("regressor and classifier were evaluated on different folds".into());
    }
    let combined = match combine(&rt.predictions, &ct.predictions) {
        Ok(c) => c,
        Err(e) => return fail(e.to_string()),
    };
    let mut rows = Vec::with_capacity(combined.len());
    let mut per_fold = Vec::with_capacity(rt.fold_sizes.len());
    let mut start = 0;
    for &size in &rt.fold_sizes {
        let block = start..start + size;
        let mut price = rt.targets.get(block.start).map_or(0.0, |&t| series.close_before(t));
        for k in block.clone() {
            let t = rt.targets[k];
            price += combined[k];
            rows.push(PredictionRow {
                etf: etf.to_string(),
                date: series.dates[t],
                actual_delta: series.deltas[t],
                predicted_magnitude: rt.predictions[k].abs(),
                predicted_direction: ct.predictions[k].label,
                combined_delta: combined[k],
                actual_close: series.close_at(t),
                predicted_close: price,
            });
        }
        if size > 0 {
            match block_metrics(&rows[block]) {
                Ok(m) => per_fold.push(m),
                Err(e) => return fail(e.to_string()),
            }
        }
        start += size;
    }
    let metrics = match block_metrics(&rows) {
        Ok(m) => m,
        Err(e) => return fail(e.to_string()),
    };
    ComboResult {
        etf: etf.into(),
        classifier: clf.family,
        regressor: reg.row,
        variant: reg.variant,
        classifier_spec: ct.best.clone().map(|h| ClassifierSpec {
            family: clf.family,
            hyperparameters: h,
            uses_sentiment: clf.uses_sentiment,
        }),
        regressor_spec: rt.best.clone().map(|h| RegressorSpec {
            family: reg.family,
            hyperparameters: h,
            uses_sentiment: reg.uses_sentiment,
            target: reg.target,
        }),
        status: CellStatus::Ok,
        metrics: Some(metrics),
        per_fold,
        predictions: rows,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationReport {
    pub regressors: Vec<RegressorOutcome>,
    pub classifiers: Vec<ClassifierOutcome>,
    pub combos: Vec<ComboResult>,
    pub summary: SummaryTable,
}

fn folds_for(series: &DeltaSeries, cfg: &AblationConfig) -> Result<Vec<TargetFold>, EvalError> {
    Ok(
        WalkForwardPlan::for_series(series.len(), cfg.lookback, cfg.horizon, cfg.min_train_fraction)?
            .target_folds(cfg.lookback),
    )
}

pub fn regressor_outcome(
    series: &DeltaSeries,
    roster: &Roster,
    row: RegressorFamily,
    variant: Variant,
    cfg: &AblationConfig,
) -> Option<RegressorOutcome> {
    let (family, sent) = Roster::regressor_cell(row, variant, cfg)?;
    let etf = series.etf.symbol.to_string();
    let (status, tuning) = match folds_for(series, cfg) {
        Ok(folds) => tune_regressor(
            series,
            family,
            sent,
            cfg.target,
            &roster.regressor_grid(family, row),
            &folds,
            cfg.lookback,
            cfg.seed,
        ),
        Err(e) => (
            CellStatus::Failed { reason: e.to_string() },
            RegressorTuning {
                best: None,
                candidates: Vec::new(),
                targets: Vec::new(),
                predictions: Vec::new(),
                fold_sizes: Vec::new(),
                model: None,
            },
        ),
    };
    if let CellStatus::Failed { reason } = &status {
        log::warn!("{etf} {family} {variant}: {reason}");
    }
    Some(RegressorOutcome {
        etf,
        row,
        family,
        variant,
        uses_sentiment: sent,
        target: cfg.target,
        status,
        tuning,
    })
}

pub fn classifier_outcome(
    series: &DeltaSeries,
    roster: &Roster,
    family: ClassifierFamily,
    variant: Variant,
    cfg: &AblationConfig,
) -> ClassifierOutcome {
    let (family, sent) = Roster::classifier_cell(family, variant, cfg);
    let etf = series.etf.symbol.to_string();
    let (status, tuning) = match folds_for(series, cfg) {
        Ok(folds) => tune_classifier(
            series,
            family,
            sent,
            &roster.classifier_grid(family),
            &folds,
            cfg.lookback,
            cfg.seed,
        ),
        Err(e) => (
            CellStatus::Failed { reason: e.to_string() },
            ClassifierTuning {
                best: None,
                candidates: Vec::new(),
                targets: Vec::new(),
                predictions: Vec::new(),
                fold_sizes: Vec::new(),
                model: None,
            },
        ),
    };
    if let CellStatus::Failed { reason } = &status {
        log::warn!("{etf} {family} {variant}: {reason}");
    }
    ClassifierOutcome {
        etf,
        family,
        variant,
        uses_sentiment: sent,
        status,
        tuning,
    }
}

/// Every (classifier × regressor × variant) cell, in roster order within
/// each ETF.
pub fn combo_grid(roster: &Roster) -> Vec<(ClassifierFamily, RegressorFamily, Variant)> {
    let cfg = AblationConfig::default();
    let mut out = Vec::new();
    for &c in &roster.classifiers {
        for &r in &roster.regressors {
            for v in Variant::BOTH {
                if Roster::regressor_cell(r, v, &cfg).is_some() {
                    out.push((c, r, v));
                }
            }
        }
    }
    out
}

/// Tune every roster family on every series, then evaluate all combos.
pub fn run_ablation(series: &[DeltaSeries], roster: &Roster, cfg: &AblationConfig) -> AblationReport {
    let reg_jobs: Vec<(usize, RegressorFamily, Variant)> = (0..series.len())
        .flat_map(|i| {
            roster
                .regressors
                .iter()
                .flat_map(move |&r| Variant::BOTH.map(|v| (i, r, v)))
        })
        .collect();
    let regressors: Vec<RegressorOutcome> = reg_jobs
        .par_iter()
        .filter_map(|&(i, r, v)| regressor_outcome(&series[i], roster, r, v, cfg))
        .collect();
    let clf_jobs: Vec<(usize, ClassifierFamily, Variant)> = (0..series.len())
        .flat_map(|i| {
            roster
                .classifiers
                .iter()
                .flat_map(move |&c| Variant::BOTH.map(|v| (i, c, v)))
        })
        .collect();
    let classifiers: Vec<ClassifierOutcome> = clf_jobs
        .par_iter()
        .map(|&(i, c, v)| classifier_outcome(&series[i], roster, c, v, cfg))
        .collect();
    let combos = combos_from(series, roster, &regressors, &classifiers);
    let summary = summarize(&combos);
    AblationReport {
        regressors,
        classifiers,
        combos,
        summary,
    }
}

pub fn combos_from(
    series: &[DeltaSeries],
    roster: &Roster,
    regressors: &[RegressorOutcome],
    classifiers: &[ClassifierOutcome],
) -> Vec<ComboResult> {
    let mut combos = Vec::new();
    for s in series {
        let etf = s.etf.symbol.as_str();
        for (c, r, v) in combo_grid(roster) {
            let reg = regressors.iter().find(|o| o.etf == etf && o.row == r && o.variant == v);
            let clf = classifiers
                .iter()
                .find(|o| o.etf == etf && o.family == c && o.variant == v);
            combos.push(match (reg, clf) {
                (Some(reg), Some(clf)) => assemble_combo(s, reg, clf),
                _ => failed_combo(etf, c, r, v, "stage result missing".into()),
            });
        }
    }
    combos
}
