//! Up / down-or-neutral direction classifiers.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::forest::RandomForest;
use super::gbt::GradientBoosting;
use super::logreg::LogisticRegression;
use super::lstm::{Loss, Lstm};
use super::regression::{fit_sequence_scaler, fit_tabular_scaler, lstm_config, sequences, tabular};
use super::svm::{fit_svc, scale_gamma, SvmModel};
use super::tree::{Criterion, Tree, TreeParams};
use super::{cartesian, get_f64, get_usize, validate_train, DataFingerprint, Hyperparams, ModelError, Param};
use crate::features::{direction_label, DeltaSeries, Standardizer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassifierFamily {
    #[serde(rename = "ALL_UP")]
    AllUp,
    #[serde(rename = "ALL_DOWN")]
    AllDown,
    #[serde(rename = "LOGREG")]
    Logreg,
    #[serde(rename = "SVM_RBF")]
    SvmRbf,
    #[serde(rename = "DTREE")]
    Dtree,
    #[serde(rename = "RFOREST")]
    Rforest,
    #[serde(rename = "GBTCLF")]
    Gbtclf,
    #[serde(rename = "LSTMCLF")]
    Lstmclf,
}

impl ClassifierFamily {
    pub const ALL: [ClassifierFamily; 8] = [
        ClassifierFamily::AllUp,
        ClassifierFamily::AllDown,
        ClassifierFamily::Logreg,
        ClassifierFamily::SvmRbf,
        ClassifierFamily::Dtree,
        ClassifierFamily::Rforest,
        ClassifierFamily::Gbtclf,
        ClassifierFamily::Lstmclf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierFamily::AllUp => "ALL_UP",
            ClassifierFamily::AllDown => "ALL_DOWN",
            ClassifierFamily::Logreg => "LOGREG",
            ClassifierFamily::SvmRbf => "SVM_RBF",
            ClassifierFamily::Dtree => "DTREE",
            ClassifierFamily::Rforest => "RFOREST",
            ClassifierFamily::Gbtclf => "GBTCLF",
            ClassifierFamily::Lstmclf => "LSTMCLF",
        }
    }

    pub fn is_naive(self) -> bool {
        matches!(self, ClassifierFamily::AllUp | ClassifierFamily::AllDown)
    }
}

impl fmt::Display for ClassifierFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ClassifierFamily::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown classifier family {s:?}"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub family: ClassifierFamily,
    pub hyperparameters: Hyperparams,
    pub uses_sentiment: bool,
}

impl ClassifierSpec {
    pub fn new(
        family: ClassifierFamily,
        hyperparameters: Hyperparams,
        uses_sentiment: bool,
    ) -> Result<Self, ModelError> {
        if family.is_naive() && !hyperparameters.is_empty() {
            return Err(ModelError::InvalidHyperparameter(format!(
                "{family} takes no hyperparameters"
            )));
        }
        Ok(ClassifierSpec {
            family,
            hyperparameters,
            uses_sentiment,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionPrediction {
    /// 1 = up, 0 = down or neutral.
    pub label: u8,
    pub multiplier: i8,
    pub probability: Option<f64>,
}

impl DirectionPrediction {
    pub fn from_label(label: u8) -> Self {
        DirectionPrediction {
            label,
            multiplier: if label == 1 { 1 } else { -1 },
            probability: None,
        }
    }

    /// Label 1 iff `p >= 0.5`.
    pub fn from_probability(p: f64) -> Self {
        DirectionPrediction {
            probability: Some(p),
            ..Self::from_label(u8::from(p >= 0.5))
        }
    }
}

pub fn clf_grid(family: ClassifierFamily) -> Vec<Hyperparams> {
    let ints = |v: &[i64]| v.iter().map(|&x| Param::Int(x)).collect::<Vec<_>>();
    let floats = |v: &[f64]| v.iter().map(|&x| Param::Float(x)).collect::<Vec<_>>();
    match family {
        ClassifierFamily::AllUp | ClassifierFamily::AllDown => vec![Hyperparams::new()],
        ClassifierFamily::Logreg => cartesian(&[("C", floats(&[0.1, 1.0, 10.0]))]),
        ClassifierFamily::SvmRbf => cartesian(&[
            ("C", floats(&[0.1, 1.0, 10.0])),
            ("gamma", vec!["scale".into(), Param::Float(0.1)]),
        ]),
        ClassifierFamily::Dtree => cartesian(&[("max_depth", ints(&[2, 3, 5]))]),
        ClassifierFamily::Rforest => cartesian(&[("n_estimators", ints(&[100, 200])), ("max_depth", ints(&[3, 5]))]),
        ClassifierFamily::Gbtclf => cartesian(&[
            ("max_depth", ints(&[2, 3])),
            ("learning_rate", floats(&[0.05, 0.1])),
            ("n_estimators", ints(&[100, 200])),
        ]),
        ClassifierFamily::Lstmclf => cartesian(&[("layers", ints(&[1, 2])), ("hidden", ints(&[16, 32]))]),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierState {
    Constant {
        label: u8,
    },
    Logreg {
        scaler: Standardizer,
        model: LogisticRegression,
    },
    Svm {
        scaler: Standardizer,
        model: SvmModel,
    },
    Tree {
        scaler: Standardizer,
        model: Tree,
    },
    Forest {
        scaler: Standardizer,
        model: RandomForest,
    },
    Gbt {
        scaler: Standardizer,
        model: GradientBoosting,
    },
    Lstm {
        scaler: Standardizer,
        model: Lstm,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedClassifier {
    pub spec: ClassifierSpec,
    pub lookback: usize,
    pub seed: u64,
    pub fingerprint: DataFingerprint,
    pub state: ClassifierState,
}

fn svm_gamma(h: &Hyperparams, x: &[f64], n_cols: usize) -> Result<f64, ModelError> {
    match h.get("gamma") {
        None => Ok(scale_gamma(x, n_cols)),
        Some(Param::Text(t)) if t == "scale" => Ok(scale_gamma(x, n_cols)),
        Some(_) => get_f64(h, "gamma", 0.1),
    }
}

impl FittedClassifier {
    pub fn fit(
        spec: &ClassifierSpec,
        series: &DeltaSeries,
        lookback: usize,
        train: Range<usize>,
        seed: u64,
    ) -> Result<Self, ModelError> {
        validate_train(series, lookback, &train)?;
        let h = &spec.hyperparameters;
        let sent = spec.uses_sentiment;
        let targets: Vec<usize> = train.clone().collect();
        let labels: Vec<u8> = targets.iter().map(|&t| direction_label(series.deltas[t])).collect();
        log::debug!(
            "{} on {}: {} up / {} down",
            spec.family,
            super::regression::scope(&train),
            labels.iter().filter(|&&l| l == 1).count(),
            labels.iter().filter(|&&l| l == 0).count()
        );
        let tab = || -> Result<(Standardizer, Vec<f64>, usize), ModelError> {
            let scaler = fit_tabular_scaler(series, lookback, sent, &train)?;
            let (x, n_cols) = tabular(series, lookback, sent, &targets, &scaler)?;
            Ok((scaler, x, n_cols))
        };
        let state = match spec.family {
            ClassifierFamily::AllUp => ClassifierState::Constant { label: 1 },
            ClassifierFamily::AllDown => ClassifierState::Constant { label: 0 },
            ClassifierFamily::Logreg => {
                let (scaler, x, n_cols) = tab()?;
                let model = LogisticRegression::fit(&x, n_cols, &labels, get_f64(h, "C", 1.0)?)?;
                ClassifierState::Logreg { scaler, model }
            }
            ClassifierFamily::SvmRbf => {
                let (scaler, x, n_cols) = tab()?;
                let gamma = svm_gamma(h, &x, n_cols)?;
                let model = fit_svc(&x, n_cols, &labels, get_f64(h, "C", 1.0)?, gamma)?;
                ClassifierState::Svm { scaler, model }
            }
            ClassifierFamily::Dtree => {
                let (scaler, x, n_cols) = tab()?;
                let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
                let model = Tree::fit(
                    &x,
                    n_cols,
                    &y,
                    TreeParams::with_depth(get_usize(h, "max_depth", 3)?),
                    Criterion::Gini,
                );
                ClassifierState::Tree { scaler, model }
            }
            ClassifierFamily::Rforest => {
                let (scaler, x, n_cols) = tab()?;
                let model = RandomForest::fit(
                    &x,
                    n_cols,
                    &labels,
                    get_usize(h, "n_estimators", 100)?,
                    get_usize(h, "max_depth", 3)?,
                    seed,
                );
                ClassifierState::Forest { scaler, model }
            }
            ClassifierFamily::Gbtclf => {
                let (scaler, x, n_cols) = tab()?;
                let model = GradientBoosting::fit_classifier(
                    &x,
                    n_cols,
                    &labels,
                    get_usize(h, "n_estimators", 100)?,
                    get_usize(h, "max_depth", 3)?,
                    get_f64(h, "learning_rate", 0.1)?,
                )?;
                ClassifierState::Gbt { scaler, model }
            }
            ClassifierFamily::Lstmclf => {
                let scaler = fit_sequence_scaler(series, lookback, sent, &train)?;
                let (w, n_in) = sequences(series, lookback, sent, &targets, &scaler)?;
                let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
                let model = Lstm::fit(&w, &y, n_in, Loss::Logistic, &lstm_config(h)?, seed)?;
                ClassifierState::Lstm { scaler, model }
            }
        };
        Ok(FittedClassifier {
            spec: spec.clone(),
            lookback,
            seed,
            fingerprint: DataFingerprint::of(series, &train),
            state,
        })
    }

    pub fn predict(&self, series: &DeltaSeries, targets: &[usize]) -> Result<Vec<DirectionPrediction>, ModelError> {
        let l = self.lookback;
        let sent = self.spec.uses_sentiment;
        if let Some(&t) = targets.iter().find(|&&t| t >= series.len()) {
            return Err(ModelError::ShapeMismatch {
                expected: series.len(),
                got: t + 1,
            });
        }
        let tab = |scaler: &Standardizer| tabular(series, l, sent, targets, scaler);
        let probs =
            |scaler: &Standardizer, f: &dyn Fn(&[f64]) -> f64| -> Result<Vec<DirectionPrediction>, ModelError> {
                let (x, n_cols) = tab(scaler)?;
                Ok(x.chunks(n_cols)
                    .map(|r| DirectionPrediction::from_probability(f(r)))
                    .collect())
            };
        let out = match &self.state {
            ClassifierState::Constant { label } => {
                vec![DirectionPrediction::from_label(*label); targets.len()]
            }
            ClassifierState::Logreg { scaler, model } => probs(scaler, &|r| model.probability(r))?,
            ClassifierState::Svm { scaler, model } => {
                let (x, n_cols) = tab(scaler)?;
                x.chunks(n_cols)
                    .map(|r| DirectionPrediction::from_label(u8::from(model.decision(r) >= 0.0)))
                    .collect()
            }
            ClassifierState::Tree { scaler, model } => probs(scaler, &|r| model.predict(r))?,
            ClassifierState::Forest { scaler, model } => probs(scaler, &|r| model.probability(r))?,
            ClassifierState::Gbt { scaler, model } => probs(scaler, &|r| model.probability(r))?,
            ClassifierState::Lstm { scaler, model } => {
                let (w, _) = sequences(series, l, sent, targets, scaler)?;
                w.iter()
                    .map(|win| DirectionPrediction::from_probability(super::sigmoid(model.output(win))))
                    .collect()
            }
        };
        if out.iter().any(|p| p.probability.is_some_and(|v| !v.is_finite())) {
            return Err(ModelError::NonConvergence(format!(
                "{} produced non-finite output",
                self.spec.family
            )));
        }
        Ok(out)
    }
}
