//! Next-step delta regressors.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::arima::{ArimaModel, ArimaOrder};
use super::gbt::GradientBoosting;
use super::lstm::{Loss, Lstm, LstmConfig, Optimizer};
use super::ma::moving_average_forecast;
use super::svm::{fit_svr, scale_gamma, SvmModel};
use super::{cartesian, get_f64, get_text, get_usize, validate_train, DataFingerprint, Hyperparams, ModelError, Param};
use crate::features::{lagged_for, windows_for, DeltaSeries, Standardizer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RegressorFamily {
    #[serde(rename = "MA5")]
    Ma5,
    #[serde(rename = "ARIMA")]
    Arima,
    #[serde(rename = "SARIMAX")]
    Sarimax,
    #[serde(rename = "SVR")]
    Svr,
    #[serde(rename = "GBTREG")]
    Gbtreg,
    #[serde(rename = "LSTMREG")]
    Lstmreg,
}

impl RegressorFamily {
    pub const ALL: [RegressorFamily; 6] = [
        RegressorFamily::Ma5,
        RegressorFamily::Arima,
        RegressorFamily::Sarimax,
        RegressorFamily::Svr,
        RegressorFamily::Gbtreg,
        RegressorFamily::Lstmreg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RegressorFamily::Ma5 => "MA5",
            RegressorFamily::Arima => "ARIMA",
            RegressorFamily::Sarimax => "SARIMAX",
            RegressorFamily::Svr => "SVR",
            RegressorFamily::Gbtreg => "GBTREG",
            RegressorFamily::Lstmreg => "LSTMREG",
        }
    }

    /// Whether the family consumes the sentiment channel at all.
    pub fn sentiment_allowed(self) -> bool {
        !matches!(self, RegressorFamily::Ma5 | RegressorFamily::Arima)
    }

    /// Whether the family can run without sentiment.
    pub fn price_only_allowed(self) -> bool {
        self != RegressorFamily::Sarimax
    }
}

impl fmt::Display for RegressorFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RegressorFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RegressorFamily::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown regressor family {s:?}"))
    }
}

/// What the regressor is trained to predict.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// The signed delta; magnitude is taken at combination time.
    #[default]
    Signed,
    /// `|delta|`.
    Absolute,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressorSpec {
    pub family: RegressorFamily,
    pub hyperparameters: Hyperparams,
    pub uses_sentiment: bool,
    #[serde(default)]
    pub target: TargetKind,
}

impl RegressorSpec {
    pub fn new(
        family: RegressorFamily,
        hyperparameters: Hyperparams,
        uses_sentiment: bool,
    ) -> Result<Self, ModelError> {
        if uses_sentiment && !family.sentiment_allowed() {
            return Err(ModelError::InvalidHyperparameter(format!(
                "{family} has no sentiment variant"
            )));
        }
        if !uses_sentiment && !family.price_only_allowed() {
            return Err(ModelError::InvalidHyperparameter(format!(
                "{family} requires the sentiment channel"
            )));
        }
        Ok(RegressorSpec {
            family,
            hyperparameters,
            uses_sentiment,
            target: TargetKind::Signed,
        })
    }

    pub fn with_target(mut self, target: TargetKind) -> Self {
        self.target = target;
        self
    }
}

/// Default hyperparameter grid of a family.
pub fn grid(family: RegressorFamily) -> Vec<Hyperparams> {
    let ints = |v: &[i64]| v.iter().map(|&x| Param::Int(x)).collect::<Vec<_>>();
    let floats = |v: &[f64]| v.iter().map(|&x| Param::Float(x)).collect::<Vec<_>>();
    match family {
        RegressorFamily::Ma5 => vec![Hyperparams::new()],
        RegressorFamily::Arima | RegressorFamily::Sarimax => {
            cartesian(&[("p", ints(&[0, 1, 2])), ("d", ints(&[0])), ("q", ints(&[0, 1, 2]))])
        }
        RegressorFamily::Svr => cartesian(&[
            ("kernel", vec!["rbf".into()]),
            ("C", floats(&[0.1, 1.0, 10.0])),
            ("epsilon", floats(&[0.01, 0.1])),
        ]),
        RegressorFamily::Gbtreg => cartesian(&[
            ("max_depth", ints(&[2, 3, 4])),
            ("learning_rate", floats(&[0.05, 0.1])),
            ("n_estimators", ints(&[100, 200])),
        ]),
        RegressorFamily::Lstmreg => cartesian(&[
            ("layers", ints(&[1, 2])),
            ("hidden", ints(&[16, 32])),
            ("optimizer", vec!["adam".into(), "sgd_momentum".into()]),
            ("epochs", ints(&[50])),
        ]),
    }
}

/// Lagged rows for `targets`, standardized with `scaler`.
pub(crate) fn tabular(
    series: &DeltaSeries,
    lookback: usize,
    sentiment: bool,
    targets: &[usize],
    scaler: &Standardizer,
) -> Result<(Vec<f64>, usize), ModelError> {
    let m = lagged_for(series, lookback, sentiment, targets)?;
    let x = scaler.transform(m.data())?;
    Ok((x, m.n_cols))
}

pub(crate) fn fit_tabular_scaler(
    series: &DeltaSeries,
    lookback: usize,
    sentiment: bool,
    train: &Range<usize>,
) -> Result<Standardizer, ModelError> {
    let targets: Vec<usize> = train.clone().collect();
    let m = lagged_for(series, lookback, sentiment, &targets)?;
    Ok(Standardizer::fit(m.data(), m.n_cols, scope(train))?)
}

/// Windows for `targets`, each step's channels standardized with `scaler`.
pub(crate) fn sequences(
    series: &DeltaSeries,
    lookback: usize,
    sentiment: bool,
    targets: &[usize],
    scaler: &Standardizer,
) -> Result<(Vec<Vec<f64>>, usize), ModelError> {
    let w = windows_for(series, lookback, sentiment, targets)?;
    let mut out = Vec::with_capacity(w.len());
    for i in 0..w.len() {
        out.push(scaler.transform(w.window(i))?);
    }
    Ok((out, w.n_features))
}

pub(crate) fn fit_sequence_scaler(
    series: &DeltaSeries,
    lookback: usize,
    sentiment: bool,
    train: &Range<usize>,
) -> Result<Standardizer, ModelError> {
    let targets: Vec<usize> = train.clone().collect();
    let w = windows_for(series, lookback, sentiment, &targets)?;
    let flat: Vec<f64> = (0..w.len()).flat_map(|i| w.window(i).to_vec()).collect();
    Ok(Standardizer::fit(&flat, w.n_features, scope(train))?)
}

pub(crate) fn scope(train: &Range<usize>) -> String {
    format!("targets[{}..{})", train.start, train.end)
}

pub(crate) fn lstm_config(h: &Hyperparams) -> Result<LstmConfig, ModelError> {
    let base = LstmConfig::default();
    Ok(LstmConfig {
        layers: get_usize(h, "layers", base.layers)?,
        hidden: get_usize(h, "hidden", base.hidden)?,
        optimizer: Optimizer::parse(get_text(h, "optimizer", "adam")?)?,
        epochs: get_usize(h, "epochs", base.epochs)?,
        batch_size: get_usize(h, "batch_size", base.batch_size)?,
        learning_rate: h
            .get("learning_rate")
            .map(|_| get_f64(h, "learning_rate", 0.0))
            .transpose()?,
        clip_norm: base.clip_norm,
    })
}

/// Mean and population std of a target column; zero spread maps to 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetScale {
    pub mean: f64,
    pub std: f64,
}

impl TargetScale {
    pub fn fit(y: &[f64]) -> Self {
        let n = y.len().max(1) as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        TargetScale { mean, std }
    }

    pub fn forward(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    pub fn inverse(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegressorState {
    MovingAverage,
    Arima {
        model: ArimaModel,
    },
    Svr {
        scaler: Standardizer,
        target: TargetScale,
        model: SvmModel,
    },
    Gbt {
        scaler: Standardizer,
        model: GradientBoosting,
    },
    Lstm {
        scaler: Standardizer,
        target: TargetScale,
        model: Lstm,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedRegressor {
    pub spec: RegressorSpec,
    pub lookback: usize,
    pub seed: u64,
    pub fingerprint: DataFingerprint,
    pub state: RegressorState,
}

fn target_values(series: &DeltaSeries, kind: TargetKind, range: Range<usize>) -> Vec<f64> {
    series.deltas[range]
        .iter()
        .map(|&d| match kind {
            TargetKind::Signed => d,
            TargetKind::Absolute => d.abs(),
        })
        .collect()
}

/// Exogenous input aligned to delta index `t`: the previous day's sentiment.
pub(crate) fn lagged_sentiment(series: &DeltaSeries, end: usize) -> Vec<f64> {
    (0..end)
        .map(|t| if t == 0 { 0.0 } else { series.sentiments[t - 1] })
        .collect()
}

fn arima_order(h: &Hyperparams) -> Result<ArimaOrder, ModelError> {
    Ok(ArimaOrder {
        p: get_usize(h, "p", 1)?,
        d: get_usize(h, "d", 0)?,
        q: get_usize(h, "q", 0)?,
    })
}

fn ensure_finite(values: &[f64], what: &str) -> Result<(), ModelError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ModelError::NonConvergence(format!("{what} produced non-finite values")))
    }
}

impl FittedRegressor {
    /// Fit on target delta indices `train`. Windows reach back `lookback`
    /// steps, so `train.start >= lookback`.
    pub fn fit(
        spec: &RegressorSpec,
        series: &DeltaSeries,
        lookback: usize,
        train: Range<usize>,
        seed: u64,
    ) -> Result<Self, ModelError> {
        validate_train(series, lookback, &train)?;
        let h = &spec.hyperparameters;
        let sent = spec.uses_sentiment;
        let targets: Vec<usize> = train.clone().collect();
        let state = match spec.family {
            RegressorFamily::Ma5 => RegressorState::MovingAverage,
            RegressorFamily::Arima | RegressorFamily::Sarimax => {
                let y = target_values(series, spec.target, 0..train.end);
                let exog = sent.then(|| lagged_sentiment(series, train.end));
                let model = ArimaModel::fit(&y, exog.as_deref(), arima_order(h)?)?;
                RegressorState::Arima { model }
            }
            RegressorFamily::Svr => {
                let kernel = get_text(h, "kernel", "rbf")?;
                if kernel != "rbf" {
                    return Err(ModelError::InvalidHyperparameter(format!(
                        "unsupported kernel {kernel:?}"
                    )));
                }
                let scaler = fit_tabular_scaler(series, lookback, sent, &train)?;
                let (x, n_cols) = tabular(series, lookback, sent, &targets, &scaler)?;
                let y = target_values(series, spec.target, train.clone());
                let target = TargetScale::fit(&y);
                let z: Vec<f64> = y.iter().map(|&v| target.forward(v)).collect();
                let model = fit_svr(
                    &x,
                    n_cols,
                    &z,
                    get_f64(h, "C", 1.0)?,
                    get_f64(h, "epsilon", 0.1)?,
                    scale_gamma(&x, n_cols),
                )?;
                RegressorState::Svr { scaler, target, model }
            }
            RegressorFamily::Gbtreg => {
                let scaler = fit_tabular_scaler(series, lookback, sent, &train)?;
                let (x, n_cols) = tabular(series, lookback, sent, &targets, &scaler)?;
                let y = target_values(series, spec.target, train.clone());
                let model = GradientBoosting::fit_regression(
                    &x,
                    n_cols,
                    &y,
                    get_usize(h, "n_estimators", 100)?,
                    get_usize(h, "max_depth", 3)?,
                    get_f64(h, "learning_rate", 0.1)?,
                )?;
                RegressorState::Gbt { scaler, model }
            }
            RegressorFamily::Lstmreg => {
                let scaler = fit_sequence_scaler(series, lookback, sent, &train)?;
                let (w, n_in) = sequences(series, lookback, sent, &targets, &scaler)?;
                let y = target_values(series, spec.target, train.clone());
                let target = TargetScale::fit(&y);
                let z: Vec<f64> = y.iter().map(|&v| target.forward(v)).collect();
                let model = Lstm::fit(&w, &z, n_in, Loss::Mse, &lstm_config(h)?, seed)?;
                RegressorState::Lstm { scaler, target, model }
            }
        };
        Ok(FittedRegressor {
            spec: spec.clone(),
            lookback,
            seed,
            fingerprint: DataFingerprint::of(series, &train),
            state,
        })
    }

    /// One prediction per target delta index, each reading only indices
    /// below its target.
    pub fn predict(&self, series: &DeltaSeries, targets: &[usize]) -> Result<Vec<f64>, ModelError> {
        let l = self.lookback;
        let sent = self.spec.uses_sentiment;
        if let Some(&t) = targets.iter().find(|&&t| t >= series.len()) {
            return Err(ModelError::ShapeMismatch {
                expected: series.len(),
                got: t + 1,
            });
        }
        let out = match &self.state {
            RegressorState::MovingAverage => {
                let y = target_values(series, self.spec.target, 0..series.len());
                targets.iter().map(|&t| moving_average_forecast(&y[..t])).collect()
            }
            RegressorState::Arima { model } => {
                let end = targets.iter().max().map_or(0, |t| t + 1).min(series.len());
                let y = target_values(series, self.spec.target, 0..end);
                let exog = sent.then(|| lagged_sentiment(series, end));
                model.one_step(&y, exog.as_deref(), targets)?
            }
            RegressorState::Svr { scaler, target, model } => {
                let (x, n_cols) = tabular(series, l, sent, targets, scaler)?;
                x.chunks(n_cols).map(|r| target.inverse(model.decision(r))).collect()
            }
            RegressorState::Gbt { scaler, model } => {
                let (x, n_cols) = tabular(series, l, sent, targets, scaler)?;
                x.chunks(n_cols).map(|r| model.raw(r)).collect()
            }
            RegressorState::Lstm { scaler, target, model } => {
                let (w, _) = sequences(series, l, sent, targets, scaler)?;
                w.iter().map(|win| target.inverse(model.output(win))).collect()
            }
        };
        ensure_finite(&out, self.spec.family.name())?;
        Ok(out)
    }
}
