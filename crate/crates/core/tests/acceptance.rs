//! Acceptance criteria 1-9. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails. A positional argument filters criteria by
//! number or name substring.

mod common;

use std::collections::BTreeMap;
use std::ops::Range;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use etfcast::evaluation::{
    accuracy, assemble_combo, combo_grid, f1_score, mae, make_walk_forward, mse, render_summary_csv,
    render_summary_text, run_ablation, tune_regressor, AblationConfig, CellStatus, ClassifierOutcome, ClassifierTuning,
    RegressorOutcome, RegressorTuning, Roster, Variant, WalkForwardPlan,
};
use etfcast::features::{direction_label, to_deltas, DeltaSeries};
use etfcast::ingestion::{EtfId, Symbol};
use etfcast::models::checkpoint::{encode_checkpoint, load_checkpoint, save_checkpoint, Checkpointable};
use etfcast::models::lstm::{Loss, Lstm};
use etfcast::models::regression::RegressorState;
use etfcast::models::{
    derive_seed, ClassifierFamily, ClassifierSpec, DirectionPrediction, FittedClassifier, FittedRegressor, Hyperparams,
    Param, RegressorFamily, RegressorSpec, TargetKind,
};
use etfcast::pipeline::{Pipeline, RunConfig, Stage};
use etfcast::sentiment::{coverage_report, AlignedPanel, PanelRow};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const LOOKBACK: usize = 5;

// Tolerances.
const METRIC_TOL: f64 = 1e-12;
const MA5_TOL: f64 = 1e-12;
const AR_PHI: f64 = 0.8;
const AR_PHI_TOL: f64 = 0.1;
const AR_N: usize = 2000;
const PLANTED_WITH_MIN: f64 = 0.8;
const PLANTED_WITHOUT_MAX: f64 = 0.6;
const PLANTED_NOISE: f64 = 0.1;
const COMBO_TOL: f64 = 1e-9;
const RECON_REL_TOL: f64 = 1e-9;
const CHECKPOINT_TOL: f64 = 1e-12;
const GRAD_REL_TOL: f64 = 1e-4;
const LEAKAGE_PLANS: usize = 50;
const LEAKAGE_SERIES_LEN: usize = 200;

/// Published coverage rows: (ETF, #sentiment days, #price days, printed coverage).
const TABLE1: [(&str, usize, usize, &str); 29] = [
    ("BBJP", 55, 436, "12.61%"),
    ("CLOU", 0, 433, "0.00%"),
    ("DXJ", 55, 436, "12.61%"),
    ("EUFN", 55, 436, "12.61%"),
    ("EWJ", 55, 436, "12.61%"),
    ("EZU", 55, 436, "12.61%"),
    ("FEZ", 55, 436, "12.61%"),
    ("FLJP", 55, 436, "12.61%"),
    ("IEUR", 55, 436, "12.61%"),
    ("IVLU", 55, 436, "12.61%"),
    ("IVV", 55, 436, "12.61%"),
    ("IXJ", 1, 433, "0.23%"),
    ("KRE", 55, 436, "12.61%"),
    ("QQQ", 0, 433, "0.00%"),
    ("REZ", 25, 434, "5.76%"),
    ("SPY", 55, 436, "12.61%"),
    ("SRVR", 25, 434, "5.76%"),
    ("VDE", 104, 449, "23.16%"),
    ("VFH", 55, 436, "12.61%"),
    ("VGK", 55, 436, "12.61%"),
    ("VGT", 0, 433, "0.00%"),
    ("VHT", 1, 433, "0.23%"),
    ("VOO", 55, 436, "12.61%"),
    ("VTI", 55, 436, "12.61%"),
    ("XLE", 104, 449, "23.16%"),
    ("XLF", 55, 436, "12.61%"),
    ("XLRE", 25, 434, "5.76%"),
    ("XLV", 1, 433, "0.23%"),
    ("XOP", 104, 449, "23.16%"),
];

type Check = fn() -> Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {{
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    }};
}

fn hp(pairs: &[(&str, Param)]) -> Hyperparams {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

fn c1_coverage() -> Result<String, String> {
    let panels: Vec<AlignedPanel> = TABLE1
        .iter()
        .map(|&(sym, ns, np, _)| {
            let rows = (0..np)
                .map(|i| PanelRow {
                    date: date(2024, 1, 1) + chrono::Days::new(i as u64),
                    close: 100.0,
                    sentiment: if i < ns { 1.0 } else { 0.0 },
                    imputed: i >= ns,
                })
                .collect();
            let etf = EtfId {
                symbol: Symbol::new(sym).unwrap(),
                sector: sym.to_lowercase(),
            };
            AlignedPanel::new(etf, rows).unwrap()
        })
        .collect();
    let report = coverage_report(&panels);
    ensure!(report.len() == TABLE1.len(), "{} rows", report.len());
    for (row, &(sym, ns, np, printed)) in report.iter().zip(&TABLE1) {
        ensure!(
            row.etf.as_str() == sym && row.n_sentiment_days == ns && row.n_price_days == np,
            "{sym}: counts {:?}",
            row
        );
        ensure!(
            row.coverage_label() == printed,
            "{sym}: {} != {printed}",
            row.coverage_label()
        );
    }
    Ok(format!("{}/29 printed percentages reproduced", report.len()))
}

#[derive(Clone)]
enum AnySpec {
    Reg(RegressorSpec),
    Clf(ClassifierSpec),
}

fn all_specs(small_lstm: bool) -> Vec<AnySpec> {
    let epochs = if small_lstm { 3 } else { 10 };
    let lstm = hp(&[
        ("layers", Param::Int(1)),
        ("hidden", Param::Int(4)),
        ("optimizer", "adam".into()),
        ("epochs", Param::Int(epochs)),
    ]);
    let arima = hp(&[("p", Param::Int(1)), ("d", Param::Int(0)), ("q", Param::Int(1))]);
    let gbt = hp(&[
        ("n_estimators", Param::Int(30)),
        ("max_depth", Param::Int(3)),
        ("learning_rate", Param::Float(0.1)),
    ]);
    let reg = |f, h: Hyperparams, s| AnySpec::Reg(RegressorSpec::new(f, h, s).unwrap());
    let clf = |f, h: Hyperparams| AnySpec::Clf(ClassifierSpec::new(f, h, true).unwrap());
    vec![
        reg(RegressorFamily::Ma5, Hyperparams::new(), false),
        reg(RegressorFamily::Arima, arima.clone(), false),
        reg(RegressorFamily::Sarimax, arima, true),
        reg(
            RegressorFamily::Svr,
            hp(&[("C", Param::Float(1.0)), ("epsilon", Param::Float(0.1))]),
            true,
        ),
        reg(RegressorFamily::Gbtreg, gbt.clone(), true),
        reg(RegressorFamily::Lstmreg, lstm.clone(), true),
        clf(ClassifierFamily::AllUp, Hyperparams::new()),
        clf(ClassifierFamily::AllDown, Hyperparams::new()),
        clf(ClassifierFamily::Logreg, hp(&[("C", Param::Float(1.0))])),
        clf(
            ClassifierFamily::SvmRbf,
            hp(&[("C", Param::Float(1.0)), ("gamma", "scale".into())]),
        ),
        clf(ClassifierFamily::Dtree, hp(&[("max_depth", Param::Int(3))])),
        clf(
            ClassifierFamily::Rforest,
            hp(&[("n_estimators", Param::Int(20)), ("max_depth", Param::Int(4))]),
        ),
        clf(ClassifierFamily::Gbtclf, gbt),
        clf(ClassifierFamily::Lstmclf, lstm),
    ]
}

impl AnySpec {
    fn name(&self) -> String {
        match self {
            AnySpec::Reg(s) => s.family.to_string(),
            AnySpec::Clf(s) => s.family.to_string(),
        }
    }

    /// Encoded checkpoint, content hash and predictions for `targets`.
    fn fit_predict(
        &self,
        s: &DeltaSeries,
        train: Range<usize>,
        targets: &[usize],
        seed: u64,
    ) -> Result<(String, String, Vec<f64>), String> {
        match self {
            AnySpec::Reg(spec) => {
                let m = FittedRegressor::fit(spec, s, LOOKBACK, train, seed).map_err(|e| e.to_string())?;
                let p = m.predict(s, targets).map_err(|e| e.to_string())?;
                Ok((encode_checkpoint(&m), m.content_hash(), p))
            }
            AnySpec::Clf(spec) => {
                let m = FittedClassifier::fit(spec, s, LOOKBACK, train, seed).map_err(|e| e.to_string())?;
                let p = m.predict(s, targets).map_err(|e| e.to_string())?;
                let v = p.iter().map(|d| d.probability.unwrap_or(d.label as f64)).collect();
                Ok((encode_checkpoint(&m), m.content_hash(), v))
            }
        }
    }
}

fn random_series(rng: &mut ChaCha8Rng, n: usize) -> DeltaSeries {
    let noise = Normal::<f64>::new(0.0, 1.0).unwrap();
    let mut deltas = Vec::with_capacity(n);
    let mut prev = 0.0;
    for _ in 0..n {
        prev = 0.4 * prev + noise.sample(rng);
        deltas.push(prev);
    }
    let sentiments = (0..n)
        .map(|_| {
            if rng.gen_bool(0.3) {
                rng.gen_range(-10..=10) as f64
            } else {
                0.0
            }
        })
        .collect();
    common::series(deltas, sentiments)
}

fn c2_anti_leakage() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let base = random_series(&mut rng, LEAKAGE_SERIES_LEN);
    let specs = all_specs(true);
    let max_samples = LEAKAGE_SERIES_LEN - LOOKBACK;
    let mut checks = 0;
    for plan_no in 0..LEAKAGE_PLANS {
        let n = rng.gen_range(60..=max_samples);
        let horizon = rng.gen_range(1..=30);
        let min_train = rng.gen_range(20..n);
        let plan = make_walk_forward(n, horizon, min_train).map_err(|e| e.to_string())?;
        let folds = plan.target_folds(LOOKBACK);
        let fold = folds[rng.gen_range(0..folds.len())].clone();
        let mut deltas = base.deltas.clone();
        let mut sentiments = base.sentiments.clone();
        for t in fold.test.end..LEAKAGE_SERIES_LEN {
            deltas[t] = rng.gen_range(-50.0..50.0);
            sentiments[t] = rng.gen_range(-10..=10) as f64;
        }
        let mutated = common::series(deltas, sentiments);
        let targets: Vec<usize> = fold.test.clone().collect();
        for spec in &specs {
            let seed = derive_seed(42, &format!("leak/{plan_no}/{}", spec.name()));
            let a = spec.fit_predict(&base, fold.train.clone(), &targets, seed);
            let b = spec.fit_predict(&mutated, fold.train.clone(), &targets, seed);
            match (a, b) {
                (Ok((ca, ha, pa)), Ok((cb, hb, pb))) => {
                    ensure!(
                        ha == hb && ca == cb,
                        "plan {plan_no} {}: checkpoint changed after post-fold mutation",
                        spec.name()
                    );
                    ensure!(
                        pa.iter().zip(&pb).all(|(x, y)| x.to_bits() == y.to_bits()),
                        "plan {plan_no} {}: in-fold predictions changed",
                        spec.name()
                    );
                }
                (Err(ea), Err(eb)) => ensure!(ea == eb, "plan {plan_no} {}: {ea} vs {eb}", spec.name()),
                (a, b) => {
                    return Err(format!(
                        "plan {plan_no} {}: fit outcome differs ({:?} vs {:?})",
                        spec.name(),
                        a.err(),
                        b.err()
                    ))
                }
            }
            checks += 1;
        }
    }
    Ok(format!(
        "{LEAKAGE_PLANS} plans x {} families, {checks} invariance checks",
        specs.len()
    ))
}

fn naive_mse(p: &[f64], a: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..p.len() {
        let d = p[i] - a[i];
        acc += d * d;
    }
    acc / p.len() as f64
}

fn naive_mae(p: &[f64], a: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..p.len() {
        acc += if p[i] > a[i] { p[i] - a[i] } else { a[i] - p[i] };
    }
    acc / p.len() as f64
}

fn naive_accuracy(p: &[u8], a: &[u8]) -> f64 {
    let mut hits = 0;
    for i in 0..p.len() {
        if p[i] == a[i] {
            hits += 1;
        }
    }
    hits as f64 / p.len() as f64
}

fn naive_f1(p: &[u8], a: &[u8]) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
    for i in 0..p.len() {
        if p[i] == 1 && a[i] == 1 {
            tp += 1.0;
        } else if p[i] == 1 {
            fp += 1.0;
        } else if a[i] == 1 {
            fn_ += 1.0;
        }
    }
    if tp == 0.0 {
        return 0.0;
    }
    let precision = tp / (tp + fp);
    let recall = tp / (tp + fn_);
    2.0 * precision * recall / (precision + recall)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

fn c3_metric_oracles() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise = Normal::<f64>::new(0.0, 3.0).unwrap();
    for i in 0..1000 {
        let n = rng.gen_range(1..=200);
        let p: Vec<f64> = (0..n).map(|_| noise.sample(&mut rng)).collect();
        let a: Vec<f64> = (0..n).map(|_| noise.sample(&mut rng)).collect();
        let lp: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1)).collect();
        let la: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1)).collect();
        ensure!(
            close(mse(&p, &a).unwrap(), naive_mse(&p, &a), METRIC_TOL),
            "mse vector {i}"
        );
        ensure!(
            close(mae(&p, &a).unwrap(), naive_mae(&p, &a), METRIC_TOL),
            "mae vector {i}"
        );
        ensure!(
            close(accuracy(&lp, &la).unwrap(), naive_accuracy(&lp, &la), METRIC_TOL),
            "accuracy vector {i}"
        );
        ensure!(
            close(f1_score(&lp, &la).unwrap(), naive_f1(&lp, &la), METRIC_TOL),
            "f1 vector {i}"
        );
    }

    let s = random_series(&mut rng, 300);
    let ma5 = FittedRegressor::fit(
        &RegressorSpec::new(RegressorFamily::Ma5, Hyperparams::new(), false).unwrap(),
        &s,
        LOOKBACK,
        LOOKBACK..100,
        1,
    )
    .map_err(|e| e.to_string())?;
    let targets: Vec<usize> = (LOOKBACK..300).collect();
    let preds = ma5.predict(&s, &targets).map_err(|e| e.to_string())?;
    for (&t, &p) in targets.iter().zip(&preds) {
        let mut sum = 0.0;
        for k in t - 5..t {
            sum += s.deltas[k];
        }
        ensure!((p - sum / 5.0).abs() <= MA5_TOL, "MA5 at {t}: {p} vs {}", sum / 5.0);
    }

    let up = ClassifierSpec::new(ClassifierFamily::AllUp, Hyperparams::new(), false).unwrap();
    let down = ClassifierSpec::new(ClassifierFamily::AllDown, Hyperparams::new(), false).unwrap();
    let mut slices = 0;
    for _ in 0..50 {
        let len = rng.gen_range(60..300);
        let s = random_series(&mut rng, len);
        let plan =
            WalkForwardPlan::for_series(s.len(), LOOKBACK, rng.gen_range(1..30), 0.6).map_err(|e| e.to_string())?;
        for f in plan.target_folds(LOOKBACK) {
            let targets: Vec<usize> = f.test.clone().collect();
            let truth: Vec<u8> = targets.iter().map(|&t| direction_label(s.deltas[t])).collect();
            let labels = |spec: &ClassifierSpec| -> Vec<u8> {
                let m = FittedClassifier::fit(spec, &s, LOOKBACK, f.train.clone(), 0).unwrap();
                m.predict(&s, &targets).unwrap().iter().map(|d| d.label).collect()
            };
            let sum = accuracy(&labels(&up), &truth).unwrap() + accuracy(&labels(&down), &truth).unwrap();
            ensure!(
                sum == 1.0,
                "ALL_UP + ALL_DOWN accuracy = {sum} on a slice of {}",
                targets.len()
            );
            slices += 1;
        }
    }
    Ok(format!(
        "1000 vectors within {METRIC_TOL:e}; MA5 matches rolling mean on {} targets; naive accuracies sum to 1 on {slices} slices",
        targets.len()
    ))
}

fn ar1(n: usize, phi: f64, seed: u64) -> DeltaSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::<f64>::new(0.0, 1.0).unwrap();
    let mut y = Vec::with_capacity(n);
    let mut prev = 0.0;
    for _ in 0..n {
        prev = phi * prev + noise.sample(&mut rng);
        y.push(prev);
    }
    common::series(y, vec![0.0; n])
}

fn c4_ar_recovery() -> Result<String, String> {
    let s = ar1(AR_N, AR_PHI, 11);
    let order = hp(&[("p", Param::Int(1)), ("d", Param::Int(0)), ("q", Param::Int(0))]);
    let spec = RegressorSpec::new(RegressorFamily::Arima, order.clone(), false).unwrap();
    let m = FittedRegressor::fit(&spec, &s, LOOKBACK, LOOKBACK..AR_N, 42).map_err(|e| e.to_string())?;
    let phi = match &m.state {
        RegressorState::Arima { model } => model.ar[0],
        other => return Err(format!("unexpected state {other:?}")),
    };
    ensure!((phi - AR_PHI).abs() <= AR_PHI_TOL, "phi_hat = {phi}");

    let folds = WalkForwardPlan::for_series(AR_N, LOOKBACK, 20, 0.6)
        .map_err(|e| e.to_string())?
        .target_folds(LOOKBACK);
    let oof_mse = |family, grid: Vec<Hyperparams>| -> Result<f64, String> {
        let (status, t) = tune_regressor(&s, family, false, TargetKind::Signed, &grid, &folds, LOOKBACK, 42);
        ensure!(status.is_ok(), "{family}: {status:?}");
        let actual: Vec<f64> = t.targets.iter().map(|&i| s.deltas[i]).collect();
        mse(&t.predictions, &actual).map_err(|e| e.to_string())
    };
    let arima = oof_mse(RegressorFamily::Arima, vec![order])?;
    let ma5 = oof_mse(RegressorFamily::Ma5, vec![Hyperparams::new()])?;
    ensure!(arima < ma5, "walk-forward MSE ARIMA {arima} >= MA5 {ma5}");
    Ok(format!(
        "phi_hat = {phi:.4} (tol {AR_PHI_TOL}); walk-forward MSE ARIMA {arima:.4} < MA5 {ma5:.4} over {} folds",
        folds.len()
    ))
}

fn planted_series(n: usize, seed: u64) -> DeltaSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::<f64>::new(0.0, 1.0).unwrap();
    let sentiments: Vec<f64> = (0..n)
        .map(|_| {
            let v = rng.gen_range(1..=10) as f64;
            if rng.gen_bool(0.5) {
                v
            } else {
                -v
            }
        })
        .collect();
    let deltas = (0..n)
        .map(|t| {
            let magnitude: f64 = 0.2 + noise.sample(&mut rng).abs();
            let mut sign: f64 = if t == 0 { 1.0 } else { sentiments[t - 1].signum() };
            if rng.gen_bool(PLANTED_NOISE) {
                sign = -sign;
            }
            sign * magnitude
        })
        .collect();
    common::series(deltas, sentiments)
}

fn c5_planted_sentiment() -> Result<String, String> {
    let s = planted_series(400, 5);
    let learners = [
        ClassifierFamily::Logreg,
        ClassifierFamily::SvmRbf,
        ClassifierFamily::Dtree,
        ClassifierFamily::Rforest,
        ClassifierFamily::Gbtclf,
        ClassifierFamily::Lstmclf,
    ];
    let mut grids = BTreeMap::new();
    grids.insert(
        "ARIMA".to_string(),
        vec![hp(&[("p", Param::Int(1)), ("d", Param::Int(0)), ("q", Param::Int(0))])],
    );
    grids.insert("LOGREG".to_string(), vec![hp(&[("C", Param::Float(1.0))])]);
    grids.insert(
        "SVM_RBF".to_string(),
        vec![hp(&[("C", Param::Float(1.0)), ("gamma", "scale".into())])],
    );
    grids.insert("DTREE".to_string(), vec![hp(&[("max_depth", Param::Int(3))])]);
    grids.insert(
        "RFOREST".to_string(),
        vec![hp(&[("n_estimators", Param::Int(100)), ("max_depth", Param::Int(5))])],
    );
    grids.insert(
        "GBTCLF".to_string(),
        vec![hp(&[
            ("n_estimators", Param::Int(50)),
            ("max_depth", Param::Int(3)),
            ("learning_rate", Param::Float(0.1)),
        ])],
    );
    grids.insert(
        "LSTMCLF".to_string(),
        vec![hp(&[
            ("layers", Param::Int(1)),
            ("hidden", Param::Int(8)),
            ("optimizer", "adam".into()),
            ("epochs", Param::Int(30)),
        ])],
    );
    let roster = Roster {
        regressors: vec![RegressorFamily::Arima],
        classifiers: learners.to_vec(),
        grids,
    };
    let report = run_ablation(&[s], &roster, &AblationConfig::default());
    let mut lines = Vec::new();
    let mut worst_with: f64 = 1.0;
    let mut worst_without: f64 = 0.0;
    for c in learners {
        let row = report
            .summary
            .rows
            .iter()
            .find(|r| r.classifier == c)
            .ok_or(format!("{c} missing from summary"))?;
        let acc = |j: usize| {
            row.cells[j]
                .as_ref()
                .and_then(|x| x.accuracy)
                .ok_or(format!("{c} cell {j} failed"))
        };
        let (without, with) = (acc(0)?, acc(1)?);
        worst_with = worst_with.min(with);
        worst_without = worst_without.max(without);
        lines.push(format!("{c} {without:.3}->{with:.3}"));
        ensure!(with >= PLANTED_WITH_MIN, "{c}: with_sentiment accuracy {with:.3}");
        ensure!(without <= PLANTED_WITHOUT_MAX, "{c}: price_only accuracy {without:.3}");
    }
    let text = render_summary_text(&report.summary);
    ensure!(
        text.contains("Direction accuracy") && text.contains(&format!("{worst_with:.3}")),
        "summary text does not surface the accuracy gap"
    );
    Ok(format!(
        "min with={worst_with:.3}, max w/o={worst_without:.3} [{}]",
        lines.join(", ")
    ))
}

fn c6_combination_identity() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut s = random_series(&mut rng, 120);
    s.deltas[40] = 0.0;
    s.deltas[77] = 0.0;
    let s = common::series(s.deltas, s.sentiments);
    let targets: Vec<usize> = (LOOKBACK..120).collect();
    let fold_sizes = vec![40, 40, 35];
    let reg = RegressorOutcome {
        etf: s.etf.symbol.to_string(),
        row: RegressorFamily::Arima,
        family: RegressorFamily::Arima,
        variant: Variant::PriceOnly,
        uses_sentiment: false,
        target: TargetKind::Absolute,
        status: CellStatus::Ok,
        tuning: RegressorTuning {
            best: Some(Hyperparams::new()),
            candidates: Vec::new(),
            targets: targets.clone(),
            predictions: targets.iter().map(|&t| s.deltas[t].abs()).collect(),
            fold_sizes: fold_sizes.clone(),
            model: None,
        },
    };
    let clf = ClassifierOutcome {
        etf: s.etf.symbol.to_string(),
        family: ClassifierFamily::Logreg,
        variant: Variant::PriceOnly,
        uses_sentiment: false,
        status: CellStatus::Ok,
        tuning: ClassifierTuning {
            best: Some(Hyperparams::new()),
            candidates: Vec::new(),
            targets: targets.clone(),
            predictions: targets
                .iter()
                .map(|&t| DirectionPrediction::from_label(direction_label(s.deltas[t])))
                .collect(),
            fold_sizes,
            model: None,
        },
    };
    let combo = assemble_combo(&s, &reg, &clf);
    let m = combo.metrics.ok_or(format!("combo failed: {:?}", combo.status))?;
    for (name, v) in [
        ("delta_mse", m.delta_mse),
        ("delta_mae", m.delta_mae),
        ("mse", m.mse),
        ("mae", m.mae),
    ] {
        ensure!(v.abs() <= COMBO_TOL, "{name} = {v:e}");
    }
    Ok(format!(
        "delta and price MSE/MAE <= {COMBO_TOL:e} over {} predictions (max {:.1e})",
        m.n,
        m.delta_mse.max(m.delta_mae).max(m.mse).max(m.mae)
    ))
}

fn checkpoint_roundtrips(dir: &Path) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    let s = random_series(&mut rng, 160);
    let targets: Vec<usize> = (100..160).collect();
    let mut n = 0;
    for spec in all_specs(false) {
        let path = dir.join(format!("{}.json", spec.name()));
        let (a, b) = match &spec {
            AnySpec::Reg(r) => {
                let m = FittedRegressor::fit(r, &s, LOOKBACK, LOOKBACK..100, 9).map_err(|e| e.to_string())?;
                save_checkpoint(&m, &path).map_err(|e| e.to_string())?;
                let back: FittedRegressor = load_checkpoint(&path).map_err(|e| e.to_string())?;
                ensure!(back.content_hash() == m.content_hash(), "{}: hash changed", spec.name());
                (m.predict(&s, &targets).unwrap(), back.predict(&s, &targets).unwrap())
            }
            AnySpec::Clf(c) => {
                let m = FittedClassifier::fit(c, &s, LOOKBACK, LOOKBACK..100, 9).map_err(|e| e.to_string())?;
                save_checkpoint(&m, &path).map_err(|e| e.to_string())?;
                let back: FittedClassifier = load_checkpoint(&path).map_err(|e| e.to_string())?;
                ensure!(back.content_hash() == m.content_hash(), "{}: hash changed", spec.name());
                let flat = |p: Vec<DirectionPrediction>| -> Vec<f64> {
                    p.iter().map(|d| d.probability.unwrap_or(d.label as f64)).collect()
                };
                (
                    flat(m.predict(&s, &targets).unwrap()),
                    flat(back.predict(&s, &targets).unwrap()),
                )
            }
        };
        ensure!(
            a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= CHECKPOINT_TOL),
            "{}: predictions differ after reload",
            spec.name()
        );
        n += 1;
    }
    Ok(n)
}

fn c7_round_trips() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let n = rng.gen_range(2..500);
        let mut price: f64 = rng.gen_range(5.0..500.0);
        let rows: Vec<PanelRow> = (0..n)
            .map(|k| {
                price = (price + rng.gen_range(-0.03..0.03) * price).max(0.01);
                PanelRow {
                    date: date(2020, 1, 1) + chrono::Days::new(k as u64),
                    close: (price * 100.0).round() / 100.0,
                    sentiment: 0.0,
                    imputed: true,
                }
            })
            .collect();
        let panel = AlignedPanel::new(common::etf("RT"), rows.clone()).unwrap();
        let back = to_deltas(&panel).map_err(|e| e.to_string())?.reconstruct();
        for (r, b) in rows.iter().zip(&back) {
            let rel = (r.close - b).abs() / r.close.abs();
            worst = worst.max(rel);
            ensure!(rel <= RECON_REL_TOL, "series {i}: {b} vs {}", r.close);
        }
    }

    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let families = checkpoint_roundtrips(tmp.path())?;

    let a = common::demo_copy(&tmp.path().join("a"));
    let b = common::demo_copy(&tmp.path().join("b"));
    let cfg = |dir: &Path| RunConfig::load(&dir.join("config-fast.toml")).map_err(|e| e.to_string());
    let first = Pipeline::new(cfg(&a)?).map_err(|e| e.to_string())?;
    first.run(Some(Stage::Regression)).map_err(|e| e.to_string())?;
    let ckpts_before = first.state().checkpoints;
    let reg_dir = a.join("out-fast/stages/regression");
    let mtimes = |dir: &Path| -> Vec<(String, std::time::SystemTime)> {
        common::tree(dir)
            .into_iter()
            .map(|f| {
                let t = std::fs::metadata(dir.join(&f)).unwrap().modified().unwrap();
                (f, t)
            })
            .collect()
    };
    let before = mtimes(&reg_dir);
    drop(first);
    let resumed = Pipeline::new(cfg(&a)?).map_err(|e| e.to_string())?;
    resumed.run(None).map_err(|e| e.to_string())?;
    ensure!(mtimes(&reg_dir) == before, "regression cells were re-fit on resume");
    let ckpts_after: BTreeMap<_, _> = resumed
        .state()
        .checkpoints
        .into_iter()
        .filter(|(k, _)| k.starts_with("checkpoints/regression/"))
        .collect();
    ensure!(
        ckpts_after == ckpts_before,
        "regression checkpoint hashes changed on resume"
    );

    Pipeline::new(cfg(&b)?)
        .map_err(|e| e.to_string())?
        .run(None)
        .map_err(|e| e.to_string())?;
    let la = common::log_without_timestamps(&a.join("out-fast/logs/run.json"));
    let lb = common::log_without_timestamps(&b.join("out-fast/logs/run.json"));
    ensure!(
        la == lb,
        "resumed log differs from uninterrupted log outside timestamps"
    );
    Ok(format!(
        "reconstruction max rel err {worst:.1e}; {families} families reload within {CHECKPOINT_TOL:e}; resumed log identical modulo timestamps"
    ))
}

fn grad_check(loss: Loss, layers: usize) -> Result<f64, String> {
    let n_in = 2;
    let net = Lstm::new(n_in, 3, layers, loss, 17).map_err(|e| e.to_string())?;
    let w1 = [0.5, -0.2, 0.1, 0.4, -0.3, 0.8];
    let w2 = [-0.7, 0.3, 0.2, -0.1, 0.6, 0.05];
    let windows: Vec<&[f64]> = vec![&w1, &w2];
    let targets = match loss {
        Loss::Mse => [0.3, -0.4],
        Loss::Logistic => [1.0, 0.0],
    };
    let (_, grad) = net.loss_and_grad(&net.params, &windows, &targets);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..net.params.len() {
        let mut p = net.params.clone();
        p[i] += h;
        let (up, _) = net.loss_and_grad(&p, &windows, &targets);
        p[i] -= 2.0 * h;
        let (down, _) = net.loss_and_grad(&p, &windows, &targets);
        let fd = (up - down) / (2.0 * h);
        let rel = (fd - grad[i]).abs() / (fd.abs() + grad[i].abs()).max(1e-7);
        worst = worst.max(rel);
    }
    Ok(worst)
}

fn c8_lstm_gradients() -> Result<String, String> {
    let mut parts = Vec::new();
    for (loss, name) in [(Loss::Mse, "mse"), (Loss::Logistic, "logistic")] {
        for layers in [1, 2] {
            let worst = grad_check(loss, layers)?;
            ensure!(
                worst <= GRAD_REL_TOL,
                "{name} loss, {layers} layer(s): max rel err {worst:e}"
            );
            parts.push(format!("{name}/{layers}L {worst:.1e}"));
        }
    }
    Ok(format!(
        "analytic vs central differences on 3-step windows: {}",
        parts.join(", ")
    ))
}

fn c9_end_to_end() -> Result<String, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let demo = common::demo_copy(tmp.path());
    let cfg = RunConfig::load(&demo.join("config-fast.toml")).map_err(|e| e.to_string())?;
    let roster = cfg.roster();
    let symbols = cfg.symbols.clone();
    let p = Pipeline::new(cfg).map_err(|e| e.to_string())?;
    let outcome = p.run(None).map_err(|e| e.to_string())?;
    ensure!(outcome.completed, "run did not complete");
    let out = p.layout().root().to_path_buf();
    let log: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("logs/run.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let articles = log["stages"]["ingest"]["summary"]["articles"].as_u64().unwrap_or(0);
    ensure!(articles >= 10, "only {articles} articles ingested");
    for f in [
        "panels/coverage.csv",
        "report/summary.txt",
        "report/summary.csv",
        "manifest.json",
        "state.json",
    ] {
        ensure!(out.join(f).exists(), "missing {f}");
    }
    let mut ok = 0;
    let mut failed = 0;
    for sym in &symbols {
        ensure!(
            out.join(format!("panels/{sym}.csv")).exists(),
            "missing panel for {sym}"
        );
        for (c, r, v) in combo_grid(&roster) {
            let label = format!("{c}__{r}__{v}");
            let rec_path = out.join(format!("combos/{sym}/{label}.json"));
            let rec: serde_json::Value = serde_json::from_str(
                &std::fs::read_to_string(&rec_path).map_err(|e| format!("{}: {e}", rec_path.display()))?,
            )
            .map_err(|e| e.to_string())?;
            if rec["status"] == "ok" {
                for ext in ["csv", "svg", "plot.json"] {
                    let dir = if ext == "csv" { "predictions" } else { "plots" };
                    let f = out.join(format!("{dir}/{sym}/{label}.{ext}"));
                    let size = std::fs::metadata(&f).map(|m| m.len()).unwrap_or(0);
                    ensure!(size > 0, "missing or empty {}", f.display());
                }
                ok += 1;
            } else {
                ensure!(rec["reason"].is_string(), "{sym}/{label}: failed record without reason");
                failed += 1;
            }
        }
    }
    let text = std::fs::read_to_string(out.join("report/summary.txt")).map_err(|e| e.to_string())?;
    ensure!(text.contains("**"), "no best mark in summary");
    ensure!(
        text.lines().any(|l| l.contains(" _") && l.contains("_ ")),
        "no second-best mark in summary"
    );
    let ma5_line = text
        .lines()
        .find(|l| l.contains("MA5"))
        .ok_or("no MA5 row in summary")?;
    let with_part = ma5_line.rsplit('|').next().unwrap_or("x");
    ensure!(
        with_part.trim().is_empty(),
        "MA5 with-sentiment cells not blank: {ma5_line:?}"
    );
    let csv = std::fs::read_to_string(out.join("report/summary.csv")).map_err(|e| e.to_string())?;
    ensure!(
        csv.lines()
            .filter(|l| l.contains(",MA5,with_sentiment,"))
            .all(|l| l.ends_with(",blank")),
        "MA5 with_sentiment rows not blank in CSV"
    );
    let table = render_summary_csv(&etfcast::evaluation::summarize(
        &etfcast::pipeline::load_combos(p.layout())
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|r| r.combo)
            .collect::<Vec<_>>(),
    ));
    ensure!(table == csv, "summary CSV is not reproducible from combo records");
    Ok(format!(
        "{} symbols, {articles} articles, {ok} combos complete, {failed} failed records, exit code {}",
        symbols.len(),
        outcome.exit_code()
    ))
}

fn main() {
    let criteria: [(u8, &str, u64, Check); 9] = [
        (1, "coverage arithmetic", 1, c1_coverage),
        (2, "anti-leakage", 180, c2_anti_leakage),
        (3, "metric and baseline oracles", 30, c3_metric_oracles),
        (4, "AR recovery", 60, c4_ar_recovery),
        (5, "planted sentiment", 300, c5_planted_sentiment),
        (6, "combination identity", 1, c6_combination_identity),
        (7, "round trips", 120, c7_round_trips),
        (8, "LSTM gradients", 120, c8_lstm_gradients),
        (9, "end-to-end smoke", 600, c9_end_to_end),
    ];
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failures = 0;
    let mut ran = 0;
    for (n, name, budget, check) in criteria {
        if let Some(f) = &filter {
            if f.as_str() != n.to_string() && !name.contains(f.as_str()) {
                continue;
            }
        }
        ran += 1;
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let result = match result {
            Ok(d) if elapsed > Duration::from_secs(budget) => Err(format!("{d}; over the {budget}s budget")),
            r => r,
        };
        let (tag, detail) = match &result {
            Ok(d) => ("PASS", d.clone()),
            Err(e) => ("FAIL", e.clone()),
        };
        if result.is_err() {
            failures += 1;
        }
        println!(
            "criterion {n} ({name}): {tag} [{:.1}s / {budget}s] {detail}",
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
