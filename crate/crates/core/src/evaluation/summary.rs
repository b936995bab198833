use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ablation::{ComboResult, PredictionRow, Variant};
use super::EvalError;
use crate::models::{ClassifierFamily, RegressorFamily};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mark {
    #[default]
    None,
    Best,
    Second,
}

/// Unweighted mean over the ETFs where the combo succeeded. Metric values
/// are `None` when it failed everywhere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryCell {
    pub mse: Option<f64>,
    pub mae: Option<f64>,
    pub delta_mse: Option<f64>,
    pub delta_mae: Option<f64>,
    pub accuracy: Option<f64>,
    pub f1: Option<f64>,
    pub n_etfs: usize,
    pub n_failed: usize,
    pub mse_mark: Mark,
    pub mae_mark: Mark,
}

impl SummaryCell {
    pub fn failed(&self) -> bool {
        self.mse.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub classifier: ClassifierFamily,
    pub regressor: RegressorFamily,
    /// Indexed by variant: price-only, then with sentiment. `None` is a
    /// blank cell (the combination has no such variant).
    pub cells: [Option<SummaryCell>; 2],
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
    pub n_etfs: usize,
}

fn vidx(v: Variant) -> usize {
    match v {
        Variant::PriceOnly => 0,
        Variant::WithSentiment => 1,
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Average combos across ETFs and mark the best and second-best cell for
/// MSE and for MAE over the whole table.
pub fn summarize(combos: &[ComboResult]) -> SummaryTable {
    let mut rows: Vec<SummaryRow> = Vec::new();
    let mut etfs: Vec<&str> = Vec::new();
    for c in combos {
        if !etfs.contains(&c.etf.as_str()) {
            etfs.push(&c.etf);
        }
        if !rows
            .iter()
            .any(|r| r.classifier == c.classifier && r.regressor == c.regressor)
        {
            rows.push(SummaryRow {
                classifier: c.classifier,
                regressor: c.regressor,
                cells: [None, None],
            });
        }
    }
    for row in &mut rows {
        for v in Variant::BOTH {
            let cell: Vec<&ComboResult> = combos
                .iter()
                .filter(|c| c.classifier == row.classifier && c.regressor == row.regressor && c.variant == v)
                .collect();
            if cell.is_empty() {
                continue;
            }
            let ok: Vec<_> = cell.iter().filter_map(|c| c.metrics.as_ref()).collect();
            let col = |f: fn(&crate::evaluation::MetricSet) -> f64| mean(&ok.iter().map(|m| f(m)).collect::<Vec<_>>());
            row.cells[vidx(v)] = Some(SummaryCell {
                mse: col(|m| m.mse),
                mae: col(|m| m.mae),
                delta_mse: col(|m| m.delta_mse),
                delta_mae: col(|m| m.delta_mae),
                accuracy: col(|m| m.accuracy),
                f1: col(|m| m.f1),
                n_etfs: ok.len(),
                n_failed: cell.len() - ok.len(),
                mse_mark: Mark::None,
                mae_mark: Mark::None,
            });
        }
    }
    mark(&mut rows, |c| c.mse, |c, m| c.mse_mark = m);
    mark(&mut rows, |c| c.mae, |c, m| c.mae_mark = m);
    SummaryTable {
        rows,
        n_etfs: etfs.len(),
    }
}

fn mark(rows: &mut [SummaryRow], get: fn(&SummaryCell) -> Option<f64>, set: fn(&mut SummaryCell, Mark)) {
    let mut values: Vec<(usize, usize, f64)> = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        for (j, c) in r.cells.iter().enumerate() {
            if let Some(v) = c.as_ref().and_then(get) {
                values.push((i, j, v));
            }
        }
    }
    // stable sort keeps table order among ties
    values.sort_by(|a, b| a.2.total_cmp(&b.2));
    for (k, m) in [Mark::Best, Mark::Second].into_iter().enumerate() {
        if let Some(&(i, j, _)) = values.get(k) {
            if let Some(c) = rows[i].cells[j].as_mut() {
                set(c, m);
            }
        }
    }
}

fn fmt_value(v: Option<f64>, m: Mark) -> String {
    match v {
        None => "FAILED".into(),
        Some(x) => match m {
            Mark::Best => format!("**{x:.4}**"),
            Mark::Second => format!("_{x:.4}_"),
            Mark::None => format!("{x:.4}"),
        },
    }
}

/// Plain-text table with classifier rows, regressor sub-rows and MSE/MAE
/// for each sentiment variant. `**x**` marks the best value of a metric,
/// `_x_` the second best, and `FAILED` a cell with no successful ETF.
pub fn render_summary_text(t: &SummaryTable) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "Average performance over {} ETF(s); MSE and MAE on reconstructed closes.",
        t.n_etfs
    );
    let _ = writeln!(
        s,
        "**x** best, _x_ second best, FAILED = no ETF produced a result, blank = no such variant."
    );
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:<10} {:<9} | {:>16} {:>16} | {:>16} {:>16}",
        "", "", "w/o sentiment", "", "with sentiment", ""
    );
    let _ = writeln!(
        s,
        "{:<10} {:<9} | {:>16} {:>16} | {:>16} {:>16}",
        "CM", "RM", "MSE", "MAE", "MSE", "MAE"
    );
    let _ = writeln!(s, "{}", "-".repeat(92));
    let mut last: Option<ClassifierFamily> = None;
    for r in &t.rows {
        let cm = if last == Some(r.classifier) {
            ""
        } else {
            r.classifier.name()
        };
        last = Some(r.classifier);
        let cell = |c: &Option<SummaryCell>| match c {
            None => (String::new(), String::new()),
            Some(c) => (fmt_value(c.mse, c.mse_mark), fmt_value(c.mae, c.mae_mark)),
        };
        let (a, b) = cell(&r.cells[0]);
        let (c, d) = cell(&r.cells[1]);
        let _ = writeln!(
            s,
            "{:<10} {:<9} | {a:>16} {b:>16} | {c:>16} {d:>16}",
            cm,
            r.regressor.name()
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "Direction accuracy / F1 by classifier");
    let _ = writeln!(s, "{:<10} | {:>17} | {:>17}", "CM", "w/o sentiment", "with sentiment");
    let _ = writeln!(s, "{}", "-".repeat(52));
    let mut seen = Vec::new();
    for r in &t.rows {
        if seen.contains(&r.classifier) {
            continue;
        }
        seen.push(r.classifier);
        let pick = |j: usize| {
            t.rows
                .iter()
                .filter(|x| x.classifier == r.classifier)
                .find_map(|x| x.cells[j].as_ref().filter(|c| !c.failed()))
                .map_or("FAILED".to_string(), |c| {
                    format!("{:.3} / {:.3}", c.accuracy.unwrap_or(0.0), c.f1.unwrap_or(0.0))
                })
        };
        let _ = writeln!(s, "{:<10} | {:>17} | {:>17}", r.classifier.name(), pick(0), pick(1));
    }
    s
}

fn opt(v: Option<f64>) -> String {
    v.map_or("FAILED".into(), |x| format!("{x}"))
}

fn mark_name(m: Mark) -> &'static str {
    match m {
        Mark::None => "",
        Mark::Best => "best",
        Mark::Second => "second",
    }
}

/// One line per (classifier, regressor, variant). Blank variants have
/// status `blank` and empty metric fields.
pub fn render_summary_csv(t: &SummaryTable) -> String {
    let mut s = String::from(
        "classifier,regressor,variant,mse,mse_mark,mae,mae_mark,delta_mse,delta_mae,accuracy,f1,n_etfs,n_failed,status\n",
    );
    for r in &t.rows {
        for v in Variant::BOTH {
            let (c, reg) = (r.classifier.name(), r.regressor.name());
            match &r.cells[vidx(v)] {
                None => {
                    let _ = writeln!(s, "{c},{reg},{v},,,,,,,,,0,0,blank");
                }
                Some(x) => {
                    let _ = writeln!(
                        s,
                        "{c},{reg},{v},{},{},{},{},{},{},{},{},{},{},{}",
                        opt(x.mse),
                        mark_name(x.mse_mark),
                        opt(x.mae),
                        mark_name(x.mae_mark),
                        opt(x.delta_mse),
                        opt(x.delta_mae),
                        opt(x.accuracy),
                        opt(x.f1),
                        x.n_etfs,
                        x.n_failed,
                        if x.failed() { "failed" } else { "ok" }
                    );
                }
            }
        }
    }
    s
}

pub fn write_prediction_csv(path: &Path, rows: &[PredictionRow]) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| EvalError::Csv(e.to_string()))?;
    }
    if rows.is_empty() {
        w.write_record([
            "etf",
            "date",
            "actual_delta",
            "predicted_magnitude",
            "predicted_direction",
            "combined_delta",
            "actual_close",
            "predicted_close",
        ])
        .map_err(|e| EvalError::Csv(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| EvalError::Csv(e.to_string()))?;
    crate::ingestion::write_atomic(path, &bytes).map_err(|e| EvalError::Csv(e.to_string()))
}

pub fn read_prediction_csv(path: &Path) -> Result<Vec<PredictionRow>, EvalError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| EvalError::Csv(e.to_string()))?;
    r.deserialize()
        .collect::<Result<Vec<PredictionRow>, _>>()
        .map_err(|e| EvalError::Csv(e.to_string()))
}
