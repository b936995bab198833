//! Per-ETF overlay plots: actual and predicted closes over the out-of-fold
//! dates, with the sector sentiment on a secondary axis.
//!
//! Each `<label>.svg` has a `<label>.plot.json` sibling holding the exact
//! series drawn; golden tests compare those rather than pixels.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use plotters::prelude::*;
use serde::{Deserialize, Serialize};

use super::{write_json, PipelineError};
use crate::evaluation::{read_prediction_csv, ComboResult};
use crate::sentiment::AlignedPanel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub config_digest: String,
    pub title: String,
    pub dates: Vec<NaiveDate>,
    pub actual_close: Vec<f64>,
    pub predicted_close: Vec<f64>,
    pub sentiment: Vec<f64>,
}

impl PlotData {
    pub fn build(
        panel: &AlignedPanel,
        combo: &ComboResult,
        archive: &Path,
        digest: &str,
    ) -> Result<Self, PipelineError> {
        let label = combo.label();
        if !combo.status.is_ok() || !archive.exists() {
            return Err(PipelineError::MissingArchive(format!("{}/{label}", combo.etf)));
        }
        let rows = read_prediction_csv(archive).map_err(|e| PipelineError::MissingArchive(format!("{label}: {e}")))?;
        let sentiment: BTreeMap<NaiveDate, f64> = panel.rows().iter().map(|r| (r.date, r.sentiment)).collect();
        Ok(PlotData {
            config_digest: digest.to_string(),
            title: format!("{} {label}", combo.etf),
            dates: rows.iter().map(|r| r.date).collect(),
            actual_close: rows.iter().map(|r| r.actual_close).collect(),
            predicted_close: rows.iter().map(|r| r.predicted_close).collect(),
            sentiment: rows
                .iter()
                .map(|r| sentiment.get(&r.date).copied().unwrap_or(0.0))
                .collect(),
        })
    }
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-6);
    (lo - pad, hi + pad)
}

/// Render `data` as an SVG at `path`.
pub fn render_svg(data: &PlotData, path: &Path) -> Result<(), String> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| e.to_string())?;
    }
    let n = data.dates.len().max(2);
    let (lo, hi) = span(data.actual_close.iter().chain(&data.predicted_close).copied());
    let (slo, shi) = span(data.sentiment.iter().copied().chain([-1.0, 1.0]));
    let root = SVGBackend::new(path, (960, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| e.to_string())?;
    let mut chart = ChartBuilder::on(&root)
        .caption(&data.title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(60)
        .right_y_label_area_size(48)
        .build_cartesian_2d(0..n - 1, lo..hi)
        .map_err(|e| e.to_string())?
        .set_secondary_coord(0..n - 1, slo..shi);
    let dates = data.dates.clone();
    chart
        .configure_mesh()
        .disable_mesh()
        .x_labels(6)
        .x_label_formatter(&|i| dates.get(*i).map(|d| d.to_string()).unwrap_or_default())
        .y_desc("close")
        .draw()
        .map_err(|e| e.to_string())?;
    chart
        .configure_secondary_axes()
        .y_desc("sentiment")
        .draw()
        .map_err(|e| e.to_string())?;
    chart
        .draw_secondary_series(LineSeries::new(
            data.sentiment.iter().enumerate().map(|(i, v)| (i, *v)),
            GREEN.mix(0.5),
        ))
        .map_err(|e| e.to_string())?
        .label("sentiment")
        .legend(|(x, y)| PathElement::new([(x, y), (x + 16, y)], GREEN.mix(0.5)));
    chart
        .draw_series(LineSeries::new(
            data.actual_close.iter().enumerate().map(|(i, v)| (i, *v)),
            &BLACK,
        ))
        .map_err(|e| e.to_string())?
        .label("actual")
        .legend(|(x, y)| PathElement::new([(x, y), (x + 16, y)], BLACK));
    chart
        .draw_series(LineSeries::new(
            data.predicted_close.iter().enumerate().map(|(i, v)| (i, *v)),
            &RED,
        ))
        .map_err(|e| e.to_string())?
        .label("predicted")
        .legend(|(x, y)| PathElement::new([(x, y), (x + 16, y)], RED));
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| e.to_string())?;
    root.present().map_err(|e| e.to_string())
}

/// Write the overlay plot for one combo to `out` (SVG) and its plotted
/// series next to it (`.plot.json`).
pub fn plot_etf(
    panel: &AlignedPanel,
    combo: &ComboResult,
    archive: &Path,
    out: &Path,
    digest: &str,
) -> Result<PlotData, PipelineError> {
    let data = PlotData::build(panel, combo, archive, digest)?;
    render_svg(&data, out).map_err(|e| PipelineError::stage(super::Stage::Plot, format!("{}: {e}", data.title)))?;
    write_json(&out.with_extension("plot.json"), &data)?;
    Ok(data)
}
