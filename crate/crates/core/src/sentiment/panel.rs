use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{CoverageRow, SentimentError, SCORE_MAX, SCORE_MIN};
use crate::ingestion::{EtfId, Symbol};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelRow {
    pub date: NaiveDate,
    pub close: f64,
    pub sentiment: f64,
    pub imputed: bool,
}

/// Per-ETF table of trading dates, closes and sector sentiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignedPanel {
    etf: EtfId,
    rows: Vec<PanelRow>,
}

impl AlignedPanel {
    pub fn new(etf: EtfId, rows: Vec<PanelRow>) -> Result<Self, SentimentError> {
        if let Some(w) = rows.windows(2).find(|w| w[0].date >= w[1].date) {
            return Err(SentimentError::InvalidPanel(format!(
                "{}: dates not increasing at {}",
                etf.symbol, w[1].date
            )));
        }
        for r in &rows {
            if !r.close.is_finite() || !r.sentiment.is_finite() {
                return Err(SentimentError::InvalidPanel(format!(
                    "{}: non-finite value on {}",
                    etf.symbol, r.date
                )));
            }
            if r.sentiment < SCORE_MIN as f64 || r.sentiment > SCORE_MAX as f64 {
                return Err(SentimentError::InvalidPanel(format!(
                    "{}: sentiment {} out of range on {}",
                    etf.symbol, r.sentiment, r.date
                )));
            }
            if r.imputed && r.sentiment != 0.0 {
                return Err(SentimentError::InvalidPanel(format!(
                    "{}: imputed row with non-zero sentiment on {}",
                    etf.symbol, r.date
                )));
            }
        }
        Ok(AlignedPanel { etf, rows })
    }

    pub fn etf(&self) -> &EtfId {
        &self.etf
    }

    pub fn rows(&self) -> &[PanelRow] {
        &self.rows
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.rows.iter().map(|r| r.date).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct PanelCsvRow {
    date: NaiveDate,
    close: f64,
    sentiment: f64,
    imputed: bool,
}

/// Columns: `date,close,sentiment,imputed`.
pub fn write_panel_csv(panel: &AlignedPanel, path: &Path) -> Result<(), SentimentError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in panel.rows() {
        w.serialize(PanelCsvRow {
            date: r.date,
            close: r.close,
            sentiment: r.sentiment,
            imputed: r.imputed,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_panel_csv(etf: EtfId, path: &Path) -> Result<AlignedPanel, SentimentError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let rows = rdr
        .deserialize::<PanelCsvRow>()
        .map(|r| {
            r.map(|r| PanelRow {
                date: r.date,
                close: r.close,
                sentiment: r.sentiment,
                imputed: r.imputed,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    AlignedPanel::new(etf, rows)
}

/// Columns: `ETF,#Sentiment,#Price,Coverage`, coverage as `12.61%`.
pub fn write_coverage_csv(rows: &[CoverageRow], path: &Path) -> Result<(), SentimentError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["ETF", "#Sentiment", "#Price", "Coverage"])?;
    for r in rows {
        w.write_record([
            r.etf.to_string(),
            r.n_sentiment_days.to_string(),
            r.n_price_days.to_string(),
            r.coverage_label(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_coverage_csv(path: &Path) -> Result<Vec<CoverageRow>, SentimentError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let bad = || SentimentError::InvalidPanel(format!("bad coverage row {rec:?}"));
        let pct = rec
            .get(3)
            .and_then(|p| p.trim_end_matches('%').parse().ok())
            .ok_or_else(bad)?;
        out.push(CoverageRow {
            etf: Symbol::new(rec.get(0).ok_or_else(bad)?).map_err(|_| bad())?,
            n_sentiment_days: rec.get(1).and_then(|v| v.parse().ok()).ok_or_else(bad)?,
            n_price_days: rec.get(2).and_then(|v| v.parse().ok()).ok_or_else(bad)?,
            coverage_pct: pct,
        });
    }
    Ok(out)
}
