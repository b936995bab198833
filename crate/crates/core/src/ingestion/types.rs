use std::collections::BTreeSet;
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::IngestError;

/// Uppercase ticker symbol, `[A-Z0-9.]+`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Symbol(String);

impl Symbol {
    pub fn new(raw: impl Into<String>) -> Result<Self, IngestError> {
        let s: String = raw.into();
        let ok = !s.is_empty()
            && s.chars()
                .all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '.');
        if ok {
            Ok(Symbol(s))
        } else {
            Err(IngestError::InvalidSymbol(s))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Symbol {
    type Error = IngestError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        Symbol::new(s)
    }
}

impl From<Symbol> for String {
    fn from(s: Symbol) -> String {
        s.0
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// An ETF together with the sector it was assigned to.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EtfId {
    pub symbol: Symbol,
    pub sector: String,
}

/// Inclusive calendar date range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateWindow {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self, IngestError> {
        if start > end {
            return Err(IngestError::InvalidWindow { start, end });
        }
        Ok(DateWindow { start, end })
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d <= self.end
    }
}

/// Daily closes for one ETF on strictly increasing trading dates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    etf: EtfId,
    dates: Vec<NaiveDate>,
    closes: Vec<f64>,
}

impl PriceSeries {
    pub fn new(etf: EtfId, dates: Vec<NaiveDate>, closes: Vec<f64>) -> Result<Self, IngestError> {
        if dates.len() != closes.len() {
            return Err(IngestError::InvalidSeries(format!(
                "{} dates but {} closes",
                dates.len(),
                closes.len()
            )));
        }
        if dates.len() < 2 {
            return Err(IngestError::InvalidSeries(format!(
                "{}: need at least 2 closes, got {}",
                etf.symbol,
                dates.len()
            )));
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(IngestError::InvalidSeries(format!(
                "{}: dates not strictly increasing at {} -> {}",
                etf.symbol, w[0], w[1]
            )));
        }
        if let Some((d, c)) = dates.iter().zip(&closes).find(|(_, c)| !c.is_finite() || **c <= 0.0) {
            return Err(IngestError::InvalidSeries(format!(
                "{}: non-positive or non-finite close {c} on {d}",
                etf.symbol
            )));
        }
        Ok(PriceSeries { etf, dates, closes })
    }

    pub fn etf(&self) -> &EtfId {
        &self.etf
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn closes(&self) -> &[f64] {
        &self.closes
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArticleMeta {
    pub url: String,
    pub title: String,
    /// Publication date in the configured reference zone.
    pub published_at: NaiveDate,
    pub related_etfs: BTreeSet<Symbol>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawArticle {
    pub meta: ArticleMeta,
    pub body: String,
}

impl RawArticle {
    pub fn new(meta: ArticleMeta, body: String) -> Result<Self, IngestError> {
        if body.trim().is_empty() {
            return Err(IngestError::InvalidArticle(format!("{}: empty body", meta.url)));
        }
        if meta.related_etfs.is_empty() {
            return Err(IngestError::InvalidArticle(format!("{}: no related ETFs", meta.url)));
        }
        Ok(RawArticle { meta, body })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn etf() -> EtfId {
        EtfId {
            symbol: Symbol::new("XLF").unwrap(),
            sector: "financials".into(),
        }
    }

    #[test]
    fn symbol_validation() {
        assert!(Symbol::new("BRK.B").is_ok());
        assert!(Symbol::new("XLF").is_ok());
        assert!(Symbol::new("xlf").is_err());
        assert!(Symbol::new("").is_err());
        assert!(Symbol::new("X-F").is_err());
    }

    #[test]
    fn price_series_rejects_bad_input() {
        let dates = vec![d("2024-01-02"), d("2024-01-03")];
        assert!(PriceSeries::new(etf(), dates.clone(), vec![1.0, 2.0]).is_ok());
        assert!(PriceSeries::new(etf(), dates.clone(), vec![1.0, 0.0]).is_err());
        assert!(PriceSeries::new(etf(), dates.clone(), vec![1.0, f64::NAN]).is_err());
        assert!(PriceSeries::new(etf(), vec![d("2024-01-02")], vec![1.0]).is_err());
        assert!(PriceSeries::new(etf(), vec![d("2024-01-03"), d("2024-01-03")], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn window_order() {
        assert!(DateWindow::new(d("2024-01-03"), d("2024-01-02")).is_err());
        let w = DateWindow::new(d("2024-01-02"), d("2024-01-02")).unwrap();
        assert!(w.contains(d("2024-01-02")));
    }
}
