use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};

use chrono::{DateTime, NaiveDate};
use chrono_tz::Tz;

use super::{DateWindow, EtfId, IngestError, PriceSeries, RateLimitedHttp, RawStore, Symbol};

pub trait PriceSource: Send + Sync {
    fn name(&self) -> &str;

    /// Daily closes for `symbol`; may include dates outside `window` and
    /// duplicate dates, which the caller cleans up.
    fn fetch_closes(&self, symbol: &Symbol, window: DateWindow) -> Result<Vec<(NaiveDate, f64)>, IngestError>;
}

/// Reads `<dir>/<SYMBOL>.csv` with a `date,close` header.
pub struct FixturePriceSource {
    dir: PathBuf,
    calls: AtomicUsize,
}

impl FixturePriceSource {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FixturePriceSource {
            dir: dir.into(),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

#[derive(serde::Deserialize)]
struct CloseRow {
    date: NaiveDate,
    close: f64,
}

impl PriceSource for FixturePriceSource {
    fn name(&self) -> &str {
        "fixture-prices"
    }

    fn fetch_closes(&self, symbol: &Symbol, _window: DateWindow) -> Result<Vec<(NaiveDate, f64)>, IngestError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let path = self.dir.join(format!("{symbol}.csv"));
        if !path.exists() {
            return Err(IngestError::SourceUnreachable {
                source_name: self.name().into(),
                attempts: 1,
                detail: format!("no fixture at {}", path.display()),
            });
        }
        let mut rdr = csv::Reader::from_path(&path).map_err(|e| malformed(&path, e))?;
        rdr.deserialize::<CloseRow>()
            .map(|r| r.map(|row| (row.date, row.close)).map_err(|e| malformed(&path, e)))
            .collect()
    }
}

fn malformed(path: &std::path::Path, e: csv::Error) -> IngestError {
    IngestError::MalformedResponse {
        detail: format!("{}: {e}", path.display()),
        payload: std::fs::read_to_string(path).unwrap_or_default(),
    }
}

/// Generic daily-chart HTTP client.
///
/// `url_template` may contain `{symbol}`, `{period1}` and `{period2}` (unix
/// seconds of the window bounds). The response is expected in the common
/// chart layout: `chart.result[0].timestamp[]` with closes under
/// `chart.result[0].indicators.quote[0].close[]`; null closes are skipped.
pub struct HttpPriceSource {
    http: RateLimitedHttp,
    url_template: String,
    zone: Tz,
}

impl HttpPriceSource {
    pub fn new(http: RateLimitedHttp, url_template: impl Into<String>, zone: Tz) -> Self {
        HttpPriceSource {
            http,
            url_template: url_template.into(),
            zone,
        }
    }

    pub fn parse_chart(&self, payload: &str) -> Result<Vec<(NaiveDate, f64)>, IngestError> {
        let bad = |detail: &str| IngestError::MalformedResponse {
            detail: detail.to_string(),
            payload: payload.to_string(),
        };
        let v: serde_json::Value = serde_json::from_str(payload).map_err(|e| bad(&e.to_string()))?;
        let result = v
            .pointer("/chart/result/0")
            .ok_or_else(|| bad("missing chart.result[0]"))?;
        let ts = result
            .get("timestamp")
            .and_then(|t| t.as_array())
            .ok_or_else(|| bad("missing timestamp array"))?;
        let closes = result
            .pointer("/indicators/quote/0/close")
            .and_then(|c| c.as_array())
            .ok_or_else(|| bad("missing close array"))?;
        if ts.len() != closes.len() {
            return Err(bad("timestamp/close length mismatch"));
        }
        let mut out = Vec::with_capacity(ts.len());
        for (t, c) in ts.iter().zip(closes) {
            let Some(close) = c.as_f64() else { continue };
            let secs = t.as_i64().ok_or_else(|| bad("non-integer timestamp"))?;
            let dt = DateTime::from_timestamp(secs, 0).ok_or_else(|| bad("timestamp out of range"))?;
            out.push((dt.with_timezone(&self.zone).date_naive(), close));
        }
        Ok(out)
    }
}

impl PriceSource for HttpPriceSource {
    fn name(&self) -> &str {
        self.http.name()
    }

    fn fetch_closes(&self, symbol: &Symbol, window: DateWindow) -> Result<Vec<(NaiveDate, f64)>, IngestError> {
        let p1 = window.start.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp();
        let p2 = window
            .end
            .succ_opt()
            .unwrap_or(window.end)
            .and_hms_opt(0, 0, 0)
            .unwrap()
            .and_utc()
            .timestamp();
        let url = self
            .url_template
            .replace("{symbol}", symbol.as_str())
            .replace("{period1}", &p1.to_string())
            .replace("{period2}", &p2.to_string());
        let body = self.http.get_text(&url)?;
        self.parse_chart(&body)
    }
}

/// Fetch trading-day closes for `etf` within `window`, serving from the raw
/// store when an identical window was already persisted.
pub fn fetch_prices(
    etf: &EtfId,
    window: DateWindow,
    source: &dyn PriceSource,
    store: Option<&RawStore>,
) -> Result<PriceSeries, IngestError> {
    if let Some(store) = store {
        if let Some(cached) = store.read_prices(&etf.symbol, window)? {
            if cached.etf() == etf {
                return Ok(cached);
            }
        }
    }
    let mut rows: Vec<(NaiveDate, f64)> = source
        .fetch_closes(&etf.symbol, window)?
        .into_iter()
        .filter(|(d, _)| window.contains(*d))
        .collect();
    // stable sort keeps source order among equal dates; keep the last one
    rows.sort_by_key(|(d, _)| *d);
    let mut deduped: Vec<(NaiveDate, f64)> = Vec::with_capacity(rows.len());
    for row in rows {
        match deduped.last_mut() {
            Some(last) if last.0 == row.0 => *last = row,
            _ => deduped.push(row),
        }
    }
    if deduped.is_empty() {
        return Err(IngestError::EmptyRange {
            symbol: etf.symbol.to_string(),
            start: window.start,
            end: window.end,
        });
    }
    let (dates, closes): (Vec<_>, Vec<_>) = deduped.into_iter().unzip();
    let series = PriceSeries::new(etf.clone(), dates, closes)?;
    if let Some(store) = store {
        store.write_prices(&series, window)?;
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingestion::HttpConfig;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn xle() -> EtfId {
        EtfId {
            symbol: Symbol::new("XLE").unwrap(),
            sector: "energy".into(),
        }
    }

    fn fixture(dir: &std::path::Path) {
        std::fs::write(
            dir.join("XLE.csv"),
            "date,close\n2024-01-03,81.5\n2024-01-02,80.25\n2024-01-04,82.0\n2024-01-04,82.5\n2024-01-08,83.0\n",
        )
        .unwrap();
    }

    #[test]
    fn sorts_dedups_and_filters() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path());
        let src = FixturePriceSource::new(dir.path());
        let w = DateWindow::new(d("2024-01-02"), d("2024-01-05")).unwrap();
        let s = fetch_prices(&xle(), w, &src, None).unwrap();
        assert_eq!(s.dates(), &[d("2024-01-02"), d("2024-01-03"), d("2024-01-04")]);
        assert_eq!(s.closes(), &[80.25, 81.5, 82.5]);
    }

    #[test]
    fn non_trading_single_day_is_empty_range() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path());
        let src = FixturePriceSource::new(dir.path());
        let sat = d("2024-01-06");
        let w = DateWindow::new(sat, sat).unwrap();
        assert!(matches!(
            fetch_prices(&xle(), w, &src, None),
            Err(IngestError::EmptyRange { .. })
        ));
    }

    #[test]
    fn cache_hit_skips_source_and_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path());
        let store = RawStore::new(dir.path().join("data"));
        let src = FixturePriceSource::new(dir.path());
        let w = DateWindow::new(d("2024-01-01"), d("2024-01-31")).unwrap();
        let a = fetch_prices(&xle(), w, &src, Some(&store)).unwrap();
        let bytes = std::fs::read(store.prices_path(&xle().symbol)).unwrap();
        let b = fetch_prices(&xle(), w, &src, Some(&store)).unwrap();
        assert_eq!(a, b);
        assert_eq!(src.calls(), 1);
        assert_eq!(bytes, std::fs::read(store.prices_path(&xle().symbol)).unwrap());
    }

    #[test]
    fn chart_payload_parsing() {
        let http = RateLimitedHttp::new("t", HttpConfig::default()).unwrap();
        let src = HttpPriceSource::new(http, "http://unused/{symbol}", chrono_tz::America::New_York);
        // 2024-01-02 14:30 UTC and 2024-01-03 14:30 UTC
        let payload = r#"{"chart":{"result":[{"timestamp":[1704205800,1704292200,1704378600],
            "indicators":{"quote":[{"close":[10.5,null,11.0]}]}}]}}"#;
        let rows = src.parse_chart(payload).unwrap();
        assert_eq!(rows, vec![(d("2024-01-02"), 10.5), (d("2024-01-04"), 11.0)]);
        assert!(matches!(
            src.parse_chart("{\"chart\":{}}"),
            Err(IngestError::MalformedResponse { payload, .. }) if payload.contains("chart")
        ));
    }
}
