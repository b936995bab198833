//! Price and news ingestion.
//!
//! Sources are traits with two shipped implementations each: a deterministic
//! file fixture and a generic rate-limited HTTP client. Everything fetched is
//! persisted to a [`RawStore`] so that re-runs are served from disk.

mod http;
mod news;
mod prices;
mod sector;
mod store;
mod types;

pub use http::{HttpConfig, RateLimitedHttp};
pub use news::{
    fetch_article_body, ingest_news, list_articles, BodyExtractor, DateNormalizer, FixtureNewsSource, HttpNewsSource,
    HttpNewsSourceConfig, NewsIngestReport, NewsSource, RawMetaRecord, SkipRecord,
};
pub use prices::{fetch_prices, FixturePriceSource, HttpPriceSource, PriceSource};
pub use sector::{load_sector_map, parse_sector_map, SectorMap};
pub(crate) use store::write_atomic;
pub use store::{RawStore, RAW_SCHEMA_VERSION};
pub use types::{ArticleMeta, DateWindow, EtfId, PriceSeries, RawArticle, Symbol};

use chrono::NaiveDate;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("source {source_name} unreachable after {attempts} attempt(s): {detail}")]
    SourceUnreachable {
        source_name: String,
        attempts: u32,
        detail: String,
    },
    #[error("no trading days for {symbol} in {start}..={end}")]
    EmptyRange {
        symbol: String,
        start: NaiveDate,
        end: NaiveDate,
    },
    #[error("malformed response: {detail}")]
    MalformedResponse { detail: String, payload: String },
    #[error("no article body found at {url}")]
    ExtractionFailed { url: String },
    #[error("invalid symbol {0:?}")]
    InvalidSymbol(String),
    #[error("invalid window: start {start} is after end {end}")]
    InvalidWindow { start: NaiveDate, end: NaiveDate },
    #[error("invalid price series: {0}")]
    InvalidSeries(String),
    #[error("invalid article: {0}")]
    InvalidArticle(String),
    #[error("ETF {0} missing from sector map")]
    MissingEtf(String),
    #[error("ETF {0} listed more than once in sector map")]
    DuplicateEtf(String),
    #[error("sector map: {0}")]
    SectorConfig(String),
    #[error("raw store: {0}")]
    Store(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl IngestError {
    /// Whether a caller may reasonably retry the operation later.
    pub fn is_retryable(&self) -> bool {
        matches!(self, IngestError::SourceUnreachable { .. })
    }
}

/// First and last day of the default study period.
pub fn default_study_window() -> DateWindow {
    DateWindow::new(
        NaiveDate::from_ymd_opt(2024, 1, 2).unwrap(),
        NaiveDate::from_ymd_opt(2025, 9, 23).unwrap(),
    )
    .expect("static window is ordered")
}
