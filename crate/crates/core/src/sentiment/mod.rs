//! Article scoring, sector linking, daily aggregation and panel assembly.

mod aggregate;
mod panel;
mod scoring;

pub use aggregate::{
    aggregate_daily_sentiment, coverage_pct, coverage_report, link_article_sectors, merge_price_sentiment, CoverageRow,
    DailySectorSentiment, NonTradingDayPolicy, ScoredArticle,
};
pub use panel::{read_coverage_csv, read_panel_csv, write_coverage_csv, write_panel_csv, AlignedPanel, PanelRow};
pub use scoring::{
    parse_score_response, score_corpus, HttpChatClient, MockLexiconClient, PromptTemplate, Scorer, ScoringClient,
    ScoringPrompt, ScoringReport, SentimentScore, UnscoredArticle, ARTICLE_END, ARTICLE_START, SCORE_MAX, SCORE_MIN,
};

use chrono::NaiveDate;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SentimentError {
    #[error("{url}: response failed validation after {attempts} attempt(s): {last_error}")]
    SchemaViolation {
        url: String,
        attempts: u32,
        last_error: String,
    },
    #[error("scoring client unreachable: {0}")]
    ClientUnreachable(String),
    #[error("{0}: article body is empty")]
    EmptyBody(String),
    #[error("ETF {0} missing from sector map")]
    MissingEtf(String),
    #[error("no daily sentiment record for {sector} on {date}")]
    CoverageGap { date: NaiveDate, sector: String },
    #[error("invalid panel: {0}")]
    InvalidPanel(String),
    #[error("score cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl SentimentError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, SentimentError::ClientUnreachable(_))
    }
}
