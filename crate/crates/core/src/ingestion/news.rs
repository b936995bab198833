use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};

use chrono::{DateTime, NaiveDate, NaiveDateTime, TimeZone};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use super::{ArticleMeta, DateWindow, IngestError, RateLimitedHttp, RawArticle, RawStore, Symbol};
use crate::hashing::url_key;

/// Article metadata as delivered by a source, before normalization.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawMetaRecord {
    pub url: String,
    pub title: String,
    /// RFC 3339 timestamp, `YYYY-MM-DD HH:MM:SS` in the reference zone, or a
    /// bare date.
    pub published_at: String,
    #[serde(default)]
    pub related_etfs: Vec<String>,
}

pub trait NewsSource: Send + Sync {
    fn name(&self) -> &str;
    fn search(&self, symbol: &Symbol, window: DateWindow) -> Result<Vec<RawMetaRecord>, IngestError>;
    /// Raw page payload for an article URL.
    fn fetch_page(&self, url: &str) -> Result<String, IngestError>;
}

/// Truncates publication timestamps to calendar dates in one reference zone.
#[derive(Clone, Copy, Debug)]
pub struct DateNormalizer {
    pub zone: Tz,
}

impl Default for DateNormalizer {
    fn default() -> Self {
        DateNormalizer {
            zone: chrono_tz::America::New_York,
        }
    }
}

impl DateNormalizer {
    pub fn normalize(&self, raw: &str) -> Option<NaiveDate> {
        let raw = raw.trim();
        if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
            return Some(dt.with_timezone(&self.zone).date_naive());
        }
        for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S"] {
            if let Ok(naive) = NaiveDateTime::parse_from_str(raw, fmt) {
                return self
                    .zone
                    .from_local_datetime(&naive)
                    .earliest()
                    .map(|dt| dt.date_naive());
            }
        }
        NaiveDate::parse_from_str(raw, "%Y-%m-%d").ok()
    }
}

/// Pulls the article body out of a page: text of the first element matching
/// `selector`, whitespace-normalized.
#[derive(Clone, Debug)]
pub struct BodyExtractor {
    selector: scraper::Selector,
}

impl Default for BodyExtractor {
    fn default() -> Self {
        BodyExtractor::new("article").expect("static selector")
    }
}

impl BodyExtractor {
    pub fn new(selector: &str) -> Result<Self, IngestError> {
        scraper::Selector::parse(selector)
            .map(|selector| BodyExtractor { selector })
            .map_err(|e| IngestError::SectorConfig(format!("bad selector {selector:?}: {e}")))
    }

    pub fn extract(&self, page: &str) -> Option<String> {
        let doc = scraper::Html::parse_document(page);
        let el = doc.select(&self.selector).next()?;
        let text = el.text().collect::<Vec<_>>().join(" ");
        let normalized = text.split_whitespace().collect::<Vec<_>>().join(" ");
        (!normalized.is_empty()).then_some(normalized)
    }
}

/// File fixture:
///
/// ```text
/// <dir>/search/<SYMBOL>.json    JSON array of RawMetaRecord
/// <dir>/pages/<urlkey>.html     page payload, urlkey = first 16 hex of sha256(url)
/// ```
pub struct FixtureNewsSource {
    dir: PathBuf,
    searches: AtomicUsize,
    page_fetches: AtomicUsize,
}

impl FixtureNewsSource {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FixtureNewsSource {
            dir: dir.into(),
            searches: AtomicUsize::new(0),
            page_fetches: AtomicUsize::new(0),
        }
    }

    pub fn search_calls(&self) -> usize {
        self.searches.load(Ordering::SeqCst)
    }

    pub fn page_calls(&self) -> usize {
        self.page_fetches.load(Ordering::SeqCst)
    }

    pub fn page_path(&self, url: &str) -> PathBuf {
        self.dir.join("pages").join(format!("{}.html", url_key(url)))
    }
}

impl NewsSource for FixtureNewsSource {
    fn name(&self) -> &str {
        "fixture-news"
    }

    fn search(&self, symbol: &Symbol, _window: DateWindow) -> Result<Vec<RawMetaRecord>, IngestError> {
        self.searches.fetch_add(1, Ordering::SeqCst);
        let path = self.dir.join("search").join(format!("{symbol}.json"));
        if !path.exists() {
            return Ok(Vec::new());
        }
        let payload = std::fs::read_to_string(&path)?;
        serde_json::from_str(&payload).map_err(|e| IngestError::MalformedResponse {
            detail: format!("{}: {e}", path.display()),
            payload,
        })
    }

    fn fetch_page(&self, url: &str) -> Result<String, IngestError> {
        self.page_fetches.fetch_add(1, Ordering::SeqCst);
        let path = self.page_path(url);
        std::fs::read_to_string(&path).map_err(|e| IngestError::SourceUnreachable {
            source_name: self.name().into(),
            attempts: 1,
            detail: format!("{}: {e}", path.display()),
        })
    }
}

/// Field mapping for a JSON search endpoint.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpNewsSourceConfig {
    /// May contain `{symbol}`, `{start}` and `{end}` (ISO dates).
    pub search_url: String,
    /// JSON pointer to the array of result objects.
    pub results_pointer: String,
    pub url_field: String,
    pub title_field: String,
    pub date_field: String,
    /// Optional field with an array of related tickers.
    pub related_field: Option<String>,
}

impl Default for HttpNewsSourceConfig {
    fn default() -> Self {
        HttpNewsSourceConfig {
            search_url: String::new(),
            results_pointer: "/data/rows".into(),
            url_field: "url".into(),
            title_field: "title".into(),
            date_field: "published_at".into(),
            related_field: None,
        }
    }
}

pub struct HttpNewsSource {
    http: RateLimitedHttp,
    config: HttpNewsSourceConfig,
}

impl HttpNewsSource {
    pub fn new(http: RateLimitedHttp, config: HttpNewsSourceConfig) -> Self {
        HttpNewsSource { http, config }
    }

    pub fn parse_search(&self, symbol: &Symbol, payload: &str) -> Result<Vec<RawMetaRecord>, IngestError> {
        let bad = |detail: String| IngestError::MalformedResponse {
            detail,
            payload: payload.to_string(),
        };
        let v: serde_json::Value = serde_json::from_str(payload).map_err(|e| bad(e.to_string()))?;
        let rows = v
            .pointer(&self.config.results_pointer)
            .and_then(|r| r.as_array())
            .ok_or_else(|| bad(format!("no array at {}", self.config.results_pointer)))?;
        let field = |row: &serde_json::Value, name: &str| -> Result<String, IngestError> {
            row.get(name)
                .and_then(|x| x.as_str())
                .map(str::to_string)
                .ok_or_else(|| bad(format!("result missing string field {name:?}")))
        };
        rows.iter()
            .map(|row| {
                let related = match &self.config.related_field {
                    Some(f) => row
                        .get(f)
                        .and_then(|x| x.as_array())
                        .map(|a| a.iter().filter_map(|s| s.as_str().map(str::to_string)).collect())
                        .unwrap_or_default(),
                    None => vec![symbol.to_string()],
                };
                Ok(RawMetaRecord {
                    url: field(row, &self.config.url_field)?,
                    title: field(row, &self.config.title_field)?,
                    published_at: field(row, &self.config.date_field)?,
                    related_etfs: related,
                })
            })
            .collect()
    }
}

impl NewsSource for HttpNewsSource {
    fn name(&self) -> &str {
        self.http.name()
    }

    fn search(&self, symbol: &Symbol, window: DateWindow) -> Result<Vec<RawMetaRecord>, IngestError> {
        let url = self
            .config
            .search_url
            .replace("{symbol}", symbol.as_str())
            .replace("{start}", &window.start.to_string())
            .replace("{end}", &window.end.to_string());
        let payload = self.http.get_text(&url)?;
        self.parse_search(symbol, &payload)
    }

    fn fetch_page(&self, url: &str) -> Result<String, IngestError> {
        self.http.get_text(url)
    }
}

/// Metadata for articles about `symbol` published inside `window`,
/// deduplicated by url (first occurrence wins, related ETFs are unioned).
pub fn list_articles(
    symbol: &Symbol,
    window: DateWindow,
    source: &dyn NewsSource,
    dates: &DateNormalizer,
) -> Result<Vec<ArticleMeta>, IngestError> {
    let raw = source.search(symbol, window)?;
    let mut out: Vec<ArticleMeta> = Vec::with_capacity(raw.len());
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for rec in raw {
        let payload = || serde_json::to_string(&rec).unwrap_or_default();
        let published_at = dates
            .normalize(&rec.published_at)
            .ok_or_else(|| IngestError::MalformedResponse {
                detail: format!("unparseable publication time {:?}", rec.published_at),
                payload: payload(),
            })?;
        if rec.url.trim().is_empty() {
            return Err(IngestError::MalformedResponse {
                detail: "empty url".into(),
                payload: payload(),
            });
        }
        if !window.contains(published_at) {
            continue;
        }
        let mut related = BTreeSet::new();
        related.insert(symbol.clone());
        for r in &rec.related_etfs {
            related.insert(Symbol::new(r.trim().to_ascii_uppercase())?);
        }
        match index.get(&rec.url) {
            Some(&i) => out[i].related_etfs.extend(related),
            None => {
                index.insert(rec.url.clone(), out.len());
                out.push(ArticleMeta {
                    url: rec.url,
                    title: rec.title,
                    published_at,
                    related_etfs: related,
                });
            }
        }
    }
    Ok(out)
}

/// Full article for `meta`. A persisted record is returned as-is without
/// touching the source.
pub fn fetch_article_body(
    meta: &ArticleMeta,
    source: &dyn NewsSource,
    store: Option<&RawStore>,
    extractor: &BodyExtractor,
) -> Result<RawArticle, IngestError> {
    if let Some(store) = store {
        if let Some(article) = store.read_article(&meta.url)? {
            return Ok(article);
        }
    }
    let page = source.fetch_page(&meta.url)?;
    let body = extractor
        .extract(&page)
        .ok_or_else(|| IngestError::ExtractionFailed { url: meta.url.clone() })?;
    let article = RawArticle::new(meta.clone(), body)?;
    if let Some(store) = store {
        store.write_article(&article)?;
    }
    Ok(article)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub url: String,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct NewsIngestReport {
    pub articles: Vec<RawArticle>,
    pub skipped: Vec<SkipRecord>,
}

/// Corpus run over several symbols. Per-article failures become skips; only
/// search failures abort.
pub fn ingest_news(
    symbols: &[Symbol],
    window: DateWindow,
    source: &dyn NewsSource,
    store: &RawStore,
    dates: &DateNormalizer,
    extractor: &BodyExtractor,
) -> Result<NewsIngestReport, IngestError> {
    let mut metas: BTreeMap<String, ArticleMeta> = BTreeMap::new();
    for sym in symbols {
        for meta in list_articles(sym, window, source, dates)? {
            metas
                .entry(meta.url.clone())
                .and_modify(|m| m.related_etfs.extend(meta.related_etfs.iter().cloned()))
                .or_insert(meta);
        }
    }
    let mut report = NewsIngestReport::default();
    for meta in metas.values() {
        // a stored record whose related set grew must be rewritten
        if let Some(stored) = store.read_article(&meta.url)? {
            if stored.meta.related_etfs != meta.related_etfs {
                let merged = RawArticle::new(meta.clone(), stored.body)?;
                store.write_article(&merged)?;
                report.articles.push(merged);
            } else {
                report.articles.push(stored);
            }
            continue;
        }
        match fetch_article_body(meta, source, Some(store), extractor) {
            Ok(a) => report.articles.push(a),
            Err(e @ (IngestError::ExtractionFailed { .. } | IngestError::SourceUnreachable { .. })) => {
                log::warn!("skipping {}: {e}", meta.url);
                report.skipped.push(SkipRecord {
                    url: meta.url.clone(),
                    reason: e.to_string(),
                });
            }
            Err(e) => return Err(e),
        }
    }
    report
        .articles
        .sort_by(|a, b| (a.meta.published_at, &a.meta.url).cmp(&(b.meta.published_at, &b.meta.url)));
    store.write_lines(&store.skipped_path(), &report.skipped)?;
    Ok(report)
}
