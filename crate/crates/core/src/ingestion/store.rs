//! Line-delimited raw stores.
//!
//! Layout under the data root:
//!
//! ```text
//! raw/prices/<SYMBOL>.jsonl    header line + one line per trading day
//! raw/news/<urlkey>.record     one line per article
//! raw/news/skipped.jsonl       articles that could not be fetched or extracted
//! ```
//!
//! Price file, first line:
//! `{"count":N,"end":"YYYY-MM-DD","record":"price_header","schema_version":1,"sector":S,"start":"YYYY-MM-DD","symbol":SYM}`
//! followed by N lines of
//! `{"close":F,"date":"YYYY-MM-DD","record":"price","schema_version":1}`.
//!
//! Article record:
//! `{"body":B,"published_at":"YYYY-MM-DD","record":"article","related_etfs":[..],"schema_version":1,"title":T,"url":U}`.
//!
//! Keys are always written in sorted order so that re-running ingestion
//! reproduces the files byte for byte.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{ArticleMeta, DateWindow, EtfId, IngestError, PriceSeries, RawArticle, Symbol};
use crate::hashing::{canonical_json, url_key};

pub const RAW_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct PriceHeader {
    record: String,
    schema_version: u32,
    symbol: Symbol,
    sector: String,
    start: NaiveDate,
    end: NaiveDate,
    count: usize,
}

#[derive(Serialize, Deserialize)]
struct PriceRecord {
    record: String,
    schema_version: u32,
    date: NaiveDate,
    close: f64,
}

#[derive(Serialize, Deserialize)]
struct ArticleRecord {
    record: String,
    schema_version: u32,
    url: String,
    title: String,
    published_at: NaiveDate,
    related_etfs: Vec<Symbol>,
    body: String,
}

/// Raw store rooted at a data directory. Writes are serialized.
#[derive(Debug)]
pub struct RawStore {
    root: PathBuf,
    writer: Mutex<()>,
}

impl RawStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RawStore {
            root: root.into(),
            writer: Mutex::new(()),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn prices_path(&self, symbol: &Symbol) -> PathBuf {
        self.root.join("raw/prices").join(format!("{symbol}.jsonl"))
    }

    pub fn news_dir(&self) -> PathBuf {
        self.root.join("raw/news")
    }

    pub fn article_path(&self, url: &str) -> PathBuf {
        self.news_dir().join(format!("{}.record", url_key(url)))
    }

    pub fn skipped_path(&self) -> PathBuf {
        self.news_dir().join("skipped.jsonl")
    }

    pub fn write_prices(&self, series: &PriceSeries, window: DateWindow) -> Result<(), IngestError> {
        let mut out = String::new();
        let header = PriceHeader {
            record: "price_header".into(),
            schema_version: RAW_SCHEMA_VERSION,
            symbol: series.etf().symbol.clone(),
            sector: series.etf().sector.clone(),
            start: window.start,
            end: window.end,
            count: series.len(),
        };
        push_line(&mut out, &header)?;
        for (date, close) in series.dates().iter().zip(series.closes()) {
            push_line(
                &mut out,
                &PriceRecord {
                    record: "price".into(),
                    schema_version: RAW_SCHEMA_VERSION,
                    date: *date,
                    close: *close,
                },
            )?;
        }
        self.write_atomic(&self.prices_path(&series.etf().symbol), out.as_bytes())
    }

    /// Cached series for `symbol`, if one was stored for exactly `window`.
    pub fn read_prices(&self, symbol: &Symbol, window: DateWindow) -> Result<Option<PriceSeries>, IngestError> {
        let path = self.prices_path(symbol);
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path)?;
        let mut lines = text.lines();
        let header: PriceHeader = match lines.next() {
            Some(l) => parse_line(l, &path)?,
            None => return Ok(None),
        };
        check_version(header.schema_version, &path)?;
        if header.start != window.start || header.end != window.end {
            return Ok(None);
        }
        let mut dates = Vec::with_capacity(header.count);
        let mut closes = Vec::with_capacity(header.count);
        for line in lines {
            let rec: PriceRecord = parse_line(line, &path)?;
            check_version(rec.schema_version, &path)?;
            dates.push(rec.date);
            closes.push(rec.close);
        }
        if dates.len() != header.count {
            return Err(IngestError::Store(format!(
                "{}: header says {} rows, found {}",
                path.display(),
                header.count,
                dates.len()
            )));
        }
        let etf = EtfId {
            symbol: header.symbol,
            sector: header.sector,
        };
        PriceSeries::new(etf, dates, closes).map(Some)
    }

    /// Reads the most recent price file for `symbol` regardless of window.
    pub fn read_prices_any(&self, symbol: &Symbol) -> Result<Option<PriceSeries>, IngestError> {
        let path = self.prices_path(symbol);
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path)?;
        let header: PriceHeader = match text.lines().next() {
            Some(l) => parse_line(l, &path)?,
            None => return Ok(None),
        };
        self.read_prices(symbol, DateWindow::new(header.start, header.end)?)
    }

    pub fn write_article(&self, article: &RawArticle) -> Result<(), IngestError> {
        let rec = ArticleRecord {
            record: "article".into(),
            schema_version: RAW_SCHEMA_VERSION,
            url: article.meta.url.clone(),
            title: article.meta.title.clone(),
            published_at: article.meta.published_at,
            related_etfs: article.meta.related_etfs.iter().cloned().collect(),
            body: article.body.clone(),
        };
        let mut out = String::new();
        push_line(&mut out, &rec)?;
        self.write_atomic(&self.article_path(&article.meta.url), out.as_bytes())
    }

    pub fn read_article(&self, url: &str) -> Result<Option<RawArticle>, IngestError> {
        let path = self.article_path(url);
        if !path.exists() {
            return Ok(None);
        }
        read_article_file(&path).map(Some)
    }

    /// All stored articles, ordered by (publication date, url).
    pub fn read_all_articles(&self) -> Result<Vec<RawArticle>, IngestError> {
        read_corpus(&self.news_dir())
    }

    pub fn write_lines<T: Serialize>(&self, path: &Path, rows: &[T]) -> Result<(), IngestError> {
        let mut out = String::new();
        for r in rows {
            push_line(&mut out, r)?;
        }
        self.write_atomic(path, out.as_bytes())
    }

    fn write_atomic(&self, path: &Path, bytes: &[u8]) -> Result<(), IngestError> {
        let _guard = self.writer.lock().unwrap_or_else(|p| p.into_inner());
        write_atomic(path, bytes)
    }
}

/// Reads every `*.record` file in a corpus directory.
pub(crate) fn read_corpus(dir: &Path) -> Result<Vec<RawArticle>, IngestError> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) == Some("record") {
            out.push(read_article_file(&path)?);
        }
    }
    out.sort_by(|a, b| (a.meta.published_at, &a.meta.url).cmp(&(b.meta.published_at, &b.meta.url)));
    Ok(out)
}

fn read_article_file(path: &Path) -> Result<RawArticle, IngestError> {
    let text = std::fs::read_to_string(path)?;
    let line = text
        .lines()
        .next()
        .ok_or_else(|| IngestError::Store(format!("{}: empty record", path.display())))?;
    let rec: ArticleRecord = parse_line(line, path)?;
    check_version(rec.schema_version, path)?;
    let meta = ArticleMeta {
        url: rec.url,
        title: rec.title,
        published_at: rec.published_at,
        related_etfs: rec.related_etfs.into_iter().collect(),
    };
    RawArticle::new(meta, rec.body)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IngestError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn push_line<T: Serialize>(out: &mut String, value: &T) -> Result<(), IngestError> {
    let line = canonical_json(value).map_err(|e| IngestError::Store(e.to_string()))?;
    out.push_str(&line);
    out.push('\n');
    Ok(())
}

fn parse_line<T: for<'de> Deserialize<'de>>(line: &str, path: &Path) -> Result<T, IngestError> {
    serde_json::from_str(line).map_err(|e| IngestError::Store(format!("{}: {e}", path.display())))
}

fn check_version(v: u32, path: &Path) -> Result<(), IngestError> {
    if v != RAW_SCHEMA_VERSION {
        return Err(IngestError::Store(format!(
            "{}: schema version {v}, expected {RAW_SCHEMA_VERSION}",
            path.display()
        )));
    }
    Ok(())
}
