use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{AlignedPanel, PanelRow, SentimentError, SentimentScore};
use crate::ingestion::{ArticleMeta, PriceSeries, RawArticle, SectorMap, Symbol};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoredArticle {
    pub article: RawArticle,
    pub score: SentimentScore,
    pub sectors: BTreeSet<String>,
}

/// Sectors an article contributes to: the image of its related ETFs under
/// the sector map.
pub fn link_article_sectors(meta: &ArticleMeta, map: &SectorMap) -> Result<BTreeSet<String>, SentimentError> {
    meta.related_etfs
        .iter()
        .map(|sym| {
            map.lookup(sym.as_str())
                .map(str::to_string)
                .ok_or_else(|| SentimentError::MissingEtf(sym.to_string()))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DailySectorSentiment {
    pub date: NaiveDate,
    pub sector: String,
    pub mean_score: f64,
    pub article_count: usize,
    pub imputed: bool,
}

/// What happens to articles published on a date with no trading.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NonTradingDayPolicy {
    /// Join by exact calendar date; weekend and holiday articles are dropped.
    #[default]
    ExactDate,
    /// Move the article to the next date in the calendar.
    RollForward,
}

/// One record per (date, sector): the mean of contributing article scores,
/// or an imputed neutral zero when there are none.
pub fn aggregate_daily_sentiment(
    scored: &[ScoredArticle],
    sectors: &BTreeSet<String>,
    dates: &[NaiveDate],
    policy: NonTradingDayPolicy,
) -> Vec<DailySectorSentiment> {
    let calendar: BTreeSet<NaiveDate> = dates.iter().copied().collect();
    let mut sums: BTreeMap<(NaiveDate, &str), (i64, usize)> = BTreeMap::new();
    for a in scored {
        let published = a.article.meta.published_at;
        let date = match policy {
            NonTradingDayPolicy::ExactDate => calendar.get(&published).copied(),
            NonTradingDayPolicy::RollForward => calendar.range(published..).next().copied(),
        };
        let Some(date) = date else { continue };
        for sector in &a.sectors {
            if let Some(s) = sectors.get(sector) {
                let e = sums.entry((date, s.as_str())).or_default();
                e.0 += i64::from(a.score.value);
                e.1 += 1;
            }
        }
    }
    calendar
        .iter()
        .flat_map(|d| sectors.iter().map(move |s| (*d, s)))
        .map(|(date, sector)| match sums.get(&(date, sector.as_str())) {
            Some(&(sum, count)) => DailySectorSentiment {
                date,
                sector: sector.clone(),
                mean_score: sum as f64 / count as f64,
                article_count: count,
                imputed: false,
            },
            None => DailySectorSentiment {
                date,
                sector: sector.clone(),
                mean_score: 0.0,
                article_count: 0,
                imputed: true,
            },
        })
        .collect()
}

/// Join prices with the daily record of the ETF's sector on each trading
/// date.
pub fn merge_price_sentiment(
    prices: &PriceSeries,
    daily: &[DailySectorSentiment],
    map: &SectorMap,
) -> Result<AlignedPanel, SentimentError> {
    let etf = map
        .etf(&prices.etf().symbol)
        .map_err(|_| SentimentError::MissingEtf(prices.etf().symbol.to_string()))?;
    let by_date: BTreeMap<NaiveDate, &DailySectorSentiment> = daily
        .iter()
        .filter(|r| r.sector == etf.sector)
        .map(|r| (r.date, r))
        .collect();
    let rows = prices
        .dates()
        .iter()
        .zip(prices.closes())
        .map(|(date, close)| {
            let rec = by_date.get(date).ok_or_else(|| SentimentError::CoverageGap {
                date: *date,
                sector: etf.sector.clone(),
            })?;
            Ok(PanelRow {
                date: *date,
                close: *close,
                sentiment: rec.mean_score,
                imputed: rec.imputed,
            })
        })
        .collect::<Result<Vec<_>, SentimentError>>()?;
    AlignedPanel::new(etf, rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub etf: Symbol,
    pub n_sentiment_days: usize,
    pub n_price_days: usize,
    pub coverage_pct: f64,
}

impl CoverageRow {
    /// Percentage with two decimals and a percent sign, e.g. `12.61%`.
    pub fn coverage_label(&self) -> String {
        format!("{:.2}%", self.coverage_pct)
    }
}

/// `100 * n_sentiment / n_price` rounded half-up to two decimals, computed
/// in integer basis points so the rounding is exact.
pub fn coverage_pct(n_sentiment: usize, n_price: usize) -> f64 {
    if n_price == 0 {
        return 0.0;
    }
    let (s, p) = (n_sentiment as u128, n_price as u128);
    let basis_points = (20_000 * s + p) / (2 * p);
    basis_points as f64 / 100.0
}

pub fn coverage_report(panels: &[AlignedPanel]) -> Vec<CoverageRow> {
    panels
        .iter()
        .map(|p| {
            let n_sentiment_days = p.rows().iter().filter(|r| !r.imputed).count();
            let n_price_days = p.rows().len();
            CoverageRow {
                etf: p.etf().symbol.clone(),
                n_sentiment_days,
                n_price_days,
                coverage_pct: coverage_pct(n_sentiment_days, n_price_days),
            }
        })
        .collect()
}
