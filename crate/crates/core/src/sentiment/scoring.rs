use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{link_article_sectors, ScoredArticle, SentimentError};
use crate::hashing::{canonical_json, url_key};
use crate::ingestion::{IngestError, RateLimitedHttp, RawArticle, SectorMap};

pub const SCORE_MIN: i32 = -10;
pub const SCORE_MAX: i32 = 10;

/// Delimiters around the article text inside the user message.
pub const ARTICLE_START: &str = "<<<ARTICLE>>>";
pub const ARTICLE_END: &str = "<<<END ARTICLE>>>";

const CACHE_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentimentScore {
    pub value: i32,
    pub reason: String,
    pub model_id: String,
    pub scored_at: DateTime<Utc>,
}

/// One request to a scoring client.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoringPrompt {
    pub system: String,
    pub user: String,
    /// JSON schema the reply must satisfy.
    pub schema: serde_json::Value,
}

pub trait ScoringClient: Send + Sync {
    fn model_id(&self) -> &str;
    /// Raw reply text, expected to be a JSON object `{score, reason}`.
    fn complete(&self, prompt: &ScoringPrompt) -> Result<String, SentimentError>;
}

/// Versioned prompt. The version is part of every cache key.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub version: String,
    pub system: String,
    /// `{title}` and `{body}` are substituted.
    pub user: String,
}

impl PromptTemplate {
    pub fn v1() -> Self {
        PromptTemplate {
            version: "v1".into(),
            system: "You rate the market sentiment of financial news for the sectors it \
                     discusses. Reply only with a JSON object containing an integer \
                     \"score\" from -10 (very bearish) to 10 (very bullish) and a short \
                     \"reason\" naming the evidence in the article."
                .into(),
            user: format!("Title: {{title}}\n{ARTICLE_START}\n{{body}}\n{ARTICLE_END}"),
        }
    }

    pub fn schema() -> serde_json::Value {
        serde_json::json!({
            "type": "object",
            "properties": {
                "score": {"type": "integer", "minimum": SCORE_MIN, "maximum": SCORE_MAX},
                "reason": {"type": "string", "minLength": 1}
            },
            "required": ["score", "reason"],
            "additionalProperties": false
        })
    }

    pub fn render(&self, article: &RawArticle) -> ScoringPrompt {
        ScoringPrompt {
            system: self.system.clone(),
            user: self
                .user
                .replace("{title}", &article.meta.title)
                .replace("{body}", &article.body),
            schema: Self::schema(),
        }
    }

    /// Follow-up request after an invalid reply.
    pub fn repair(&self, previous: &ScoringPrompt, reply: &str, error: &str) -> ScoringPrompt {
        let mut next = previous.clone();
        next.user.push_str(&format!(
            "\n\nYour previous reply was rejected.\nReply: {reply}\nProblem: {error}\n\
             Answer again with a JSON object whose \"score\" is an integer between \
             {SCORE_MIN} and {SCORE_MAX} and whose \"reason\" is non-empty."
        ));
        next
    }
}

/// Validate a raw reply; returns `(score, reason)` or a message describing
/// the violation.
pub fn parse_score_response(raw: &str) -> Result<(i32, String), String> {
    let v: serde_json::Value = serde_json::from_str(raw.trim()).map_err(|e| format!("not valid JSON: {e}"))?;
    let obj = v.as_object().ok_or("reply is not a JSON object")?;
    let score = obj.get("score").ok_or("missing \"score\"")?;
    let score = score
        .as_i64()
        .ok_or_else(|| format!("\"score\" must be an integer, got {score}"))?;
    if !(SCORE_MIN as i64..=SCORE_MAX as i64).contains(&score) {
        return Err(format!("\"score\" {score} outside [{SCORE_MIN}, {SCORE_MAX}]"));
    }
    let reason = obj
        .get("reason")
        .and_then(|r| r.as_str())
        .ok_or("missing string \"reason\"")?
        .trim();
    if reason.is_empty() {
        return Err("\"reason\" is empty".into());
    }
    Ok((score as i32, reason.to_string()))
}

#[derive(Serialize, Deserialize)]
struct CacheRecord {
    schema_version: u32,
    url: String,
    prompt_version: String,
    model_id: String,
    raw_response: String,
    scored_at: DateTime<Utc>,
}

type Clock = Box<dyn Fn() -> DateTime<Utc> + Send + Sync>;

/// Scores articles through a client with validation, repair re-asks and a
/// response cache keyed by (url, prompt version, model id).
pub struct Scorer<'a> {
    client: &'a dyn ScoringClient,
    template: PromptTemplate,
    cache_dir: Option<PathBuf>,
    repair_retries: u32,
    clock: Clock,
}

impl<'a> Scorer<'a> {
    pub fn new(client: &'a dyn ScoringClient, template: PromptTemplate) -> Self {
        Scorer {
            client,
            template,
            cache_dir: None,
            repair_retries: 2,
            clock: Box::new(Utc::now),
        }
    }

    pub fn with_cache(mut self, dir: impl Into<PathBuf>) -> Self {
        self.cache_dir = Some(dir.into());
        self
    }

    pub fn with_repair_retries(mut self, n: u32) -> Self {
        self.repair_retries = n;
        self
    }

    pub fn with_clock(mut self, clock: impl Fn() -> DateTime<Utc> + Send + Sync + 'static) -> Self {
        self.clock = Box::new(clock);
        self
    }

    pub fn template(&self) -> &PromptTemplate {
        &self.template
    }

    pub fn cache_path(&self, url: &str) -> Option<PathBuf> {
        let model: String = self
            .client
            .model_id()
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        self.cache_dir
            .as_ref()
            .map(|d| d.join(format!("{}__{}__{}.json", url_key(url), self.template.version, model)))
    }

    pub fn score(&self, article: &RawArticle) -> Result<SentimentScore, SentimentError> {
        if article.body.trim().is_empty() {
            return Err(SentimentError::EmptyBody(article.meta.url.clone()));
        }
        let cache_path = self.cache_path(&article.meta.url);
        if let Some(path) = cache_path.as_ref().filter(|p| p.exists()) {
            let text = std::fs::read_to_string(path)?;
            let rec: CacheRecord =
                serde_json::from_str(&text).map_err(|e| SentimentError::Cache(format!("{}: {e}", path.display())))?;
            if rec.schema_version == CACHE_SCHEMA_VERSION {
                let (value, reason) = parse_score_response(&rec.raw_response)
                    .map_err(|e| SentimentError::Cache(format!("{}: {e}", path.display())))?;
                return Ok(SentimentScore {
                    value,
                    reason,
                    model_id: rec.model_id,
                    scored_at: rec.scored_at,
                });
            }
        }

        let mut prompt = self.template.render(article);
        let mut attempts = 0;
        loop {
            attempts += 1;
            let raw = self.client.complete(&prompt)?;
            match parse_score_response(&raw) {
                Ok((value, reason)) => {
                    let score = SentimentScore {
                        value,
                        reason,
                        model_id: self.client.model_id().to_string(),
                        scored_at: (self.clock)(),
                    };
                    if let Some(path) = cache_path {
                        let rec = CacheRecord {
                            schema_version: CACHE_SCHEMA_VERSION,
                            url: article.meta.url.clone(),
                            prompt_version: self.template.version.clone(),
                            model_id: score.model_id.clone(),
                            raw_response: raw,
                            scored_at: score.scored_at,
                        };
                        let json = canonical_json(&rec).map_err(|e| SentimentError::Cache(e.to_string()))?;
                        crate::ingestion::write_atomic(&path, json.as_bytes())
                            .map_err(|e| SentimentError::Cache(e.to_string()))?;
                    }
                    return Ok(score);
                }
                Err(problem) if attempts <= self.repair_retries => {
                    log::debug!("{}: repairing reply ({problem})", article.meta.url);
                    prompt = self.template.repair(&prompt, &raw, &problem);
                }
                Err(problem) => {
                    return Err(SentimentError::SchemaViolation {
                        url: article.meta.url.clone(),
                        attempts,
                        last_error: problem,
                    })
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnscoredArticle {
    pub url: String,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct ScoringReport {
    pub scored: Vec<ScoredArticle>,
    pub unscored: Vec<UnscoredArticle>,
}

/// Score every article, linking each to its sectors. Schema violations mark
/// the article unscored; an unreachable client aborts the run.
pub fn score_corpus(
    articles: &[RawArticle],
    scorer: &Scorer<'_>,
    map: &SectorMap,
    parallelism: usize,
) -> Result<ScoringReport, SentimentError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| SentimentError::Cache(e.to_string()))?;
    let results: Vec<Result<SentimentScore, SentimentError>> =
        pool.install(|| articles.par_iter().map(|a| scorer.score(a)).collect());
    let mut report = ScoringReport::default();
    for (article, res) in articles.iter().zip(results) {
        match res {
            Ok(score) => {
                let sectors = link_article_sectors(&article.meta, map)?;
                report.scored.push(ScoredArticle {
                    article: article.clone(),
                    score,
                    sectors,
                });
            }
            Err(e @ (SentimentError::SchemaViolation { .. } | SentimentError::EmptyBody(_))) => {
                log::warn!("unscored: {e}");
                report.unscored.push(UnscoredArticle {
                    url: article.meta.url.clone(),
                    reason: e.to_string(),
                })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}

const POSITIVE: &[&str] = &[
    "surge",
    "soar",
    "rally",
    "rallie",
    "gain",
    "record",
    "beat",
    "growth",
    "grow",
    "rise",
    "rising",
    "strong",
    "upgrade",
    "profit",
    "boom",
    "jump",
    "climb",
    "outperform",
    "bull",
    "optimis",
    "recover",
    "rebound",
    "expand",
];
const NEGATIVE: &[&str] = &[
    "plunge",
    "slump",
    "fall",
    "fell",
    "loss",
    "lose",
    "losing",
    "decline",
    "drop",
    "miss",
    "weak",
    "downgrade",
    "crash",
    "bear",
    "pessimis",
    "layoff",
    "tumble",
    "sink",
    "sank",
    "recession",
    "fear",
    "selloff",
    "sell-off",
    "default",
    "slide",
    "slid",
];

/// Deterministic offline client: scores by counting lexicon hits inside the
/// article delimiters. Each net hit is worth two points, clamped to the
/// score range.
#[derive(Debug, Default)]
pub struct MockLexiconClient {
    calls: AtomicUsize,
}

impl MockLexiconClient {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn score_text(text: &str) -> (i32, String) {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for token in text
            .split(|c: char| !(c.is_alphanumeric() || c == '-'))
            .filter(|t| !t.is_empty())
        {
            let t = token.to_lowercase();
            if POSITIVE.iter().any(|s| t.starts_with(s)) {
                pos.push(t);
            } else if NEGATIVE.iter().any(|s| t.starts_with(s)) {
                neg.push(t);
            }
        }
        let score = (2 * (pos.len() as i32 - neg.len() as i32)).clamp(SCORE_MIN, SCORE_MAX);
        let reason = format!(
            "{} positive term(s) [{}], {} negative term(s) [{}]",
            pos.len(),
            pos.join(", "),
            neg.len(),
            neg.join(", ")
        );
        (score, reason)
    }
}

impl ScoringClient for MockLexiconClient {
    fn model_id(&self) -> &str {
        "mock-lexicon-v1"
    }

    fn complete(&self, prompt: &ScoringPrompt) -> Result<String, SentimentError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let text = prompt
            .user
            .split_once(ARTICLE_START)
            .and_then(|(_, rest)| rest.split_once(ARTICLE_END))
            .map(|(body, _)| body)
            .unwrap_or(&prompt.user);
        let (score, reason) = Self::score_text(text);
        Ok(serde_json::json!({"score": score, "reason": reason}).to_string())
    }
}

/// Chat-completions style client with structured (JSON schema) output.
pub struct HttpChatClient {
    http: RateLimitedHttp,
    endpoint: String,
    model: String,
    api_key: Option<String>,
}

impl HttpChatClient {
    /// Environment variable holding the API credential.
    pub const API_KEY_ENV: &'static str = "ETFCAST_LLM_API_KEY";

    pub fn new(http: RateLimitedHttp, endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        HttpChatClient {
            http,
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: std::env::var(Self::API_KEY_ENV).ok(),
        }
    }

    pub fn request_body(&self, prompt: &ScoringPrompt) -> serde_json::Value {
        serde_json::json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": prompt.system},
                {"role": "user", "content": prompt.user}
            ],
            "response_format": {
                "type": "json_schema",
                "json_schema": {"name": "sentiment_score", "strict": true, "schema": prompt.schema}
            }
        })
    }
}

impl ScoringClient for HttpChatClient {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn complete(&self, prompt: &ScoringPrompt) -> Result<String, SentimentError> {
        let body = self.request_body(prompt);
        let raw = self
            .http
            .post_json(&self.endpoint, &body, self.api_key.as_deref())
            .map_err(|e| match e {
                IngestError::SourceUnreachable { .. } => SentimentError::ClientUnreachable(e.to_string()),
                other => SentimentError::ClientUnreachable(other.to_string()),
            })?;
        let v: serde_json::Value = serde_json::from_str(&raw)
            .map_err(|e| SentimentError::ClientUnreachable(format!("unparseable reply envelope: {e}")))?;
        // content that is not the expected envelope is passed on so that the
        // validator can ask for a repair
        Ok(v.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .unwrap_or(raw))
    }
}
