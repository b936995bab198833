use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::IngestError;

/// Settings shared by the HTTP source skeletons.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    /// Extra request headers, e.g. a user agent.
    pub headers: Vec<(String, String)>,
    /// Additional attempts after the first failure.
    pub retries: u32,
    /// Backoff before retry `k` is `backoff_base_ms * 2^k`.
    pub backoff_base_ms: u64,
    /// Minimum spacing between consecutive requests from one client.
    pub request_delay_ms: u64,
    pub timeout_ms: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            headers: vec![("User-Agent".into(), "etfcast/0.1".into())],
            retries: 3,
            backoff_base_ms: 500,
            request_delay_ms: 1000,
            timeout_ms: 30_000,
        }
    }
}

/// Blocking HTTP client with a per-client rate limit and retry budget.
pub struct RateLimitedHttp {
    name: String,
    client: reqwest::blocking::Client,
    config: HttpConfig,
    last_request: Mutex<Option<Instant>>,
}

impl RateLimitedHttp {
    pub fn new(name: impl Into<String>, config: HttpConfig) -> Result<Self, IngestError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| IngestError::SourceUnreachable {
                source_name: "http".into(),
                attempts: 0,
                detail: e.to_string(),
            })?;
        Ok(RateLimitedHttp {
            name: name.into(),
            client,
            config,
            last_request: Mutex::new(None),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    fn wait_turn(&self) {
        let mut last = self.last_request.lock().unwrap_or_else(|p| p.into_inner());
        let delay = Duration::from_millis(self.config.request_delay_ms);
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < delay {
                thread::sleep(delay - elapsed);
            }
        }
        *last = Some(Instant::now());
    }

    fn send(&self, build: &dyn Fn() -> reqwest::blocking::RequestBuilder) -> Result<String, IngestError> {
        let attempts = self.config.retries + 1;
        let mut last_err = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let backoff = self.config.backoff_base_ms.saturating_mul(1 << (attempt - 1).min(16));
                thread::sleep(Duration::from_millis(backoff));
            }
            self.wait_turn();
            let mut req = build();
            for (k, v) in &self.config.headers {
                req = req.header(k.as_str(), v.as_str());
            }
            match req.send() {
                Ok(resp) if resp.status().is_success() => {
                    return resp.text().map_err(|e| IngestError::SourceUnreachable {
                        source_name: self.name.clone(),
                        attempts: attempt + 1,
                        detail: e.to_string(),
                    });
                }
                Ok(resp) => {
                    last_err = format!("HTTP {}", resp.status().as_u16());
                    log::warn!("{}: attempt {} failed: {last_err}", self.name, attempt + 1);
                }
                Err(e) => {
                    last_err = e.to_string();
                    log::warn!("{}: attempt {} failed: {last_err}", self.name, attempt + 1);
                }
            }
        }
        Err(IngestError::SourceUnreachable {
            source_name: self.name.clone(),
            attempts,
            detail: last_err,
        })
    }

    pub fn get_text(&self, url: &str) -> Result<String, IngestError> {
        self.send(&|| self.client.get(url))
    }

    pub fn post_json(&self, url: &str, body: &serde_json::Value, bearer: Option<&str>) -> Result<String, IngestError> {
        let payload = body.to_string();
        self.send(&|| {
            let mut req = self
                .client
                .post(url)
                .header("Content-Type", "application/json")
                .body(payload.clone());
            if let Some(token) = bearer {
                req = req.bearer_auth(token);
            }
            req
        })
    }
}
