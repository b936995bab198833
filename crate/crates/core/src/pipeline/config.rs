//! Run configuration.
//!
//! A run is described by one TOML file. Relative paths are resolved
//! against the directory containing the file. Example:
//!
//! ```toml
//! symbols = ["XLF", "XLE"]
//! sector_map = "sectors.toml"
//! data_root = "data"
//! output_dir = "out"
//! seed = 42
//! workers = 0                      # 0 = number of CPUs
//!
//! [window]
//! start = "2024-01-02"
//! end = "2024-08-30"
//!
//! [prices]
//! source = "fixture"               # or "http"
//! fixture_dir = "prices"
//!
//! [news]
//! source = "fixture"
//! fixture_dir = "news"
//! timezone = "America/New_York"
//! body_selector = "article"
//!
//! [scoring]
//! client = "mock"                  # or "http"
//! prompt_version = "v1"
//! repair_retries = 2
//! non_trading_day = "exact-date"   # or "roll-forward"
//!
//! [evaluation]
//! lookback = 5
//! horizon = 20
//! min_train_fraction = 0.6
//! target = "signed"                # or "absolute"
//!
//! [models]
//! regressors = ["MA5", "ARIMA", "SVR", "GBTREG", "LSTMREG"]
//! classifiers = ["ALL_UP", "ALL_DOWN", "LOGREG", "SVM_RBF", "DTREE", "RFOREST", "GBTCLF", "LSTMCLF"]
//!
//! [models.grids]
//! LSTMREG = [{ layers = 1, hidden = 16, optimizer = "adam", epochs = 50 }]
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::evaluation::{AblationConfig, Roster};
use crate::hashing::digest;
use crate::ingestion::{default_study_window, DateWindow, HttpConfig, HttpNewsSourceConfig, Symbol};
use crate::models::{ClassifierFamily, Hyperparams, RegressorFamily, TargetKind, DEFAULT_SEED};
use crate::sentiment::{NonTradingDayPolicy, PromptTemplate};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    #[default]
    Fixture,
    Http,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClientKind {
    #[default]
    Mock,
    Http,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl Default for WindowConfig {
    fn default() -> Self {
        let w = default_study_window();
        WindowConfig {
            start: w.start,
            end: w.end,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriceConfig {
    pub source: SourceKind,
    pub fixture_dir: Option<PathBuf>,
    /// Chart endpoint with `{symbol}`, `{period1}`, `{period2}` placeholders.
    pub url_template: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewsConfig {
    pub source: SourceKind,
    pub fixture_dir: Option<PathBuf>,
    pub timezone: String,
    pub body_selector: String,
    pub http: Option<HttpNewsSourceConfig>,
}

impl Default for NewsConfig {
    fn default() -> Self {
        NewsConfig {
            source: SourceKind::Fixture,
            fixture_dir: None,
            timezone: "America/New_York".into(),
            body_selector: "article".into(),
            http: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringConfig {
    pub client: ClientKind,
    pub prompt_version: String,
    pub model: String,
    pub endpoint: Option<String>,
    pub repair_retries: u32,
    pub parallelism: usize,
    pub non_trading_day: NonTradingDayPolicy,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig {
            client: ClientKind::Mock,
            prompt_version: "v1".into(),
            model: "lexicon-mock".into(),
            endpoint: None,
            repair_retries: 2,
            parallelism: 4,
            non_trading_day: NonTradingDayPolicy::ExactDate,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    pub lookback: usize,
    pub horizon: usize,
    pub min_train_fraction: f64,
    pub target: TargetKind,
    pub sentiment_in_regression: bool,
    pub sentiment_in_classification: bool,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        let a = AblationConfig::default();
        EvaluationSection {
            lookback: a.lookback,
            horizon: a.horizon,
            min_train_fraction: a.min_train_fraction,
            target: a.target,
            sentiment_in_regression: a.sentiment_in_regression,
            sentiment_in_classification: a.sentiment_in_classification,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelsConfig {
    pub regressors: Vec<String>,
    pub classifiers: Vec<String>,
    pub grids: BTreeMap<String, Vec<Hyperparams>>,
}

impl Default for ModelsConfig {
    fn default() -> Self {
        let r = Roster::full();
        ModelsConfig {
            regressors: r.regressors.iter().map(|f| f.name().to_string()).collect(),
            classifiers: r.classifiers.iter().map(|f| f.name().to_string()).collect(),
            grids: BTreeMap::new(),
        }
    }
}

/// Everything a run needs. Serializes to the form the digest is computed
/// over; `base_dir` is not part of it.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub symbols: Vec<String>,
    pub sector_map: PathBuf,
    #[serde(default = "default_data_root")]
    pub data_root: PathBuf,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub window: WindowConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub http: HttpConfig,
    #[serde(default)]
    pub prices: PriceConfig,
    #[serde(default)]
    pub news: NewsConfig,
    #[serde(default)]
    pub scoring: ScoringConfig,
    #[serde(default)]
    pub evaluation: EvaluationSection,
    #[serde(default)]
    pub models: ModelsConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_data_root() -> PathBuf {
    PathBuf::from("data")
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn invalid(msg: impl Into<String>) -> PipelineError {
    PipelineError::ConfigInvalid(msg.into())
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, base)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.symbols.is_empty() {
            return Err(invalid("symbols: at least one symbol is required"));
        }
        for (i, s) in self.symbols.iter().enumerate() {
            Symbol::new(s.as_str()).map_err(|e| invalid(format!("symbols[{i}]: {e}")))?;
        }
        if self.window.start >= self.window.end {
            return Err(invalid("window: start must precede end"));
        }
        for (i, name) in self.models.regressors.iter().enumerate() {
            name.parse::<RegressorFamily>()
                .map_err(|e| invalid(format!("models.regressors[{i}]: {e}")))?;
        }
        for (i, name) in self.models.classifiers.iter().enumerate() {
            name.parse::<ClassifierFamily>()
                .map_err(|e| invalid(format!("models.classifiers[{i}]: {e}")))?;
        }
        for (key, grid) in &self.models.grids {
            if key.parse::<RegressorFamily>().is_err() && key.parse::<ClassifierFamily>().is_err() {
                return Err(invalid(format!("models.grids.{key}: unknown model family {key:?}")));
            }
            if grid.is_empty() {
                return Err(invalid(format!("models.grids.{key}: grid must not be empty")));
            }
        }
        let e = &self.evaluation;
        if e.lookback == 0 || e.horizon == 0 {
            return Err(invalid("evaluation: lookback and horizon must be positive"));
        }
        if !(e.min_train_fraction > 0.0 && e.min_train_fraction < 1.0) {
            return Err(invalid("evaluation.min_train_fraction must lie in (0, 1)"));
        }
        if self.prices.source == SourceKind::Fixture && self.prices.fixture_dir.is_none() {
            return Err(invalid("prices.fixture_dir is required for the fixture source"));
        }
        if self.prices.source == SourceKind::Http && self.prices.url_template.is_none() {
            return Err(invalid("prices.url_template is required for the http source"));
        }
        if self.news.source == SourceKind::Fixture && self.news.fixture_dir.is_none() {
            return Err(invalid("news.fixture_dir is required for the fixture source"));
        }
        if self.news.source == SourceKind::Http && self.news.http.is_none() {
            return Err(invalid("news.http is required for the http source"));
        }
        self.news
            .timezone
            .parse::<chrono_tz::Tz>()
            .map_err(|e| invalid(format!("news.timezone: {e}")))?;
        if self.scoring.prompt_version != PromptTemplate::v1().version {
            return Err(invalid(format!(
                "scoring.prompt_version: unknown prompt version {:?}",
                self.scoring.prompt_version
            )));
        }
        if self.scoring.client == ClientKind::Http && self.scoring.endpoint.is_none() {
            return Err(invalid("scoring.endpoint is required for the http client"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form; independent of key order in the
    /// source file.
    pub fn digest(&self) -> String {
        digest(self).expect("config serializes")
    }

    /// Stable run identifier derived from the digest.
    pub fn run_id(&self) -> String {
        format!("run-{}", &self.digest()[..12])
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn symbols(&self) -> Vec<Symbol> {
        self.symbols
            .iter()
            .map(|s| Symbol::new(s.as_str()).expect("validated"))
            .collect()
    }

    pub fn window(&self) -> DateWindow {
        DateWindow::new(self.window.start, self.window.end).expect("validated")
    }

    pub fn roster(&self) -> Roster {
        Roster {
            regressors: self
                .models
                .regressors
                .iter()
                .map(|s| s.parse().expect("validated"))
                .collect(),
            classifiers: self
                .models
                .classifiers
                .iter()
                .map(|s| s.parse().expect("validated"))
                .collect(),
            grids: self
                .models
                .grids
                .iter()
                .map(|(k, v)| (canonical_family(k), v.clone()))
                .collect(),
        }
    }

    pub fn ablation(&self) -> AblationConfig {
        let e = &self.evaluation;
        AblationConfig {
            lookback: e.lookback,
            horizon: e.horizon,
            min_train_fraction: e.min_train_fraction,
            seed: self.seed,
            target: e.target,
            sentiment_in_regression: e.sentiment_in_regression,
            sentiment_in_classification: e.sentiment_in_classification,
        }
    }
}

fn canonical_family(key: &str) -> String {
    key.parse::<RegressorFamily>()
        .map(|f| f.name().to_string())
        .or_else(|_| key.parse::<ClassifierFamily>().map(|f| f.name().to_string()))
        .unwrap_or_else(|_| key.to_string())
}
