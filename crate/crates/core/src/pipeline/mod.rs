//! End-to-end orchestration.
//!
//! Stages communicate only through the artifact tree under the output
//! directory, so each one can be run on its own. Layout:
//!
//! ```text
//! state.json                                  resume markers (RunState)
//! manifest.json                               sha256 of every artifact
//! logs/run.json                               run log; wall-clock times only under "timestamps"
//! ingest/index.json                           fetched symbols, article urls, skips
//! scores/scored.jsonl, scores/unscored.jsonl
//! panels/<SYM>.csv, panels/coverage.csv
//! stages/regression/<SYM>/<ROW>__<variant>.json
//! stages/classification/<SYM>/<FAMILY>__<variant>.json
//! checkpoints/{regression,classification}/<SYM>/<...>.json
//! combos/<SYM>/<CLF>__<REG>__<variant>.json   metrics or failed record
//! predictions/<SYM>/<CLF>__<REG>__<variant>.csv
//! plots/<SYM>/<CLF>__<REG>__<variant>.svg     plus .plot.json with the plotted series
//! report/summary.txt, report/summary.csv
//! ```
//!
//! Raw price and news stores and the score cache live under the data root.

pub mod config;
pub mod plot;
pub mod report;
mod stages;
mod state;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::RunConfig;
pub use plot::{plot_etf, PlotData};
pub use report::{load_combos, report};
pub use stages::{Pipeline, RunLog, RunOutcome, StageLog, StageTimes};
pub use state::RunState;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("stage {stage} failed: {message}")]
    StageFailure { stage: Stage, message: String },
    #[error("incomplete run: {0}")]
    IncompleteRun(String),
    #[error("missing prediction archive for {0}")]
    MissingArchive(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PipelineError {
    /// Process exit status: 1 for bad configuration, 2 for a failed stage.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::ConfigInvalid(_) => 1,
            _ => 2,
        }
    }

    pub(crate) fn stage(stage: Stage, e: impl fmt::Display) -> Self {
        PipelineError::StageFailure {
            stage,
            message: e.to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Score,
    Panel,
    Regression,
    Classification,
    Evaluate,
    Report,
    Plot,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Ingest,
        Stage::Score,
        Stage::Panel,
        Stage::Regression,
        Stage::Classification,
        Stage::Evaluate,
        Stage::Report,
        Stage::Plot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Score => "score",
            Stage::Panel => "panel",
            Stage::Regression => "regression",
            Stage::Classification => "classification",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
            Stage::Plot => "plot",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

/// Paths of the artifact tree rooted at an output directory.
#[derive(Clone, Debug)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn state(&self) -> PathBuf {
        self.root.join("state.json")
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn log(&self) -> PathBuf {
        self.root.join("logs/run.json")
    }

    pub fn ingest_index(&self) -> PathBuf {
        self.root.join("ingest/index.json")
    }

    pub fn scored(&self) -> PathBuf {
        self.root.join("scores/scored.jsonl")
    }

    pub fn unscored(&self) -> PathBuf {
        self.root.join("scores/unscored.jsonl")
    }

    pub fn panel(&self, sym: &str) -> PathBuf {
        self.root.join("panels").join(format!("{sym}.csv"))
    }

    pub fn coverage(&self) -> PathBuf {
        self.root.join("panels/coverage.csv")
    }

    pub fn stage_cell(&self, stage: Stage, sym: &str, cell: &str) -> PathBuf {
        self.root
            .join("stages")
            .join(stage.name())
            .join(sym)
            .join(format!("{cell}.json"))
    }

    pub fn checkpoint(&self, stage: Stage, sym: &str, cell: &str) -> PathBuf {
        self.root
            .join("checkpoints")
            .join(stage.name())
            .join(sym)
            .join(format!("{cell}.json"))
    }

    pub fn combo(&self, sym: &str, label: &str) -> PathBuf {
        self.root.join("combos").join(sym).join(format!("{label}.json"))
    }

    pub fn combos_dir(&self) -> PathBuf {
        self.root.join("combos")
    }

    pub fn predictions(&self, sym: &str, label: &str) -> PathBuf {
        self.root.join("predictions").join(sym).join(format!("{label}.csv"))
    }

    pub fn plot(&self, sym: &str, label: &str) -> PathBuf {
        self.root.join("plots").join(sym).join(format!("{label}.svg"))
    }

    pub fn plot_data(&self, sym: &str, label: &str) -> PathBuf {
        self.root.join("plots").join(sym).join(format!("{label}.plot.json"))
    }

    pub fn summary_text(&self) -> PathBuf {
        self.root.join("report/summary.txt")
    }

    pub fn summary_csv(&self) -> PathBuf {
        self.root.join("report/summary.csv")
    }

    /// Path relative to the root, with forward slashes.
    pub fn relative(&self, p: &Path) -> String {
        let rel = p.strip_prefix(&self.root).unwrap_or(p);
        rel.components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join("/")
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    text.push('\n');
    crate::ingestion::write_atomic(path, text.as_bytes()).map_err(std::io::Error::other)
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> std::io::Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| std::io::Error::other(format!("{}: {e}", path.display())))
}
