use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_json, write_json, Stage};

pub const STATE_SCHEMA_VERSION: u32 = 1;

/// Resume markers for one output directory.
///
/// Markers are only trusted while `config_digest` matches the current
/// config; any change starts from an empty state.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunState {
    pub schema_version: u32,
    pub config_digest: String,
    pub completed_stages: BTreeSet<Stage>,
    /// `<stage>/<SYM>/<cell>` keys of finished grid cells.
    pub completed_cells: BTreeSet<String>,
    /// Checkpoint path (relative to the output root) to content hash.
    pub checkpoints: BTreeMap<String, String>,
}

impl RunState {
    pub fn fresh(digest: &str) -> Self {
        RunState {
            schema_version: STATE_SCHEMA_VERSION,
            config_digest: digest.to_string(),
            ..Default::default()
        }
    }

    /// Saved state if it belongs to `digest`, otherwise a fresh one.
    pub fn load_or_fresh(path: &Path, digest: &str) -> Self {
        match read_json::<RunState>(path) {
            Ok(s) if s.config_digest == digest && s.schema_version == STATE_SCHEMA_VERSION => s,
            Ok(_) => {
                log::info!("config digest changed; discarding resume markers");
                Self::fresh(digest)
            }
            Err(_) => Self::fresh(digest),
        }
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        write_json(path, self)
    }

    pub fn cell_key(stage: Stage, sym: &str, cell: &str) -> String {
        format!("{stage}/{sym}/{cell}")
    }

    pub fn cell_done(&self, key: &str) -> bool {
        self.completed_cells.contains(key)
    }

    /// Drops the markers of `stage` and everything downstream of it.
    pub fn invalidate_from(&mut self, stage: Stage) {
        self.completed_stages.retain(|s| *s < stage);
        self.completed_cells.retain(|k| {
            k.split('/')
                .next()
                .and_then(|s| s.parse::<Stage>().ok())
                .is_some_and(|s| s < stage)
        });
        let prefixes: Vec<String> = [Stage::Regression, Stage::Classification]
            .into_iter()
            .filter(|s| *s >= stage)
            .map(|s| format!("checkpoints/{s}/"))
            .collect();
        self.checkpoints
            .retain(|k, _| !prefixes.iter().any(|p| k.starts_with(p.as_str())));
    }
}
