use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_json, Layout, PipelineError};
use crate::evaluation::{render_summary_csv, render_summary_text, summarize, ComboResult, SummaryTable};

/// `combos/<SYM>/<label>.json`: metrics and per-fold breakdown of one
/// combo, or its failure reason.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComboRecord {
    pub config_digest: String,
    #[serde(flatten)]
    pub combo: ComboResult,
}

/// Every combo record under a run directory, in path order.
pub fn load_combos(layout: &Layout) -> std::io::Result<Vec<ComboRecord>> {
    let dir = layout.combos_dir();
    let mut paths = Vec::new();
    if dir.exists() {
        for sym in std::fs::read_dir(&dir)? {
            let sym = sym?.path();
            if !sym.is_dir() {
                continue;
            }
            for f in std::fs::read_dir(&sym)? {
                let f = f?.path();
                if f.extension().is_some_and(|e| e == "json") {
                    paths.push(f);
                }
            }
        }
    }
    paths.sort();
    paths.iter().map(|p| read_json(p)).collect()
}

/// Render `report/summary.txt` and `report/summary.csv` from the combo
/// records of a finished run.
pub fn report(layout: &Layout) -> Result<SummaryTable, PipelineError> {
    let records = load_combos(layout)?;
    if records.is_empty() {
        return Err(PipelineError::IncompleteRun(format!(
            "no combo records under {}",
            layout.combos_dir().display()
        )));
    }
    if records.iter().all(|r| !r.combo.status.is_ok()) {
        return Err(PipelineError::IncompleteRun("every combo failed".into()));
    }
    let combos: Vec<ComboResult> = records.into_iter().map(|r| r.combo).collect();
    let table = summarize(&combos);
    write(layout.summary_text().as_path(), render_summary_text(&table))?;
    write(layout.summary_csv().as_path(), render_summary_csv(&table))?;
    Ok(table)
}

fn write(path: &Path, text: String) -> std::io::Result<()> {
    crate::ingestion::write_atomic(path, text.as_bytes()).map_err(std::io::Error::other)
}
