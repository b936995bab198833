#![allow(dead_code)]

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use etfcast::features::DeltaSeries;
use etfcast::ingestion::{EtfId, Symbol};

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// Copy of the demo fixture corpus without any run outputs.
pub fn demo_copy(dest: &Path) -> PathBuf {
    let src = repo_root().join("fixtures/demo");
    copy_dir(&src, dest);
    dest.to_path_buf()
}

fn copy_dir(src: &Path, dest: &Path) {
    std::fs::create_dir_all(dest).unwrap();
    for entry in std::fs::read_dir(src).unwrap() {
        let entry = entry.unwrap();
        let name = entry.file_name();
        let name_s = name.to_string_lossy();
        if name_s == "data" || name_s.starts_with("out") {
            continue;
        }
        let p = entry.path();
        if p.is_dir() {
            copy_dir(&p, &dest.join(&name));
        } else {
            std::fs::copy(&p, dest.join(&name)).unwrap();
        }
    }
}

pub fn etf(sym: &str) -> EtfId {
    EtfId {
        symbol: Symbol::new(sym).unwrap(),
        sector: "test".into(),
    }
}

pub fn series(deltas: Vec<f64>, sentiments: Vec<f64>) -> DeltaSeries {
    DeltaSeries::from_deltas(
        etf("SYN"),
        NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
        100.0,
        deltas,
        sentiments,
    )
    .unwrap()
}

/// Every file under `dir`, relative, sorted.
pub fn tree(dir: &Path) -> Vec<String> {
    fn walk(root: &Path, d: &Path, out: &mut Vec<String>) {
        for e in std::fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/"));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}

/// Run log with the timestamp block removed.
pub fn log_without_timestamps(path: &Path) -> String {
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("timestamps");
    serde_json::to_string_pretty(&v).unwrap()
}
