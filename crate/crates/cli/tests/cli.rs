use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn demo_copy(dest: &Path) -> PathBuf {
    fn copy(src: &Path, dest: &Path) {
        std::fs::create_dir_all(dest).unwrap();
        for e in std::fs::read_dir(src).unwrap() {
            let e = e.unwrap();
            let name = e.file_name();
            let s = name.to_string_lossy();
            if s == "data" || s.starts_with("out") {
                continue;
            }
            if e.path().is_dir() {
                copy(&e.path(), &dest.join(&name));
            } else {
                std::fs::copy(e.path(), dest.join(&name)).unwrap();
            }
        }
    }
    copy(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/demo"), dest);
    dest.join("config-fast.toml")
}

fn etfcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_etfcast"))
        .args(["--log", "warn"])
        .args(args)
        .env_remove("ETFCAST_LLM_API_KEY")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn edit(cfg: &Path, from: &str, to: &str) {
    let text = std::fs::read_to_string(cfg).unwrap();
    assert!(text.contains(from));
    std::fs::write(cfg, text.replace(from, to)).unwrap();
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&etfcast(&["--help"])), 0);
    let o = etfcast(&["frobnicate"]);
    assert_eq!(code(&o), 1);
    let o = etfcast(&["run"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--config"));
}

#[test]
fn invalid_config_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = demo_copy(tmp.path());
    edit(&cfg, r#""LOGREG","#, r#""LOGIT","#);
    let o = etfcast(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("models.classifiers[2]"));
    let missing = tmp.path().join("nope.toml");
    assert_eq!(code(&etfcast(&["ingest", "--config", missing.to_str().unwrap()])), 1);
}

#[test]
fn stage_failure_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = demo_copy(tmp.path());
    let c = cfg.to_str().unwrap();
    // Panels need ingested and scored inputs.
    let o = etfcast(&["panel", "--config", c]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    let empty = tmp.path().join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    assert_eq!(code(&etfcast(&["report", "--run-dir", empty.to_str().unwrap()])), 2);
}

#[test]
fn subcommands_in_sequence_then_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = demo_copy(tmp.path());
    let c = cfg.to_str().unwrap();
    for cmd in ["ingest", "score", "panel", "train", "evaluate", "report", "plot"] {
        let o = etfcast(&[cmd, "--config", c]);
        assert_eq!(code(&o), 0, "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let out = tmp.path().join("out-fast");
    let o = etfcast(&["report", "--run-dir", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("**") && stdout.contains("MA5"), "{stdout}");
    assert!(out.join("plots/XLE/LOGREG__ARIMA__price_only.svg").exists());
}

#[test]
fn run_is_resumable_and_partial_runs_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = demo_copy(tmp.path());
    let c = cfg.to_str().unwrap();
    let o = etfcast(&["run", "--config", c, "--stop-after", "panel"]);
    assert_eq!(code(&o), 0);
    let state: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("out-fast/state.json")).unwrap()).unwrap();
    assert_eq!(
        state["completed_stages"],
        serde_json::json!(["ingest", "score", "panel"])
    );
    let o = etfcast(&["run", "--config", c]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("144 combos, 0 failed"));

    edit(&cfg, "DTREE = [{ max_depth = 3 }]", "DTREE = [{ max_depth = -1 }]");
    let o = etfcast(&["run", "--config", c]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("144 combos, 18 failed"));
}
