mod common;

use std::path::{Path, PathBuf};

use etfcast::evaluation::CellStatus;
use etfcast::pipeline::{load_combos, plot_etf, report, Pipeline, PipelineError, RunConfig, Stage};
use etfcast::sentiment::read_panel_csv;

/// Demo copy whose fast config has `edits` applied as text replacements.
fn demo_with(tmp: &Path, edits: &[(&str, &str)]) -> PathBuf {
    let demo = common::demo_copy(tmp);
    let path = demo.join("config-fast.toml");
    let mut text = std::fs::read_to_string(&path).unwrap();
    for (from, to) in edits {
        assert!(text.contains(from), "config has no {from:?}");
        text = text.replace(from, to);
    }
    std::fs::write(&path, text).unwrap();
    path
}

fn pipeline(cfg: &Path) -> Pipeline {
    Pipeline::new(RunConfig::load(cfg).unwrap()).unwrap()
}

#[test]
fn invalid_config_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = demo_with(tmp.path(), &[(r#""SVR","#, r#""XGBOOST","#)]);
    let err = RunConfig::load(&cfg).unwrap_err();
    assert!(matches!(err, PipelineError::ConfigInvalid(_)));
    assert!(err.to_string().contains("models.regressors[2]"), "{err}");
    assert_eq!(err.exit_code(), 1);

    let cfg = demo_with(&tmp.path().join("b"), &[("seed = 42", "seed = 42\nsede = 1")]);
    let err = RunConfig::load(&cfg).unwrap_err();
    assert!(err.to_string().contains("sede"), "{err}");
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn symbol_missing_from_sector_map_fails_the_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = demo_with(tmp.path(), &[(r#"["XLF", "XLE"]"#, r#"["XLF", "ZZZZ"]"#)]);
    let err = pipeline(&cfg).run(None).unwrap_err();
    assert!(
        matches!(
            err,
            PipelineError::StageFailure {
                stage: Stage::Ingest,
                ..
            }
        ),
        "{err}"
    );
    assert!(err.to_string().contains("ZZZZ"), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn stages_run_independently_match_a_single_run() {
    let tmp = tempfile::tempdir().unwrap();
    let whole = demo_with(&tmp.path().join("whole"), &[]);
    let split = demo_with(&tmp.path().join("split"), &[]);
    let p = pipeline(&whole);
    assert!(p.run(None).unwrap().completed);
    for stage in Stage::ALL {
        // A fresh process per stage, as with separate CLI invocations.
        pipeline(&split).run_stage(stage).unwrap();
    }
    let a = whole.parent().unwrap().join("out-fast");
    let b = split.parent().unwrap().join("out-fast");
    assert_eq!(common::tree(&a), common::tree(&b));
    for f in ["report/summary.csv", "report/summary.txt", "panels/coverage.csv"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f} differs"
        );
    }
    assert_eq!(
        common::log_without_timestamps(&a.join("logs/run.json")),
        common::log_without_timestamps(&b.join("logs/run.json"))
    );
}

#[test]
fn config_change_resets_resume_state() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = demo_with(tmp.path(), &[]);
    let p = pipeline(&cfg);
    p.run(Some(Stage::Panel)).unwrap();
    assert_eq!(pipeline(&cfg).state().completed_stages.len(), 3);
    let text = std::fs::read_to_string(&cfg).unwrap().replace("seed = 42", "seed = 7");
    std::fs::write(&cfg, text).unwrap();
    let changed = pipeline(&cfg);
    assert!(changed.state().completed_stages.is_empty());
    assert_ne!(changed.state().config_digest, p.state().config_digest);
}

#[test]
fn single_combo_roster() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = demo_with(
        tmp.path(),
        &[
            (
                r#"regressors = ["MA5", "ARIMA", "SVR", "GBTREG", "LSTMREG"]"#,
                r#"regressors = ["ARIMA"]"#,
            ),
            (
                r#"classifiers = ["ALL_UP", "ALL_DOWN", "LOGREG", "SVM_RBF", "DTREE", "RFOREST", "GBTCLF", "LSTMCLF"]"#,
                r#"classifiers = ["LOGREG"]"#,
            ),
            (r#"symbols = ["XLF", "XLE"]"#, r#"symbols = ["XLF"]"#),
        ],
    );
    let p = pipeline(&cfg);
    let outcome = p.run(None).unwrap();
    assert_eq!((outcome.total_combos, outcome.failed_combos), (2, 0));
    assert_eq!(outcome.exit_code(), 0);
    let text = std::fs::read_to_string(p.layout().summary_text()).unwrap();
    assert!(text.contains("LOGREG") && text.contains("ARIMA"), "{text}");
}

#[test]
fn failed_cells_give_a_partial_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = demo_with(
        tmp.path(),
        &[("DTREE = [{ max_depth = 3 }]", "DTREE = [{ max_depth = -1 }]")],
    );
    let p = pipeline(&cfg);
    let outcome = p.run(None).unwrap();
    assert!(outcome.completed);
    // 2 symbols x 5 regressor rows x 2 variants, less the blank MA5 cells.
    assert_eq!(outcome.failed_combos, 2 * 9);
    assert_eq!(outcome.exit_code(), 3);
    let log = p.run_log();
    assert_eq!(log.stages[&Stage::Classification].status, "partial");
    for rec in load_combos(p.layout()).unwrap() {
        match &rec.combo.status {
            CellStatus::Failed { reason } => {
                assert!(rec.combo.classifier.to_string() == "DTREE", "{reason}");
                assert!(!p.layout().predictions(&rec.combo.etf, &rec.combo.label()).exists());
            }
            CellStatus::Ok => assert!(p.layout().plot(&rec.combo.etf, &rec.combo.label()).exists()),
        }
    }
    let csv = std::fs::read_to_string(p.layout().summary_csv()).unwrap();
    assert!(
        csv.lines().any(|l| l.contains("DTREE") && l.ends_with(",failed")),
        "{csv}"
    );
}

#[test]
fn too_short_window_is_an_incomplete_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = demo_with(tmp.path(), &[(r#"end = "2024-08-30""#, r#"end = "2024-01-09""#)]);
    let p = pipeline(&cfg);
    let err = p.run(None).unwrap_err();
    assert!(matches!(err, PipelineError::IncompleteRun(_)), "{err}");
    assert_eq!(err.exit_code(), 2);
    let combos = load_combos(p.layout()).unwrap();
    assert!(!combos.is_empty() && combos.iter().all(|c| !c.combo.status.is_ok()));
}

#[test]
fn report_without_combos_is_an_incomplete_run() {
    let tmp = tempfile::tempdir().unwrap();
    let layout = etfcast::pipeline::Layout::new(tmp.path());
    assert!(matches!(report(&layout), Err(PipelineError::IncompleteRun(_))));
}

#[test]
fn plots_are_byte_stable_and_refuse_failed_combos() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = demo_with(tmp.path(), &[]);
    let p = pipeline(&cfg);
    p.run(None).unwrap();
    let svg = p.layout().plot("XLF", "LOGREG__ARIMA__with_sentiment");
    let first = std::fs::read(&svg).unwrap();
    p.run_stage(Stage::Plot).unwrap();
    assert_eq!(std::fs::read(&svg).unwrap(), first);

    let rec = load_combos(p.layout())
        .unwrap()
        .into_iter()
        .find(|r| r.combo.etf == "XLF" && r.combo.status.is_ok())
        .unwrap();
    let map = etfcast::ingestion::load_sector_map(&cfg.parent().unwrap().join("sectors.toml"), &[]).unwrap();
    let etf = map.etf(&etfcast::ingestion::Symbol::new("XLF").unwrap()).unwrap();
    let panel = read_panel_csv(etf, &p.layout().panel("XLF")).unwrap();
    let out = tmp.path().join("x.svg");
    let mut failed = rec.combo.clone();
    failed.status = CellStatus::Failed { reason: "test".into() };
    let label = rec.combo.label();
    let archive = p.layout().predictions("XLF", &label);
    let err = plot_etf(&panel, &failed, &archive, &out, "d").unwrap_err();
    assert!(matches!(err, PipelineError::MissingArchive(_)), "{err}");
    let err = plot_etf(&panel, &rec.combo, &tmp.path().join("none.csv"), &out, "d").unwrap_err();
    assert!(matches!(err, PipelineError::MissingArchive(_)), "{err}");
    assert!(!out.exists());
}
