use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{SecondsFormat, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::{ClientKind, RunConfig, SourceKind};
use super::plot::plot_etf;
use super::report::{load_combos, report, ComboRecord};
use super::state::RunState;
use super::{read_json, write_json, Layout, PipelineError, Stage};
use crate::evaluation::{
    classifier_outcome, combos_from, regressor_outcome, write_prediction_csv, ClassifierOutcome, RegressorOutcome,
    Roster, Variant,
};
use crate::features::{to_deltas, DeltaSeries};
use crate::hashing::sha256_hex;
use crate::ingestion::{
    fetch_prices, ingest_news, load_sector_map, BodyExtractor, DateNormalizer, FixtureNewsSource, FixturePriceSource,
    HttpNewsSource, HttpPriceSource, NewsSource, PriceSource, RateLimitedHttp, RawArticle, RawStore, SectorMap,
    SkipRecord,
};
use crate::models::checkpoint::{save_checkpoint, Checkpointable};
use crate::sentiment::{
    aggregate_daily_sentiment, coverage_report, merge_price_sentiment, read_panel_csv, score_corpus,
    write_coverage_csv, write_panel_csv, HttpChatClient, MockLexiconClient, PromptTemplate, ScoredArticle, Scorer,
    ScoringClient,
};

pub const LOG_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageLog {
    pub status: String,
    pub summary: Value,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub started: String,
    pub finished: String,
}

/// `logs/run.json`. Everything outside `timestamps` is a pure function of
/// the config and the artifacts, so an interrupted and resumed run logs
/// the same bytes there as an uninterrupted one.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub schema_version: u32,
    pub run_id: String,
    pub config_digest: String,
    pub stages: BTreeMap<Stage, StageLog>,
    pub timestamps: BTreeMap<Stage, StageTimes>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct IngestIndex {
    config_digest: String,
    price_rows: BTreeMap<String, usize>,
    articles: Vec<String>,
    skipped: Vec<SkipRecord>,
}

/// One tuned grid cell as persisted under `stages/`; the fitted model
/// itself lives in the checkpoint.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct CellRecord<T> {
    config_digest: String,
    checkpoint: Option<String>,
    content_hash: Option<String>,
    outcome: T,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub total_combos: usize,
    pub failed_combos: usize,
    /// Whether the run went through the last stage.
    pub completed: bool,
}

impl RunOutcome {
    /// 0 on full success, 3 when the run completed with failed combos.
    pub fn exit_code(&self) -> i32 {
        if self.completed && self.failed_combos > 0 {
            3
        } else {
            0
        }
    }
}

pub struct Pipeline {
    cfg: RunConfig,
    layout: Layout,
    digest: String,
    state: Mutex<RunState>,
    log: Mutex<RunLog>,
    pool: rayon::ThreadPool,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn io(stage: Stage) -> impl Fn(std::io::Error) -> PipelineError {
    move |e| PipelineError::stage(stage, e)
}

impl Pipeline {
    pub fn new(cfg: RunConfig) -> Result<Self, PipelineError> {
        cfg.validate()?;
        let layout = Layout::new(cfg.resolve(&cfg.output_dir));
        let digest = cfg.digest();
        let state = RunState::load_or_fresh(&layout.state(), &digest);
        let log = match read_json::<RunLog>(&layout.log()) {
            Ok(l) if l.config_digest == digest => l,
            _ => RunLog {
                schema_version: LOG_SCHEMA_VERSION,
                run_id: cfg.run_id(),
                config_digest: digest.clone(),
                ..Default::default()
            },
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| PipelineError::ConfigInvalid(format!("workers: {e}")))?;
        Ok(Pipeline {
            cfg,
            layout,
            digest,
            state: Mutex::new(state),
            log: Mutex::new(log),
            pool,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn state(&self) -> RunState {
        self.lock_state().clone()
    }

    pub fn run_log(&self) -> RunLog {
        self.log.lock().unwrap_or_else(|p| p.into_inner()).clone()
    }

    fn lock_state(&self) -> std::sync::MutexGuard<'_, RunState> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Every stage in order, skipping those already completed under the
    /// same config digest, optionally stopping after `stop_after`.
    pub fn run(&self, stop_after: Option<Stage>) -> Result<RunOutcome, PipelineError> {
        for stage in Stage::ALL {
            if self.lock_state().completed_stages.contains(&stage) {
                log::info!("{stage}: already complete, skipping");
            } else {
                self.run_stage(stage)?;
            }
            if stop_after == Some(stage) {
                return Ok(RunOutcome {
                    completed: stage == Stage::Plot,
                    ..self.outcome()
                });
            }
        }
        Ok(RunOutcome {
            completed: true,
            ..self.outcome()
        })
    }

    fn outcome(&self) -> RunOutcome {
        let combos = load_combos(&self.layout).unwrap_or_default();
        RunOutcome {
            total_combos: combos.len(),
            failed_combos: combos.iter().filter(|c| !c.combo.status.is_ok()).count(),
            completed: false,
        }
    }

    /// Execute one stage. Downstream completion markers are dropped since
    /// their inputs may change; finished cells of this stage are reused.
    pub fn run_stage(&self, stage: Stage) -> Result<StageLog, PipelineError> {
        log::info!("{stage}: starting");
        let started = now();
        {
            let mut st = self.lock_state();
            st.completed_stages.remove(&stage);
            if let Some(next) = Stage::ALL.into_iter().find(|s| *s > stage) {
                st.invalidate_from(next);
            }
            st.save(&self.layout.state()).map_err(io(stage))?;
        }
        let summary = match stage {
            Stage::Ingest => self.ingest(),
            Stage::Score => self.score(),
            Stage::Panel => self.panel(),
            Stage::Regression => self.regression(),
            Stage::Classification => self.classification(),
            Stage::Evaluate => self.evaluate(),
            Stage::Report => self.report(),
            Stage::Plot => self.plot(),
        }
        .map_err(|e| {
            log::error!("{stage}: {e}");
            e
        })?;
        let failed = summary.get("failed").and_then(Value::as_u64).unwrap_or(0);
        let entry = StageLog {
            status: if failed > 0 { "partial" } else { "ok" }.into(),
            summary,
        };
        {
            let mut log = self.log.lock().unwrap_or_else(|p| p.into_inner());
            log.stages.insert(stage, entry.clone());
            log.stages
                .retain(|s, _| *s <= stage || self.lock_state().completed_stages.contains(s));
            log.timestamps.insert(
                stage,
                StageTimes {
                    started,
                    finished: now(),
                },
            );
            write_json(&self.layout.log(), &*log).map_err(io(stage))?;
        }
        {
            let mut st = self.lock_state();
            st.completed_stages.insert(stage);
            st.save(&self.layout.state()).map_err(io(stage))?;
        }
        self.write_manifest().map_err(io(stage))?;
        log::info!("{stage}: {}", entry.status);
        Ok(entry)
    }

    fn symbols(&self) -> Vec<crate::ingestion::Symbol> {
        self.cfg.symbols()
    }

    fn sector_map(&self, stage: Stage) -> Result<SectorMap, PipelineError> {
        load_sector_map(&self.cfg.resolve(&self.cfg.sector_map), &self.symbols())
            .map_err(|e| PipelineError::stage(stage, format!("sector map: {e}")))
    }

    fn store(&self) -> RawStore {
        RawStore::new(self.cfg.resolve(&self.cfg.data_root))
    }

    fn http(&self, stage: Stage, name: &str) -> Result<RateLimitedHttp, PipelineError> {
        RateLimitedHttp::new(name, self.cfg.http.clone()).map_err(|e| PipelineError::stage(stage, e))
    }

    fn ingest(&self) -> Result<Value, PipelineError> {
        let st = Stage::Ingest;
        let map = self.sector_map(st)?;
        let store = self.store();
        let window = self.cfg.window();
        let zone: chrono_tz::Tz = self.cfg.news.timezone.parse().expect("validated");
        let prices: Box<dyn PriceSource> = match self.cfg.prices.source {
            SourceKind::Fixture => Box::new(FixturePriceSource::new(
                self.cfg
                    .resolve(self.cfg.prices.fixture_dir.as_deref().expect("validated")),
            )),
            SourceKind::Http => Box::new(HttpPriceSource::new(
                self.http(st, "prices")?,
                self.cfg.prices.url_template.clone().expect("validated"),
                zone,
            )),
        };
        let mut price_rows = BTreeMap::new();
        for sym in self.symbols() {
            let etf = map.etf(&sym).map_err(|e| PipelineError::stage(st, e))?;
            let series = fetch_prices(&etf, window, prices.as_ref(), Some(&store))
                .map_err(|e| PipelineError::stage(st, format!("{sym}: {e}")))?;
            price_rows.insert(sym.to_string(), series.dates().len());
        }
        let news: Box<dyn NewsSource> = match self.cfg.news.source {
            SourceKind::Fixture => Box::new(FixtureNewsSource::new(
                self.cfg
                    .resolve(self.cfg.news.fixture_dir.as_deref().expect("validated")),
            )),
            SourceKind::Http => Box::new(HttpNewsSource::new(
                self.http(st, "news")?,
                self.cfg.news.http.clone().expect("validated"),
            )),
        };
        let extractor = BodyExtractor::new(&self.cfg.news.body_selector).map_err(|e| PipelineError::stage(st, e))?;
        let report = ingest_news(
            &self.symbols(),
            window,
            news.as_ref(),
            &store,
            &DateNormalizer { zone },
            &extractor,
        )
        .map_err(|e| PipelineError::stage(st, e))?;
        let index = IngestIndex {
            config_digest: self.digest.clone(),
            price_rows,
            articles: report.articles.iter().map(|a| a.meta.url.clone()).collect(),
            skipped: report.skipped,
        };
        write_json(&self.layout.ingest_index(), &index).map_err(io(st))?;
        Ok(json!({
            "symbols": index.price_rows.len(),
            "price_rows": index.price_rows,
            "articles": index.articles.len(),
            "skipped": index.skipped.len(),
        }))
    }

    fn score(&self) -> Result<Value, PipelineError> {
        let st = Stage::Score;
        let map = self.sector_map(st)?;
        let index: IngestIndex = read_json(&self.layout.ingest_index())
            .map_err(|e| PipelineError::stage(st, format!("ingest output missing ({e}); run ingest first")))?;
        let store = self.store();
        let articles = index
            .articles
            .iter()
            .map(|url| {
                store
                    .read_article(url)
                    .map_err(|e| PipelineError::stage(st, e))?
                    .ok_or_else(|| PipelineError::stage(st, format!("raw article missing for {url}")))
            })
            .collect::<Result<Vec<RawArticle>, _>>()?;
        let sc = &self.cfg.scoring;
        let client: Box<dyn ScoringClient> = match sc.client {
            ClientKind::Mock => Box::new(MockLexiconClient::new()),
            ClientKind::Http => Box::new(HttpChatClient::new(
                self.http(st, "scoring")?,
                sc.endpoint.clone().expect("validated"),
                sc.model.clone(),
            )),
        };
        let scorer = Scorer::new(client.as_ref(), PromptTemplate::v1())
            .with_cache(self.cfg.resolve(&self.cfg.data_root).join("cache/scores"))
            .with_repair_retries(sc.repair_retries);
        let report = score_corpus(&articles, &scorer, &map, sc.parallelism).map_err(|e| PipelineError::stage(st, e))?;
        write_lines(&self.layout.scored(), &report.scored).map_err(io(st))?;
        write_lines(&self.layout.unscored(), &report.unscored).map_err(io(st))?;
        Ok(json!({
            "articles": articles.len(),
            "scored": report.scored.len(),
            "unscored": report.unscored.len(),
        }))
    }

    fn panel(&self) -> Result<Value, PipelineError> {
        let st = Stage::Panel;
        let map = self.sector_map(st)?;
        let scored: Vec<ScoredArticle> = read_lines(&self.layout.scored())
            .map_err(|e| PipelineError::stage(st, format!("scores missing ({e}); run score first")))?;
        let store = self.store();
        let window = self.cfg.window();
        let mut prices = Vec::new();
        for sym in self.symbols() {
            let series = store
                .read_prices(&sym, window)
                .map_err(|e| PipelineError::stage(st, e))?
                .ok_or_else(|| PipelineError::stage(st, format!("no stored prices for {sym}; run ingest first")))?;
            prices.push(series);
        }
        let mut calendar: Vec<_> = prices.iter().flat_map(|p| p.dates().iter().copied()).collect();
        calendar.sort();
        calendar.dedup();
        let daily = aggregate_daily_sentiment(&scored, &map.sectors(), &calendar, self.cfg.scoring.non_trading_day);
        let mut panels = Vec::new();
        for p in &prices {
            let panel = merge_price_sentiment(p, &daily, &map).map_err(|e| PipelineError::stage(st, e))?;
            write_panel_csv(&panel, &self.layout.panel(panel.etf().symbol.as_str()))
                .map_err(|e| PipelineError::stage(st, e))?;
            panels.push(panel);
        }
        let coverage = coverage_report(&panels);
        write_coverage_csv(&coverage, &self.layout.coverage()).map_err(|e| PipelineError::stage(st, e))?;
        Ok(json!({
            "panels": panels.len(),
            "coverage": coverage
                .iter()
                .map(|c| (c.etf.to_string(), c.coverage_label()))
                .collect::<BTreeMap<_, _>>(),
        }))
    }

    fn load_series(&self, stage: Stage) -> Result<Vec<DeltaSeries>, PipelineError> {
        let map = self.sector_map(stage)?;
        self.symbols()
            .iter()
            .map(|sym| {
                let etf = map.etf(sym).map_err(|e| PipelineError::stage(stage, e))?;
                let panel = read_panel_csv(etf, &self.layout.panel(sym.as_str()))
                    .map_err(|e| PipelineError::stage(stage, format!("panel for {sym} ({e}); run panel first")))?;
                to_deltas(&panel).map_err(|e| PipelineError::stage(stage, format!("{sym}: {e}")))
            })
            .collect()
    }

    /// Run `jobs` in the worker pool, skipping cells already marked done.
    /// Each finished cell is persisted and marked before the next is
    /// reported, so an interruption loses at most the cells in flight.
    fn sweep<J, T, M>(
        &self,
        stage: Stage,
        jobs: &[J],
        key: impl Fn(&J) -> (String, String) + Sync,
        work: impl Fn(&J) -> (T, Option<M>) + Sync,
    ) -> Result<(), PipelineError>
    where
        J: Sync,
        T: Serialize + Send,
        M: Checkpointable,
    {
        self.pool.install(|| {
            jobs.par_iter().try_for_each(|job| {
                let (sym, cell) = key(job);
                let k = RunState::cell_key(stage, &sym, &cell);
                let record_path = self.layout.stage_cell(stage, &sym, &cell);
                if self.lock_state().cell_done(&k) && record_path.exists() {
                    return Ok(());
                }
                let (outcome, model) = work(job);
                let ckpt_path = self.layout.checkpoint(stage, &sym, &cell);
                let (checkpoint, content_hash) = match &model {
                    Some(m) => {
                        save_checkpoint(m, &ckpt_path).map_err(|e| PipelineError::stage(stage, e))?;
                        (Some(self.layout.relative(&ckpt_path)), Some(m.content_hash()))
                    }
                    None => {
                        let _ = std::fs::remove_file(&ckpt_path);
                        (None, None)
                    }
                };
                let record = CellRecord {
                    config_digest: self.digest.clone(),
                    checkpoint: checkpoint.clone(),
                    content_hash: content_hash.clone(),
                    outcome,
                };
                write_json(&record_path, &record).map_err(io(stage))?;
                let mut st = self.lock_state();
                st.completed_cells.insert(k);
                if let (Some(c), Some(h)) = (checkpoint, content_hash) {
                    st.checkpoints.insert(c, h);
                }
                st.save(&self.layout.state()).map_err(io(stage))
            })
        })
    }

    fn cell_summary<T: for<'de> Deserialize<'de>>(
        &self,
        stage: Stage,
        keys: &[(String, String)],
        ok: impl Fn(&T) -> bool,
    ) -> Result<Value, PipelineError> {
        let mut failed = Vec::new();
        for (sym, cell) in keys {
            let rec: CellRecord<T> = read_json(&self.layout.stage_cell(stage, sym, cell)).map_err(io(stage))?;
            if !ok(&rec.outcome) {
                failed.push(format!("{sym}/{cell}"));
            }
        }
        Ok(json!({ "cells": keys.len(), "failed": failed.len(), "failed_cells": failed }))
    }

    fn regressor_jobs(&self, n_series: usize) -> Vec<(usize, crate::models::RegressorFamily, Variant)> {
        let roster = self.cfg.roster();
        let acfg = self.cfg.ablation();
        let mut jobs = Vec::new();
        for i in 0..n_series {
            for &row in &roster.regressors {
                for v in Variant::BOTH {
                    if Roster::regressor_cell(row, v, &acfg).is_some() {
                        jobs.push((i, row, v));
                    }
                }
            }
        }
        jobs
    }

    fn regression(&self) -> Result<Value, PipelineError> {
        let st = Stage::Regression;
        let series = self.load_series(st)?;
        let roster = self.cfg.roster();
        let acfg = self.cfg.ablation();
        let jobs = self.regressor_jobs(series.len());
        let key = |&(i, row, v): &(usize, crate::models::RegressorFamily, Variant)| {
            (series[i].etf.symbol.to_string(), format!("{row}__{v}"))
        };
        self.sweep(st, &jobs, key, |&(i, row, v)| {
            let mut out = regressor_outcome(&series[i], &roster, row, v, &acfg).expect("cell exists");
            let model = out.tuning.model.take();
            (out, model)
        })?;
        let keys: Vec<_> = jobs.iter().map(key).collect();
        self.cell_summary::<RegressorOutcome>(st, &keys, |o| o.status.is_ok())
    }

    fn classification(&self) -> Result<Value, PipelineError> {
        let st = Stage::Classification;
        let series = self.load_series(st)?;
        let roster = self.cfg.roster();
        let acfg = self.cfg.ablation();
        let jobs: Vec<_> = (0..series.len())
            .flat_map(|i| {
                roster
                    .classifiers
                    .iter()
                    .flat_map(move |&c| Variant::BOTH.map(|v| (i, c, v)))
            })
            .collect();
        let key = |&(i, c, v): &(usize, crate::models::ClassifierFamily, Variant)| {
            (series[i].etf.symbol.to_string(), format!("{c}__{v}"))
        };
        self.sweep(st, &jobs, key, |&(i, c, v)| {
            let mut out = classifier_outcome(&series[i], &roster, c, v, &acfg);
            let model = out.tuning.model.take();
            (out, model)
        })?;
        let keys: Vec<_> = jobs.iter().map(key).collect();
        self.cell_summary::<ClassifierOutcome>(st, &keys, |o| o.status.is_ok())
    }

    fn evaluate(&self) -> Result<Value, PipelineError> {
        let st = Stage::Evaluate;
        let series = self.load_series(st)?;
        let roster = self.cfg.roster();
        let mut regs = Vec::new();
        for (i, row, v) in self.regressor_jobs(series.len()) {
            let path = self
                .layout
                .stage_cell(Stage::Regression, series[i].etf.symbol.as_str(), &format!("{row}__{v}"));
            if let Ok(rec) = read_json::<CellRecord<RegressorOutcome>>(&path) {
                regs.push(rec.outcome);
            }
        }
        let mut clfs = Vec::new();
        for s in &series {
            for &c in &roster.classifiers {
                for v in Variant::BOTH {
                    let path =
                        self.layout
                            .stage_cell(Stage::Classification, s.etf.symbol.as_str(), &format!("{c}__{v}"));
                    if let Ok(rec) = read_json::<CellRecord<ClassifierOutcome>>(&path) {
                        clfs.push(rec.outcome);
                    }
                }
            }
        }
        let combos = combos_from(&series, &roster, &regs, &clfs);
        if combos.is_empty() {
            return Err(PipelineError::stage(st, "roster yields no combos"));
        }
        // stale artifacts of a previous config must not survive
        for dir in ["combos", "predictions", "plots"] {
            let p = self.layout.root().join(dir);
            if p.exists() {
                std::fs::remove_dir_all(&p).map_err(io(st))?;
            }
        }
        let mut failed = Vec::new();
        for combo in &combos {
            let label = combo.label();
            if combo.status.is_ok() {
                write_prediction_csv(&self.layout.predictions(&combo.etf, &label), &combo.predictions)
                    .map_err(|e| PipelineError::stage(st, e))?;
            } else {
                failed.push(format!("{}/{label}", combo.etf));
            }
            let rec = ComboRecord {
                config_digest: self.digest.clone(),
                combo: combo.clone(),
            };
            write_json(&self.layout.combo(&combo.etf, &label), &rec).map_err(io(st))?;
        }
        Ok(json!({ "combos": combos.len(), "failed": failed.len(), "failed_combos": failed }))
    }

    fn report(&self) -> Result<Value, PipelineError> {
        let table = report(&self.layout)?;
        let ok_cells = table
            .rows
            .iter()
            .flat_map(|r| r.cells.iter().flatten())
            .filter(|c| !c.failed())
            .count();
        Ok(json!({ "rows": table.rows.len(), "ok_cells": ok_cells, "n_etfs": table.n_etfs }))
    }

    fn plot(&self) -> Result<Value, PipelineError> {
        let st = Stage::Plot;
        let map = self.sector_map(st)?;
        let combos = load_combos(&self.layout).map_err(|e| PipelineError::stage(st, e))?;
        let mut panels = BTreeMap::new();
        let mut plotted = 0usize;
        for rec in combos.iter().filter(|c| c.combo.status.is_ok()) {
            let c = &rec.combo;
            if !panels.contains_key(&c.etf) {
                let sym = crate::ingestion::Symbol::new(c.etf.as_str()).map_err(|e| PipelineError::stage(st, e))?;
                let etf = map.etf(&sym).map_err(|e| PipelineError::stage(st, e))?;
                let panel = read_panel_csv(etf, &self.layout.panel(&c.etf)).map_err(|e| PipelineError::stage(st, e))?;
                panels.insert(c.etf.clone(), panel);
            }
            let label = c.label();
            plot_etf(
                &panels[&c.etf],
                c,
                &self.layout.predictions(&c.etf, &label),
                &self.layout.plot(&c.etf, &label),
                &self.digest,
            )
            .map_err(|e| PipelineError::stage(st, e))?;
            plotted += 1;
        }
        Ok(json!({ "plots": plotted, "skipped_failed": combos.len() - plotted }))
    }

    fn write_manifest(&self) -> std::io::Result<()> {
        let mut files = Vec::new();
        collect_files(self.layout.root(), &mut files)?;
        files.sort();
        let skip = [self.layout.manifest(), self.layout.state(), self.layout.log()];
        let mut entries = BTreeMap::new();
        for f in files.iter().filter(|f| !skip.contains(f)) {
            entries.insert(self.layout.relative(f), sha256_hex(&std::fs::read(f)?));
        }
        write_json(
            &self.layout.manifest(),
            &json!({ "config_digest": self.digest, "run_id": self.cfg.run_id(), "files": entries }),
        )
    }
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    if !dir.exists() {
        return Ok(());
    }
    for entry in std::fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            collect_files(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

fn write_lines<T: Serialize>(path: &Path, rows: &[T]) -> std::io::Result<()> {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r).map_err(std::io::Error::other)?);
        out.push('\n');
    }
    crate::ingestion::write_atomic(path, out.as_bytes()).map_err(std::io::Error::other)
}

fn read_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> std::io::Result<Vec<T>> {
    std::fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(std::io::Error::other))
        .collect()
}
