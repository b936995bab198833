//! `etfcast`: run the forecasting pipeline, or one stage of it.
//!
//! Exit codes: 0 success, 1 invalid config or invocation, 2 a stage
//! failed, 3 the run completed but some combos failed.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use etfcast::pipeline::{report, Layout, Pipeline, PipelineError, RunConfig, Stage};

#[derive(Parser)]
#[command(
    name = "etfcast",
    version,
    about = "ETF price and news sentiment forecasting pipeline"
)]
struct Cli {
    /// Log filter, e.g. `info` or `etfcast=debug`. Overrides RUST_LOG.
    #[arg(long, global = true)]
    log: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Run configuration (TOML).
    #[arg(short, long)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Fetch prices and news into the raw stores.
    Ingest(ConfigArg),
    /// Score ingested articles.
    Score(ConfigArg),
    /// Aggregate sentiment and build per-ETF panels and the coverage table.
    Panel(ConfigArg),
    /// Tune and checkpoint every regressor and classifier cell.
    Train(ConfigArg),
    /// Combine stage outputs into per-combo metrics and prediction archives.
    Evaluate(ConfigArg),
    /// Render the summary table of a finished run.
    Report {
        #[arg(short, long, conflicts_with = "run_dir", required_unless_present = "run_dir")]
        config: Option<PathBuf>,
        /// Output directory of a run, instead of a config.
        #[arg(long)]
        run_dir: Option<PathBuf>,
    },
    /// Draw overlay plots for every completed combo.
    Plot(ConfigArg),
    /// Every stage in order, resuming from completed work.
    Run {
        #[command(flatten)]
        config: ConfigArg,
        /// Stop after this stage (ingest, score, panel, regression,
        /// classification, evaluate, report, plot).
        #[arg(long)]
        stop_after: Option<Stage>,
    },
}

fn pipeline(path: &Path) -> Result<Pipeline, PipelineError> {
    Pipeline::new(RunConfig::load(path)?)
}

fn stages(p: &Pipeline, stages: &[Stage]) -> Result<i32, PipelineError> {
    let mut code = 0;
    for &s in stages {
        let entry = p.run_stage(s)?;
        println!("{s}: {} {}", entry.status, entry.summary);
        if entry.status != "ok" {
            code = 3;
        }
    }
    Ok(code)
}

fn execute(cmd: Command) -> Result<i32, PipelineError> {
    match cmd {
        Command::Ingest(a) => stages(&pipeline(&a.config)?, &[Stage::Ingest]),
        Command::Score(a) => stages(&pipeline(&a.config)?, &[Stage::Score]),
        Command::Panel(a) => stages(&pipeline(&a.config)?, &[Stage::Panel]),
        Command::Train(a) => stages(&pipeline(&a.config)?, &[Stage::Regression, Stage::Classification]),
        Command::Evaluate(a) => stages(&pipeline(&a.config)?, &[Stage::Evaluate]),
        Command::Plot(a) => stages(&pipeline(&a.config)?, &[Stage::Plot]),
        Command::Report { config: Some(c), .. } => stages(&pipeline(&c)?, &[Stage::Report]),
        Command::Report { run_dir, .. } => {
            let layout = Layout::new(run_dir.expect("required by clap"));
            report(&layout)?;
            print!("{}", std::fs::read_to_string(layout.summary_text())?);
            Ok(0)
        }
        Command::Run { config, stop_after } => {
            let p = pipeline(&config.config)?;
            let outcome = p.run(stop_after)?;
            println!(
                "run {}: {} combos, {} failed; output in {}",
                p.config().run_id(),
                outcome.total_combos,
                outcome.failed_combos,
                p.layout().root().display()
            );
            Ok(outcome.exit_code())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let mut logger = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"));
    if let Some(filter) = &cli.log {
        logger.parse_filters(filter);
    }
    logger.init();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
