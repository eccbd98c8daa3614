//! The `debatesim` command line.
//!
//! Every command is a thin composition of library calls; [`execute`] writes
//! to the given streams and returns the process exit code, so the whole
//! front end is testable in-process.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use debatesim_core::config::{self, ConfigError, Overrides};
use debatesim_core::montecarlo::{self, ExecuteOptions, RunError};
use debatesim_core::persistence::{export_report, RunStore, StoreError};
use debatesim_core::report::{render_analysis, render_plan, render_summary};
use debatesim_core::stats::{compute_report, ReportOptions};
use debatesim_core::{BackendSpec, ExperimentPlan, ToxicityLevel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "debatesim",
    version,
    about = "Monte Carlo harness for toxicity-controlled debates"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run store directory.
    #[arg(long, global = true)]
    pub store: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Trials per condition override.
    #[arg(long, global = true)]
    pub n: Option<u64>,
    /// Maximum debates in flight.
    #[arg(long, global = true)]
    pub concurrency: Option<usize>,
    /// Backend override.
    #[arg(long, global = true, value_parser = ["endpoint", "scripted", "synthetic"])]
    pub backend: Option<String>,
    /// Comma-separated toxicity levels, e.g. `no,heavy`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub levels: Option<Vec<ToxicityLevel>>,
    /// Last histogram bin before the overflow bin.
    #[arg(long, global = true)]
    pub truncate_at: Option<u32>,
    /// Only print errors.
    #[arg(long, short, global = true, conflicts_with = "verbose")]
    pub quiet: bool,
    /// More log output; repeat for debug detail.
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the configuration and print the resolved plan.
    Validate,
    /// Execute the plan into an empty store.
    Run {
        /// Stop after this many transcripts (leaves a resumable store).
        #[arg(long)]
        stop_after: Option<u64>,
    },
    /// Continue a partial store. Without --config the stored plan is used.
    Resume {
        #[arg(long)]
        stop_after: Option<u64>,
    },
    /// Print the statistical tables for a store.
    Analyze,
    /// Write CSV exports for a store.
    Report {
        /// Output directory; defaults to `<store>/exports`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl GlobalArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            n: self.n,
            concurrency: self.concurrency,
            backend: self.backend.clone(),
            levels: self.levels.clone(),
            truncate_at: self.truncate_at,
        }
    }

    /// `tracing` level implied by the verbosity flags.
    pub fn log_level(&self) -> tracing::Level {
        match (self.quiet, self.verbose) {
            (true, _) => tracing::Level::ERROR,
            (false, 0) => tracing::Level::WARN,
            (false, 1) => tracing::Level::INFO,
            _ => tracing::Level::DEBUG,
        }
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Plan(p) => Failure::Usage(p.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli, out, err),
        Err(e) => report_parse_error(e, out, err),
    }
}

/// Prints a clap error or help text and returns the matching exit code.
pub fn report_parse_error(e: clap::Error, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    use clap::error::ErrorKind;
    match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
            let _ = write!(out, "{}", e.render());
            EXIT_OK
        }
        _ => {
            let _ = write!(err, "{}", e.render());
            EXIT_USAGE
        }
    }
}

pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match dispatch(cli, out) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_RUNTIME
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<(), Failure> {
    let g = &cli.global;
    match &cli.command {
        Command::Validate => {
            let resolved = config::resolve(g.config.as_deref(), &g.overrides())?;
            write!(out, "{}", render_plan(&resolved.plan))?;
            writeln!(out, "ok")?;
        }
        Command::Run { stop_after } => {
            let resolved = config::resolve(g.config.as_deref(), &g.overrides())?;
            let mut store = RunStore::open(store_path(g)?)?;
            let options = ExecuteOptions {
                limit: *stop_after,
                ..Default::default()
            };
            let summary = montecarlo::execute_with(&resolved.plan, &mut store, options)?;
            write!(out, "{}", render_summary(&summary))?;
        }
        Command::Resume { stop_after } => {
            let mut store = RunStore::open(store_path(g)?)?;
            let plan = match &g.config {
                Some(path) => config::resolve(Some(path), &g.overrides())?.plan,
                None => stored_plan_with_overrides(&store, g)?,
            };
            let options = ExecuteOptions {
                limit: *stop_after,
                ..Default::default()
            };
            let summary = montecarlo::resume_with(&plan, &mut store, options)?;
            write!(out, "{}", render_summary(&summary))?;
        }
        Command::Analyze => {
            let store = RunStore::open(store_path(g)?)?;
            let outcomes = store.load_outcomes()?;
            let report = compute_report(&outcomes.records, report_options(g)?);
            write!(out, "{}", render_analysis(&report, &outcomes.counts))?;
        }
        Command::Report { out: dir } => {
            let store = RunStore::open(store_path(g)?)?;
            let outcomes = store.load_outcomes()?;
            let report = compute_report(&outcomes.records, report_options(g)?);
            let dir = dir.clone().unwrap_or_else(|| store.exports_dir());
            let files = export_report(&report, &dir)?;
            for path in files.paths {
                writeln!(out, "wrote {}", path.display())?;
            }
        }
    }
    Ok(())
}

fn store_path(g: &GlobalArgs) -> Result<&Path, Failure> {
    g.store
        .as_deref()
        .ok_or_else(|| Failure::Usage("this command needs --store <DIR>".into()))
}

fn report_options(g: &GlobalArgs) -> Result<ReportOptions, Failure> {
    let mut options = match &g.config {
        Some(path) => config::resolve(Some(path), &g.overrides())?.report,
        None => ReportOptions::default(),
    };
    if let Some(t) = g.truncate_at {
        if t == 0 {
            return Err(Failure::Usage("--truncate-at must be at least 1".into()));
        }
        options.truncate_at = t;
    }
    Ok(options)
}

/// Reuses the plan bound to the store. Overrides still apply, so changing
/// anything but the concurrency limit is reported as a plan mismatch.
fn stored_plan_with_overrides(store: &RunStore, g: &GlobalArgs) -> Result<ExperimentPlan, Failure> {
    let mut plan: ExperimentPlan = store
        .stored_plan()?
        .ok_or_else(|| Failure::Usage("store has no plan yet; pass --config or use run".into()))?;
    if let Some(seed) = g.seed {
        plan.master_seed = seed;
    }
    if let Some(n) = g.n {
        plan.n_per_condition = n;
    }
    if let Some(c) = g.concurrency {
        plan.concurrency_limit = c;
    }
    if let Some(levels) = &g.levels {
        plan.levels = levels.clone();
    }
    if let Some(kind) = &g.backend {
        if kind != plan.backend.name() {
            plan.backend = match kind.as_str() {
                "synthetic" => BackendSpec::Synthetic(Default::default()),
                "scripted" => BackendSpec::Scripted(Default::default()),
                _ => BackendSpec::Endpoint(Default::default()),
            };
        }
    }
    Ok(plan)
}
