//! `orderpipe` subcommands. `main.rs` only parses arguments and maps the
//! outcome to an exit code, so everything here can be driven from tests.

pub mod config;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use orderpipe::gateway::{run_bounded, BackendRegistry, GatewayError};
use orderpipe::metrics::{
    aggregate, score_encounter, AggregateOptions, AlignOptions, CorpusReport, Granularity, MetricsError,
};
use orderpipe::orders::MedicalOrder;
use orderpipe::strategies::{DiagnosticsSummary, StrategyError, StrategyKind, StrategyRegistry};
use orderpipe::transcript::{load_dataset, DatasetError, LoadMode, Split};
use serde::{Deserialize, Serialize};

pub use config::{FileConfig, RunArgs, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Backend(#[from] GatewayError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{}: {message}", path.display())]
    Invalid { path: PathBuf, message: String },
    #[error("predictions mention encounters missing from gold: {}", .0.join(", "))]
    IdMismatch(Vec<String>),
}

/// How a finished command should exit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    /// Some encounters failed; the rest were written.
    Partial,
    Failure,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Success => 0,
            Status::Failure => 1,
            Status::Partial => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "orderpipe",
    version,
    about = "Extract and score medical orders from clinical conversations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a strategy over a dataset and write predictions.
    Extract(RunArgs),
    /// Like extract, but also saves every exchange into the fixture directory.
    Record(RunArgs),
    /// Score predictions against gold annotations.
    Evaluate(EvaluateArgs),
    /// Print a comparison table from saved evaluation reports.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Predictions file written by `extract`.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Dataset with gold orders.
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long, default_value = "custom")]
    pub split: Split,
    /// Where to write the report JSON.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Row label; defaults to the predictions file name.
    #[arg(long)]
    pub label: Option<String>,
    /// Averaging for description, reason and provenance.
    #[arg(long, value_enum, default_value = "macro")]
    pub text_averaging: Averaging,
    /// Averaging for order type.
    #[arg(long, value_enum, default_value = "micro")]
    pub type_averaging: Averaging,
    /// Allow pairing orders of different types during alignment.
    #[arg(long)]
    pub any_type: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Averaging {
    Macro,
    Micro,
}

impl From<Averaging> for Granularity {
    fn from(a: Averaging) -> Self {
        match a {
            Averaging::Macro => Granularity::Macro,
            Averaging::Micro => Granularity::Micro,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Report files, optionally as `label=path`.
    #[arg(required = true)]
    pub reports: Vec<String>,
}

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub encounter_id: String,
    pub strategy: StrategyKind,
    pub orders: Vec<MedicalOrder>,
    pub diagnostics: DiagnosticsSummary,
}

/// Encounters that could not be processed, written next to the predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureManifest {
    pub failed: Vec<FailedEncounter>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedEncounter {
    pub encounter_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractOutcome {
    pub predictions: Vec<Prediction>,
    pub failures: Vec<FailedEncounter>,
    pub skipped_records: usize,
}

impl ExtractOutcome {
    pub fn status(&self) -> Status {
        match (self.predictions.is_empty(), self.failures.is_empty()) {
            (_, true) => Status::Success,
            (true, false) => Status::Failure,
            (false, false) => Status::Partial,
        }
    }
}

/// `<output>.failures.json`
pub fn failures_path(output: &Path) -> PathBuf {
    let mut name = output.file_stem().unwrap_or_default().to_os_string();
    name.push(".failures.json");
    output.with_file_name(name)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(io)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs the configured strategy over every encounter and writes the
/// predictions file, sorted by encounter id.
pub fn cmd_extract(
    cfg: &RunConfig,
    strategies: &StrategyRegistry,
    backends: &BackendRegistry,
) -> Result<ExtractOutcome, CliError> {
    let strategy = strategies.build(&cfg.strategy, &cfg.settings)?;
    let provider = backends.build(&cfg.backend, &cfg.backend_config)?;
    let report = load_dataset(&cfg.input, cfg.split, cfg.load_mode)?;
    let total = report.encounters.len();
    tracing::info!(
        encounters = total,
        skipped = report.issues.len(),
        strategy = %cfg.strategy,
        backend = %cfg.backend,
        prompts = %cfg.settings.catalog.version(),
        "starting extraction"
    );

    let results = run_bounded(&report.encounters, cfg.concurrency, |e| {
        let out = provider
            .backend_for(&e.id)
            .map_err(|err| err.to_string())
            .and_then(|backend| strategy.extract(e, backend.as_ref()).map_err(|err| err.to_string()));
        match &out {
            Ok(r) => tracing::info!(encounter = %e.id, orders = r.orders.len(), "done"),
            Err(err) => tracing::warn!(encounter = %e.id, error = %err, "failed"),
        }
        (e.id.clone(), out)
    });

    let mut predictions = Vec::new();
    let mut failures = Vec::new();
    for (id, out) in results {
        match out {
            Ok(r) => predictions.push(Prediction {
                encounter_id: r.encounter_id,
                strategy: r.strategy,
                orders: r.orders,
                diagnostics: r.diagnostics.summary(),
            }),
            Err(error) => failures.push(FailedEncounter {
                encounter_id: id,
                error,
            }),
        }
    }
    predictions.sort_by(|a, b| a.encounter_id.cmp(&b.encounter_id));
    failures.sort_by(|a, b| a.encounter_id.cmp(&b.encounter_id));

    write_json(&cfg.output, &predictions)?;
    let sidecar = failures_path(&cfg.output);
    if failures.is_empty() {
        if sidecar.exists() {
            fs::remove_file(&sidecar).map_err(|source| CliError::Io { path: sidecar, source })?;
        }
    } else {
        write_json(
            &sidecar,
            &FailureManifest {
                failed: failures.clone(),
            },
        )?;
    }

    Ok(ExtractOutcome {
        predictions,
        failures,
        skipped_records: report.issues.len(),
    })
}

/// [`cmd_extract`] with every exchange also written to the fixture
/// directory.
pub fn cmd_record(
    cfg: &RunConfig,
    strategies: &StrategyRegistry,
    backends: &BackendRegistry,
) -> Result<ExtractOutcome, CliError> {
    let dir = cfg
        .backend_config
        .fixtures
        .clone()
        .ok_or_else(|| CliError::Config("record needs --fixtures".into()))?;
    let mut cfg = cfg.clone();
    cfg.backend_config.record_to = Some(dir);
    cmd_extract(&cfg, strategies, backends)
}

pub fn load_predictions(path: &Path) -> Result<Vec<Prediction>, CliError> {
    let predictions: Vec<Prediction> = read_json(path)?;
    let mut seen = BTreeSet::new();
    for p in &predictions {
        if !seen.insert(p.encounter_id.as_str()) {
            return Err(CliError::Invalid {
                path: path.to_path_buf(),
                message: format!("duplicate encounter id `{}`", p.encounter_id),
            });
        }
    }
    Ok(predictions)
}

/// Scores predictions against gold. Gold encounters without a prediction
/// count as empty predictions.
pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<CorpusReport, CliError> {
    let predictions = load_predictions(&args.predictions)?;
    let gold = load_dataset(&args.gold, args.split, LoadMode::Strict)?;

    let mut gold_orders = BTreeMap::new();
    for e in gold.encounters {
        let orders = e.gold_orders.ok_or_else(|| CliError::Invalid {
            path: args.gold.clone(),
            message: format!("encounter `{}` has no gold orders", e.id),
        })?;
        gold_orders.insert(e.id, orders);
    }
    let unknown: Vec<String> = predictions
        .iter()
        .filter(|p| !gold_orders.contains_key(&p.encounter_id))
        .map(|p| p.encounter_id.clone())
        .collect();
    if !unknown.is_empty() {
        return Err(CliError::IdMismatch(unknown));
    }

    let by_id: BTreeMap<&str, &[MedicalOrder]> = predictions
        .iter()
        .map(|p| (p.encounter_id.as_str(), p.orders.as_slice()))
        .collect();
    let align = AlignOptions {
        require_type_match: !args.any_type,
    };
    let scores: Vec<_> = gold_orders
        .iter()
        .map(|(id, gold)| {
            let pred = by_id.get(id.as_str()).copied().unwrap_or(&[]);
            score_encounter(pred, gold, align).with_id(id.clone())
        })
        .collect();
    let report = aggregate(
        &scores,
        AggregateOptions {
            text: args.text_averaging.into(),
            order_type: args.type_averaging.into(),
        },
    )?;
    if let Some(out) = &args.output {
        write_json(out, &report)?;
    }
    Ok(report)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Renders saved reports as one markdown table.
pub fn cmd_report(args: &ReportArgs) -> Result<String, CliError> {
    let mut rows = Vec::new();
    for spec in &args.reports {
        let (label, path) = match spec.split_once('=') {
            Some((label, path)) => (label.to_owned(), PathBuf::from(path)),
            None => (stem(Path::new(spec)), PathBuf::from(spec)),
        };
        let report: CorpusReport = read_json(&path)?;
        rows.push((label, report));
    }
    let refs: Vec<(String, &CorpusReport)> = rows.iter().map(|(l, r)| (l.clone(), r)).collect();
    Ok(CorpusReport::table(&refs))
}

/// Executes one parsed command line, printing results to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<Status, CliError> {
    let strategies = StrategyRegistry::with_builtins();
    let backends = BackendRegistry::with_builtins();
    let print = |out: &mut dyn Write, text: String| {
        writeln!(out, "{text}").map_err(|source| CliError::Io {
            path: PathBuf::from("<stdout>"),
            source,
        })
    };
    match cli.command {
        Command::Extract(args) => {
            let cfg = RunConfig::resolve(&args, "http")?;
            let outcome = cmd_extract(&cfg, &strategies, &backends)?;
            print(out, extract_summary(&cfg, &outcome))?;
            Ok(outcome.status())
        }
        Command::Record(args) => {
            let cfg = RunConfig::resolve(&args, "http")?;
            let outcome = cmd_record(&cfg, &strategies, &backends)?;
            print(out, extract_summary(&cfg, &outcome))?;
            Ok(outcome.status())
        }
        Command::Evaluate(args) => {
            let report = cmd_evaluate(&args)?;
            let label = args.label.clone().unwrap_or_else(|| stem(&args.predictions));
            print(out, CorpusReport::table(&[(label, &report)]))?;
            Ok(Status::Success)
        }
        Command::Report(args) => {
            print(out, cmd_report(&args)?)?;
            Ok(Status::Success)
        }
    }
}

fn extract_summary(cfg: &RunConfig, outcome: &ExtractOutcome) -> String {
    let orders: usize = outcome.predictions.iter().map(|p| p.orders.len()).sum();
    let mut lines = vec![format!(
        "{} encounters extracted, {} orders, {} failed -> {}",
        outcome.predictions.len(),
        orders,
        outcome.failures.len(),
        cfg.output.display()
    )];
    if outcome.skipped_records > 0 {
        lines.push(format!("{} malformed records skipped", outcome.skipped_records));
    }
    for f in &outcome.failures {
        lines.push(format!("failed: {}: {}", f.encounter_id, f.error));
    }
    if !outcome.failures.is_empty() {
        lines.push(format!(
            "failure list written to {}",
            failures_path(&cfg.output).display()
        ));
    }
    lines.join("\n")
}
