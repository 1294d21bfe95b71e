//! `litera` command line.
//!
//! Exit codes: 0 success, 1 configuration error, 2 provider error, 3 input
//! error (including malformed arguments). Results go to stdout; diagnostics
//! go to stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;
use thiserror::Error;

use crate::config::{AppConfig, ConfigError};
use crate::corpus::{export_finetune, load_corpus, Corpus, CorpusError, CorpusFormat, FineTuneJobSpec};
use crate::metrics::{build_report, build_report_ordered, EvalReport, MetricsError};
use crate::pipeline::{run_ablation, AblationError, Pipeline, PipelineError, Variant};
use crate::prompts::PromptName;
use crate::service::{self, AppState};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("provider error: {0}")]
    Provider(String),
    #[error("input error: {0}")]
    Input(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Provider(_) => 2,
            CliError::Input(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Pipeline(p) => p.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match &e {
            PipelineError::Config(_) => CliError::Config(e.to_string()),
            PipelineError::Stage { .. } => CliError::Provider(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::External(ext) => CliError::Provider(ext.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "litera", version, about = "Multi-layered Latin to English translation")]
pub struct Cli {
    /// TOML config file. Defaults to $LITERA_CONFIG when set.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Chat-completions base URL, overriding config and environment.
    #[arg(long, global = true)]
    pub provider_url: Option<String>,
    /// Use a scripted mock provider (TOML or JSON) instead of HTTP.
    #[arg(long, global = true)]
    pub mock: Option<PathBuf>,
    /// Debug logging on stderr and full system prompts in traces.
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Translate Latin text.
    Translate(TranslateArgs),
    /// Score hypothesis files against a reference corpus.
    Eval(EvalArgs),
    /// Run pipeline variants over a corpus and compare them.
    Ablate(AblateArgs),
    /// Write a chat-format fine-tuning file from a parallel corpus.
    ExportFinetune(ExportArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct TranslateArgs {
    /// Latin text to translate.
    #[arg(long, conflicts_with = "input", required_unless_present = "input")]
    pub text: Option<String>,
    /// File with one Latin segment per line.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Also produce the readability-oriented translation.
    #[arg(long)]
    pub non_literal: bool,
    /// Write the JSON traces (an array, one per segment) here.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub variant: Option<Variant>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Reference corpus (JSONL or TSV).
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// System output as NAME=FILE, one segment per line. Repeatable.
    #[arg(long = "hyp", required = true, value_parser = parse_hyp)]
    pub hyps: Vec<(String, PathBuf)>,
    /// Write the machine-readable report here.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Add the external learned-metric column (needs [scorer] in config).
    #[arg(long)]
    pub external: bool,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Comma-separated variant names.
    #[arg(long, default_value = "full,no_middle_revision,no_final_revision,base_candidate_aggregator,single_aggregator_mini,single_fine_tuned")]
    pub variants: String,
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[arg(long)]
    pub external: bool,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Job-spec metadata path. Defaults to OUT with extension `job.json`.
    #[arg(long)]
    pub job_spec: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Address to listen on, overriding config.
    #[arg(long)]
    pub bind: Option<String>,
}

fn parse_hyp(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_string(), path.into())),
        _ => Err(format!("expected NAME=FILE, got {s:?}")),
    }
}

/// Parses a comma-separated variant list. Empty lists and unknown names are
/// input errors.
pub fn parse_variant_list(s: &str) -> Result<Vec<Variant>, CliError> {
    let names: Vec<&str> = s.split(',').map(str::trim).filter(|n| !n.is_empty()).collect();
    if names.is_empty() {
        return Err(CliError::Input(format!(
            "no variants given; valid variants: {}",
            Variant::names()
        )));
    }
    names
        .into_iter()
        .map(|n| n.parse::<Variant>().map_err(CliError::Input))
        .collect()
}

fn resolve_config(cli: &Cli) -> Result<AppConfig, CliError> {
    let mut cfg = AppConfig::load(cli.config.as_deref())?;
    if let Some(url) = &cli.provider_url {
        cfg.provider.base_url = url.clone();
    }
    if let Some(mock) = &cli.mock {
        cfg.mock_script = Some(mock.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn load_ref_corpus(path: &Path) -> Result<Corpus, CliError> {
    Ok(load_corpus(path, CorpusFormat::from_path(path))?)
}

async fn cmd_translate(cfg: &AppConfig, args: TranslateArgs, verbose: bool) -> Result<(), CliError> {
    let segments: Vec<String> = match (&args.text, &args.input) {
        (Some(t), _) => vec![t.clone()],
        (None, Some(path)) => read_text(path)?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect(),
        (None, None) => return Err(CliError::Input("--text or --input is required".into())),
    };
    if segments.is_empty() {
        return Err(CliError::Input("no segments to translate".into()));
    }
    let mut pipeline: Pipeline = cfg.pipeline()?;
    if let Some(v) = args.variant {
        pipeline = pipeline.with_variant(v);
    }

    let mut traces = Vec::with_capacity(segments.len());
    for seg in &segments {
        let trace = if args.non_literal {
            pipeline.translate_with_non_literal(seg).await?
        } else {
            pipeline.translate(seg).await?
        };
        if args.non_literal {
            println!("Literal: {}", trace.final_text);
            println!("Non-literal: {}", trace.non_literal.as_deref().unwrap_or_default());
            println!();
        } else {
            println!("{}", trace.final_text);
        }
        tracing::debug!(calls = trace.calls.len(), "segment translated");
        traces.push(trace.to_json(verbose));
    }
    if let Some(path) = &args.trace {
        let json = serde_json::to_string_pretty(&Value::Array(traces)).expect("trace serializes");
        write_text(path, &(json + "\n"))?;
    }
    Ok(())
}

fn emit_report(report: &EvalReport, first_header: &str, json: Option<&Path>) -> Result<(), CliError> {
    print!("{}", report.render_with_first_header(first_header));
    if let Some(path) = json {
        write_text(path, &(report.to_json() + "\n"))?;
    }
    Ok(())
}

fn scorer_for(cfg: &AppConfig, external: bool) -> Result<Option<&crate::metrics::ScorerConfig>, CliError> {
    match (external, &cfg.scorer) {
        (false, _) => Ok(None),
        (true, Some(s)) => Ok(Some(s)),
        (true, None) => Err(CliError::Config("--external needs a [scorer] section in the config".into())),
    }
}

async fn cmd_eval(cfg: &AppConfig, args: EvalArgs) -> Result<(), CliError> {
    let corpus = load_ref_corpus(&args.reference)?;
    let mut systems = Vec::with_capacity(args.hyps.len());
    for (name, path) in &args.hyps {
        let lines: Vec<String> = read_text(path)?.lines().map(String::from).collect();
        systems.push((name.clone(), lines));
    }
    let report = build_report(&corpus, &systems, scorer_for(cfg, args.external)?).await?;
    emit_report(&report, "Model", args.json.as_deref())
}

async fn cmd_ablate(cfg: &AppConfig, args: AblateArgs) -> Result<(), CliError> {
    let variants = parse_variant_list(&args.variants)?;
    let scorer = scorer_for(cfg, args.external)?;
    let corpus = load_ref_corpus(&args.corpus)?;
    let pipeline = cfg.pipeline()?;
    let runs = run_ablation(&pipeline, &corpus, &variants)
        .await
        .map_err(|e: AblationError| CliError::Input(e.to_string()))?;

    let mut failed = 0;
    for run in &runs {
        eprintln!(
            "{}: {} calls, {} failed segments, {:.2}s",
            run.variant,
            run.total_calls,
            run.failures(),
            run.wall_time.as_secs_f64()
        );
        for seg in &run.segments {
            if let Err(msg) = &seg.result {
                eprintln!("  {} {}: {msg}", run.variant, seg.segment_id);
            }
        }
        failed += run.failures();
    }
    eprintln!("total calls: {}", runs.iter().map(|r| r.total_calls).sum::<usize>());

    let systems: Vec<(String, Vec<String>)> = runs
        .iter()
        .map(|r| (r.variant.label().to_string(), r.hypotheses()))
        .collect();
    let report = build_report_ordered(&corpus, &systems, scorer).await?;
    emit_report(&report, "Variant", args.json.as_deref())?;
    if failed > 0 {
        return Err(CliError::Provider(format!("{failed} segment translations failed")));
    }
    Ok(())
}

fn cmd_export(cfg: &AppConfig, args: ExportArgs) -> Result<(), CliError> {
    let corpus = load_ref_corpus(&args.corpus)?;
    let prompts = cfg.prompts()?;
    let count = export_finetune(&corpus, prompts.text(PromptName::FineTunedSystem), &args.out)?;
    let spec_path = args.job_spec.unwrap_or_else(|| args.out.with_extension("job.json"));
    FineTuneJobSpec::default().write(&spec_path)?;
    println!("{count}");
    eprintln!("wrote {count} records to {} and job spec to {}", args.out.display(), spec_path.display());
    Ok(())
}

async fn cmd_serve(mut cfg: AppConfig, args: ServeArgs, verbose: bool) -> Result<(), CliError> {
    if let Some(bind) = args.bind {
        cfg.service.bind = bind;
    }
    let pipeline = cfg.pipeline()?;
    let listener = tokio::net::TcpListener::bind(&cfg.service.bind)
        .await
        .map_err(|e| CliError::Config(format!("cannot bind {}: {e}", cfg.service.bind)))?;
    let addr = listener.local_addr().map_err(|e| CliError::Config(e.to_string()))?;
    eprintln!("listening on http://{addr}");
    let state = AppState::new(pipeline, cfg.service.trace_capacity, verbose);
    service::serve(
        listener,
        state,
        service::shutdown_signal(),
        Duration::from_millis(cfg.service.shutdown_grace_ms),
    )
    .await
    .map_err(|e| CliError::Provider(e.to_string()))
}

pub async fn run(cli: Cli) -> Result<(), CliError> {
    let verbose = cli.verbose;
    let cfg = resolve_config(&cli)?;
    match cli.command {
        Command::Translate(args) => cmd_translate(&cfg, args, verbose).await,
        Command::Eval(args) => cmd_eval(&cfg, args).await,
        Command::Ablate(args) => cmd_ablate(&cfg, args).await,
        Command::Serve(args) => cmd_serve(cfg, args, verbose).await,
        Command::ExportFinetune(args) => cmd_export(&cfg, args),
    }
}

fn init_logging(verbose: bool) {
    let default = if verbose { "debug" } else { "warn" };
    let filter = tracing_subscriber::EnvFilter::try_from_env("LITERA_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    init_logging(cli.verbose);
    let runtime = match tokio::runtime::Builder::new_multi_thread().enable_all().build() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: cannot start runtime: {e}");
            return ExitCode::from(1);
        }
    };
    match runtime.block_on(run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
