//! The `eventide` command line: argument definitions, dispatch, and exit
//! codes. The binary only parses arguments and calls [`main`].
//!
//! Exit codes: 0 success, 1 failure (a JSON error summary goes to stderr),
//! 2 usage error, 3 finished with quarantined records.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::annotate::run_annotation;
use crate::batch::write_quarantine;
use crate::config::{load_config, AppConfig, Paths};
use crate::corpus::{load_corpus, read_corpus, write_corpus, SentenceRecord};
use crate::eval::{evaluate, ArgumentAnchor};
use crate::extract::run_extraction;
use crate::ontology::{load_ontology, validate_ontology, Ontology};
use crate::partition::{make_plan, Strategy};
use crate::recall::{recall_topk, EmbeddingStore};

pub const EXIT_FAILURE: u8 = 1;
/// Same code clap uses for bad arguments.
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_QUARANTINE: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "eventide", version, about = "Multi-LLM event annotation and partitioned event extraction")]
pub struct Cli {
    /// Log filter for the structured stderr log (overridden by RUST_LOG).
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter, refine and annotate pre-annotated candidates with the annotator panel.
    Annotate(RunArgs),
    /// Recall, partition and extract events from a corpus.
    Extract(ExtractArgs),
    /// Print the top-k recalled event types for one sentence.
    Recall(RecallArgs),
    /// Print the partition plan for one sentence's recalled types.
    Partition(PartitionArgs),
    /// Score predictions against gold.
    Eval(EvalArgs),
    /// Check the ontology (and corpus and embeddings, when given).
    Validate(PathArgs),
}

#[derive(Debug, Clone, Args)]
pub struct PathArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub ontology: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub paths: PathArgs,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub parallelism: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub partitions: Option<usize>,
    #[arg(long)]
    pub strategy: Option<Strategy>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub plan: PlanArgs,
}

#[derive(Debug, Clone, Args)]
pub struct RecallArgs {
    #[command(flatten)]
    pub paths: PathArgs,
    /// Sentence id in the embedding store.
    #[arg(long)]
    pub sentence: String,
    #[arg(long)]
    pub top_k: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct PartitionArgs {
    #[command(flatten)]
    pub paths: PathArgs,
    #[arg(long)]
    pub sentence: String,
    #[command(flatten)]
    pub plan: PlanArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    /// Also write the report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Include the trigger span in argument keys.
    #[arg(long)]
    pub anchor_trigger: bool,
}

/// A failure with a stable machine-readable kind.
#[derive(Debug)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    fn new(kind: &'static str, e: impl std::fmt::Display) -> Self {
        CliError { kind, message: e.to_string() }
    }

    pub fn to_json(&self) -> String {
        json!({"error": self.kind, "message": self.message}).to_string()
    }
}

/// What a successful command produced.
#[derive(Debug, Default)]
pub struct Outcome {
    /// Printed to stdout.
    pub stdout: String,
    pub quarantined: usize,
    /// Problems found by `validate`; nonzero fails the command.
    pub violations: usize,
}

fn resolve_config(args: &PathArgs) -> Result<AppConfig, CliError> {
    let mut cfg = match (&args.config, &args.ontology) {
        (Some(path), _) => load_config(path).map_err(|e| CliError::new("config", e))?,
        (None, Some(ont)) => AppConfig::with_paths(Paths::new(ont)),
        (None, None) => return Err(CliError::new("usage", "pass --config or --ontology")),
    };
    if let Some(p) = &args.ontology {
        cfg.paths.ontology = p.clone();
    }
    if let Some(p) = &args.corpus {
        cfg.paths.corpus = Some(p.clone());
    }
    if let Some(p) = &args.embeddings {
        cfg.paths.embeddings = Some(p.clone());
    }
    cfg.validate().map_err(|e| CliError::new("config", e))?;
    Ok(cfg)
}

fn apply_plan(cfg: &mut AppConfig, plan: &PlanArgs) -> Result<(), CliError> {
    let e = &mut cfg.extraction;
    e.top_k = plan.top_k.unwrap_or(e.top_k);
    e.partitions = plan.partitions.unwrap_or(e.partitions);
    e.strategy = plan.strategy.unwrap_or(e.strategy);
    e.seed = plan.seed.or(e.seed);
    e.settings().validate().map_err(|err| CliError::new("config", err))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))
}

fn ontology(cfg: &AppConfig) -> Result<Ontology, CliError> {
    load_ontology(open(&cfg.paths.ontology)?).map_err(|e| CliError::new("ontology", e))
}

fn corpus(cfg: &AppConfig, ont: &Ontology) -> Result<Vec<SentenceRecord>, CliError> {
    let path =
        cfg.paths.corpus.as_ref().ok_or_else(|| CliError::new("usage", "no corpus path (paths.corpus or --corpus)"))?;
    load_corpus(open(path)?, ont).map_err(|e| CliError::new("corpus", e))
}

fn embeddings(cfg: &AppConfig) -> Result<EmbeddingStore, CliError> {
    let path = cfg
        .paths
        .embeddings
        .as_ref()
        .ok_or_else(|| CliError::new("usage", "no embedding store path (paths.embeddings or --embeddings)"))?;
    EmbeddingStore::load(open(path)?).map_err(|e| CliError::new("embeddings", e))
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::new("io", format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    body(&mut w).and_then(|_| w.flush()).map_err(io_err(path))
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn write_outputs<R: Serialize>(
    dir: &Path,
    names: [&str; 3],
    records: &[SentenceRecord],
    report: &R,
    quarantined: &[crate::batch::QuarantineEntry],
) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_file(&dir.join(names[0]), |w| write_corpus(records, w).map(|_| ()))?;
    write_file(&dir.join(names[1]), |w| w.write_all(pretty(report).as_bytes()))?;
    write_file(&dir.join(names[2]), |w| write_quarantine(quarantined, w))
}

fn apply_run(cfg: &mut AppConfig, run: &RunArgs) -> Result<(), CliError> {
    if let Some(d) = &run.output_dir {
        cfg.paths.output_dir = d.clone();
    }
    if let Some(p) = run.parallelism {
        if p == 0 {
            return Err(CliError::new("config", "--parallelism must be at least 1"));
        }
        cfg.run.parallelism = p;
    }
    Ok(())
}

fn annotate(args: &RunArgs) -> Result<Outcome, CliError> {
    let mut cfg = resolve_config(&args.paths)?;
    apply_run(&mut cfg, args)?;
    let ont = ontology(&cfg)?;
    let records = corpus(&cfg, &ont)?;
    let clients = cfg.clients().map_err(|e| CliError::new("config", e))?;
    let acfg = cfg.annotation_config(&clients).map_err(|e| CliError::new("config", e))?;
    let run = run_annotation(&records, &ont, &acfg, cfg.run.parallelism).map_err(|e| CliError::new("annotate", e))?;
    write_outputs(
        &cfg.paths.output_dir,
        ["annotated.jsonl", "annotation_report.json", "annotation_quarantine.jsonl"],
        &run.records,
        &run.report,
        &run.quarantined,
    )?;
    Ok(Outcome { stdout: pretty(&run.report), quarantined: run.quarantined.len(), violations: 0 })
}

fn extract(args: &ExtractArgs) -> Result<Outcome, CliError> {
    let mut cfg = resolve_config(&args.run.paths)?;
    apply_run(&mut cfg, &args.run)?;
    apply_plan(&mut cfg, &args.plan)?;
    let ont = ontology(&cfg)?;
    let records = corpus(&cfg, &ont)?;
    let store = embeddings(&cfg)?;
    let clients = cfg.clients().map_err(|e| CliError::new("config", e))?;
    let ecfg = cfg.extract_config(&clients).map_err(|e| CliError::new("config", e))?;
    let run =
        run_extraction(&records, &ont, &store, &ecfg, cfg.run.parallelism).map_err(|e| CliError::new("extract", e))?;
    write_outputs(
        &cfg.paths.output_dir,
        ["predictions.jsonl", "extraction_report.json", "extraction_quarantine.jsonl"],
        &run.records,
        &run.report,
        &run.quarantined,
    )?;
    Ok(Outcome { stdout: pretty(&run.report), quarantined: run.quarantined.len(), violations: 0 })
}

fn recall(args: &RecallArgs) -> Result<Outcome, CliError> {
    let cfg = resolve_config(&args.paths)?;
    let ont = ontology(&cfg)?;
    let store = embeddings(&cfg)?;
    let k = args.top_k.unwrap_or(cfg.extraction.top_k);
    let cands = recall_topk(&args.sentence, &store, &ont, k).map_err(|e| CliError::new("recall", e))?;
    Ok(Outcome { stdout: pretty(&cands), ..Default::default() })
}

fn partition(args: &PartitionArgs) -> Result<Outcome, CliError> {
    let mut cfg = resolve_config(&args.paths)?;
    apply_plan(&mut cfg, &args.plan)?;
    let ont = ontology(&cfg)?;
    let store = embeddings(&cfg)?;
    let e = &cfg.extraction;
    let cands = recall_topk(&args.sentence, &store, &ont, e.top_k).map_err(|e| CliError::new("recall", e))?;
    let plan = make_plan(e.strategy, &cands, e.partitions, e.seed).map_err(|e| CliError::new("partition", e))?;
    Ok(Outcome { stdout: pretty(&plan), ..Default::default() })
}

fn eval(args: &EvalArgs) -> Result<Outcome, CliError> {
    let pred = read_corpus(open(&args.pred)?).map_err(|e| CliError::new("corpus", e))?;
    let gold = read_corpus(open(&args.gold)?).map_err(|e| CliError::new("corpus", e))?;
    let anchor = if args.anchor_trigger { ArgumentAnchor::EventTypeAndTrigger } else { ArgumentAnchor::EventType };
    let report = evaluate(&pred, &gold, anchor).map_err(|e| CliError::new("eval", e))?;
    let text = report.to_json();
    if let Some(path) = &args.report {
        write_file(path, |w| w.write_all(text.as_bytes()))?;
    }
    Ok(Outcome { stdout: text, ..Default::default() })
}

#[derive(Serialize)]
struct ValidationSummary {
    event_types: usize,
    role_types: usize,
    violations: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    corpus_records: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    missing_sentence_embeddings: Option<Vec<String>>,
}

fn validate(args: &PathArgs) -> Result<Outcome, CliError> {
    let cfg = resolve_config(args)?;
    let ont = ontology(&cfg)?;
    let mut summary = ValidationSummary {
        event_types: ont.len(),
        role_types: ont.distinct_role_count(),
        violations: validate_ontology(&ont),
        corpus_records: None,
        missing_sentence_embeddings: None,
    };
    let records = match &cfg.paths.corpus {
        Some(_) => Some(corpus(&cfg, &ont)?),
        None => None,
    };
    summary.corpus_records = records.as_ref().map(Vec::len);
    if cfg.paths.embeddings.is_some() {
        let store = embeddings(&cfg)?;
        for t in ont.types() {
            if store.event_type(&t.id).is_err() {
                summary.violations.push(format!("no type embedding: {}", t.id));
            }
        }
        if let Some(records) = &records {
            summary.missing_sentence_embeddings =
                Some(records.iter().filter(|r| store.sentence(&r.id).is_err()).map(|r| r.id.clone()).collect());
        }
    }
    Ok(Outcome { stdout: pretty(&summary), violations: summary.violations.len(), ..Default::default() })
}

/// Runs one parsed command.
pub fn dispatch(command: &Command) -> Result<Outcome, CliError> {
    match command {
        Command::Annotate(a) => annotate(a),
        Command::Extract(a) => extract(a),
        Command::Recall(a) => recall(a),
        Command::Partition(a) => partition(a),
        Command::Eval(a) => eval(a),
        Command::Validate(a) => validate(a),
    }
}

/// Maps a dispatch result to an exit code, printing its output.
pub fn finish(result: Result<Outcome, CliError>) -> ExitCode {
    match result {
        Ok(out) => {
            print!("{}", out.stdout);
            if out.violations > 0 {
                eprintln!("{}", json!({"error": "validation", "violations": out.violations}));
                ExitCode::from(EXIT_FAILURE)
            } else if out.quarantined > 0 {
                eprintln!("{}", json!({"quarantined": out.quarantined}));
                ExitCode::from(EXIT_QUARANTINE)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(if e.kind == "usage" { EXIT_USAGE } else { EXIT_FAILURE })
        }
    }
}

/// Line-delimited JSON log events on stderr.
pub fn init_logging(level: &str) {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .or_else(|_| tracing_subscriber::EnvFilter::try_new(level))
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn"));
    let _ = tracing_subscriber::fmt().json().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(&cli.log_level);
    finish(dispatch(&cli.command))
}
