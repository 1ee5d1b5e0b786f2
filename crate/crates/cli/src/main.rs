//! `nevent`: command-line pipeline for new-event detection corpora.
//!
//! Every artifact-producing command writes line-delimited records plus a
//! `<out>.manifest.json` holding the configuration and content hashes;
//! `nevent verify` re-runs a manifest and compares the hashes.
//!
//! Exit codes: 0 success, 2 usage, 3 data integrity, 4 service unavailable.

mod artifact;
mod commands;
mod table;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use newevent_core::annotation::{AdjudicationPolicy, ExportSetting, TagSource, DEFAULT_TOKEN_BUDGET};
use newevent_core::corpus::BackupCounts;
use newevent_core::reduce::DEFAULT_CAP;
use newevent_core::Split;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Integrity(String),
    #[error("{0}")]
    Unavailable(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            Self::Integrity(_) => 3,
            Self::Unavailable(_) => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "nevent", version, about = "Corpus workbench for new-event detection in narratives")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Parse CoNLL-U files into a corpus file, optionally reserving backups
    Ingest(IngestArgs),
    /// Extract event candidates from every sentence
    Extract(ExtractArgs),
    /// Cap each sentence's candidate list by clustering
    Reduce(ReduceArgs),
    /// Assemble annotation batches from the non-backup narratives
    Batches(BatchesArgs),
    /// Run the annotation service over HTTP
    Serve(ServeArgs),
    /// Produce baseline predictions in the gold record format
    Baseline(BaselineArgs),
    /// Score predictions against gold
    Eval(EvalArgs),
    /// Inter-annotator agreement on the overlap narratives of an annotation log
    Agree(AgreeArgs),
    /// Descriptive statistics of a gold annotation file
    Stats(StatsArgs),
    /// Merge the annotations of a log into gold records
    Adjudicate(AdjudicateArgs),
    /// Export training examples from gold or from an annotation log
    Export(ExportArgs),
    /// Re-run the command recorded in a manifest and compare output hashes
    Verify(VerifyArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Ingest(_) => "ingest",
            Self::Extract(_) => "extract",
            Self::Reduce(_) => "reduce",
            Self::Batches(_) => "batches",
            Self::Serve(_) => "serve",
            Self::Baseline(_) => "baseline",
            Self::Eval(_) => "eval",
            Self::Agree(_) => "agree",
            Self::Stats(_) => "stats",
            Self::Adjudicate(_) => "adjudicate",
            Self::Export(_) => "export",
            Self::Verify(_) => "verify",
        }
    }

    /// The primary output path, for commands that write artifacts.
    pub fn out_mut(&mut self) -> Option<&mut PathBuf> {
        match self {
            Self::Ingest(a) => Some(&mut a.out),
            Self::Extract(a) => Some(&mut a.out),
            Self::Reduce(a) => Some(&mut a.out),
            Self::Batches(a) => Some(&mut a.out),
            Self::Baseline(a) => Some(&mut a.out),
            Self::Eval(a) => Some(&mut a.out),
            Self::Agree(a) => Some(&mut a.out),
            Self::Stats(a) => Some(&mut a.out),
            Self::Adjudicate(a) => Some(&mut a.out),
            Self::Export(a) => Some(&mut a.out),
            Self::Serve(_) | Self::Verify(_) => None,
        }
    }
}

fn parse_backup_counts(s: &str) -> Result<BackupCounts, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [train, valid, test] = parts[..] else {
        return Err("expected three counts: TRAIN,VALID,TEST".into());
    };
    let n = |p: &str| p.parse::<usize>().map_err(|e| format!("`{p}`: {e}"));
    Ok(BackupCounts::new(n(train)?, n(valid)?, n(test)?))
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    /// CoNLL-U files, one or more narratives each
    #[arg(long, required = true, num_args = 1..)]
    pub conllu: Vec<PathBuf>,
    /// Line-delimited metadata records (narrative_id, split, narrator_id)
    #[arg(long)]
    pub metadata: Option<PathBuf>,
    /// Backup narratives to reserve per split, as TRAIN,VALID,TEST
    #[arg(long, value_parser = parse_backup_counts, requires = "seed")]
    pub backup: Option<BackupCounts>,
    /// Seed for backup sampling
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ExtractArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ReduceArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub candidates: PathBuf,
    /// Maximum candidates kept per sentence
    #[arg(long, default_value_t = DEFAULT_CAP, value_parser = clap::value_parser!(usize))]
    pub cap: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BatchesArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Annotator ids, comma separated
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    pub annotators: Vec<String>,
    #[arg(long)]
    pub n_batches: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ThresholdArgs {
    /// Overlap narratives with alpha below this are flagged
    #[arg(long, default_value_t = 0.4)]
    pub alpha_threshold: f64,
    /// Overlap narratives with segmentation agreement below this are flagged
    #[arg(long, default_value_t = 0.4)]
    pub segmentation_threshold: f64,
    /// Boundary transposition window, in characters
    #[arg(long, default_value_t = newevent_core::metrics::DEFAULT_WINDOW)]
    pub window: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct ServeArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub candidates: PathBuf,
    /// Append-only annotation log; created if missing
    #[arg(long)]
    pub log: PathBuf,
    /// Batch records to register on startup (already registered ones are skipped)
    #[arg(long)]
    pub batches: Option<PathBuf>,
    /// Text file shown to annotators as the guideline digest
    #[arg(long)]
    pub guidelines: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct BaselineArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Reduced candidates (selection setting only)
    #[arg(long, required_if_eq("setting", "selection"))]
    pub candidates: Option<PathBuf>,
    /// random, binary, first, last, new_subject, new_entity (selection);
    /// random, early, late (tagging)
    #[arg(long)]
    pub strategy: String,
    /// Required by the randomized strategies
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub setting: ExportSetting,
    /// Restrict to narratives of one split
    #[arg(long)]
    pub split: Option<Split>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub candidates: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub setting: ExportSetting,
    /// How gold is projected onto tokens in the tagging setting
    #[arg(long, default_value = "spans")]
    pub tag_source: TagSource,
    /// Restrict to gold narratives of one split
    #[arg(long)]
    pub split: Option<Split>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AgreeArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub candidates: PathBuf,
    #[arg(long)]
    pub log: PathBuf,
    /// Only this batch (default: every registered batch)
    #[arg(long)]
    pub batch: Option<String>,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct StatsArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub candidates: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AdjudicateArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub candidates: PathBuf,
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long, default_value = "majority")]
    pub policy: AdjudicationPolicy,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ExportArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub candidates: PathBuf,
    /// Gold records to export
    #[arg(long, conflicts_with = "log", required_unless_present = "log")]
    pub gold: Option<PathBuf>,
    /// Annotation log to adjudicate and export
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Adjudication policy when exporting from a log
    #[arg(long, default_value = "majority")]
    pub policy: AdjudicationPolicy,
    #[arg(long)]
    pub setting: ExportSetting,
    /// Whitespace-token budget per example
    #[arg(long, default_value_t = DEFAULT_TOKEN_BUDGET)]
    pub budget: usize,
    #[arg(long, default_value = "spans")]
    pub tag_source: TagSource,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    /// Manifest written next to a command's output
    pub manifest: PathBuf,
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::run(cli.command, &args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
