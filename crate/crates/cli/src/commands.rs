//! Subcommand implementations.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use clap::Parser;
use newevent_core::annotation::{
    assemble_batches, export_training_examples, AnnotationService, Batch, EventLog, ExportRecord, ExportSetting,
    IaaReport, IaaStatus, IaaThresholds, ServiceError, TagSource,
};
use newevent_core::baselines::{SelectorStrategy, TaggerStrategy};
use newevent_core::corpus::{parse_conllu, reserve_backup, NarrativeMetadata};
use newevent_core::evaluate::{evaluate_selection, evaluate_tagging, selection_predictions, tagging_predictions};
use newevent_core::extract::extract_corpus;
use newevent_core::metrics::{corpus_statistics, AlphaOutcome, ItemStats, Prf};
use newevent_core::reduce::reduce;
use newevent_core::{Narrative, Split};
use serde::Serialize;

use crate::artifact::{digests_by_role, Manifest, Run};
use crate::table::{fixed, Table};
use crate::{
    AdjudicateArgs, AgreeArgs, BaselineArgs, BatchesArgs, Cli, Command, EvalArgs, ExportArgs, ExtractArgs, Failure,
    IngestArgs, ReduceArgs, ServeArgs, StatsArgs, ThresholdArgs, VerifyArgs,
};

pub fn run(command: Command, args: &[String]) -> Result<(), Failure> {
    match &command {
        Command::Serve(a) => serve(a),
        Command::Verify(a) => verify(a),
        _ => produce(&command, args).map(|_| ()),
    }
}

/// Runs an artifact-producing command and commits its outputs.
fn produce(command: &Command, args: &[String]) -> Result<Manifest, Failure> {
    let mut run = Run::default();
    match command {
        Command::Ingest(a) => ingest(&mut run, a)?,
        Command::Extract(a) => extract(&mut run, a)?,
        Command::Reduce(a) => reduce_candidates(&mut run, a)?,
        Command::Batches(a) => batches(&mut run, a)?,
        Command::Baseline(a) => baseline(&mut run, a)?,
        Command::Eval(a) => eval(&mut run, a)?,
        Command::Agree(a) => agree(&mut run, a)?,
        Command::Stats(a) => stats(&mut run, a)?,
        Command::Adjudicate(a) => adjudicate(&mut run, a)?,
        Command::Export(a) => export(&mut run, a)?,
        Command::Serve(_) | Command::Verify(_) => unreachable!("handled by run"),
    }
    run.commit(command.name(), args, command)
}

fn service_failure(e: ServiceError) -> Failure {
    match e {
        ServiceError::Storage(m) => Failure::Unavailable(m),
        other => Failure::Integrity(other.to_string()),
    }
}

fn thresholds(a: &ThresholdArgs) -> IaaThresholds {
    IaaThresholds { alpha: a.alpha_threshold, segmentation: a.segmentation_threshold, window: a.window }
}

/// Loads corpus and candidates, then replays a log into an offline service.
fn offline_service(run: &mut Run, corpus: &Path, candidates: &Path, log: &Path) -> Result<AnnotationService, Failure> {
    let corpus = run.corpus(corpus)?;
    let candidates = run.candidates(candidates, &corpus)?;
    run.read("log", log)?;
    let log = EventLog::read_only(log).map_err(service_failure)?;
    AnnotationService::open(corpus, candidates, log).map_err(service_failure)
}

fn ingest(run: &mut Run, a: &IngestArgs) -> Result<(), Failure> {
    let metadata: HashMap<String, NarrativeMetadata> = match &a.metadata {
        Some(path) => run
            .records::<NarrativeMetadata>("metadata", path)?
            .into_iter()
            .map(|m| (m.narrative_id.clone(), m))
            .collect(),
        None => HashMap::new(),
    };
    let mut narratives = Vec::new();
    for (i, path) in a.conllu.iter().enumerate() {
        let text = run.read(&format!("conllu[{i}]"), path)?;
        let parsed =
            parse_conllu(&text, &metadata).map_err(|e| Failure::Integrity(format!("{}: {e}", path.display())))?;
        narratives.extend(parsed);
    }
    let integrity = |e: newevent_core::corpus::CorpusError| Failure::Integrity(e.to_string());
    newevent_core::Corpus::new(narratives.clone()).map_err(integrity)?;
    let narratives = match (a.backup, a.seed) {
        (Some(counts), Some(seed)) => {
            let (mut working, backup) = reserve_backup(narratives, counts, seed).map_err(|e| match e {
                newevent_core::corpus::CorpusError::BackupCount { .. } => Failure::Usage(e.to_string()),
                other => integrity(other),
            })?;
            working.extend(backup);
            working
        }
        (Some(_), None) => return Err(Failure::Usage("--backup needs --seed".into())),
        (None, _) => narratives,
    };
    let mut summary = Table::new(["split", "narratives", "backup", "sentences"]);
    for split in Split::ALL {
        let in_split: Vec<&Narrative> = narratives.iter().filter(|n| n.split == split).collect();
        summary.row([
            split.to_string(),
            in_split.len().to_string(),
            in_split.iter().filter(|n| n.is_backup).count().to_string(),
            in_split.iter().map(|n| n.sentences.len()).sum::<usize>().to_string(),
        ]);
    }
    eprint!("{}", summary.render());
    run.stage_records("corpus", &a.out, &narratives)
}

fn extract(run: &mut Run, a: &ExtractArgs) -> Result<(), Failure> {
    let corpus = run.corpus(&a.corpus)?;
    let index = extract_corpus(&corpus);
    eprintln!("extracted {} candidates from {} sentences", index.total(), corpus.sentences().count());
    run.stage_records("candidates", &a.out, corpus.sentences().flat_map(|s| index.get(&s.key())))
}

fn reduce_candidates(run: &mut Run, a: &ReduceArgs) -> Result<(), Failure> {
    if a.cap == 0 {
        return Err(Failure::Usage("--cap must be at least 1".into()));
    }
    let corpus = run.corpus(&a.corpus)?;
    let full = run.candidates(&a.candidates, &corpus)?;
    let reduced = full.map_lists(|list| reduce(list, a.cap));
    eprintln!("kept {} of {} candidates (cap {})", reduced.total(), full.total(), a.cap);
    run.stage_records("candidates", &a.out, corpus.sentences().flat_map(|s| reduced.get(&s.key())))
}

fn batches(run: &mut Run, a: &BatchesArgs) -> Result<(), Failure> {
    let corpus = run.corpus(&a.corpus)?;
    let pool: Vec<Narrative> = corpus.narratives().iter().filter(|n| !n.is_backup).cloned().collect();
    let batches = assemble_batches(&pool, &a.annotators, a.n_batches, a.seed).map_err(|e| match e {
        ServiceError::Assembly(m) => Failure::Usage(m),
        other => service_failure(other),
    })?;
    let mut table = Table::new(["batch", "overlap", "singles"]);
    for b in &batches {
        let singles: usize = b.assignments.values().map(Vec::len).sum();
        table.row([b.id.clone(), b.overlap_narrative.clone(), singles.to_string()]);
    }
    eprint!("{}", table.render());
    run.stage_records("batches", &a.out, &batches)
}

fn serve(a: &ServeArgs) -> Result<(), Failure> {
    let mut run = Run::default();
    let corpus = run.corpus(&a.corpus)?;
    let candidates = run.candidates(&a.candidates, &corpus)?;
    let batches: Vec<Batch> = match &a.batches {
        Some(path) => run.records("batches", path)?,
        None => Vec::new(),
    };
    let log = EventLog::open(&a.log).map_err(service_failure)?;
    let mut service = AnnotationService::open(corpus, candidates, log)
        .map_err(service_failure)?
        .with_thresholds(thresholds(&a.thresholds));
    if let Some(path) = &a.guidelines {
        service = service.with_guideline_digest(run.read("guidelines", path)?);
    }
    let registered = service.batches();
    for batch in batches {
        match registered.iter().find(|b| b.id == batch.id) {
            Some(existing) if *existing == batch => {}
            Some(_) => {
                return Err(Failure::Integrity(format!(
                    "batch `{}` is already registered with different contents",
                    batch.id
                )))
            }
            None => {
                service.register_batch(batch).map_err(service_failure)?;
            }
        }
    }
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::Unavailable(e.to_string()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(a.addr)
            .await
            .map_err(|e| Failure::Unavailable(format!("cannot listen on {}: {e}", a.addr)))?;
        let local = listener.local_addr().map_err(|e| Failure::Unavailable(e.to_string()))?;
        eprintln!("listening on http://{local}");
        newevent_server::serve(listener, Arc::new(service)).await.map_err(|e| Failure::Unavailable(e.to_string()))
    })
}

fn baseline(run: &mut Run, a: &BaselineArgs) -> Result<(), Failure> {
    let corpus = run.corpus(&a.corpus)?;
    let narratives: Vec<&Narrative> =
        corpus.narratives().iter().filter(|n| a.split.is_none_or(|s| n.split == s)).collect();
    let usage = |e: newevent_core::baselines::StrategyError| Failure::Usage(e.to_string());
    let predictions = match a.setting {
        ExportSetting::Selection => {
            let strategy = SelectorStrategy::from_parts(&a.strategy, a.seed).map_err(usage)?;
            let path = a.candidates.as_ref().ok_or_else(|| Failure::Usage("--candidates is required".into()))?;
            let candidates = run.candidates(path, &corpus)?;
            selection_predictions(strategy, narratives.iter().copied(), &candidates)
        }
        ExportSetting::Tagging => {
            let strategy = TaggerStrategy::from_parts(&a.strategy, a.seed).map_err(usage)?;
            tagging_predictions(strategy, narratives.iter().copied())
        }
    };
    eprintln!("{} prediction records over {} narratives", predictions.len(), narratives.len());
    run.stage_records("predictions", &a.out, &predictions)
}

#[derive(Debug, Serialize)]
struct EvalReport {
    setting: ExportSetting,
    #[serde(skip_serializing_if = "Option::is_none")]
    tag_source: Option<TagSource>,
    split: Option<Split>,
    narratives: usize,
    sentences: usize,
    #[serde(flatten)]
    scores: Prf,
}

fn eval(run: &mut Run, a: &EvalArgs) -> Result<(), Failure> {
    let corpus = run.corpus(&a.corpus)?;
    let candidates = run.candidates(&a.candidates, &corpus)?;
    let gold = run.gold("gold", &a.gold, &corpus)?;
    let predictions = run.gold("predictions", &a.predictions, &corpus)?;
    let scope: Vec<String> = gold
        .narrative_ids()
        .into_iter()
        .filter(|id| a.split.is_none_or(|s| corpus.get(id).is_some_and(|n| n.split == s)))
        .map(String::from)
        .collect();
    let integrity = |e: newevent_core::evaluate::EvalError| Failure::Integrity(e.to_string());
    let scores = match a.setting {
        ExportSetting::Selection => evaluate_selection(&corpus, &candidates, &gold, &predictions, &scope),
        ExportSetting::Tagging => evaluate_tagging(&corpus, &candidates, &gold, &predictions, &scope, a.tag_source),
    }
    .map_err(integrity)?;
    let report = EvalReport {
        setting: a.setting,
        tag_source: (a.setting == ExportSetting::Tagging).then_some(a.tag_source),
        split: a.split,
        narratives: scope.len(),
        sentences: scope.iter().filter_map(|id| corpus.get(id)).map(|n| n.sentences.len()).sum(),
        scores,
    };
    let mut table = Table::new(["metric", "value"]);
    table.row(["narratives".to_string(), report.narratives.to_string()]);
    table.row(["sentences".to_string(), report.sentences.to_string()]);
    table.row(["precision".to_string(), fixed(scores.precision)]);
    table.row(["recall".to_string(), fixed(scores.recall)]);
    table.row(["f1".to_string(), fixed(scores.f1)]);
    table.row(["tp / fp / fn".to_string(), format!("{} / {} / {}", scores.tp, scores.fp, scores.fn_)]);
    print!("{}", table.render());
    run.stage_records("report", &a.out, [&report])
}

fn agree(run: &mut Run, a: &AgreeArgs) -> Result<(), Failure> {
    let service = offline_service(run, &a.corpus, &a.candidates, &a.log)?.with_thresholds(thresholds(&a.thresholds));
    let ids: Vec<String> = match &a.batch {
        Some(id) => vec![id.clone()],
        None => service.batches().into_iter().map(|b| b.id).collect(),
    };
    let reports: Vec<IaaReport> = ids
        .iter()
        .map(|id| {
            service.iaa(id).map_err(|e| match e {
                ServiceError::UnknownBatch(_) => Failure::Usage(e.to_string()),
                other => service_failure(other),
            })
        })
        .collect::<Result<_, _>>()?;
    let mut table = Table::new(["batch", "narrative", "status", "alpha", "segmentation", "flagged"]);
    for r in &reports {
        let row = match &r.status {
            IaaStatus::Pending { missing } => vec![
                r.batch_id.clone(),
                r.narrative_id.clone(),
                format!("pending ({} missing)", missing.len()),
                String::new(),
                String::new(),
                String::new(),
            ],
            IaaStatus::Complete { alpha, segmentation, flagged, .. } => vec![
                r.batch_id.clone(),
                r.narrative_id.clone(),
                "complete".into(),
                match alpha {
                    Some(AlphaOutcome::Score(v)) => fixed(*v),
                    Some(AlphaOutcome::NoVariation) => "no variation".into(),
                    None => "n/a".into(),
                },
                segmentation.map_or("n/a".into(), fixed),
                if *flagged { "yes" } else { "no" }.into(),
            ],
        };
        table.row(row);
    }
    print!("{}", table.render());
    run.stage_records("report", &a.out, &reports)
}

fn item_rows(table: &mut Table, label: &str, s: &ItemStats) {
    let half = |h: Option<newevent_core::metrics::HalfSplit>| {
        h.map_or("n/a".into(), |h| format!("{:.1}% / {:.1}%", h.first, h.second))
    };
    table.row([format!("{label}: total"), s.total.to_string()]);
    table.row([format!("{label}: per sentence"), fixed(s.per_sentence)]);
    table.row([format!("{label}: per narrative"), fixed(s.per_narrative)]);
    table.row([format!("{label}: per narrator"), fixed(s.per_narrator)]);
    table.row([format!("{label}: sentence halves"), half(s.sentence_half)]);
    table.row([format!("{label}: narrative halves"), half(s.narrative_half)]);
}

fn stats(run: &mut Run, a: &StatsArgs) -> Result<(), Failure> {
    let corpus = run.corpus(&a.corpus)?;
    let candidates = run.candidates(&a.candidates, &corpus)?;
    let gold = run.gold("gold", &a.gold, &corpus)?;
    let report = corpus_statistics(&gold, &corpus, &candidates);
    let mut table = Table::new(["statistic", "value"]);
    table.row(["narratives".to_string(), report.narratives.to_string()]);
    table.row(["narrators".to_string(), report.narrators.to_string()]);
    table.row(["sentences".to_string(), report.sentences.to_string()]);
    table.row(["candidates extracted".to_string(), report.candidates_extracted.to_string()]);
    item_rows(&mut table, "selected", &report.selected_candidates);
    item_rows(&mut table, "added spans", &report.added_spans);
    print!("{}", table.render());
    run.stage_records("report", &a.out, [&report])
}

fn adjudicate(run: &mut Run, a: &AdjudicateArgs) -> Result<(), Failure> {
    let service = offline_service(run, &a.corpus, &a.candidates, &a.log)?;
    let gold = service.adjudicate(a.policy);
    eprintln!("{} gold records ({})", gold.len(), a.policy);
    run.stage_records("gold", &a.out, &gold)
}

fn export(run: &mut Run, a: &ExportArgs) -> Result<(), Failure> {
    let records: Vec<ExportRecord> = match (&a.gold, &a.log) {
        (Some(gold), None) => {
            let corpus = run.corpus(&a.corpus)?;
            let candidates = run.candidates(&a.candidates, &corpus)?;
            let gold = run.gold("gold", gold, &corpus)?;
            export_training_examples(&corpus, &gold, &candidates, a.setting, a.budget, a.tag_source)
        }
        (None, Some(log)) => offline_service(run, &a.corpus, &a.candidates, log)?
            .export(a.policy, a.setting, a.budget, a.tag_source)
            .map_err(service_failure)?,
        _ => return Err(Failure::Usage("give exactly one of --gold and --log".into())),
    };
    let overflow = records.iter().filter(|r| r.overflow()).count();
    eprintln!("{} examples, {overflow} over the budget of {} tokens", records.len(), a.budget);
    run.stage_records("examples", &a.out, &records)
}

fn verify(a: &crate::VerifyArgs) -> Result<(), Failure> {
    let VerifyArgs { manifest } = a;
    let text = std::fs::read_to_string(manifest)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", manifest.display())))?;
    let recorded: Manifest =
        serde_json::from_str(&text).map_err(|e| Failure::Integrity(format!("{}: {e}", manifest.display())))?;
    for input in &recorded.inputs {
        let bytes = std::fs::read(&input.path)
            .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", input.path.display())))?;
        if crate::artifact::sha256_hex(&bytes) != input.sha256 {
            return Err(Failure::Integrity(format!("input {} has changed", input.path.display())));
        }
    }
    let mut cli = Cli::try_parse_from(std::iter::once("nevent".to_string()).chain(recorded.args.iter().cloned()))
        .map_err(|e| Failure::Integrity(format!("manifest arguments do not parse: {e}")))?;
    let scratch = tempfile::tempdir().map_err(|e| Failure::Usage(e.to_string()))?;
    let out =
        cli.command.out_mut().ok_or_else(|| Failure::Integrity("manifest names a command without outputs".into()))?;
    *out = scratch.path().join(out.file_name().unwrap_or_else(|| "out".as_ref()));
    let rerun = produce(&cli.command, &recorded.args)?;
    let expected = digests_by_role(&recorded.outputs);
    let actual = digests_by_role(&rerun.outputs);
    if expected != actual {
        return Err(Failure::Integrity(format!(
            "outputs differ from {}: recorded {expected:?}, re-run {actual:?}",
            manifest.display()
        )));
    }
    eprintln!("verified {} output(s) of `{}`", actual.len(), recorded.command);
    Ok(())
}
