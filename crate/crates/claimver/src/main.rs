//! Single binary exposing every operation as a subcommand.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data/validation
//! errors. Diagnostics go to stderr; data goes to files or stdout. All
//! outputs are byte-deterministic for fixed inputs, flags, and seed,
//! regardless of `--threads`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use claimver::corpus_builder::{self, CitationGraph};
use claimver::data::{self, Label};
use claimver::error::{Error, Result};
use claimver::io;
use claimver::metrics::{self, CapPolicy, MetricReport, StatsReport};
use claimver::pipeline::{self, IndexOptions, PipelineConfig, RetrievalSpec};
use claimver::retrieval::{self, FieldMode, NgramRange};
use claimver::stages::{LabelerSpec, SelectorSpec};

fn long_version() -> &'static str {
    Box::leak(
        format!(
            "{} (data format {})",
            env!("CARGO_PKG_VERSION"),
            claimver::DATA_FORMAT_VERSION
        )
        .into_boxed_str(),
    )
}

#[derive(Parser)]
#[command(
    name = "claimver",
    about = "Scientific claim verification: retrieval, pipelines, ablations, and evaluation",
    version,
    long_version = long_version(),
)]
struct Cli {
    /// Worker threads (0 = all cores); affects wall time only, never output
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check dataset invariants; violations exit with code 2
    Validate(ValidateArgs),
    /// Rank corpus abstracts by TF-IDF similarity to each claim
    Retrieve(RetrieveArgs),
    /// Run the retrieval -> selection -> labeling pipeline
    Run(RunArgs),
    /// Run the {system, oracle}^3 ablation grid and tabulate both metrics
    Ablate(AblateArgs),
    /// Score predictions at the abstract and sentence level
    Evaluate(EvaluateArgs),
    /// Report dataset statistics
    Stats(StatsArgs),
    /// Assemble a retrieval corpus from a citation graph
    #[command(name = "build-corpus")]
    BuildCorpus(BuildCorpusArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Tsv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum CapModeArg {
    Strict,
    Truncate,
    Off,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LevelArg {
    Abstract,
    Sentence,
    Both,
}

fn parse_selector(s: &str) -> std::result::Result<SelectorSpec, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_labeler(s: &str) -> std::result::Result<LabelerSpec, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_retrieval(s: &str) -> std::result::Result<RetrievalSpec, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_ngrams(s: &str) -> std::result::Result<NgramRange, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_fields(s: &str) -> std::result::Result<FieldMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    claims: PathBuf,
}

#[derive(Args)]
struct RetrieveArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    claims: PathBuf,
    /// Documents to return per claim
    #[arg(long, default_value_t = retrieval::DEFAULT_K)]
    k: usize,
    /// N-gram range as LOW,HIGH
    #[arg(long, default_value = "1,2", value_parser = parse_ngrams)]
    ngrams: NgramRange,
    /// Indexed text: abstract-only or title+abstract
    #[arg(long, default_value = "title+abstract", value_parser = parse_fields)]
    fields: FieldMode,
    #[arg(long, value_enum, default_value_t = OutputFormat::Tsv)]
    format: OutputFormat,
    /// Output file (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    claims: PathBuf,
    /// Claim file supplying gold evidence (defaults to evidence inside --claims)
    #[arg(long)]
    gold: Option<PathBuf>,
    /// Retrieval stage: tfidf[:<k>] or oracle
    #[arg(long, default_value = "tfidf:3", value_parser = parse_retrieval)]
    retrieval: RetrievalSpec,
    /// Selector: oracle | threshold:<t> | topk:<k> | tfidf-topk:<k> |
    /// tfidf-threshold:<t> | first | last | external:<scorefile>
    #[arg(long, value_parser = parse_selector)]
    selector: SelectorSpec,
    /// Labeler: oracle | external:<probfile> | always:<LABEL>
    #[arg(long, value_parser = parse_labeler)]
    labeler: LabelerSpec,
    /// Sentence-score file backing threshold:/topk: selectors
    #[arg(long)]
    scores: Option<PathBuf>,
    #[arg(long, default_value = "1,2", value_parser = parse_ngrams)]
    ngrams: NgramRange,
    #[arg(long, default_value = "title+abstract", value_parser = parse_fields)]
    fields: FieldMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Prediction output file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    claims: PathBuf,
    /// Claim file supplying gold evidence (defaults to evidence inside --claims)
    #[arg(long)]
    gold: Option<PathBuf>,
    /// System retrieval stage for non-oracle rows
    #[arg(long, default_value = "tfidf:3", value_parser = parse_retrieval)]
    retrieval: RetrievalSpec,
    /// System selector for non-oracle rows
    #[arg(long, default_value = "tfidf-topk:3", value_parser = parse_selector)]
    selector: SelectorSpec,
    /// System labeler for non-oracle rows
    #[arg(long, default_value = "always:SUPPORTS", value_parser = parse_labeler)]
    labeler: LabelerSpec,
    #[arg(long)]
    scores: Option<PathBuf>,
    #[arg(long, default_value = "1,2", value_parser = parse_ngrams)]
    ngrams: NgramRange,
    #[arg(long, default_value = "title+abstract", value_parser = parse_fields)]
    fields: FieldMode,
    /// Sentence cap applied by the abstract-level evaluation
    #[arg(long, default_value_t = metrics::DEFAULT_CAP)]
    cap: usize,
    /// Cap mechanism; off keeps oracle rows exactly at 100.0
    #[arg(long, value_enum, default_value_t = CapModeArg::Off)]
    cap_mode: CapModeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = OutputFormat::Tsv)]
    format: OutputFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Claim file carrying the gold evidence
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    preds: PathBuf,
    #[arg(long, default_value_t = metrics::DEFAULT_CAP)]
    cap: usize,
    #[arg(long, value_enum, default_value_t = CapModeArg::Strict)]
    cap_mode: CapModeArg,
    #[arg(long, value_enum, default_value_t = LevelArg::Both)]
    level: LevelArg,
    #[arg(long, value_enum, default_value_t = OutputFormat::Tsv)]
    format: OutputFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    claims: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::Tsv)]
    format: OutputFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BuildCorpusArgs {
    /// Citation graph file (JSONL citances)
    #[arg(long)]
    graph: PathBuf,
    /// Corpus file providing every available abstract
    #[arg(long)]
    abstracts: PathBuf,
    /// Seed document ids, one per line
    #[arg(long)]
    seeds: PathBuf,
    #[arg(long, default_value_t = corpus_builder::DEFAULT_DISTRACTORS)]
    n_distractors: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Assembled corpus output file
    #[arg(long)]
    out: PathBuf,
    /// Provenance manifest output file
    #[arg(long)]
    manifest: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };

    let run = || -> Result<u8> {
        if cli.threads > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(cli.threads)
                .build_global()
                .map_err(|e| Error::usage(format!("--threads: {e}")))?;
        }
        match cli.command {
            Command::Validate(args) => cmd_validate(args),
            Command::Retrieve(args) => cmd_retrieve(args),
            Command::Run(args) => cmd_run(args),
            Command::Ablate(args) => cmd_ablate(args),
            Command::Evaluate(args) => cmd_evaluate(args),
            Command::Stats(args) => cmd_stats(args),
            Command::BuildCorpus(args) => cmd_build_corpus(args),
        }
    };

    match run() {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(match err {
                Error::Usage(_) => 1,
                _ => 2,
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

fn write_output(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => {
            let mut writer = io::open_writer(path)?;
            writer
                .write_all(content.as_bytes())
                .and_then(|_| writer.flush())
                .map_err(|e| Error::io(path, e))
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

/// Loads claims plus gold evidence, preferring a dedicated --gold file over
/// evidence embedded in the claim file. Gold is "present" only when some
/// claim line actually carried an evidence key.
fn load_claims_and_gold(
    claims_path: &std::path::Path,
    gold_path: &Option<PathBuf>,
    corpus: &data::Corpus,
) -> Result<(Vec<data::Claim>, Option<Vec<data::GoldEvidence>>)> {
    let (claims, inline_gold) = io::load_claims(claims_path, corpus)?;
    let gold = match gold_path {
        Some(path) => io::load_claims(path, corpus)?.1,
        None => inline_gold,
    };
    Ok((claims, if gold.is_empty() { None } else { Some(gold) }))
}

fn cap_policy(mode: CapModeArg, cap: usize) -> CapPolicy {
    match mode {
        CapModeArg::Strict => CapPolicy::Strict(cap),
        CapModeArg::Truncate => CapPolicy::Truncate(cap),
        CapModeArg::Off => CapPolicy::Off,
    }
}

fn rounded_percent(value: f64) -> f64 {
    (value * 1000.0).round() / 10.0
}

fn report_json(report: &MetricReport) -> serde_json::Value {
    json!({
        "level": report.level.as_str(),
        "precision": rounded_percent(report.precision),
        "recall": rounded_percent(report.recall),
        "f1": rounded_percent(report.f1),
        "numerator": report.num,
        "precision_denominator": report.precision_den,
        "recall_denominator": report.recall_den,
    })
}

fn report_tsv_row(report: &MetricReport) -> String {
    format!(
        "{}\t{}\t{}\t{}\n",
        report.level.as_str(),
        metrics::percent(report.precision),
        metrics::percent(report.recall),
        metrics::percent(report.f1)
    )
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn cmd_validate(args: ValidateArgs) -> Result<u8> {
    let corpus = io::load_corpus(&args.corpus)?;
    let (claims, gold) = io::load_claims_lenient(&args.claims)?;
    let report = data::validate(&corpus, &claims, &gold);
    println!("{report}");
    Ok(if report.is_clean() { 0 } else { 2 })
}

fn cmd_retrieve(args: RetrieveArgs) -> Result<u8> {
    if args.k == 0 {
        return Err(Error::usage("--k must be at least 1"));
    }
    let corpus = io::load_corpus(&args.corpus)?;
    let (mut claims, _) = io::load_claims(&args.claims, &corpus)?;
    claims.sort_by_key(|c| c.id);
    let index = retrieval::build_index(&corpus, args.ngrams, args.fields)?;

    use rayon::prelude::*;
    let ranked: Vec<(u64, Vec<(u64, f64)>)> = claims
        .par_iter()
        .map(|claim| (claim.id, index.retrieve(&claim.text, args.k)))
        .collect();

    let mut content = String::new();
    match args.format {
        OutputFormat::Tsv => {
            content.push_str("claim_id\trank\tdoc_id\tsimilarity\n");
            for (claim_id, results) in &ranked {
                for (rank, (doc_id, similarity)) in results.iter().enumerate() {
                    content.push_str(&format!(
                        "{claim_id}\t{}\t{doc_id}\t{similarity:.6}\n",
                        rank + 1
                    ));
                }
            }
        }
        OutputFormat::Json => {
            for (claim_id, results) in &ranked {
                let docs: Vec<serde_json::Value> = results
                    .iter()
                    .map(|(doc_id, similarity)| json!({"doc_id": doc_id, "similarity": similarity}))
                    .collect();
                content.push_str(&format!(
                    "{}\n",
                    json!({"claim_id": claim_id, "results": docs})
                ));
            }
        }
    }
    write_output(&args.out, &content)?;
    Ok(0)
}

fn cmd_run(args: RunArgs) -> Result<u8> {
    let corpus = io::load_corpus(&args.corpus)?;
    let (claims, gold) = load_claims_and_gold(&args.claims, &args.gold, &corpus)?;
    let config = PipelineConfig {
        retrieval: args.retrieval,
        selector: args.selector,
        labeler: args.labeler,
        score_file: args.scores,
        seed: args.seed,
        index: IndexOptions {
            ngram_range: args.ngrams,
            field_mode: args.fields,
        },
    };
    let preds = pipeline::run_pipeline(&corpus, &claims, gold.as_deref(), &config)?;
    io::write_predictions(&preds, &args.out)?;
    let with_evidence = preds.iter().filter(|p| !p.entries.is_empty()).count();
    log::info!(
        "predicted evidence for {with_evidence} of {} claims -> {}",
        preds.len(),
        args.out.display()
    );
    Ok(0)
}

fn cmd_ablate(args: AblateArgs) -> Result<u8> {
    let corpus = io::load_corpus(&args.corpus)?;
    let (claims, gold) = load_claims_and_gold(&args.claims, &args.gold, &corpus)?;
    let gold = gold.ok_or_else(|| {
        Error::usage("ablate requires gold evidence (provide --gold or a claim file with evidence)")
    })?;
    let base = PipelineConfig {
        retrieval: args.retrieval,
        selector: args.selector,
        labeler: args.labeler,
        score_file: args.scores,
        seed: args.seed,
        index: IndexOptions {
            ngram_range: args.ngrams,
            field_mode: args.fields,
        },
    };
    let cap = cap_policy(args.cap_mode, args.cap);
    let rows = pipeline::ablation_grid(&corpus, &claims, &gold, &base, cap)?;

    let mut content = String::new();
    match args.format {
        OutputFormat::Tsv => {
            content.push_str(
                "retrieval\tselection\tlabel\tsentence_precision\tsentence_recall\tsentence_f1\tabstract_precision\tabstract_recall\tabstract_f1\n",
            );
            for row in &rows {
                let (retrieval, selection, label) = row.stage_names();
                content.push_str(&format!(
                    "{retrieval}\t{selection}\t{label}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                    metrics::percent(row.sentence.precision),
                    metrics::percent(row.sentence.recall),
                    metrics::percent(row.sentence.f1),
                    metrics::percent(row.abstract_level.precision),
                    metrics::percent(row.abstract_level.recall),
                    metrics::percent(row.abstract_level.f1),
                ));
            }
        }
        OutputFormat::Json => {
            let rows: Vec<serde_json::Value> = rows
                .iter()
                .map(|row| {
                    let (retrieval, selection, label) = row.stage_names();
                    json!({
                        "retrieval": retrieval,
                        "selection": selection,
                        "label": label,
                        "sentence": report_json(&row.sentence),
                        "abstract": report_json(&row.abstract_level),
                    })
                })
                .collect();
            content.push_str(&format!("{}\n", json!({ "rows": rows })));
        }
    }
    write_output(&args.out, &content)?;
    Ok(0)
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<u8> {
    let corpus = io::load_corpus(&args.corpus)?;
    let (_, gold) = io::load_claims(&args.gold, &corpus)?;
    let preds = io::load_predictions(&args.preds, &corpus)?;
    let cap = cap_policy(args.cap_mode, args.cap);

    let mut reports: Vec<MetricReport> = Vec::new();
    if args.level != LevelArg::Abstract {
        reports.push(metrics::evaluate_sentence_level(&gold, &preds, &corpus)?);
    }
    if args.level != LevelArg::Sentence {
        reports.push(metrics::evaluate_abstract_level(&gold, &preds, &corpus, cap)?);
    }

    let mut content = String::new();
    match args.format {
        OutputFormat::Tsv => {
            content.push_str("level\tprecision\trecall\tf1\n");
            for report in &reports {
                content.push_str(&report_tsv_row(report));
            }
        }
        OutputFormat::Json => {
            let results: Vec<serde_json::Value> = reports.iter().map(report_json).collect();
            content.push_str(&format!("{}\n", json!({ "results": results })));
        }
    }
    write_output(&args.out, &content)?;
    Ok(0)
}

fn fmt_median(value: f64) -> String {
    if value.fract() == 0.0 {
        format!("{value:.0}")
    } else {
        format!("{value:.1}")
    }
}

fn stats_tsv(report: &StatsReport) -> String {
    let mut out = String::from("section\tkey\tvalue\n");
    let mut push = |section: &str, key: &str, value: String| {
        out.push_str(&format!("{section}\t{key}\t{value}\n"));
    };
    push("dataset", "claims", report.n_claims.to_string());
    push("dataset", "corpus_documents", report.n_corpus_docs.to_string());
    push(
        "dataset",
        "unlabeled_claims",
        report.n_unlabeled_claims.to_string(),
    );
    for label in Label::ALL {
        let count = report.claim_labels.get(&label).copied().unwrap_or(0);
        push("claim_labels", label.as_str(), count.to_string());
    }
    for label in Label::ALL {
        let count = report.pair_labels.get(&label).copied().unwrap_or(0);
        push("pair_labels", label.as_str(), count.to_string());
    }
    for group in &report.by_structure {
        let section = if group.structured {
            "abstracts[structured]"
        } else {
            "abstracts[unstructured]"
        };
        push(section, "evidence_abstracts", group.evidence_abstracts.to_string());
        if let Some(median) = group.abstract_length_median {
            push(section, "abstract_length_median", fmt_median(median));
        }
        if let Some(mean) = group.rationale_count_mean {
            push(section, "rationale_count_mean", format!("{mean:.2}"));
        }
        if let Some(median) = group.rationale_fraction_median {
            push(section, "rationale_fraction_median", format!("{median:.2}"));
        }
        for (k, count) in &group.rationales_per_abstract {
            push(
                &format!("rationales_per_abstract[{}]", if group.structured { "structured" } else { "unstructured" }),
                &k.to_string(),
                count.to_string(),
            );
        }
        for (k, count) in &group.sentences_per_rationale {
            push(
                &format!("sentences_per_rationale[{}]", if group.structured { "structured" } else { "unstructured" }),
                &k.to_string(),
                count.to_string(),
            );
        }
    }
    for (k, count) in &report.evidence_docs_per_claim {
        push("evidence_docs_per_claim", &k.to_string(), count.to_string());
    }
    out
}

fn stats_json(report: &StatsReport) -> serde_json::Value {
    let labels_json = |map: &BTreeMap<Label, usize>| {
        let mut obj = serde_json::Map::new();
        for label in Label::ALL {
            obj.insert(
                label.as_str().into(),
                json!(map.get(&label).copied().unwrap_or(0)),
            );
        }
        serde_json::Value::Object(obj)
    };
    let hist_json = |map: &BTreeMap<usize, usize>| {
        let mut obj = serde_json::Map::new();
        for (k, v) in map {
            obj.insert(k.to_string(), json!(v));
        }
        serde_json::Value::Object(obj)
    };
    let group_json = |group: &metrics::StructureStats| {
        json!({
            "structured": group.structured,
            "evidence_abstracts": group.evidence_abstracts,
            "abstract_length_median": group.abstract_length_median,
            "rationale_count_mean": group.rationale_count_mean,
            "rationale_fraction_median": group.rationale_fraction_median,
            "rationales_per_abstract": hist_json(&group.rationales_per_abstract),
            "sentences_per_rationale": hist_json(&group.sentences_per_rationale),
        })
    };
    json!({
        "claims": report.n_claims,
        "corpus_documents": report.n_corpus_docs,
        "unlabeled_claims": report.n_unlabeled_claims,
        "claim_labels": labels_json(&report.claim_labels),
        "pair_labels": labels_json(&report.pair_labels),
        "unstructured": group_json(&report.by_structure[0]),
        "structured": group_json(&report.by_structure[1]),
        "evidence_docs_per_claim": hist_json(&report.evidence_docs_per_claim),
    })
}

fn cmd_stats(args: StatsArgs) -> Result<u8> {
    let corpus = io::load_corpus(&args.corpus)?;
    let (claims, gold) = io::load_claims(&args.claims, &corpus)?;
    let report = metrics::dataset_stats(&corpus, &claims, &gold)?;
    let content = match args.format {
        OutputFormat::Tsv => stats_tsv(&report),
        OutputFormat::Json => format!("{}\n", stats_json(&report)),
    };
    write_output(&args.out, &content)?;
    Ok(0)
}

fn cmd_build_corpus(args: BuildCorpusArgs) -> Result<u8> {
    let abstracts = io::load_corpus(&args.abstracts)?;
    let citances = corpus_builder::load_citances(&args.graph)?;
    let seeds = corpus_builder::load_seed_ids(&args.seeds)?;
    let graph = CitationGraph::new(citances, abstracts.doc_ids().collect());
    let missing = graph.missing_abstracts();
    if !missing.is_empty() {
        log::warn!("{} cited documents have no available abstract", missing.len());
    }
    let (corpus, manifest) =
        corpus_builder::assemble_corpus(&graph, &seeds, &abstracts, args.n_distractors, args.seed)?;
    io::write_corpus(&corpus, &args.out)?;
    corpus_builder::write_manifest(&manifest, &args.manifest)?;
    log::info!(
        "assembled {} documents ({} manifest entries)",
        corpus.len(),
        manifest.len()
    );
    Ok(0)
}
