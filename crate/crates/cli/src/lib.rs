//! Command-line front end: ingest, annotate, summarize, index, query,
//! evaluate and serve.

pub mod config;
pub mod error;

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};
use judgerag::annotate::annotate_document;
use judgerag::chunker::{
    DEFAULT_MAX_TOKENS, DEFAULT_MAX_WORDS, DEFAULT_OVERLAP_SENTENCES, DEFAULT_OVERLAP_TOKENS,
};
use judgerag::corpus::{
    ingest_raw, load_annotations, load_corpus, save_annotations, write_corpus_jsonl,
    AnnotationStore, CorpusError, JudgmentDocument,
};
use judgerag::rag::{answer_query, build_index, IndexSource, RagError, DEFAULT_K};
use judgerag::rougeval::run_ablation;
use judgerag::summarize::{
    summarize_document, ExtractBudget, SummarizationVariant, Summary, SummarizeParams,
};
use judgerag::vectordb::VectorDbError;
use judgerag::VectorIndex;

pub use config::AppConfig;
pub use error::{CliError, ErrorKind};

#[derive(Debug, Parser)]
#[command(name = "judgerag", version, about = "Summarize court judgments and retrieve similar cases")]
pub struct Cli {
    /// TOML configuration file
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Use deterministic offline providers instead of model endpoints
    #[arg(long, global = true)]
    pub mock: bool,
    #[arg(long, global = true, value_name = "N")]
    pub k: Option<usize>,
    #[arg(long, global = true, value_name = "N")]
    pub max_words: Option<usize>,
    #[arg(long, global = true, value_name = "N")]
    pub overlap_sentences: Option<usize>,
    #[arg(long, global = true, value_name = "N")]
    pub max_tokens: Option<usize>,
    #[arg(long, global = true, value_name = "N")]
    pub overlap_tokens: Option<usize>,
    #[arg(long, global = true, value_name = "NAME")]
    pub variant: Option<SummarizationVariant>,
    /// Vector index file
    #[arg(long, global = true, value_name = "FILE")]
    pub index: Option<PathBuf>,
    /// Output file
    #[arg(long, global = true, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read a directory of judgment text files into a corpus file
    Ingest {
        /// Directory of `.txt` judgments
        dir: PathBuf,
    },
    /// Extract structured annotation fields for every document
    Annotate {
        /// Corpus JSONL or a directory of `.txt` judgments
        corpus: PathBuf,
    },
    /// Summarize every document with one variant
    Summarize {
        /// Corpus JSONL or a directory of `.txt` judgments
        corpus: PathBuf,
        /// Sentences kept by the extractive stage: a number, `default` (30%) or `all`
        #[arg(long, value_parser = parse_budget)]
        budget: Option<ExtractBudget>,
    },
    /// Build a vector index from summaries (or raw documents with --raw)
    Index {
        /// Summaries JSONL, or the corpus with --raw
        input: PathBuf,
        /// Index the corpus text instead of summaries
        #[arg(long)]
        raw: bool,
        /// Annotation CSV used for case metadata and filters
        #[arg(long, value_name = "CSV")]
        annotations: Option<PathBuf>,
    },
    /// Answer a question from the index
    Query {
        /// Question in natural language
        text: String,
        /// Annotation CSV used for case metadata and filters
        #[arg(long, value_name = "CSV")]
        annotations: Option<PathBuf>,
    },
    /// Score all seven summarization variants against reference summaries
    Eval {
        /// Corpus JSONL or a directory of `.txt` judgments
        corpus: PathBuf,
        /// Directory of `<doc_id>.txt` reference summaries
        refs: PathBuf,
        /// Sentences kept by the extractive stage: a number, `default` (30%) or `all`
        #[arg(long, value_parser = parse_budget)]
        budget: Option<ExtractBudget>,
    },
    /// Serve the HTTP API
    Serve {
        /// Listen address [default: 127.0.0.1:8080]
        #[arg(long, value_name = "ADDR")]
        listen: Option<String>,
        /// Annotation CSV used for case metadata and filters
        #[arg(long, value_name = "CSV")]
        annotations: Option<PathBuf>,
        /// Summaries JSONL shown on case pages
        #[arg(long, value_name = "JSONL")]
        summaries: Option<PathBuf>,
        /// Static files served for non-API paths
        #[arg(long, value_name = "DIR")]
        ui_dir: Option<PathBuf>,
    },
}

pub fn parse_budget(s: &str) -> Result<ExtractBudget, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "default" => Ok(ExtractBudget::Default),
        "all" => Ok(ExtractBudget::All),
        n => match n.parse::<usize>() {
            Ok(v) if v >= 1 => Ok(ExtractBudget::Fixed(v)),
            _ => Err(format!("expected a positive number, `default` or `all`, got `{s}`")),
        },
    }
}

/// The clap command with defaults spelled out in the help of the optional
/// flags (they stay unset so config file values can apply).
pub fn command() -> clap::Command {
    let with_default = |help: &str, default: String| format!("{help} [default: {default}]");
    Cli::command()
        .mut_arg("k", |a| a.help(with_default("Contexts retrieved per query", DEFAULT_K.to_string())))
        .mut_arg("max_words", |a| {
            a.help(with_default("Word budget of a summarization chunk", DEFAULT_MAX_WORDS.to_string()))
        })
        .mut_arg("overlap_sentences", |a| {
            a.help(with_default(
                "Sentences shared by consecutive summarization chunks",
                DEFAULT_OVERLAP_SENTENCES.to_string(),
            ))
        })
        .mut_arg("max_tokens", |a| {
            a.help(with_default("Token budget of an index chunk", DEFAULT_MAX_TOKENS.to_string()))
        })
        .mut_arg("overlap_tokens", |a| {
            a.help(with_default(
                "Tokens shared by consecutive index chunks",
                DEFAULT_OVERLAP_TOKENS.to_string(),
            ))
        })
        .mut_arg("variant", |a| {
            a.help(with_default(
                "Summarization variant: extractive, abstractive[-ft], ext-abs[-ft], abs-ext[-ft]",
                SummarizationVariant::default().to_string(),
            ))
        })
        .mut_arg("index", |a| {
            a.help(with_default("Vector index file", config::DEFAULT_INDEX_PATH.to_string()))
        })
}

/// Parses `args` (including the program name).
pub fn parse_from<I, T>(args: I) -> Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = command().try_get_matches_from(args)?;
    Cli::from_arg_matches(&matches)
}

/// Settings after layering flags over the config file over defaults.
#[derive(Debug, Clone)]
pub struct Settings {
    pub config: AppConfig,
    pub variant: SummarizationVariant,
    pub out: Option<PathBuf>,
}

impl Settings {
    pub fn resolve(cli: &Cli) -> Result<Self, CliError> {
        let mut config = match &cli.config {
            Some(path) => AppConfig::load(path)?,
            None => AppConfig::default(),
        };
        config.mock |= cli.mock;
        let chunk = &mut config.chunk;
        for (flag, slot) in [
            (cli.max_words, &mut chunk.max_words),
            (cli.overlap_sentences, &mut chunk.overlap_sentences),
            (cli.max_tokens, &mut chunk.max_tokens),
            (cli.overlap_tokens, &mut chunk.overlap_tokens),
        ] {
            if let Some(v) = flag {
                *slot = v;
            }
        }
        if let Some(k) = cli.k {
            config.rag.k = k;
        }
        if let Some(index) = &cli.index {
            config.paths.index = Some(index.clone());
        }
        config.validate()?;
        Ok(Self {
            config,
            variant: cli.variant.unwrap_or_default(),
            out: cli.out.clone(),
        })
    }

    fn summarize_params(&self, budget: Option<ExtractBudget>) -> SummarizeParams {
        SummarizeParams {
            chunk: self.config.chunk,
            budget: budget.unwrap_or_default(),
            ..Default::default()
        }
    }

    fn out_or(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }
}

fn corpus_err(e: CorpusError) -> CliError {
    CliError::new(ErrorKind::Data, e)
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::data(format!("{}: {e}", path.display()))
}

fn create_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => fs::create_dir_all(p).map_err(|e| io_err(p, e)),
        _ => Ok(()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    create_parent(path)?;
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn load_docs(path: &Path) -> Result<Vec<JudgmentDocument>, CliError> {
    let report = load_corpus(path).map_err(corpus_err)?;
    for f in &report.failures {
        log::warn!("skipped {}: {}", f.path.display(), f.reason);
    }
    Ok(report.documents)
}

pub fn write_summaries(summaries: &[Summary], path: &Path) -> Result<(), CliError> {
    create_parent(path)?;
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for s in summaries {
        let line = serde_json::to_string(s).map_err(CliError::data)?;
        writeln!(w, "{line}").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_summaries(path: &Path) -> Result<Vec<Summary>, CliError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let s: Summary = serde_json::from_str(&line).map_err(|e| {
            CliError::data(format!("{} line {}: {e}", path.display(), i + 1))
        })?;
        out.push(s);
    }
    Ok(out)
}

fn annotations_from(
    flag: &Option<PathBuf>,
    settings: &Settings,
) -> Result<Option<AnnotationStore>, CliError> {
    match flag.as_ref().or(settings.config.paths.annotations.as_ref()) {
        Some(path) => Ok(Some(AnnotationStore::new(
            load_annotations(path).map_err(corpus_err)?,
        ))),
        None => Ok(None),
    }
}

fn load_index(path: &Path) -> Result<VectorIndex, CliError> {
    VectorIndex::load(path).map_err(|e| match e {
        VectorDbError::Io(_) => CliError::data(format!("cannot read index {}: {e}", path.display())),
        other => CliError::data(format!("index {} is unusable: {other}", path.display())),
    })
}

fn rag_err(e: RagError) -> CliError {
    match e {
        RagError::FingerprintMismatch { .. } | RagError::InvalidConfig(_) => {
            CliError::new(ErrorKind::Config, e)
        }
        RagError::Embedding(_) => CliError::new(ErrorKind::Provider, e),
        other => CliError::new(ErrorKind::Data, other),
    }
}

pub fn cmd_ingest(dir: &Path, settings: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let report = ingest_raw(dir).map_err(corpus_err)?;
    let path = settings.out_or("corpus.jsonl");
    create_parent(&path)?;
    write_corpus_jsonl(&report.documents, &path).map_err(corpus_err)?;
    for f in &report.failures {
        let _ = writeln!(out, "skipped {}: {}", f.path.display(), f.reason);
    }
    if report.documents.is_empty() {
        log::warn!("no documents found in {}", dir.display());
        let _ = writeln!(out, "warning: no documents found in {}", dir.display());
    }
    let _ = writeln!(
        out,
        "ingested {} document(s) into {}",
        report.documents.len(),
        path.display()
    );
    Ok(())
}

pub fn cmd_annotate(corpus: &Path, settings: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let docs = load_docs(corpus)?;
    let providers = settings.config.providers()?;
    let mut records = Vec::new();
    let mut failed = 0;
    for doc in &docs {
        match annotate_document(doc, providers.annotation_generator.as_ref()) {
            Ok(r) => records.push(r),
            Err(e) => {
                failed += 1;
                let _ = writeln!(out, "failed: {e}");
            }
        }
    }
    let path = settings.out_or("annotations.csv");
    create_parent(&path)?;
    save_annotations(&records, &path).map_err(corpus_err)?;
    let _ = writeln!(out, "annotated {} document(s) into {}", records.len(), path.display());
    if failed > 0 {
        return Err(CliError::provider(format!("{failed} document(s) could not be annotated")));
    }
    Ok(())
}

pub fn cmd_summarize(
    corpus: &Path,
    budget: Option<ExtractBudget>,
    settings: &Settings,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let docs = load_docs(corpus)?;
    let providers = settings.config.providers()?;
    let params = settings.summarize_params(budget);
    let mut summaries = Vec::new();
    let mut failed = 0;
    for doc in &docs {
        match summarize_document(doc, settings.variant, &providers, &params) {
            Ok(s) => summaries.push(s),
            Err(e) => {
                failed += 1;
                let _ = writeln!(out, "failed: {e}");
            }
        }
    }
    let path = settings.out_or("summaries.jsonl");
    write_summaries(&summaries, &path)?;
    let _ = writeln!(
        out,
        "summarized {} document(s) with {} into {}",
        summaries.len(),
        settings.variant,
        path.display()
    );
    if failed > 0 {
        return Err(CliError::provider(format!("{failed} document(s) could not be summarized")));
    }
    Ok(())
}

pub fn cmd_index(
    input: &Path,
    raw: bool,
    annotations: &Option<PathBuf>,
    settings: &Settings,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let sources: Vec<IndexSource> = if raw {
        load_docs(input)?
            .into_iter()
            .map(|d| IndexSource {
                doc_id: d.doc_id,
                text: d.text,
            })
            .collect()
    } else {
        read_summaries(input)?
            .into_iter()
            .map(|s| IndexSource {
                doc_id: s.doc_id,
                text: s.text,
            })
            .collect()
    };
    let store = annotations_from(annotations, settings)?;
    let providers = settings.config.providers()?;
    let index = build_index(
        &sources,
        store.as_ref(),
        providers.embedder.as_ref(),
        &settings.config.chunk,
    )
    .map_err(rag_err)?;
    let path = settings.config.index_path();
    create_parent(&path)?;
    index
        .persist(&path)
        .map_err(|e| CliError::data(format!("cannot write index {}: {e}", path.display())))?;
    let _ = writeln!(
        out,
        "indexed {} chunk(s) from {} document(s) into {}",
        index.len(),
        sources.len(),
        path.display()
    );
    Ok(())
}

pub fn cmd_query(
    text: &str,
    annotations: &Option<PathBuf>,
    settings: &Settings,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let index = load_index(&settings.config.index_path())?;
    let store = annotations_from(annotations, settings)?;
    let providers = settings.config.providers()?;
    let overview = answer_query(text, &index, &providers, store.as_ref(), &settings.config.rag)
        .map_err(rag_err)?;
    if let Some(err) = &overview.generation_error {
        log::warn!("answer unavailable, showing retrieved evidence only: {err}");
    }
    let json = serde_json::to_string_pretty(&overview).map_err(CliError::data)?;
    if let Some(path) = &settings.out {
        write_text(path, &format!("{json}\n"))?;
    }
    let _ = writeln!(out, "{json}");
    Ok(())
}

fn read_references(dir: &Path, docs: &[JudgmentDocument]) -> Result<BTreeMap<String, String>, CliError> {
    docs.iter()
        .map(|d| {
            let path = dir.join(format!("{}.txt", d.doc_id));
            let text = fs::read_to_string(&path)
                .map_err(|e| CliError::data(format!("reference for `{}`: {}: {e}", d.doc_id, path.display())))?;
            Ok((d.doc_id.clone(), text))
        })
        .collect()
}

pub fn cmd_eval(
    corpus: &Path,
    refs: &Path,
    budget: Option<ExtractBudget>,
    settings: &Settings,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let docs = load_docs(corpus)?;
    let references = read_references(refs, &docs)?;
    let providers = settings.config.providers()?;
    let params = settings.summarize_params(budget);
    let report = run_ablation(
        &docs,
        &references,
        &SummarizationVariant::ablation_set(),
        &providers,
        &params,
    )
    .map_err(CliError::data)?;
    if let Some(path) = &settings.out {
        let json = serde_json::to_string_pretty(&report).map_err(CliError::data)?;
        write_text(path, &format!("{json}\n"))?;
    }
    let _ = write!(out, "{}", report.render());
    Ok(())
}

pub fn cmd_serve(
    listen: &Option<String>,
    annotations: &Option<PathBuf>,
    summaries: &Option<PathBuf>,
    ui_dir: &Option<PathBuf>,
    settings: &Settings,
) -> Result<(), CliError> {
    let providers = settings.config.providers()?;
    let mut state = judgerag_service::AppState::new(providers, settings.config.rag.clone());
    let index_path = settings.config.index_path();
    if index_path.exists() {
        state = state.with_index(load_index(&index_path)?);
    } else {
        log::warn!("index {} not found; queries will answer 503", index_path.display());
    }
    if let Some(store) = annotations_from(annotations, settings)? {
        state = state.with_annotations(store);
    }
    if let Some(path) = summaries.as_ref().or(settings.config.paths.summaries.as_ref()) {
        let map = read_summaries(path)?
            .into_iter()
            .map(|s| (s.doc_id, s.text))
            .collect();
        state = state.with_summaries(map);
    }
    let listen = listen
        .clone()
        .or_else(|| settings.config.server.listen.clone())
        .unwrap_or_else(|| config::DEFAULT_LISTEN.to_string());
    let addr = listen
        .parse()
        .map_err(|e| CliError::config(format!("invalid listen address `{listen}`: {e}")))?;
    let ui_dir = ui_dir.clone().or_else(|| settings.config.server.ui_dir.clone());
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::config(format!("cannot start runtime: {e}")))?;
    runtime
        .block_on(judgerag_service::serve(addr, Arc::new(state), ui_dir))
        .map_err(|e| CliError::config(format!("cannot serve on {listen}: {e}")))
}

/// Runs one parsed invocation, writing user-facing output to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let settings = Settings::resolve(cli)?;
    match &cli.command {
        Command::Ingest { dir } => cmd_ingest(dir, &settings, out),
        Command::Annotate { corpus } => cmd_annotate(corpus, &settings, out),
        Command::Summarize { corpus, budget } => cmd_summarize(corpus, *budget, &settings, out),
        Command::Index {
            input,
            raw,
            annotations,
        } => cmd_index(input, *raw, annotations, &settings, out),
        Command::Query { text, annotations } => cmd_query(text, annotations, &settings, out),
        Command::Eval {
            corpus,
            refs,
            budget,
        } => cmd_eval(corpus, refs, *budget, &settings, out),
        Command::Serve {
            listen,
            annotations,
            summaries,
            ui_dir,
        } => cmd_serve(listen, annotations, summaries, ui_dir, &settings),
    }
}
