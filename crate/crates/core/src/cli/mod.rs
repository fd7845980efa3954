//! The `redact` command line: corpus generation, training,
//! de-identification, evaluation and artifact inspection.

mod config;

use std::collections::{BTreeMap, HashMap};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::{DecodeSection, PathsSection, RunConfig, SplitSection, VocabSection, SEED_ENV};

use crate::data::{
    generate_synthetic, load_corpus, parse_corpus, save_corpus, split_corpus, token_labels, DataError,
    LabeledDocument, PhiCategory,
};
use crate::evaluation::{
    compare_report, evaluate_corpus, evaluate_predictions, render_report, to_kv, CorpusEvaluation, EvalError,
    ReferenceRow,
};
use crate::inference::{deidentify, DecodeMode, DeidOptions, InferenceError, RedactionSpan};
use crate::model::{Checkpoint, ModelError};
use crate::text::{tokenize, TextError, Vocabulary};
use crate::training::{EpochRecord, TrainError, TrainObserver, Trainer};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;
pub const EXIT_MISMATCH: i32 = 5;

/// A failure with the process exit code it maps to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_IO,
            message: message.into(),
        }
    }

    fn io_at(path: &Path, e: std::io::Error) -> Self {
        Self::io(format!("{}: {e}", path.display()))
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Config(_) => Self::config(e.to_string()),
            _ => Self::io(e.to_string()),
        }
    }
}

impl From<TextError> for CliError {
    fn from(e: TextError) -> Self {
        match e {
            TextError::Io(..) | TextError::Format(_) => Self::io(e.to_string()),
            _ => Self::config(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        let code = match e {
            ModelError::Io { .. } | ModelError::Corrupt(_) => EXIT_IO,
            ModelError::VocabMismatch { .. } => EXIT_MISMATCH,
            ModelError::Numerics(_) => EXIT_NUMERIC,
            _ => EXIT_CONFIG,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Model(m) => m.into(),
            TrainError::Config(_) => Self::config(e.to_string()),
            TrainError::NonFiniteLoss { .. } | TrainError::Numerics(_) => Self {
                code: EXIT_NUMERIC,
                message: e.to_string(),
            },
            TrainError::Validation(_) | TrainError::Observer(_) => Self::io(e.to_string()),
        }
    }
}

impl From<InferenceError> for CliError {
    fn from(e: InferenceError) -> Self {
        match e {
            InferenceError::VocabSize { .. } => Self {
                code: EXIT_MISMATCH,
                message: e.to_string(),
            },
            InferenceError::Model(m) => m.into(),
            _ => Self::config(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Inference { source, doc } => {
                let mut c: CliError = source.into();
                c.message = format!("document `{doc}`: {}", c.message);
                c
            }
            EvalError::Parse { .. } => Self::io(e.to_string()),
            _ => Self::config(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "redact", version, about = "Clinical text de-identification as sequence-to-sequence redaction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labeled corpus.
    Gen(GenArgs),
    /// Train a model and write its best checkpoint.
    Train(TrainArgs),
    /// Redact documents with a trained checkpoint.
    Deid(DeidArgs),
    /// Score a checkpoint, or a span sidecar, against a labeled corpus.
    Eval(EvalArgs),
    /// Summarise a checkpoint or a corpus.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output corpus path; overrides `paths.corpus`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    /// Corpus if the first record parses as one, otherwise text.
    Auto,
    /// One document per line.
    Text,
    /// Labeled corpus, one JSON record per line.
    Corpus,
}

#[derive(Debug, Args)]
pub struct DeidArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Vocabulary file; defaults to `vocab.txt` beside the checkpoint.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "constrained")]
    pub mode: DecodeMode,
    /// Tab-separated `doc_id start end category` rows, one per redacted token.
    #[arg(long)]
    pub spans_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "auto")]
    pub format: InputFormat,
    /// Reject documents longer than the model's max_len instead of windowing.
    #[arg(long)]
    pub no_window: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, conflicts_with = "predictions")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Span sidecar written by `deid --spans-out`.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long, default_value = "constrained")]
    pub mode: DecodeMode,
    /// Also write the `key=value` dump here.
    #[arg(long)]
    pub kv_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct InspectArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command,
/// writing reports to `out`.
pub fn run<I, T>(args: I, out: &mut dyn std::io::Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => CliError {
            code: 0,
            message: e.to_string(),
        },
        _ => CliError::config(e.to_string()),
    })?;
    let text = match cli.command {
        Command::Gen(a) => cmd_gen(&a)?,
        Command::Train(a) => cmd_train(&a)?,
        Command::Deid(a) => cmd_deid(&a)?,
        Command::Eval(a) => cmd_eval(&a)?,
        Command::Inspect(a) => cmd_inspect(&a)?,
    };
    out.write_all(text.as_bytes()).map_err(|e| CliError::io(format!("stdout: {e}")))
}

fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::config(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn resolve(config: Option<&Path>, seed_flag: Option<u64>) -> Result<RunConfig, CliError> {
    let mut cfg = match config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = seed_flag.or(env_seed()?) {
        cfg.seed = Some(seed);
    }
    cfg.apply_seed();
    Ok(cfg)
}

fn log_config(cfg: &RunConfig) {
    eprintln!("resolved config:\n{}", cfg.to_toml());
}

/// Document, token and per-category PHI token counts.
pub fn corpus_summary(docs: &[LabeledDocument]) -> String {
    let mut tokens = 0;
    let mut phi = 0;
    let mut spans = 0;
    let mut per: BTreeMap<PhiCategory, usize> = PhiCategory::ALL.iter().map(|&c| (c, 0)).collect();
    for d in docs {
        let toks = tokenize(&d.text);
        tokens += toks.len();
        spans += d.phi_spans.len();
        for c in token_labels(&toks, &d.phi_spans).into_iter().flatten() {
            phi += 1;
            *per.entry(c).or_default() += 1;
        }
    }
    let mut s = format!(
        "documents={} tokens={tokens} phi_tokens={phi} phi_spans={spans}\n",
        docs.len()
    );
    for (c, n) in per {
        let _ = writeln!(s, "category={c} phi_tokens={n}");
    }
    s
}

fn cmd_gen(args: &GenArgs) -> Result<String, CliError> {
    let mut cfg = resolve(args.config.as_deref(), args.seed)?;
    if let Some(out) = &args.out {
        cfg.paths.corpus = Some(out.clone());
    }
    let out = cfg.paths.require_corpus()?.to_path_buf();
    log_config(&cfg);
    let docs = generate_synthetic(&cfg.synth)?;
    save_corpus(&out, &docs)?;
    Ok(corpus_summary(&docs))
}

fn default_vocab_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_file_name("vocab.txt")
}

struct TrainLog {
    file: Option<(PathBuf, fs::File)>,
    resume: Option<PathBuf>,
    vocab_hash: String,
}

impl TrainObserver for TrainLog {
    fn on_epoch(&mut self, record: &EpochRecord, _trainer: &Trainer) -> Result<(), TrainError> {
        eprintln!("{record}");
        if let Some((path, f)) = &mut self.file {
            writeln!(f, "{record}").map_err(|e| TrainError::Observer(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }

    fn on_checkpoint(&mut self, trainer: &Trainer) -> Result<(), TrainError> {
        match &self.resume {
            Some(p) => Ok(trainer.checkpoint(&self.vocab_hash).save(p)?),
            None => Ok(()),
        }
    }
}

fn metrics_line(label: &str, e: &CorpusEvaluation) -> String {
    let m = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |v| format!("{v:.4}"));
    let r = &e.report;
    format!(
        "{label}: precision={} recall={} f1={} documents={} tokens={}\n",
        m(r.precision()),
        m(r.recall()),
        m(r.f1()),
        r.n_documents,
        r.n_tokens
    )
}

fn cmd_train(args: &TrainArgs) -> Result<String, CliError> {
    let mut cfg = resolve(Some(&args.config), args.seed)?;
    let corpus_path = cfg.paths.require_corpus()?.to_path_buf();
    let ck_path = cfg.paths.require_checkpoint()?.to_path_buf();
    let vocab_path = cfg.paths.vocab.clone().unwrap_or_else(|| default_vocab_path(&ck_path));

    let docs = load_corpus(&corpus_path)?;
    let split = split_corpus(&docs, cfg.split.train_fraction, cfg.split.validation_fraction, cfg.split.seed)?;
    let vocab = Vocabulary::from_texts(split.train.iter().map(|d| d.text.as_str()), cfg.vocab.min_freq, cfg.vocab.scheme)?;
    cfg.model.vocab_size = vocab.len();
    cfg.model.validate()?;
    log_config(&cfg);
    vocab.save(&vocab_path)?;

    let file = match &cfg.paths.metrics_log {
        Some(p) => Some((p.clone(), fs::File::create(p).map_err(|e| CliError::io_at(p, e))?)),
        None => None,
    };
    let mut observer = TrainLog {
        file,
        resume: cfg.training.checkpoint_every.map(|_| ck_path.with_extension("resume")),
        vocab_hash: vocab.content_hash(),
    };
    // with no validation split, model selection runs on the training set
    let validation = if split.validation.is_empty() {
        eprintln!("note: validation split is empty; validating on the training split");
        &split.train
    } else {
        &split.validation
    };
    let outcome = Trainer::new(&cfg.model, cfg.training.clone())?.fit(&split.train, validation, &vocab, &mut observer)?;
    Checkpoint::new(outcome.best.clone(), vocab.content_hash()).save(&ck_path)?;

    let options = cfg.decode.options();
    let mut s = format!(
        "epochs={} steps={} best_epoch={} stopped_early={}\n",
        outcome.log.len(),
        outcome.trainer.state.global_step,
        outcome.best_epoch.map_or_else(|| "none".to_string(), |e| e.to_string()),
        outcome.stopped_early
    );
    s += &metrics_line("validation", &evaluate_corpus(&outcome.best, &vocab, validation, &options)?);
    if !split.test.is_empty() {
        s += &metrics_line("test", &evaluate_corpus(&outcome.best, &vocab, &split.test, &options)?);
    }
    Ok(s)
}

fn load_model(checkpoint: &Path, vocab: Option<&Path>) -> Result<(Checkpoint, Vocabulary), CliError> {
    let ck = Checkpoint::load(checkpoint)?;
    let vp = vocab.map_or_else(|| default_vocab_path(checkpoint), Path::to_path_buf);
    let vocab = Vocabulary::load(&vp)?;
    ck.check_vocab(&vocab.content_hash())?;
    Ok((ck, vocab))
}

fn read_documents(path: &Path, format: InputFormat) -> Result<Vec<(String, String)>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io_at(path, e))?;
    let as_corpus = match format {
        InputFormat::Corpus => true,
        InputFormat::Text => false,
        InputFormat::Auto => text
            .lines()
            .find(|l| !l.trim().is_empty())
            .is_some_and(|l| serde_json::from_str::<LabeledDocument>(l).is_ok()),
    };
    if as_corpus {
        let docs = parse_corpus(&text).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        Ok(docs.into_iter().map(|d| (d.id, d.text)).collect())
    } else {
        Ok(text
            .lines()
            .enumerate()
            .map(|(i, l)| (format!("line{}", i + 1), l.to_string()))
            .collect())
    }
}

fn span_row(doc: &str, s: &RedactionSpan) -> String {
    let cat = s.category.map_or("PHI", PhiCategory::as_str);
    format!("{doc}\t{}\t{}\t{cat}\n", s.start, s.end)
}

fn cmd_deid(args: &DeidArgs) -> Result<String, CliError> {
    let (ck, vocab) = load_model(&args.checkpoint, args.vocab.as_deref())?;
    let docs = read_documents(&args.input, args.format)?;
    let options = if args.no_window {
        DeidOptions::strict(args.mode)
    } else {
        DeidOptions {
            mode: args.mode,
            ..DeidOptions::default()
        }
    };
    let mut text = String::new();
    let mut spans = String::new();
    let (mut n_tokens, mut n_redacted, mut violations) = (0, 0, 0);
    for (id, doc) in &docs {
        let r = deidentify(doc, &ck.params, &vocab, &options).map_err(|e| {
            let mut c: CliError = e.into();
            c.message = format!("document `{id}`: {}", c.message);
            c
        })?;
        n_tokens += r.tokens.len();
        n_redacted += r.redaction_spans.len();
        violations += r.alphabet_violations(&vocab);
        text += &r.redacted_text;
        text.push('\n');
        for s in &r.redaction_spans {
            spans += &span_row(id, s);
        }
    }
    fs::write(&args.out, text).map_err(|e| CliError::io_at(&args.out, e))?;
    if let Some(p) = &args.spans_out {
        fs::write(p, spans).map_err(|e| CliError::io_at(p, e))?;
    }
    Ok(format!(
        "documents={} tokens={n_tokens} redacted={n_redacted} alphabet_violations={violations} mode={}\n",
        docs.len(),
        args.mode
    ))
}

/// Reads a span sidecar into per-document predictions ordered like `docs`.
pub fn read_sidecar(text: &str, docs: &[LabeledDocument]) -> Result<Vec<Vec<RedactionSpan>>, CliError> {
    let index: HashMap<&str, usize> = docs.iter().enumerate().map(|(i, d)| (d.id.as_str(), i)).collect();
    let mut out = vec![Vec::new(); docs.len()];
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = |m: &str| CliError::io(format!("sidecar line {}: {m}", n + 1));
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(bad("expected 4 tab-separated fields"));
        }
        let &doc = index.get(f[0]).ok_or_else(|| bad(&format!("unknown document `{}`", f[0])))?;
        let start = f[1].parse().map_err(|_| bad("bad start offset"))?;
        let end = f[2].parse().map_err(|_| bad("bad end offset"))?;
        let category = match f[3] {
            "PHI" => None,
            c => Some(c.parse().map_err(|_| bad(&format!("unknown category `{c}`")))?),
        };
        out[doc].push(RedactionSpan { start, end, category });
    }
    Ok(out)
}

fn cmd_eval(args: &EvalArgs) -> Result<String, CliError> {
    let docs = load_corpus(&args.corpus)?;
    let (eval, label) = match (&args.predictions, &args.checkpoint) {
        (Some(p), _) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::io_at(p, e))?;
            (evaluate_predictions(&docs, &read_sidecar(&text, &docs)?)?, "this run (sidecar)".to_string())
        }
        (None, Some(ck)) => {
            let (ck, vocab) = load_model(ck, args.vocab.as_deref())?;
            let options = DeidOptions {
                mode: args.mode,
                ..DeidOptions::default()
            };
            (evaluate_corpus(&ck.params, &vocab, &docs, &options)?, format!("this run ({})", args.mode))
        }
        (None, None) => return Err(CliError::config("eval needs --checkpoint or --predictions")),
    };
    for w in &eval.warnings {
        eprintln!("warning: {w}");
    }
    let kv = to_kv(&eval.report);
    if let Some(p) = &args.kv_out {
        fs::write(p, &kv).map_err(|e| CliError::io_at(p, e))?;
    }
    Ok(format!(
        "{}\n{}\n{kv}",
        render_report(&eval.report),
        compare_report(&eval.report, &label, &[ReferenceRow::published()])
    ))
}

fn cmd_inspect(args: &InspectArgs) -> Result<String, CliError> {
    if let Some(p) = &args.corpus {
        return Ok(corpus_summary(&load_corpus(p)?));
    }
    let p = args.checkpoint.as_ref().expect("clap enforces one of the two");
    let ck = Checkpoint::load(p)?;
    let cfg = ck.params.config();
    let model = toml::to_string(cfg).expect("model config serialises");
    let mut s = format!("[model]\n{model}\n");
    let _ = writeln!(s, "parameters={}", cfg.count_params());
    let _ = writeln!(s, "tensors={}", ck.params.names().len());
    let _ = writeln!(s, "vocab_hash={}", ck.vocab_hash);
    let _ = writeln!(s, "optimizer_state={}", ck.optimizer.is_some());
    if let Some(st) = &ck.trainer_state {
        let _ = writeln!(s, "trainer_state={st}");
    }
    Ok(s)
}
