//! `wordlens` command line: explain single documents, aggregate repeated
//! runs into figure data, compare explainers on a corpus, train models.
//!
//! Exit codes: 0 success, 1 runtime error, 2 usage error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use wordlens::anchors::{AnchorConfig, Occurrences};
use wordlens::bench::{self, CompareConfig, FigureConfig, PrecisionMode};
use wordlens::lime::LimeConfig;
use wordlens::metrics::Ranking;
use wordlens::models::{train_logistic, Model, TrainConfig};
use wordlens::{load_corpus_csv, Document};

#[derive(Parser, Debug)]
#[command(name = "wordlens", version, about = "LIME and Anchors for text, side by side")]
struct Cli {
    /// JSON file whose keys mirror the long flags; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Explain one document once.
    Explain(ExplainArgs),
    /// Repeat both explainers over seeds and aggregate per word.
    Figure(FigureArgs),
    /// ℓ-index comparison of LIME and Anchors against a logistic model.
    Compare(CompareArgs),
    /// Train a logistic model on a labeled CSV corpus.
    Train(TrainArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    Lime,
    Anchors,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Precision {
    Exact,
    Sampled,
}

impl From<Precision> for PrecisionMode {
    fn from(p: Precision) -> Self {
        match p {
            Precision::Exact => PrecisionMode::Exact,
            Precision::Sampled => PrecisionMode::Sampled,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum RankingArg {
    Signed,
    Absolute,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum OccurrencesArg {
    First,
    All,
}

#[derive(Args, Debug, Default)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug, Default)]
struct ExplainerFlags {
    /// LIME perturbed samples per explanation.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    kernel_width: Option<f64>,
    #[arg(long)]
    ridge: Option<f64>,
    /// Anchor precision target is 1 - epsilon.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    beam_width: Option<usize>,
    #[arg(long)]
    max_batches: Option<usize>,
    #[arg(long, value_enum)]
    occurrences: Option<OccurrencesArg>,
    /// Anchor search: exhaustive with exact precision, or sampled beam search.
    #[arg(long, value_enum)]
    precision: Option<Precision>,
}

#[derive(Args, Debug)]
struct ExplainArgs {
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    text: Option<String>,
    #[arg(long)]
    doc_id: Option<usize>,
    #[command(flatten)]
    explainer: ExplainerFlags,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct FigureArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    text: Option<String>,
    /// Number of runs R; run i uses seed + i.
    #[arg(long)]
    runs: Option<usize>,
    #[command(flatten)]
    explainer: ExplainerFlags,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, value_enum)]
    ranking: Option<RankingArg>,
    /// Also write the per-document CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    explainer: ExplainerFlags,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    #[command(flatten)]
    common: Common,
}

/// Config-file counterpart of every flag.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    output: Option<PathBuf>,
    jobs: Option<usize>,
    format: Option<Format>,
    method: Option<Method>,
    model: Option<PathBuf>,
    text: Option<String>,
    doc_id: Option<usize>,
    corpus: Option<PathBuf>,
    runs: Option<usize>,
    ranking: Option<RankingArg>,
    csv: Option<PathBuf>,
    samples: Option<usize>,
    kernel_width: Option<f64>,
    ridge: Option<f64>,
    epsilon: Option<f64>,
    batch_size: Option<usize>,
    delta: Option<f64>,
    beam_width: Option<usize>,
    max_batches: Option<usize>,
    occurrences: Option<OccurrencesArg>,
    precision: Option<Precision>,
    epochs: Option<usize>,
    learning_rate: Option<f64>,
    l2: Option<f64>,
}

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

// Relative paths in a config file resolve against the file's directory.
fn file_path(cfg_path: Option<&Path>, p: Option<PathBuf>) -> Option<PathBuf> {
    p.map(|p| match cfg_path.and_then(Path::parent) {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p,
    })
}

struct Resolved {
    seed: u64,
    output: Option<PathBuf>,
    jobs: usize,
    format: Format,
}

fn resolve_common(flags: Common, file: &FileConfig, cfg_path: Option<&Path>, default_format: Format) -> Resolved {
    Resolved {
        seed: flags.seed.or(file.seed).unwrap_or(0),
        output: flags.output.or_else(|| file_path(cfg_path, file.output.clone())),
        jobs: flags.jobs.or(file.jobs).unwrap_or(1),
        format: flags.format.or(file.format).unwrap_or(default_format),
    }
}

fn resolve_explainers(flags: &ExplainerFlags, file: &FileConfig, seed: u64) -> (LimeConfig, AnchorConfig) {
    let ld = LimeConfig::default();
    let ad = AnchorConfig::default();
    let lime = LimeConfig {
        n_samples: flags.samples.or(file.samples).unwrap_or(ld.n_samples),
        kernel_width: flags.kernel_width.or(file.kernel_width).unwrap_or(ld.kernel_width),
        ridge: flags.ridge.or(file.ridge).unwrap_or(ld.ridge),
        seed,
    };
    let anchors = AnchorConfig {
        epsilon: flags.epsilon.or(file.epsilon).unwrap_or(ad.epsilon),
        batch_size: flags.batch_size.or(file.batch_size).unwrap_or(ad.batch_size),
        delta: flags.delta.or(file.delta).unwrap_or(ad.delta),
        beam_width: flags.beam_width.or(file.beam_width).unwrap_or(ad.beam_width),
        max_batches: flags.max_batches.or(file.max_batches).unwrap_or(ad.max_batches),
        occurrences: match flags.occurrences.or(file.occurrences) {
            Some(OccurrencesArg::All) => Occurrences::All,
            Some(OccurrencesArg::First) | None => Occurrences::First,
        },
        seed,
    };
    (lime, anchors)
}

/// Missing required input is a usage error (exit 2).
fn required<T>(value: Option<T>, flag: &str) -> T {
    value.unwrap_or_else(|| {
        eprintln!("error: --{flag} is required (as a flag or in --config)");
        std::process::exit(2);
    })
}

fn load_model(path: &Path) -> Result<Model> {
    Model::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn emit(output: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match output {
        Some(path) => {
            std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn json_bytes<T: serde::Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn run_explain(args: ExplainArgs, file: &FileConfig, cfg_path: Option<&Path>) -> Result<()> {
    let common = resolve_common(args.common, file, cfg_path, Format::Json);
    if common.format != Format::Json {
        bail!("explain only writes JSON");
    }
    let method = required(args.method.or(file.method), "method");
    let model_path = required(args.model.or_else(|| file_path(cfg_path, file.model.clone())), "model");
    let text = required(args.text.or_else(|| file.text.clone()), "text");
    let doc_id = args.doc_id.or(file.doc_id).unwrap_or(0);
    let model = load_model(&model_path)?;
    let doc = Document::tokenize(&text);
    let (lime, anchors) = resolve_explainers(&args.explainer, file, common.seed);
    let bytes = match method {
        Method::Lime => json_bytes(&bench::explain_lime_record(&model, &doc, &lime, doc_id)?)?,
        Method::Anchors => {
            let mode = args
                .explainer
                .precision
                .or(file.precision)
                .map_or_else(|| PrecisionMode::default_for(&model), Into::into);
            json_bytes(&bench::explain_anchors_record(&model, &doc, &anchors, mode, doc_id)?)?
        }
    };
    emit(common.output.as_deref(), &bytes)
}

fn run_figure(args: FigureArgs, file: &FileConfig, cfg_path: Option<&Path>) -> Result<()> {
    let common = resolve_common(args.common, file, cfg_path, Format::Csv);
    let model_path = required(args.model.or_else(|| file_path(cfg_path, file.model.clone())), "model");
    let text = required(args.text.or_else(|| file.text.clone()), "text");
    let model = load_model(&model_path)?;
    let doc = Document::tokenize(&text);
    let (lime, anchors) = resolve_explainers(&args.explainer, file, common.seed);
    let mode = args
        .explainer
        .precision
        .or(file.precision)
        .map_or_else(|| PrecisionMode::default_for(&model), Into::into);
    let cfg = FigureConfig {
        runs: args.runs.or(file.runs).unwrap_or(100),
        master_seed: common.seed,
        jobs: common.jobs,
        precision_mode: mode,
    };
    let data = bench::figure(&model, &doc, &lime, &anchors, &cfg)?;
    let bytes = match common.format {
        Format::Json => json_bytes(&data)?,
        Format::Csv => {
            let mut buf = Vec::new();
            data.write_csv(&mut buf)?;
            buf
        }
    };
    emit(common.output.as_deref(), &bytes)
}

fn run_compare(args: CompareArgs, file: &FileConfig, cfg_path: Option<&Path>) -> Result<()> {
    let common = resolve_common(args.common, file, cfg_path, Format::Json);
    let model_path = required(args.model.or_else(|| file_path(cfg_path, file.model.clone())), "model");
    let corpus_path = required(args.corpus.or_else(|| file_path(cfg_path, file.corpus.clone())), "corpus");
    let model = load_model(&model_path)?;
    let Some(clf) = model.as_logistic() else {
        bail!("compare needs a logistic model: the ground-truth ranking uses its coefficients");
    };
    let corpus = load_corpus_csv(&corpus_path)?;
    let (lime, anchors) = resolve_explainers(&args.explainer, file, common.seed);
    let cfg = CompareConfig {
        master_seed: common.seed,
        jobs: common.jobs,
        ranking: match args.ranking.or(file.ranking) {
            Some(RankingArg::Absolute) => Ranking::Absolute,
            Some(RankingArg::Signed) | None => Ranking::Signed,
        },
        precision_mode: args
            .explainer
            .precision
            .or(file.precision)
            .map_or(PrecisionMode::Sampled, Into::into),
    };
    let report = bench::compare(clf, &corpus, &lime, &anchors, &cfg)?;
    eprintln!(
        "explained {} positive documents, skipped {} negative; l-index LIME {:.3} ± {:.3}, Anchors {:.3} ± {:.3}",
        report.n_documents,
        report.n_skipped_negative,
        report.lime.l_index.mean,
        report.lime.l_index.std,
        report.anchors.l_index.mean,
        report.anchors.l_index.std,
    );
    let csv_bytes = || -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        report.write_csv(&mut buf)?;
        Ok(buf)
    };
    if let Some(path) = args.csv.or_else(|| file_path(cfg_path, file.csv.clone())) {
        emit(Some(&path), &csv_bytes()?)?;
    }
    let bytes = match common.format {
        Format::Json => json_bytes(&report)?,
        Format::Csv => csv_bytes()?,
    };
    emit(common.output.as_deref(), &bytes)
}

fn run_train(args: TrainArgs, file: &FileConfig, cfg_path: Option<&Path>) -> Result<()> {
    let common = resolve_common(args.common, file, cfg_path, Format::Json);
    if common.format != Format::Json {
        bail!("models are written as JSON");
    }
    let corpus_path = required(args.corpus.or_else(|| file_path(cfg_path, file.corpus.clone())), "corpus");
    let corpus = load_corpus_csv(&corpus_path)?;
    let d = TrainConfig::default();
    let cfg = TrainConfig {
        learning_rate: args.learning_rate.or(file.learning_rate).unwrap_or(d.learning_rate),
        epochs: args.epochs.or(file.epochs).unwrap_or(d.epochs),
        l2_penalty: args.l2.or(file.l2).unwrap_or(d.l2_penalty),
        seed: common.seed,
    };
    let model = Model::Logistic(train_logistic(&corpus, &cfg)?);
    let mut bytes = model.to_json()?.into_bytes();
    bytes.push(b'\n');
    emit(common.output.as_deref(), &bytes)
}

fn run(cli: Cli) -> Result<()> {
    let cfg_path = cli.config.as_deref();
    let file = FileConfig::load(cfg_path)?;
    match cli.command {
        Command::Explain(a) => run_explain(a, &file, cfg_path),
        Command::Figure(a) => run_figure(a, &file, cfg_path),
        Command::Compare(a) => run_compare(a, &file, cfg_path),
        Command::Train(a) => run_train(a, &file, cfg_path),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
