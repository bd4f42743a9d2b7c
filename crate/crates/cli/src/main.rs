//! `fairtext`: train, run and evaluate the bias detection and debiasing
//! pipeline from the command line.

mod error;
mod input;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use fairtext::dataset::{load_mbic, CsvDialect, GroupConfig, MbicRecord};
use fairtext::debias::{Infiller, NgramInfiller};
use fairtext::pipeline::{
    ablation_masking, stratified_split, train_infiller, write_documents_jsonl, ModelConfig,
};
use fairtext::recognition::{build_lexicon, spans_to_bio, BiasSpan};
use fairtext::{
    evaluate_before_after, run_pipeline, tokenize, train_detector, DebiasConfig, Detector,
    DetectorModel, Label, Lexicon, LexiconRecognizer, Models, PipelineConfig, Recognizer,
};
use fairtext_news::{fetch_all, ClientConfig, NewsClient};
use serde::Serialize;

use error::CliError;
use input::{read_units, Output};
use settings::{pick, require, Settings};

#[derive(Debug, Parser)]
#[command(
    name = "fairtext",
    version,
    about = "Detect, locate and rewrite biased sentences in news text"
)]
struct Cli {
    /// TOML file with model paths, group spec, seeds and thresholds.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Disable data-parallel execution.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the sentence classifier on a labeled CSV.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Mine the biased-word annotations into a lexicon.
    BuildLexicon {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the n-gram infiller on the non-biased sentences.
    BuildInfiller {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        min_score: Option<f64>,
        /// Allow lexicon terms as suggestions.
        #[arg(long)]
        no_block: bool,
    },
    /// Classify every input unit.
    Detect {
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        io: IoArgs,
    },
    /// Locate bias-bearing spans in every input unit.
    Recognize {
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        min_score: Option<f64>,
        #[command(flatten)]
        io: IoArgs,
    },
    /// Rewrite biased sentences, one JSON record per input document.
    Debias {
        #[command(flatten)]
        models: ModelArgs,
        #[command(flatten)]
        debias: DebiasArgs,
        #[command(flatten)]
        io: IoArgs,
    },
    /// Detector and fairness metrics before and after debiasing the test split.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        groups: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        test_fraction: Option<f64>,
        /// Report the untouched test split on both sides.
        #[arg(long)]
        no_debias: bool,
        #[command(flatten)]
        models: ModelArgs,
        #[command(flatten)]
        debias: DebiasArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Debias success rate under random masking versus exact span masking.
    AblateMasking {
        #[command(flatten)]
        data: DataArgs,
        /// Comma-separated masking probabilities.
        #[arg(long, value_delimiter = ',')]
        p: Option<Vec<f64>>,
        #[arg(long)]
        fraction: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        test_fraction: Option<f64>,
        #[command(flatten)]
        models: ModelArgs,
        #[command(flatten)]
        debias: DebiasArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Download articles and write them as JSONL.
    Fetch {
        #[arg(long, required = true)]
        url: Vec<String>,
        /// Seconds.
        #[arg(long)]
        timeout: Option<f64>,
        #[arg(long)]
        max_concurrent: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Labeled CSV export.
    #[arg(long)]
    dataset: PathBuf,
    /// TOML column mapping for the CSV.
    #[arg(long)]
    dialect: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct IoArgs {
    /// Text file (one unit per line), JSONL, or `-` for stdin.
    #[arg(long)]
    input: PathBuf,
    /// Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Without one, only the neutral fallback words are suggested.
    #[arg(long)]
    infiller: Option<PathBuf>,
    #[arg(long)]
    min_score: Option<f64>,
}

#[derive(Debug, Args)]
struct DebiasArgs {
    #[arg(long)]
    top_k: Option<usize>,
    /// Candidates scoring below this are accepted.
    #[arg(long)]
    threshold: Option<f64>,
}

struct Context {
    settings: Settings,
    sequential: bool,
}

impl Context {
    fn debias_config(&self, args: &DebiasArgs) -> DebiasConfig {
        let defaults = DebiasConfig::default();
        DebiasConfig {
            top_k: pick(args.top_k, &self.settings.top_k).unwrap_or(defaults.top_k),
            accept_threshold: pick(args.threshold, &self.settings.threshold)
                .unwrap_or(defaults.accept_threshold),
            exec: self.settings.exec(self.sequential),
            ..defaults
        }
    }

    fn model_config(&self, min_score: Option<f64>) -> ModelConfig {
        let defaults = ModelConfig::default();
        ModelConfig {
            train: self.settings.train.clone().unwrap_or_default(),
            min_score: pick(min_score, &self.settings.min_score).unwrap_or(defaults.min_score),
            block_lexicon_terms: self
                .settings
                .block_lexicon_terms
                .unwrap_or(defaults.block_lexicon_terms),
        }
    }

    fn records(&self, data: &DataArgs) -> Result<Vec<MbicRecord>, CliError> {
        let dialect = match pick(data.dialect.clone(), &self.settings.dialect) {
            Some(path) => CsvDialect::load(path)?,
            None => CsvDialect::default(),
        };
        let report = load_mbic(&data.dataset, &dialect)?;
        if !report.malformed.is_empty() {
            log::warn!(
                "{}: skipped {} malformed rows",
                data.dataset.display(),
                report.malformed.len()
            );
        }
        Ok(report.records)
    }

    fn groups(&self, flag: Option<PathBuf>) -> Result<GroupConfig, CliError> {
        Ok(match pick(flag, &self.settings.groups) {
            Some(path) => GroupConfig::load(path)?,
            None => GroupConfig::builtin(),
        })
    }

    fn model_path(&self, flag: &Option<PathBuf>) -> Option<PathBuf> {
        pick(flag.clone(), &self.settings.model)
    }

    fn lexicon_path(&self, flag: &Option<PathBuf>) -> Option<PathBuf> {
        pick(flag.clone(), &self.settings.lexicon)
    }

    fn infiller_path(&self, flag: &Option<PathBuf>) -> Option<PathBuf> {
        pick(flag.clone(), &self.settings.infiller)
    }

    /// Loads every model given by path; fits the rest on `train`.
    fn models(&self, args: &ModelArgs, train: &[MbicRecord]) -> Result<Models, CliError> {
        let config = self.model_config(args.min_score);
        let detector = match self.model_path(&args.model) {
            Some(path) => DetectorModel::load(path)?,
            None => {
                log::info!("fitting detector on {} records", train.len());
                train_detector(&labeled(train), &config.train)?.model
            }
        };
        let lexicon = match self.lexicon_path(&args.lexicon) {
            Some(path) => Lexicon::load(path)?,
            None => build_lexicon(train),
        };
        let infiller = match self.infiller_path(&args.infiller) {
            Some(path) => NgramInfiller::load(path)?,
            None => train_infiller(train, &lexicon, &config),
        };
        let recognizer = LexiconRecognizer::new(lexicon).with_min_score(config.min_score);
        Ok(Models::new(detector, recognizer, infiller))
    }
}

fn labeled(records: &[MbicRecord]) -> Vec<(&str, Label)> {
    records
        .iter()
        .map(|r| (r.sentence.as_str(), r.label))
        .collect()
}

fn train_split(
    records: &[MbicRecord],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<MbicRecord>, Vec<MbicRecord>), CliError> {
    let split = stratified_split(records, test_fraction, seed)?;
    let take = |idx: &[usize]| idx.iter().map(|&i| records[i].clone()).collect();
    Ok((take(&split.train), take(&split.test)))
}

#[derive(Serialize)]
struct DetectRecord<'a> {
    index: usize,
    text: &'a str,
    label: Label,
    probability: f64,
}

#[derive(Serialize)]
struct SpanOut {
    start: usize,
    end: usize,
    surface: String,
    score: f64,
}

#[derive(Serialize)]
struct RecognizeRecord<'a> {
    index: usize,
    text: &'a str,
    spans: Vec<SpanOut>,
    tags: String,
}

#[derive(Serialize)]
struct Summary {
    command: &'static str,
    #[serde(flatten)]
    fields: serde_json::Map<String, serde_json::Value>,
}

fn summary(command: &'static str, fields: serde_json::Value) -> Result<(), CliError> {
    let fields = match fields {
        serde_json::Value::Object(map) => map,
        _ => serde_json::Map::new(),
    };
    let mut out = Output::open(None)?;
    out.json_line(&Summary { command, fields })?;
    out.finish()
}

fn run(cli: Cli) -> Result<(), CliError> {
    let settings = match &cli.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    let ctx = Context {
        settings,
        sequential: cli.sequential,
    };
    match cli.command {
        Command::Train { data, out, epochs } => {
            let records = ctx.records(&data)?;
            let mut config = ctx.model_config(None).train;
            if let Some(e) = epochs {
                config.epochs = e;
            }
            let trained = train_detector(&labeled(&records), &config)?;
            trained.model.save(&out)?;
            let (biased, non_biased) = (
                records.iter().filter(|r| r.label.is_biased()).count(),
                records.iter().filter(|r| !r.label.is_biased()).count(),
            );
            summary(
                "train",
                serde_json::json!({
                    "records": records.len(),
                    "biased": biased,
                    "non_biased": non_biased,
                    "epochs": config.epochs,
                    "initial_loss": trained.initial_loss(),
                    "final_loss": trained.final_loss(),
                    "out": out,
                }),
            )
        }
        Command::BuildLexicon { data, out } => {
            let records = ctx.records(&data)?;
            let lexicon = build_lexicon(&records);
            lexicon.save(&out)?;
            summary(
                "build-lexicon",
                serde_json::json!({"records": records.len(), "terms": lexicon.len(), "out": out}),
            )
        }
        Command::BuildInfiller {
            data,
            out,
            min_score,
            no_block,
        } => {
            let records = ctx.records(&data)?;
            let mut config = ctx.model_config(min_score);
            config.block_lexicon_terms &= !no_block;
            let lexicon = build_lexicon(&records);
            let infiller = train_infiller(&records, &lexicon, &config);
            infiller.save(&out)?;
            summary(
                "build-infiller",
                serde_json::json!({
                    "records": records.len(),
                    "vocabulary": infiller.vocabulary_size(),
                    "out": out,
                }),
            )
        }
        Command::Detect { model, io } => {
            let path = require(ctx.model_path(&model), "detector model", "--model", "model")?;
            let detector = DetectorModel::load(path)?;
            let units = read_units(&io.input)?;
            let results = ctx
                .settings
                .exec(ctx.sequential)
                .map(&units, |t| detector.classify(t));
            let mut out = Output::open(io.out.as_deref())?;
            for (index, (text, r)) in units.iter().zip(results).enumerate() {
                out.json_line(&DetectRecord {
                    index,
                    text,
                    label: r.label,
                    probability: r.probability,
                })?;
            }
            out.finish()
        }
        Command::Recognize {
            lexicon,
            min_score,
            io,
        } => {
            let path = require(
                ctx.lexicon_path(&lexicon),
                "lexicon",
                "--lexicon",
                "lexicon",
            )?;
            let min_score = ctx.model_config(min_score).min_score;
            let recognizer = LexiconRecognizer::new(Lexicon::load(path)?).with_min_score(min_score);
            let units = read_units(&io.input)?;
            let mut out = Output::open(io.out.as_deref())?;
            for (index, text) in units.iter().enumerate() {
                let doc = tokenize(text);
                let found: Vec<BiasSpan> = recognizer.recognize(&doc);
                let spans: Vec<_> = found.iter().map(|s| s.span.clone()).collect();
                let tags = spans_to_bio(&doc, &spans).map_err(|e| CliError::Input {
                    path: io.input.clone(),
                    line: index + 1,
                    reason: e.to_string(),
                })?;
                let spans = found
                    .into_iter()
                    .map(|s| {
                        let (start, end) = doc.span_range(&s.span);
                        SpanOut {
                            start,
                            end,
                            surface: s.span.surface,
                            score: s.score,
                        }
                    })
                    .collect();
                out.json_line(&RecognizeRecord {
                    index,
                    text,
                    spans,
                    tags: tags.to_string(),
                })?;
            }
            out.finish()
        }
        Command::Debias { models, debias, io } => {
            let model = require(
                ctx.model_path(&models.model),
                "detector model",
                "--model",
                "model",
            )?;
            let lexicon = require(
                ctx.lexicon_path(&models.lexicon),
                "lexicon",
                "--lexicon",
                "lexicon",
            )?;
            let min_score = ctx.model_config(models.min_score).min_score;
            let infiller: Box<dyn Infiller> = match ctx.infiller_path(&models.infiller) {
                Some(path) => Box::new(NgramInfiller::load(path)?),
                None => {
                    log::warn!(
                        "no infiller given; suggestions come from the neutral fallback list"
                    );
                    Box::new(fairtext::debias::FallbackInfiller)
                }
            };
            let loaded = Models {
                detector: Box::new(DetectorModel::load(model)?),
                recognizer: Box::new(
                    LexiconRecognizer::new(Lexicon::load(lexicon)?).with_min_score(min_score),
                ),
                infiller,
            };
            let units = read_units(&io.input)?;
            let documents = run_pipeline(&loaded, &units, &ctx.debias_config(&debias))?;
            let mut out = Output::open(io.out.as_deref())?;
            write_documents_jsonl(out.writer(), &documents)?;
            out.finish()
        }
        Command::Evaluate {
            data,
            groups,
            seed,
            test_fraction,
            no_debias,
            models,
            debias,
            out,
        } => {
            let records = ctx.records(&data)?;
            let groups = ctx.groups(groups)?;
            let defaults = PipelineConfig::default();
            let config = PipelineConfig {
                debias: ctx.debias_config(&debias),
                debias_enabled: !no_debias,
                split_seed: pick(seed, &ctx.settings.seed).unwrap_or(defaults.split_seed),
                test_fraction: pick(test_fraction, &ctx.settings.test_fraction)
                    .unwrap_or(defaults.test_fraction),
                ..defaults
            };
            let (train, _) = train_split(&records, config.test_fraction, config.split_seed)?;
            let models = ctx.models(&models, &train)?;
            let report = evaluate_before_after(&records, &models, &groups, &config)?;
            let mut out = Output::open(out.as_deref())?;
            out.json_document(&report)?;
            out.finish()
        }
        Command::AblateMasking {
            data,
            p,
            fraction,
            seed,
            test_fraction,
            models,
            debias,
            out,
        } => {
            let records = ctx.records(&data)?;
            let seed =
                pick(seed, &ctx.settings.seed).unwrap_or(PipelineConfig::default().split_seed);
            let test_fraction = pick(test_fraction, &ctx.settings.test_fraction)
                .unwrap_or(PipelineConfig::default().test_fraction);
            let p = pick(p, &ctx.settings.p).unwrap_or_else(|| vec![0.1, 0.3, 0.5, 0.8, 1.0]);
            if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(CliError::Usage(format!(
                    "--p values must lie in [0,1], got {bad}"
                )));
            }
            let fraction = pick(fraction, &ctx.settings.fraction).unwrap_or(0.05);
            let (train, test) = train_split(&records, test_fraction, seed)?;
            let models = ctx.models(&models, &train)?;
            let report = ablation_masking(
                &test,
                &models,
                &p,
                fraction,
                seed,
                &ctx.debias_config(&debias),
            )?;
            let mut out = Output::open(out.as_deref())?;
            out.json_document(&report)?;
            out.finish()
        }
        Command::Fetch {
            url,
            timeout,
            max_concurrent,
            out,
        } => {
            let defaults = ClientConfig::default();
            let timeout = pick(timeout, &ctx.settings.timeout)
                .map(|s| {
                    Duration::try_from_secs_f64(s)
                        .map_err(|e| CliError::Usage(format!("--timeout: {e}")))
                })
                .transpose()?
                .unwrap_or(defaults.timeout);
            let client = NewsClient::new(ClientConfig {
                timeout,
                max_concurrent: pick(max_concurrent, &ctx.settings.max_concurrent)
                    .unwrap_or(defaults.max_concurrent),
                ..defaults
            });
            let mut output = Output::open(out.as_deref())?;
            let mut first_error = None;
            for result in fetch_all(&client, &url) {
                match result {
                    Ok(article) => output.json_line(&article)?,
                    Err(e) => {
                        let e = CliError::from(e);
                        if first_error.is_some() {
                            report(&e);
                        } else {
                            first_error = Some(e);
                        }
                    }
                }
            }
            output.finish()?;
            first_error.map_or(Ok(()), Err)
        }
    }
}

fn report(err: &CliError) {
    let record = serde_json::to_string(&err.record())
        .unwrap_or_else(|_| format!("{{\"error\":\"{}\"}}", err.kind()));
    eprintln!("{record}");
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Usage(e.render().to_string().trim().to_string());
            report(&err);
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            report(&err);
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
