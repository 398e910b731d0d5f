use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use sentigender::corpus::{
    load_manual_samples, load_source_reviews, load_stopwords, load_user_records, Cleaner, Gender,
};
use sentigender::domainsel::{augment_with_manual, select_source, Provenance, DEFAULT_THRESHOLD};
use sentigender::embed::{train_skipgram, EmbeddingTable, SkipGramConfig};
use sentigender::eval::{
    config_args, emit_report, experiment_grid, parse_config, prepare, run_prepared, DataPaths, EvalReport,
    ExperimentConfig, ExperimentData, ReportFormat, Representation, SentimentMode, SourceMode, Timing,
};
use sentigender::gender::{
    concat_features, read_features, train_gender, write_features, Extra, FeatureRecord, MlpConfig,
};
use sentigender::nncore::{read_checkpoint, write_checkpoint, Control, OptimizerKind, TrainConfig};
use sentigender::resample::{smote, ResampleConfig, SmoteVariant};
use sentigender::sentiment::{labeled_items, LayerSource, SentimentConfig, SentimentModel};
use sentigender::synth::{generate, write_dataset, SynthConfig};
use sentigender::{Error, Result};

#[derive(Parser)]
#[command(name = "sentigender", version, args_override_self = true, about = "Gender classification with transferred sentiment representations")]
struct Cli {
    /// Flat key=value file; its entries act as options placed before the command line ones.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean users' posts and write their virtual documents.
    #[command(args_override_self = true)]
    Prepare {
        #[arg(long)]
        users: PathBuf,
        #[arg(long)]
        stopwords: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train skip-gram word vectors on users' posts and source reviews.
    #[command(args_override_self = true)]
    Embed {
        #[arg(long)]
        users: PathBuf,
        #[arg(long)]
        source: Option<PathBuf>,
        #[arg(long)]
        stopwords: Option<PathBuf>,
        #[command(flatten)]
        embed: EmbedArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Keep the source reviews most similar to the target users.
    #[command(args_override_self = true)]
    SelectSource {
        #[command(flatten)]
        data: ModelData,
        #[arg(long)]
        users: PathBuf,
        #[arg(long, visible_alias = "similarity-threshold", default_value_t = DEFAULT_THRESHOLD)]
        z: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the LSTM sentiment classifier.
    #[command(args_override_self = true)]
    SentimentTrain {
        #[command(flatten)]
        data: ModelData,
        /// Target users, needed for similarity selection.
        #[arg(long)]
        users: Option<PathBuf>,
        /// Select source reviews above this average similarity.
        #[arg(long, visible_aliases = ["select-z", "similarity-threshold"])]
        z: Option<f64>,
        #[arg(long, visible_alias = "manual-labels")]
        manual: Option<PathBuf>,
        #[command(flatten)]
        model: SentimentArgs,
        /// Per-epoch training curve as JSON.
        #[arg(long)]
        curve: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write per-user feature vectors: document vector plus an optional sentiment segment.
    #[command(args_override_self = true)]
    Extract {
        #[arg(long, visible_alias = "in")]
        users: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        stopwords: Option<PathBuf>,
        /// Sentiment model checkpoint; required unless the layer is `none`.
        #[arg(long)]
        model: Option<PathBuf>,
        /// frozen_lstm | frozen_dense | polarity | none
        #[arg(long, default_value = "frozen_lstm")]
        layer: String,
        #[arg(long, default_value_t = 500)]
        width: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Oversample the minority class of a features file.
    #[command(args_override_self = true)]
    Smote {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        smote: SmoteArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the gender classifier on a features file.
    #[command(args_override_self = true)]
    GenderTrain {
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[command(flatten)]
        train: GenderArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validate one experiment configuration.
    #[command(args_override_self = true)]
    Evaluate {
        #[command(flatten)]
        data: EvalData,
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Run each listed seed (comma separated) instead of --seed.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long, default_value = "json")]
        format: String,
        /// Add wall-clock timing to the report.
        #[arg(long)]
        timing: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validate the full experiment grid.
    #[command(args_override_self = true)]
    Grid {
        #[command(flatten)]
        data: EvalData,
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Directory for one JSON report per cell.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Generate a synthetic dataset.
    #[command(args_override_self = true)]
    SynthData {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1000)]
        users: usize,
        #[arg(long, default_value_t = 2000)]
        reviews: usize,
        #[arg(long, default_value_t = 200)]
        manual: usize,
        #[arg(long, default_value_t = 0.6)]
        correlation: f64,
        #[arg(long, default_value_t = 0.5)]
        male_fraction: f64,
        /// Chance that a filler word comes from the writer's gender vocabulary.
        #[arg(long)]
        gender_word_rate: Option<f64>,
        /// Chance that a filler word comes from the other gender's vocabulary.
        #[arg(long)]
        cross_gender_word_rate: Option<f64>,
    },
}

#[derive(Args, Clone)]
struct EmbedArgs {
    #[arg(long, default_value_t = 100)]
    dim: usize,
    #[arg(long, default_value_t = 5)]
    window: usize,
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    #[arg(long, default_value_t = 5)]
    embed_epochs: usize,
    #[arg(long, default_value_t = 2)]
    min_count: usize,
    #[arg(long, default_value_t = 0.025)]
    embed_lr: f64,
}

impl EmbedArgs {
    fn config(&self, seed: u64) -> SkipGramConfig {
        SkipGramConfig {
            dim: self.dim,
            window: self.window,
            negatives: self.negatives,
            epochs: self.embed_epochs,
            min_count: self.min_count,
            learning_rate: self.embed_lr,
            seed,
        }
    }
}

#[derive(Args, Clone)]
struct ModelData {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    width: usize,
}

#[derive(Args, Clone)]
struct SentimentArgs {
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    #[arg(long, default_value_t = 0.4)]
    lstm_dropout: f64,
    #[arg(long, default_value_t = 30)]
    sentiment_epochs: usize,
    #[arg(long, default_value_t = 32)]
    sentiment_batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    sentiment_lr: f64,
    #[arg(long)]
    patience: Option<usize>,
}

impl SentimentArgs {
    fn configs(&self, seed: u64) -> (SentimentConfig, TrainConfig) {
        (
            SentimentConfig {
                hidden: self.hidden,
                dropout: self.lstm_dropout,
            },
            TrainConfig {
                epochs: self.sentiment_epochs,
                batch_size: self.sentiment_batch_size,
                learning_rate: self.sentiment_lr,
                optimizer: OptimizerKind::Adam,
                seed,
                patience: self.patience,
            },
        )
    }
}

#[derive(Args, Clone)]
struct SmoteArgs {
    #[arg(long, default_value_t = 5)]
    smote_k: usize,
    #[arg(long, default_value_t = 1.0)]
    smote_ratio: f64,
    #[arg(long, default_value = "paper")]
    smote_variant: String,
}

impl SmoteArgs {
    fn config(&self, seed: u64) -> Result<ResampleConfig> {
        Ok(ResampleConfig {
            k: self.smote_k,
            target_ratio: self.smote_ratio,
            seed,
            variant: self.smote_variant.parse::<SmoteVariant>()?,
        })
    }
}

#[derive(Args, Clone)]
struct GenderArgs {
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value = "adam")]
    optimizer: String,
    /// Hidden layer widths, comma separated.
    #[arg(long, default_value = "50,10")]
    hidden_layers: String,
    #[arg(long, default_value_t = 0.4)]
    dropout: f64,
    /// Single softmax layer instead of the hidden stack.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", default_value_t = false)]
    logistic: bool,
}

impl GenderArgs {
    fn configs(&self, epochs: usize, seed: u64) -> Result<(MlpConfig, TrainConfig)> {
        Ok((
            MlpConfig {
                hidden: parse_list(&self.hidden_layers, "hidden-layers")?,
                dropout: self.dropout,
                logistic: self.logistic,
            },
            TrainConfig {
                epochs,
                batch_size: self.batch_size,
                learning_rate: self.lr,
                optimizer: self.optimizer.parse()?,
                seed,
                patience: None,
            },
        ))
    }
}

#[derive(Args, Clone)]
struct EvalData {
    #[arg(long)]
    users: PathBuf,
    #[arg(long)]
    source: Option<PathBuf>,
    #[arg(long, visible_alias = "manual-labels")]
    manual: Option<PathBuf>,
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Pretrained embeddings; trained from the corpus when absent.
    #[arg(long)]
    embeddings: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct ExperimentArgs {
    #[arg(long, default_value = "avg_vector")]
    representation: String,
    #[arg(long, default_value = "none")]
    sentiment_mode: String,
    #[arg(long, default_value = "entire")]
    source_mode: String,
    #[arg(long, visible_alias = "similarity-threshold", default_value_t = DEFAULT_THRESHOLD)]
    z: f64,
    #[arg(long, default_value_t = 500)]
    width: usize,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Epoch grid, comma separated.
    #[arg(long, default_value = "100")]
    epochs: String,
    #[arg(long, num_args = 0..=1, default_missing_value = "true", default_value_t = false)]
    smote: bool,
    #[command(flatten)]
    smote_args: SmoteArgs,
    #[command(flatten)]
    embed: EmbedArgs,
    #[command(flatten)]
    sentiment: SentimentArgs,
    #[command(flatten)]
    gender: GenderArgs,
    #[arg(long, default_value_t = 500)]
    keyword_top_n: usize,
    #[arg(long, default_value_t = 1.0)]
    finetune_lstm_lr_scale: f64,
}

impl ExperimentArgs {
    fn config(&self, seed: u64) -> Result<ExperimentConfig> {
        let epochs = parse_list(&self.epochs, "epochs")?;
        let (classifier, gender_train) = self.gender.configs(1, seed)?;
        let (sentiment, sentiment_train) = self.sentiment.configs(seed);
        let config = ExperimentConfig {
            representation: self.representation.parse::<Representation>()?,
            sentiment_mode: self.sentiment_mode.parse::<SentimentMode>()?,
            source_mode: self.source_mode.parse::<SourceMode>()?,
            z: self.z,
            width: self.width,
            folds: self.folds,
            epochs,
            seed,
            smote: self.smote,
            resample: self.smote_args.config(seed)?,
            embedding: self.embed.config(seed),
            sentiment,
            sentiment_train,
            classifier,
            gender_train,
            keyword_top_n: self.keyword_top_n,
            finetune_lstm_lr_scale: self.finetune_lstm_lr_scale,
        };
        config.validate()?;
        Ok(config)
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| x.trim())
        .filter(|x| !x.is_empty())
        .map(|x| {
            x.parse()
                .map_err(|_| Error::Config(format!("--{what}: cannot parse `{x}`")))
        })
        .collect()
}

fn stopwords(path: &Option<PathBuf>) -> Result<HashSet<String>> {
    match path {
        Some(p) => load_stopwords(p),
        None => Ok(HashSet::new()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Data(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Prepare { users, stopwords: sw, out } => {
            let cleaner = Cleaner::new(stopwords(&sw)?);
            let docs = cleaner.build_virtual_documents(&load_user_records(&users)?);
            let mut text = String::new();
            for d in &docs {
                text.push_str(&serde_json::to_string(d).map_err(|e| Error::Data(e.to_string()))?);
                text.push('\n');
            }
            write_text(&out, &text)?;
            eprintln!("wrote {} virtual documents", docs.len());
        }
        Command::Embed {
            users,
            source,
            stopwords: sw,
            embed,
            out,
        } => {
            let cleaner = Cleaner::new(stopwords(&sw)?);
            let mut sentences: Vec<Vec<String>> = Vec::new();
            for u in load_user_records(&users)? {
                sentences.extend(u.posts.iter().map(|p| cleaner.clean_tokens(p)));
            }
            if let Some(s) = source {
                sentences.extend(load_source_reviews(&s)?.iter().map(|r| cleaner.clean_tokens(&r.tokens)));
            }
            sentences.retain(|s| !s.is_empty());
            let table = train_skipgram(&sentences, &embed.config(seed))?;
            table.save(&out)?;
            eprintln!("wrote {} vectors of dimension {}", table.len(), table.dim());
        }
        Command::SelectSource { data, users, z, out } => {
            let cleaner = Cleaner::new(stopwords(&data.stopwords)?);
            let table = EmbeddingTable::load(&data.embeddings)?;
            let reviews = load_source_reviews(&data.source)?;
            let set = labeled_items(
                reviews
                    .iter()
                    .map(|r| (r.review_id.clone(), cleaner.clean_tokens(&r.tokens), r.polarity)),
                &table,
                data.width,
                Provenance::Source,
            );
            let targets = target_vectors(&cleaner, &table, &users)?;
            let sel = select_source(&set, &targets, z)?;
            let kept: HashSet<&str> = sel.set.items.iter().map(|i| i.id.as_str()).collect();
            let mut text = String::new();
            for r in reviews.iter().filter(|r| kept.contains(r.review_id.as_str())) {
                text.push_str(&serde_json::to_string(r).map_err(|e| Error::Data(e.to_string()))?);
                text.push('\n');
            }
            write_text(&out, &text)?;
            eprintln!("kept {} of {} source reviews at z = {z}", sel.kept, sel.total);
        }
        Command::SentimentTrain {
            data,
            users,
            z,
            manual,
            model,
            curve,
            out,
        } => {
            let cleaner = Cleaner::new(stopwords(&data.stopwords)?);
            let table = EmbeddingTable::load(&data.embeddings)?;
            let reviews = load_source_reviews(&data.source)?;
            let mut set = labeled_items(
                reviews
                    .iter()
                    .map(|r| (r.review_id.clone(), cleaner.clean_tokens(&r.tokens), r.polarity)),
                &table,
                data.width,
                Provenance::Source,
            );
            if let Some(z) = z {
                let Some(users) = users else {
                    return Err(Error::Config("--z needs --users for the target vectors".into()));
                };
                let sel = select_source(&set, &target_vectors(&cleaner, &table, &users)?, z)?;
                eprintln!("kept {} of {} source reviews at z = {z}", sel.kept, sel.total);
                set = sel.set;
            }
            if let Some(m) = manual {
                let manual = labeled_items(
                    load_manual_samples(&m)?
                        .iter()
                        .map(|s| (s.id.clone(), cleaner.clean_tokens(&s.tokens), s.polarity)),
                    &table,
                    data.width,
                    Provenance::ManualTarget,
                );
                set = augment_with_manual(&set, &manual)?;
            }
            let (cfg, train) = model.configs(seed);
            let (m, history) = SentimentModel::train(&set, &cfg, &train)?;
            write_checkpoint(&out, &m.to_checkpoint())?;
            if let Some(last) = history.last() {
                eprintln!(
                    "trained on {} items; held-out accuracy {:.4} after {} epochs",
                    set.len(),
                    last.heldout_accuracy,
                    last.epoch
                );
            }
            if let Some(path) = curve {
                write_json(&path, &history)?;
            }
        }
        Command::Extract {
            users,
            embeddings,
            stopwords: sw,
            model,
            layer,
            width,
            out,
        } => {
            let cleaner = Cleaner::new(stopwords(&sw)?);
            let table = EmbeddingTable::load(&embeddings)?;
            let sentiment = match (&model, layer.as_str()) {
                (_, "none") => None,
                (Some(p), _) => Some(SentimentModel::from_checkpoint(read_checkpoint(p)?)?),
                (None, _) => return Err(Error::Config("--model is required for this layer".into())),
            };
            let mut records = Vec::new();
            for user in load_user_records(&users)? {
                let Ok(doc) = cleaner.build_virtual_document(&user) else {
                    log::warn!("skipping `{}`: empty after cleaning", user.user_id);
                    continue;
                };
                let Ok(v) = table.doc_vector(&user.user_id, &doc.tokens) else {
                    log::warn!("skipping `{}`: no in-vocabulary tokens", user.user_id);
                    continue;
                };
                let features = match (layer.as_str(), &sentiment) {
                    ("none", _) => concat_features(&v.values, Extra::None)?,
                    ("polarity", Some(m)) => {
                        concat_features(&v.values, Extra::Polarity(m.polarity_features(&user, &cleaner, &table, width)?))?
                    }
                    (l, Some(m)) => {
                        let matrix = table.doc_matrix(&user.user_id, &doc.tokens, width)?;
                        let rep = m.extract_representation(&matrix, l.parse::<LayerSource>()?)?;
                        concat_features(&v.values, Extra::Sentiment(&rep))?
                    }
                    _ => unreachable!(),
                };
                records.push(FeatureRecord {
                    user_id: user.user_id.clone(),
                    label: user.gender,
                    features,
                });
            }
            write_features(&out, &records)?;
            eprintln!("wrote {} feature vectors", records.len());
        }
        Command::Smote { input, smote: args, out } => {
            let records = read_features(&input)?;
            let x: Vec<Vec<f64>> = records.iter().map(|r| r.features.values.clone()).collect();
            let y: Vec<usize> = records.iter().map(|r| r.label.index()).collect();
            let result = smote(&x, &y, &args.config(seed)?)?;
            let layout = records
                .first()
                .map(|r| r.features.layout.clone())
                .unwrap_or_default();
            let mut outrecs = records.clone();
            for (n, (s, values)) in result
                .plan
                .synthetic
                .iter()
                .zip(&result.samples[result.original_count..])
                .enumerate()
            {
                outrecs.push(FeatureRecord {
                    user_id: format!("{}#smote{n}", records[s.x_old].user_id),
                    label: Gender::from_index(result.plan.minority_label).unwrap(),
                    features: sentigender::gender::FeatureVector {
                        values: values.clone(),
                        layout: layout.clone(),
                    },
                });
            }
            write_features(&out, &outrecs)?;
            eprintln!("added {} synthetic samples", outrecs.len() - records.len());
        }
        Command::GenderTrain {
            features,
            epochs,
            train,
            out,
        } => {
            let records = read_features(&features)?;
            let (mlp, cfg) = train.configs(epochs, seed)?;
            let f: Vec<_> = records.iter().map(|r| r.features.clone()).collect();
            let y: Vec<Gender> = records.iter().map(|r| r.label).collect();
            let (model, history) = train_gender(&f, &y, &mlp, &cfg, |_, _| Ok(Control::Continue))?;
            let layout = f.first().map(|x| x.layout.clone()).unwrap_or_default();
            write_checkpoint(&out, &model.to_checkpoint(&layout))?;
            if let Some(last) = history.last() {
                eprintln!("training accuracy {:.4} after {} epochs", last.accuracy, last.epoch);
            }
        }
        Command::Evaluate {
            data,
            exp,
            seeds,
            format,
            timing,
            out,
        } => {
            let format: ReportFormat = format.parse()?;
            let seeds = match seeds {
                Some(s) => parse_list(&s, "seeds")?,
                None => vec![seed],
            };
            let configs = seeds.iter().map(|&s| exp.config(s)).collect::<Result<Vec<_>>>()?;
            let data = load_data(&data)?;
            let mut text = String::new();
            for config in &configs {
                let start = Instant::now();
                let prep = prepare(config, &data)?;
                let mut report = run_prepared(config, &data, &prep)?;
                if timing {
                    report.timing = Some(Timing {
                        total_seconds: start.elapsed().as_secs_f64(),
                    });
                }
                text.push_str(&emit_report(&report, format));
            }
            match out {
                Some(p) => write_text(&p, &text)?,
                None => print!("{text}"),
            }
        }
        Command::Grid { data, exp, out_dir } => {
            let base = exp.config(seed)?;
            let data = load_data(&data)?;
            let prep = prepare(&base, &data)?;
            if let Some(d) = &out_dir {
                fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
            }
            let grid = experiment_grid(&base);
            println!("{:<40}{}", "cell", base.epoch_grid().iter().map(|e| format!("{e:>9}")).collect::<String>());
            for (name, config) in grid {
                let report: EvalReport = run_prepared(&config, &data, &prep)?;
                println!(
                    "{name:<40}{}",
                    report.mean.iter().map(|m| format!("{:>9.2}", 100.0 * m)).collect::<String>()
                );
                if let Some(d) = &out_dir {
                    let file = d.join(format!("{}.json", name.replace('/', "__")));
                    write_text(&file, &emit_report(&report, ReportFormat::Json))?;
                }
            }
        }
        Command::SynthData {
            out_dir,
            users,
            reviews,
            manual,
            correlation,
            male_fraction,
            gender_word_rate,
            cross_gender_word_rate,
        } => {
            let defaults = SynthConfig::default();
            let data = generate(&SynthConfig {
                users,
                reviews,
                manual,
                correlation,
                male_fraction,
                gender_word_rate: gender_word_rate.unwrap_or(defaults.gender_word_rate),
                cross_gender_word_rate: cross_gender_word_rate.unwrap_or(defaults.cross_gender_word_rate),
                seed,
                ..defaults
            })?;
            write_dataset(&out_dir, &data)?;
            eprintln!(
                "wrote {} users, {} reviews, {} manual samples; gender/rate correlation {:.3}",
                data.users.len(),
                data.reviews.len(),
                data.manual.len(),
                data.correlation
            );
        }
    }
    Ok(())
}

fn target_vectors(
    cleaner: &Cleaner,
    table: &EmbeddingTable,
    users: &Path,
) -> Result<Vec<sentigender::embed::DocVector>> {
    Ok(cleaner
        .build_virtual_documents(&load_user_records(users)?)
        .iter()
        .filter_map(|d| table.doc_vector(&d.user_id, &d.tokens).ok())
        .collect())
}

fn load_data(d: &EvalData) -> Result<ExperimentData> {
    ExperimentData::load(&DataPaths {
        users: d.users.clone(),
        source: d.source.clone(),
        manual: d.manual.clone(),
        stopwords: d.stopwords.clone(),
        embeddings: d.embeddings.clone(),
    })
}

const COMMANDS: [&str; 10] = [
    "prepare",
    "embed",
    "select-source",
    "sentiment-train",
    "extract",
    "smote",
    "gender-train",
    "evaluate",
    "grid",
    "synth-data",
];

/// Splices config-file entries in right after the subcommand so that
/// options given on the command line come later and win.
fn expand_config(args: Vec<String>) -> Result<Vec<String>> {
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        if a == "--config" {
            path = args.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let extra = config_args(&parse_config(&text)?);
    let at = args
        .iter()
        .position(|a| COMMANDS.contains(&a.as_str()))
        .map_or(args.len(), |i| i + 1);
    let mut out = args[..at].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[at..]);
    Ok(out)
}

fn exit_code(e: &Error) -> ExitCode {
    if e.is_config() {
        ExitCode::from(2)
    } else {
        ExitCode::from(3)
    }
}

fn main() -> ExitCode {
    let args = match expand_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(args);
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut msg = format!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                msg.push_str(&format!("\n  caused by: {s}"));
                src = s.source();
            }
            eprintln!("{msg}");
            exit_code(&e)
        }
    }
}
