use std::collections::{HashMap, HashSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::folds::{stratified_kfold, FoldPlan};
use super::report::{EvalReport, FoldResult};
use crate::corpus::{
    load_manual_samples, load_source_reviews, load_stopwords, load_user_records, Cleaner, Gender, ManualSample,
    SourceReview, UserRecord,
};
use crate::domainsel::{augment_with_manual, select_source, LabeledDomainSet, Provenance, DEFAULT_THRESHOLD};
use crate::embed::{gender_keywords, train_skipgram, DocMatrix, DocVector, EmbeddingTable, SkipGramConfig, TfIdf};
use crate::error::{Error, Result};
use crate::gender::{argmax, concat_features, train_gender, Extra, FeatureVector, MlpConfig};
use crate::nncore::{fit, Control, TrainConfig};
use crate::resample::{plan_smote, smote, synthesize_matrices, synthesize_vectors, ResampleConfig};
use crate::sentiment::{
    build_finetune_model, labeled_items, FinetuneSample, LayerSource, SentimentConfig, SentimentModel,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    AvgVector,
    Tfidf,
    KeywordTfidf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SentimentMode {
    None,
    PolarityFeatures,
    FrozenLstm,
    FrozenDense,
    FinetunedLstm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceMode {
    Entire,
    HighSimilarity,
    EntirePlusManual,
    HighSimilarityPlusManual,
}

macro_rules! parse_enum {
    ($t:ty, $what:literal, $($s:literal => $v:expr),+ $(,)?) => {
        impl std::str::FromStr for $t {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($s => Ok($v),)+
                    other => Err(Error::Config(format!(
                        concat!("unknown ", $what, " `{}` (expected ", $($s, "|",)+ ")"),
                        other
                    ))),
                }
            }
        }
    };
}

parse_enum!(Representation, "representation",
    "avg_vector" => Representation::AvgVector,
    "tfidf" => Representation::Tfidf,
    "keyword_tfidf" => Representation::KeywordTfidf);
parse_enum!(SentimentMode, "sentiment mode",
    "none" => SentimentMode::None,
    "polarity_features" => SentimentMode::PolarityFeatures,
    "frozen_lstm" => SentimentMode::FrozenLstm,
    "frozen_dense" => SentimentMode::FrozenDense,
    "finetuned_lstm" => SentimentMode::FinetunedLstm);
parse_enum!(SourceMode, "source mode",
    "entire" => SourceMode::Entire,
    "high_similarity" => SourceMode::HighSimilarity,
    "entire_plus_manual" => SourceMode::EntirePlusManual,
    "high_similarity_plus_manual" => SourceMode::HighSimilarityPlusManual);

impl SourceMode {
    pub const ALL: [SourceMode; 4] = [
        SourceMode::Entire,
        SourceMode::HighSimilarity,
        SourceMode::EntirePlusManual,
        SourceMode::HighSimilarityPlusManual,
    ];

    fn selects(self) -> bool {
        matches!(self, SourceMode::HighSimilarity | SourceMode::HighSimilarityPlusManual)
    }

    fn uses_manual(self) -> bool {
        matches!(self, SourceMode::EntirePlusManual | SourceMode::HighSimilarityPlusManual)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub representation: Representation,
    pub sentiment_mode: SentimentMode,
    pub source_mode: SourceMode,
    /// Similarity threshold for high-similarity source selection.
    pub z: f64,
    /// Document matrix width `r`.
    pub width: usize,
    pub folds: usize,
    /// Epoch grid; accuracy is reported after each listed epoch.
    pub epochs: Vec<usize>,
    pub seed: u64,
    pub smote: bool,
    pub resample: ResampleConfig,
    pub embedding: SkipGramConfig,
    pub sentiment: SentimentConfig,
    pub sentiment_train: TrainConfig,
    pub classifier: MlpConfig,
    /// Gender training settings; `epochs` and `seed` are taken from the grid and the run seed.
    pub gender_train: TrainConfig,
    pub keyword_top_n: usize,
    /// LSTM learning-rate multiplier while finetuning.
    pub finetune_lstm_lr_scale: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            representation: Representation::AvgVector,
            sentiment_mode: SentimentMode::None,
            source_mode: SourceMode::Entire,
            z: DEFAULT_THRESHOLD,
            width: 500,
            folds: 5,
            epochs: vec![100],
            seed: 1,
            smote: false,
            resample: ResampleConfig::default(),
            embedding: SkipGramConfig::default(),
            sentiment: SentimentConfig::default(),
            sentiment_train: TrainConfig {
                epochs: 30,
                ..TrainConfig::default()
            },
            classifier: MlpConfig::default(),
            gender_train: TrainConfig::default(),
            keyword_top_n: 500,
            finetune_lstm_lr_scale: 1.0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs.is_empty() || self.epochs.contains(&0) {
            return Err(Error::Config("epoch grid must be non-empty with entries ≥ 1".into()));
        }
        if self.width == 0 {
            return Err(Error::Config("matrix width must be ≥ 1".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config(format!("need at least 2 folds, got {}", self.folds)));
        }
        if self.sentiment_mode != SentimentMode::None && self.source_mode.selects() && !(self.z > 0.0 && self.z < 1.0) {
            return Err(Error::Config(format!("similarity threshold must lie in (0, 1), got {}", self.z)));
        }
        if !(self.finetune_lstm_lr_scale >= 0.0) {
            return Err(Error::Config("finetune learning-rate scale must be ≥ 0".into()));
        }
        if self.keyword_top_n == 0 {
            return Err(Error::Config("keyword count must be ≥ 1".into()));
        }
        self.sentiment_train.validate()?;
        self.gender_train.validate()
    }

    /// Epoch grid in increasing order without duplicates.
    pub fn epoch_grid(&self) -> Vec<usize> {
        let mut e = self.epochs.clone();
        e.sort_unstable();
        e.dedup();
        e
    }

    /// Short hex digest of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Derives an independent seed for one pipeline stage.
pub fn derive_seed(seed: u64, stage: &str, index: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stage.bytes().chain(index.to_le_bytes()).chain(seed.to_le_bytes()) {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    // splitmix64 finalizer
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

#[derive(Debug, Clone, Default)]
pub struct DataPaths {
    pub users: PathBuf,
    pub source: Option<PathBuf>,
    pub manual: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentData {
    pub users: Vec<UserRecord>,
    pub reviews: Vec<SourceReview>,
    pub manual: Vec<ManualSample>,
    pub stopwords: HashSet<String>,
    /// Pretrained embeddings; trained from the corpus when absent.
    pub embeddings: Option<EmbeddingTable>,
}

impl ExperimentData {
    pub fn load(paths: &DataPaths) -> Result<Self> {
        Ok(ExperimentData {
            users: load_user_records(&paths.users)?,
            reviews: match &paths.source {
                Some(p) => load_source_reviews(p)?,
                None => Vec::new(),
            },
            manual: match &paths.manual {
                Some(p) => load_manual_samples(p)?,
                None => Vec::new(),
            },
            stopwords: match &paths.stopwords {
                Some(p) => load_stopwords(p)?,
                None => HashSet::new(),
            },
            embeddings: match &paths.embeddings {
                Some(p) => Some(EmbeddingTable::load(p)?),
                None => None,
            },
        })
    }
}

/// Every user that survives cleaning and has an in-vocabulary token.
struct Target {
    id: String,
    gender: Gender,
    record: usize,
    tokens: Vec<String>,
    vector: DocVector,
    matrix: DocMatrix,
}

/// Corpus-wide state shared by all folds.
pub struct Prepared {
    cleaner: Cleaner,
    table: EmbeddingTable,
    targets: Vec<Target>,
    source: LabeledDomainSet,
    notes: Vec<String>,
}

impl Prepared {
    pub fn table(&self) -> &EmbeddingTable {
        &self.table
    }

    pub fn user_ids(&self) -> Vec<(String, Gender)> {
        self.targets.iter().map(|t| (t.id.clone(), t.gender)).collect()
    }
}

/// Cleans the corpus, trains (or adopts) embeddings and builds each user's
/// vector and matrix. Users whose document is empty or all out of
/// vocabulary are dropped.
pub fn prepare(config: &ExperimentConfig, data: &ExperimentData) -> Result<Prepared> {
    let cleaner = Cleaner::new(data.stopwords.clone());
    let mut notes = Vec::new();
    let table = match &data.embeddings {
        Some(t) => t.clone(),
        None => {
            let mut sentences: Vec<Vec<String>> = Vec::new();
            for u in &data.users {
                sentences.extend(u.posts.iter().map(|p| cleaner.clean_tokens(p)));
            }
            sentences.extend(data.reviews.iter().map(|r| cleaner.clean_tokens(&r.tokens)));
            sentences.retain(|s| !s.is_empty());
            let cfg = SkipGramConfig {
                seed: derive_seed(config.seed, "embed", 0),
                ..config.embedding.clone()
            };
            train_skipgram(&sentences, &cfg).map_err(|e| e.in_stage("embed", None))?
        }
    };
    let width = config.width;
    let mut targets = Vec::with_capacity(data.users.len());
    let mut dropped = 0usize;
    for (record, user) in data.users.iter().enumerate() {
        let Ok(doc) = cleaner.build_virtual_document(user) else {
            dropped += 1;
            continue;
        };
        match (
            table.doc_vector(&user.user_id, &doc.tokens),
            table.doc_matrix(&user.user_id, &doc.tokens, width),
        ) {
            (Ok(vector), Ok(matrix)) => targets.push(Target {
                id: user.user_id.clone(),
                gender: user.gender,
                record,
                tokens: doc.tokens,
                vector,
                matrix,
            }),
            _ => dropped += 1,
        }
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} users with no usable tokens");
        notes.push(format!("dropped {dropped} users with no usable tokens"));
    }
    // built regardless of the sentiment mode so one preparation serves a whole grid
    let source = labeled_items(
        data.reviews
            .iter()
            .map(|r| (r.review_id.clone(), cleaner.clean_tokens(&r.tokens), r.polarity)),
        &table,
        width,
        Provenance::Source,
    );
    Ok(Prepared {
        cleaner,
        table,
        targets,
        source,
        notes,
    })
}

/// Training partition after optional oversampling: ids (synthetic ones
/// named `<base id>#smote<n>`), feature vectors and class labels.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub ids: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub synthetic: usize,
}

/// Oversamples a training partition; the test partition never enters.
pub fn oversample_training(
    ids: &[String],
    features: &[Vec<f64>],
    labels: &[usize],
    config: &ResampleConfig,
) -> Result<TrainingSet> {
    let out = smote(features, labels, config)?;
    let mut all_ids = ids.to_vec();
    all_ids.extend(
        out.plan
            .synthetic
            .iter()
            .enumerate()
            .map(|(n, s)| format!("{}#smote{n}", ids[s.x_old])),
    );
    Ok(TrainingSet {
        synthetic: out.samples.len() - out.original_count,
        ids: all_ids,
        features: out.samples,
        labels: out.labels,
    })
}

fn accuracy(correct: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        correct as f64 / total as f64
    }
}

struct FoldContext<'a> {
    config: &'a ExperimentConfig,
    data: &'a ExperimentData,
    prep: &'a Prepared,
    fold: usize,
    train: Vec<usize>,
    test: Vec<usize>,
}

impl FoldContext<'_> {
    fn stage<T>(&self, stage: &'static str, r: Result<T>) -> Result<T> {
        r.map_err(|e| e.in_stage(stage, Some(self.fold + 1)))
    }

    /// Document representation for every target user.
    fn documents(&self, tfidf: Option<&TfIdf>) -> Result<Vec<Vec<f64>>> {
        let targets = &self.prep.targets;
        Ok(match self.config.representation {
            Representation::AvgVector => targets.iter().map(|t| t.vector.values.clone()).collect(),
            Representation::Tfidf => {
                let model = tfidf.expect("fitted on the full corpus");
                let n = model.vocab().len();
                targets.iter().map(|t| model.transform(&t.tokens).to_dense(n)).collect()
            }
            Representation::KeywordTfidf => {
                let model = tfidf.expect("fitted on the full corpus");
                let docs: Vec<crate::corpus::VirtualDocument> = self
                    .train
                    .iter()
                    .map(|&i| crate::corpus::VirtualDocument {
                        user_id: targets[i].id.clone(),
                        gender: targets[i].gender,
                        token_count: targets[i].tokens.len(),
                        tokens: targets[i].tokens.clone(),
                    })
                    .collect();
                let keywords = self.stage("keywords", gender_keywords(&docs, self.config.keyword_top_n))?;
                let restricted = model.restrict(&keywords);
                let n = restricted.vocab().len();
                if n == 0 {
                    return self.stage("keywords", Err(Error::Data("no gender keywords survive".into())));
                }
                targets.iter().map(|t| restricted.transform(&t.tokens).to_dense(n)).collect()
            }
        })
    }

    fn evaluate_mlp(&self, docs: &[Vec<f64>], extras: Option<&[Vec<f64>]>, result: &mut FoldResult) -> Result<()> {
        let targets = &self.prep.targets;
        let features: Vec<Vec<f64>> = (0..targets.len())
            .map(|i| {
                let mut f = docs[i].clone();
                if let Some(e) = extras {
                    f.extend_from_slice(&e[i]);
                }
                f
            })
            .collect();
        let ids: Vec<String> = self.train.iter().map(|&i| targets[i].id.clone()).collect();
        let train_x: Vec<Vec<f64>> = self.train.iter().map(|&i| features[i].clone()).collect();
        let train_y: Vec<usize> = self.train.iter().map(|&i| targets[i].gender.index()).collect();
        let set = if self.config.smote {
            let cfg = ResampleConfig {
                seed: derive_seed(self.config.seed, "smote", self.fold as u64),
                ..self.config.resample.clone()
            };
            self.stage("smote", oversample_training(&ids, &train_x, &train_y, &cfg))?
        } else {
            TrainingSet {
                ids,
                features: train_x,
                labels: train_y,
                synthetic: 0,
            }
        };
        self.check_disjoint(&set.ids)?;
        result.train_size = set.ids.len();
        result.synthetic = set.synthetic;

        let grid = self.config.epoch_grid();
        let fv: Vec<FeatureVector> = set
            .features
            .iter()
            .map(|v| concat_features(v, Extra::None))
            .collect::<Result<_>>()?;
        let labels: Vec<Gender> = set.labels.iter().map(|&l| Gender::from_index(l).unwrap()).collect();
        let train_cfg = self.gender_train_config(&grid);
        let test: Vec<(&Vec<f64>, usize)> = self
            .test
            .iter()
            .map(|&i| (&features[i], targets[i].gender.index()))
            .collect();
        let r = train_gender(&fv, &labels, &self.config.classifier, &train_cfg, |model, stats| {
            if grid.binary_search(&stats.epoch).is_ok() {
                let mut correct = 0;
                for (x, y) in &test {
                    correct += (model.predict(x)?.label.index() == *y) as usize;
                }
                result.accuracy.push(accuracy(correct, test.len()));
            }
            Ok(Control::Continue)
        });
        self.stage("gender-train", r)?;
        Ok(())
    }

    fn gender_train_config(&self, grid: &[usize]) -> TrainConfig {
        TrainConfig {
            epochs: *grid.last().unwrap(),
            seed: derive_seed(self.config.seed, "gender", self.fold as u64),
            patience: None,
            ..self.config.gender_train.clone()
        }
    }

    fn check_disjoint(&self, train_ids: &[String]) -> Result<()> {
        let test: HashSet<&str> = self.test.iter().map(|&i| self.prep.targets[i].id.as_str()).collect();
        if let Some(id) = train_ids.iter().find(|id| test.contains(id.as_str())) {
            return self.stage(
                "split",
                Err(Error::Data(format!("training sample `{id}` belongs to the test fold"))),
            );
        }
        Ok(())
    }

    fn evaluate_finetune(&self, docs: &[Vec<f64>], sentiment: &SentimentModel, result: &mut FoldResult) -> Result<()> {
        let targets = &self.prep.targets;
        let grid = self.config.epoch_grid();
        let train_cfg = self.gender_train_config(&grid);
        let mut model = self.stage(
            "finetune",
            build_finetune_model(sentiment, &self.config.classifier, docs[0].len(), train_cfg.seed),
        )?;
        model.lstm_lr_scale = self.config.finetune_lstm_lr_scale;

        let mut ids: Vec<String> = self.train.iter().map(|&i| targets[i].id.clone()).collect();
        let mut vectors: Vec<Vec<f64>> = self.train.iter().map(|&i| docs[i].clone()).collect();
        let mut matrices: Vec<DocMatrix> = self.train.iter().map(|&i| targets[i].matrix.clone()).collect();
        let mut labels: Vec<usize> = self.train.iter().map(|&i| targets[i].gender.index()).collect();
        if self.config.smote {
            let cfg = ResampleConfig {
                seed: derive_seed(self.config.seed, "smote", self.fold as u64),
                ..self.config.resample.clone()
            };
            // one plan, applied to both inputs so the pairs stay aligned
            let plan = self.stage(
                "smote",
                plan_smote(&labels, &cfg, |i, j| {
                    vectors[i].iter().zip(&vectors[j]).map(|(a, b)| (a - b) * (a - b)).sum()
                }),
            )?;
            let sv = synthesize_vectors(&vectors, &plan);
            let sm = self.stage("smote", synthesize_matrices(&matrices, &plan))?;
            for (n, s) in plan.synthetic.iter().enumerate() {
                ids.push(format!("{}#smote{n}", ids[s.x_old]));
                labels.push(plan.minority_label);
            }
            result.synthetic = sv.len();
            vectors.extend(sv);
            matrices.extend(sm);
        }
        self.check_disjoint(&ids)?;
        result.train_size = ids.len();

        let samples: Vec<FinetuneSample> = vectors
            .into_iter()
            .zip(matrices)
            .zip(labels)
            .map(|((vector, matrix), label)| FinetuneSample { vector, matrix, label })
            .collect();
        let r = fit(&mut model, &samples, &train_cfg, |m, stats| {
            if grid.binary_search(&stats.epoch).is_ok() {
                let mut correct = 0;
                for &i in &self.test {
                    let p = m.predict(&docs[i], &targets[i].matrix)?;
                    correct += (argmax(&p) == targets[i].gender.index()) as usize;
                }
                result.accuracy.push(accuracy(correct, self.test.len()));
            }
            Ok(Control::Continue)
        });
        self.stage("finetune", r)?;
        Ok(())
    }

    fn sentiment_set(&self, base: &LabeledDomainSet) -> Result<LabeledDomainSet> {
        if !self.config.source_mode.uses_manual() {
            return Ok(base.clone());
        }
        let train_users: HashSet<&str> = self.train.iter().map(|&i| self.prep.targets[i].id.as_str()).collect();
        let cleaner = &self.prep.cleaner;
        let manual = labeled_items(
            self.data
                .manual
                .iter()
                .filter(|m| train_users.contains(m.user_id.as_str()))
                .map(|m| (m.id.clone(), cleaner.clean_tokens(&m.tokens), m.polarity)),
            &self.prep.table,
            self.config.width,
            Provenance::ManualTarget,
        );
        self.stage("manual", augment_with_manual(base, &manual))
    }
}

/// Runs the configured pipeline under k-fold cross-validation.
pub fn run_experiment(config: &ExperimentConfig, data: &ExperimentData) -> Result<EvalReport> {
    config.validate()?;
    let prep = prepare(config, data)?;
    run_prepared(config, data, &prep)
}

/// Same as [`run_experiment`] with corpus preparation already done.
pub fn run_prepared(config: &ExperimentConfig, data: &ExperimentData, prep: &Prepared) -> Result<EvalReport> {
    config.validate()?;
    let mut notes = prep.notes.clone();
    if config.sentiment_mode == SentimentMode::None && config.source_mode != SourceMode::Entire {
        let msg = format!(
            "source mode {:?} ignored without a sentiment mode",
            config.source_mode
        );
        log::info!("{msg}");
        notes.push(msg);
    }
    let plan: FoldPlan = stratified_kfold(&prep.user_ids(), config.folds, derive_seed(config.seed, "folds", 0))
        .map_err(|e| e.in_stage("folds", None))?;
    let position: HashMap<&str, usize> = prep.targets.iter().enumerate().map(|(i, t)| (t.id.as_str(), i)).collect();

    let tfidf = match config.representation {
        Representation::AvgVector => None,
        _ => {
            let docs: Vec<Vec<String>> = prep.targets.iter().map(|t| t.tokens.clone()).collect();
            Some(TfIdf::fit(&docs).map_err(|e| e.in_stage("tfidf", None))?)
        }
    };

    let uses_sentiment = config.sentiment_mode != SentimentMode::None;
    let base_source = if uses_sentiment && config.source_mode.selects() {
        let targets: Vec<DocVector> = prep.targets.iter().map(|t| t.vector.clone()).collect();
        let sel = select_source(&prep.source, &targets, config.z).map_err(|e| e.in_stage("select-source", None))?;
        notes.push(format!("kept {} of {} source items at z = {}", sel.kept, sel.total, config.z));
        sel.set
    } else {
        prep.source.clone()
    };
    let mut shared_sentiment: Option<SentimentModel> = None;

    let mut folds = Vec::with_capacity(plan.k());
    for fold in 0..plan.k() {
        let test: Vec<usize> = plan.test_users(fold).iter().map(|id| position[id.as_str()]).collect();
        let mut train: Vec<usize> = plan.train_users(fold).iter().map(|id| position[id.as_str()]).collect();
        train.sort_unstable();
        let ctx = FoldContext {
            config,
            data,
            prep,
            fold,
            train,
            test,
        };
        let mut result = FoldResult {
            fold: fold + 1,
            train_size: 0,
            test_size: ctx.test.len(),
            synthetic: 0,
            accuracy: Vec::new(),
        };
        let docs = ctx.documents(tfidf.as_ref())?;
        if !uses_sentiment {
            ctx.evaluate_mlp(&docs, None, &mut result)?;
            folds.push(result);
            continue;
        }

        let fold_model;
        let sentiment = if config.source_mode.uses_manual() {
            let set = ctx.sentiment_set(&base_source)?;
            fold_model = ctx.stage("sentiment-train", train_sentiment_model(config, &set, Some(fold)))?;
            &fold_model
        } else {
            if shared_sentiment.is_none() {
                shared_sentiment = Some(
                    train_sentiment_model(config, &base_source, None)
                        .map_err(|e| e.in_stage("sentiment-train", None))?,
                );
            }
            shared_sentiment.as_ref().unwrap()
        };

        let targets = &prep.targets;
        match config.sentiment_mode {
            SentimentMode::FinetunedLstm => ctx.evaluate_finetune(&docs, sentiment, &mut result)?,
            SentimentMode::PolarityFeatures => {
                let extras = targets
                    .iter()
                    .map(|t| {
                        sentiment
                            .polarity_features(&data.users[t.record], &prep.cleaner, &prep.table, config.width)
                            .map(|p| p.to_vec())
                    })
                    .collect::<Result<Vec<_>>>();
                let extras = ctx.stage("extract", extras)?;
                ctx.evaluate_mlp(&docs, Some(&extras), &mut result)?;
            }
            mode => {
                let layer = if mode == SentimentMode::FrozenLstm {
                    LayerSource::FrozenLstm
                } else {
                    LayerSource::FrozenDense
                };
                let extras = targets
                    .iter()
                    .map(|t| sentiment.extract_representation(&t.matrix, layer).map(|r| r.values))
                    .collect::<Result<Vec<_>>>();
                let extras = ctx.stage("extract", extras)?;
                ctx.evaluate_mlp(&docs, Some(&extras), &mut result)?;
            }
        }
        folds.push(result);
    }
    Ok(EvalReport::new(config, notes, folds))
}

fn train_sentiment_model(config: &ExperimentConfig, set: &LabeledDomainSet, fold: Option<usize>) -> Result<SentimentModel> {
    let train = TrainConfig {
        seed: derive_seed(config.seed, "sentiment", fold.map_or(0, |f| f as u64 + 1)),
        ..config.sentiment_train.clone()
    };
    let (model, curve) = SentimentModel::train(set, &config.sentiment, &train)?;
    if let Some(last) = curve.last() {
        log::info!(
            "sentiment model: {} items, held-out accuracy {:.4} after {} epochs",
            set.len(),
            last.heldout_accuracy,
            last.epoch
        );
    }
    Ok(model)
}

/// The named experiment grid: baselines, polarity features, every source
/// mode under each extraction layer and the two tf-idf representations.
pub fn experiment_grid(base: &ExperimentConfig) -> Vec<(String, ExperimentConfig)> {
    let with = |r: Representation, s: SentimentMode, src: SourceMode| ExperimentConfig {
        representation: r,
        sentiment_mode: s,
        source_mode: src,
        ..base.clone()
    };
    let mut grid = vec![(
        "baseline".to_string(),
        with(Representation::AvgVector, SentimentMode::None, SourceMode::Entire),
    )];
    grid.push((
        "polarity_features".into(),
        with(Representation::AvgVector, SentimentMode::PolarityFeatures, SourceMode::Entire),
    ));
    for src in SourceMode::ALL {
        for (name, mode) in [
            ("frozen_lstm", SentimentMode::FrozenLstm),
            ("frozen_dense", SentimentMode::FrozenDense),
            ("finetuned_lstm", SentimentMode::FinetunedLstm),
        ] {
            let src_name = serde_json::to_value(src).unwrap();
            grid.push((
                format!("{}/{name}", src_name.as_str().unwrap()),
                with(Representation::AvgVector, mode, src),
            ));
        }
    }
    grid.push(("tfidf".into(), with(Representation::Tfidf, SentimentMode::None, SourceMode::Entire)));
    grid.push((
        "keyword_tfidf".into(),
        with(Representation::KeywordTfidf, SentimentMode::None, SourceMode::Entire),
    ));
    grid
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_sixteen_distinct_cells() {
        let g = experiment_grid(&ExperimentConfig::default());
        assert_eq!(g.len(), 16);
        let names: HashSet<&str> = g.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names.len(), 16);
        let hashes: HashSet<String> = g.iter().map(|(_, c)| c.hash()).collect();
        assert_eq!(hashes.len(), 16);
    }

    #[test]
    fn config_validation() {
        let mut c = ExperimentConfig::default();
        c.validate().unwrap();
        c.epochs.clear();
        assert!(c.validate().is_err());
        let c = ExperimentConfig {
            sentiment_mode: SentimentMode::FrozenLstm,
            source_mode: SourceMode::HighSimilarity,
            z: 1.5,
            ..ExperimentConfig::default()
        };
        assert!(c.validate().unwrap_err().is_config());
        assert_eq!("frozen_dense".parse::<SentimentMode>().unwrap(), SentimentMode::FrozenDense);
        assert!("frozen".parse::<SentimentMode>().is_err());
    }

    #[test]
    fn derived_seeds_differ_by_stage_and_index() {
        let a = derive_seed(1, "gender", 0);
        assert_ne!(a, derive_seed(1, "gender", 1));
        assert_ne!(a, derive_seed(1, "smote", 0));
        assert_ne!(a, derive_seed(2, "gender", 0));
        assert_eq!(a, derive_seed(1, "gender", 0));
    }

    #[test]
    fn oversampling_keeps_test_ids_out() {
        let ids: Vec<String> = (0..12).map(|i| format!("u{i}")).collect();
        let x: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let y: Vec<usize> = (0..12).map(|i| usize::from(i < 4)).collect();
        let set = oversample_training(&ids, &x, &y, &ResampleConfig { k: 2, ..ResampleConfig::default() }).unwrap();
        assert_eq!(set.synthetic, 4);
        assert_eq!(set.ids.len(), 16);
        assert!(set.ids[12..].iter().all(|id| id.contains("#smote")));
    }
}
