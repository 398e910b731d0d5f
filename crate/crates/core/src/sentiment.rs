//! LSTM sentiment classifier trained on the (selected) source domain, and
//! the representations transferred from it to target documents.

use serde::{Deserialize, Serialize};

use crate::corpus::{Cleaner, Polarity, UserRecord};
use crate::domainsel::{LabeledDomainSet, LabeledItem};
use crate::embed::{DocMatrix, DocVector, EmbeddingTable};
use crate::error::{Error, Result};
use crate::gender::{build_mlp, MlpConfig};
use crate::nncore::{
    fit, output_loss, rng_from_seed, Activation, Checkpoint, Control, Layer, LossKind, LstmLayer, Mlp,
    Parameterized, Rng, SequenceClassifier, TrainConfig, Trainable,
};

pub const CHECKPOINT_KIND: &str = "sentiment";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentConfig {
    pub hidden: usize,
    pub dropout: f64,
}

impl Default for SentimentConfig {
    fn default() -> Self {
        SentimentConfig {
            hidden: 64,
            dropout: 0.4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerSource {
    FrozenLstm,
    FrozenDense,
    FinetunedLstm,
}

impl std::str::FromStr for LayerSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frozen_lstm" => Ok(LayerSource::FrozenLstm),
            "frozen_dense" => Ok(LayerSource::FrozenDense),
            "finetuned_lstm" => Ok(LayerSource::FinetunedLstm),
            other => Err(Error::Config(format!(
                "unknown layer `{other}` (expected frozen_lstm|frozen_dense|finetuned_lstm)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentRepresentation {
    pub values: Vec<f64>,
    pub layer_source: LayerSource,
}

/// Document polarity probability and the fraction of posts predicted positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarityFeatures {
    pub doc_polarity: f64,
    pub positive_rate: f64,
    /// Number of posts that entered the rate.
    pub posts: usize,
}

impl PolarityFeatures {
    pub fn to_vec(self) -> Vec<f64> {
        vec![self.doc_polarity, self.positive_rate]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub heldout_loss: f64,
    pub heldout_accuracy: f64,
}

/// LSTM layer, dropout on its final state, and a one-unit sigmoid head.
#[derive(Debug, Clone, PartialEq)]
pub struct SentimentModel {
    pub network: SequenceClassifier,
    /// Matrix width `r` the model was trained with.
    pub width: usize,
    pub seed: u64,
    trained: bool,
}

#[derive(Debug, Clone)]
pub struct SeqSample {
    pub matrix: DocMatrix,
    pub target: f64,
}

impl Trainable for SequenceClassifier {
    type Sample = SeqSample;

    fn accumulate(&self, s: &SeqSample, rng: &mut Rng, grads: &mut [Vec<f64>], scale: f64) -> Result<(f64, bool)> {
        let (loss, trace) = self.loss_and_grad(
            s.matrix.active(),
            s.matrix.effective_length(),
            s.target,
            Some(rng),
            grads,
            scale,
        )?;
        Ok((loss / scale, (trace.probability > 0.5) == (s.target > 0.5)))
    }
}

fn heldout_split(data: &LabeledDomainSet, seed: u64) -> (Vec<usize>, Vec<usize>) {
    use rand::seq::SliceRandom;
    let mut rng = rng_from_seed(seed);
    rng.set_stream(2);
    let mut train = Vec::new();
    let mut held = Vec::new();
    for pol in [Polarity::Negative, Polarity::Positive] {
        let mut idx: Vec<usize> = (0..data.len()).filter(|&i| data.items[i].polarity == pol).collect();
        idx.shuffle(&mut rng);
        let n_held = ((idx.len() as f64) * 0.1).round().max(1.0) as usize;
        held.extend_from_slice(&idx[..n_held]);
        train.extend_from_slice(&idx[n_held..]);
    }
    train.sort_unstable();
    held.sort_unstable();
    (train, held)
}

fn sample_of(item: &LabeledItem) -> SeqSample {
    SeqSample {
        matrix: item.matrix.clone(),
        target: item.polarity.target(),
    }
}

impl SentimentModel {
    /// Untrained model with initialized parameters.
    pub fn new(dim: usize, width: usize, config: &SentimentConfig, seed: u64) -> Result<Self> {
        if config.hidden == 0 {
            return Err(Error::Config("LSTM hidden size must be ≥ 1".into()));
        }
        let mut rng = rng_from_seed(seed);
        Ok(SentimentModel {
            network: SequenceClassifier::new(dim, config.hidden, config.dropout, &mut rng)?,
            width,
            seed,
            trained: false,
        })
    }

    /// Wraps explicit parameters as a usable (trained) model.
    pub fn from_network(network: SequenceClassifier, width: usize, seed: u64) -> Self {
        SentimentModel {
            network,
            width,
            seed,
            trained: true,
        }
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn hidden(&self) -> usize {
        self.network.lstm.hidden
    }

    pub fn dim(&self) -> usize {
        self.network.lstm.input_dim
    }

    /// Trains on `data` with binary cross-entropy, holding out a stratified
    /// 10% split for the per-epoch curve.
    pub fn train(
        data: &LabeledDomainSet,
        config: &SentimentConfig,
        train: &TrainConfig,
    ) -> Result<(SentimentModel, Vec<EpochRecord>)> {
        train.validate()?;
        data.validate_shape()?;
        for pol in [Polarity::Negative, Polarity::Positive] {
            if data.count(pol) < 2 {
                return Err(Error::Data(format!(
                    "sentiment training needs ≥ 2 {} items, found {}",
                    pol.as_str(),
                    data.count(pol)
                )));
            }
        }
        let (dim, width) = data.shape().unwrap();
        let mut model = SentimentModel::new(dim, width, config, train.seed)?;
        let (train_idx, held_idx) = heldout_split(data, train.seed);
        let samples: Vec<SeqSample> = train_idx.iter().map(|&i| sample_of(&data.items[i])).collect();
        let held: Vec<SeqSample> = held_idx.iter().map(|&i| sample_of(&data.items[i])).collect();

        let mut curve = Vec::new();
        let mut best: Option<(f64, SequenceClassifier)> = None;
        let mut stale = 0usize;
        fit(&mut model.network, &samples, train, |net, stats| {
            let (loss, acc) = evaluate(net, &held)?;
            curve.push(EpochRecord {
                epoch: stats.epoch,
                train_loss: stats.loss,
                train_accuracy: stats.accuracy,
                heldout_loss: loss,
                heldout_accuracy: acc,
            });
            log::debug!(
                "sentiment epoch {}: loss {:.4} held-out acc {:.4}",
                stats.epoch,
                stats.loss,
                acc
            );
            if let Some(patience) = train.patience {
                if best.as_ref().is_none_or(|(b, _)| loss < *b) {
                    best = Some((loss, net.clone()));
                    stale = 0;
                } else {
                    stale += 1;
                    if stale >= patience {
                        return Ok(Control::Stop);
                    }
                }
            }
            Ok(Control::Continue)
        })?;
        if let Some((_, net)) = best {
            model.network = net;
        }
        model.trained = true;
        Ok((model, curve))
    }

    fn check_dim(&self, doc: &DocMatrix) -> Result<()> {
        if doc.dim() != self.dim() {
            return Err(Error::Shape(format!(
                "document `{}` has dimension {}, model expects {}",
                doc.id,
                doc.dim(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Probability of positive polarity, inference mode.
    pub fn predict_polarity(&self, doc: &DocMatrix) -> Result<f64> {
        self.check_dim(doc)?;
        Ok(self
            .network
            .forward(doc.active(), doc.effective_length(), None)?
            .probability)
    }

    /// Frozen middle-layer activation: the LSTM's final hidden state or the
    /// head's pre-sigmoid output.
    pub fn extract_representation(&self, doc: &DocMatrix, layer: LayerSource) -> Result<SentimentRepresentation> {
        if !self.trained {
            return Err(Error::Data("cannot extract from an untrained sentiment model".into()));
        }
        self.check_dim(doc)?;
        let trace = self.network.forward(doc.active(), doc.effective_length(), None)?;
        let values = match layer {
            LayerSource::FrozenLstm => trace.lstm.final_hidden().to_vec(),
            LayerSource::FrozenDense => trace.logit.clone(),
            LayerSource::FinetunedLstm => {
                return Err(Error::Config(
                    "finetuned representations come from the composite model, not frozen extraction".into(),
                ))
            }
        };
        Ok(SentimentRepresentation {
            values,
            layer_source: layer,
        })
    }

    /// Document polarity of the user's virtual document plus the rate of
    /// posts predicted positive (probability > 0.5). Posts without an
    /// in-vocabulary token after cleaning are left out of the rate.
    pub fn polarity_features(
        &self,
        user: &UserRecord,
        cleaner: &Cleaner,
        table: &EmbeddingTable,
        width: usize,
    ) -> Result<PolarityFeatures> {
        let mut positive = 0usize;
        let mut posts = 0usize;
        for post in &user.posts {
            let tokens = cleaner.clean_tokens(post);
            let Ok(m) = table.doc_matrix(&user.user_id, &tokens, width) else {
                continue;
            };
            posts += 1;
            if self.predict_polarity(&m)? > 0.5 {
                positive += 1;
            }
        }
        if posts == 0 {
            return Err(Error::AllOov {
                id: user.user_id.clone(),
            });
        }
        let doc = cleaner.build_virtual_document(user)?;
        let m = table.doc_matrix(&user.user_id, &doc.tokens, width)?;
        Ok(PolarityFeatures {
            doc_polarity: self.predict_polarity(&m)?,
            positive_rate: positive as f64 / posts as f64,
            posts,
        })
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            kind: CHECKPOINT_KIND.into(),
            seed: self.seed,
            layers: vec![
                Layer::Lstm(self.network.lstm.clone()),
                Layer::Dropout(self.network.dropout),
                Layer::Dense(self.network.head.clone()),
            ],
            meta: serde_json::json!({ "width": self.width }),
        }
    }

    pub fn from_checkpoint(c: Checkpoint) -> Result<Self> {
        if c.kind != CHECKPOINT_KIND {
            return Err(Error::Checkpoint(format!(
                "expected a `{CHECKPOINT_KIND}` checkpoint, found `{}`",
                c.kind
            )));
        }
        let width = c.meta["width"]
            .as_u64()
            .ok_or_else(|| Error::Checkpoint("missing `width` in metadata".into()))? as usize;
        match <[Layer; 3]>::try_from(c.layers) {
            Ok([Layer::Lstm(lstm), Layer::Dropout(dropout), Layer::Dense(head)])
                if head.inputs == lstm.hidden && head.outputs == 1 =>
            {
                Ok(SentimentModel::from_network(
                    SequenceClassifier { lstm, dropout, head },
                    width,
                    c.seed,
                ))
            }
            _ => Err(Error::Checkpoint("expected lstm, dropout, dense(H→1) layers".into())),
        }
    }
}

/// Mean binary cross-entropy and accuracy in inference mode.
fn evaluate(net: &SequenceClassifier, samples: &[SeqSample]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Ok((0.0, 0.0));
    }
    let mut loss = 0.0;
    let mut correct = 0usize;
    for s in samples {
        let t = net.forward(s.matrix.active(), s.matrix.effective_length(), None)?;
        loss += output_loss(
            Activation::Sigmoid,
            LossKind::BinaryCrossEntropy,
            &t.logit,
            &[t.probability],
            &[s.target],
        )
        .0;
        correct += ((t.probability > 0.5) == (s.target > 0.5)) as usize;
    }
    let n = samples.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Multi-input gender model: the document vector is concatenated with the
/// LSTM's final hidden state (computed from the document matrix) and fed to
/// the MLP. The LSTM stays trainable; the sentiment head is discarded.
#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneModel {
    pub mlp: Mlp,
    pub lstm: LstmLayer,
    pub doc_dim: usize,
    /// Learning-rate multiplier for the LSTM groups; 0 freezes them.
    pub lstm_lr_scale: f64,
}

#[derive(Debug, Clone)]
pub struct FinetuneSample {
    pub vector: Vec<f64>,
    pub matrix: DocMatrix,
    pub label: usize,
}

pub fn build_finetune_model(sentiment: &SentimentModel, mlp: &MlpConfig, doc_dim: usize, seed: u64) -> Result<FinetuneModel> {
    if !sentiment.is_trained() {
        return Err(Error::Data("finetuning needs a trained sentiment model".into()));
    }
    Ok(FinetuneModel {
        mlp: build_mlp(doc_dim + sentiment.hidden(), mlp, seed)?,
        lstm: sentiment.network.lstm.clone(),
        doc_dim,
        lstm_lr_scale: 1.0,
    })
}

impl FinetuneModel {
    fn input(&self, vector: &[f64], matrix: &DocMatrix) -> Result<(Vec<f64>, crate::nncore::LstmTrace)> {
        if vector.len() != self.doc_dim {
            return Err(Error::Shape(format!(
                "document vector has length {}, expected {}",
                vector.len(),
                self.doc_dim
            )));
        }
        let trace = self.lstm.forward(matrix.active(), matrix.effective_length())?;
        let mut input = vector.to_vec();
        input.extend_from_slice(trace.final_hidden());
        Ok((input, trace))
    }

    pub fn predict(&self, vector: &[f64], matrix: &DocMatrix) -> Result<Vec<f64>> {
        let (input, _) = self.input(vector, matrix)?;
        self.mlp.predict(&input)
    }

    /// Current LSTM hidden state for a document.
    pub fn representation(&self, matrix: &DocMatrix) -> Result<SentimentRepresentation> {
        let trace = self.lstm.forward(matrix.active(), matrix.effective_length())?;
        Ok(SentimentRepresentation {
            values: trace.final_hidden().to_vec(),
            layer_source: LayerSource::FinetunedLstm,
        })
    }

    fn mlp_groups(&self) -> usize {
        self.mlp.params().len()
    }
}

impl Parameterized for FinetuneModel {
    fn params(&self) -> Vec<&[f64]> {
        let mut p = self.mlp.params();
        p.extend(self.lstm.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut p = self.mlp.params_mut();
        p.extend(self.lstm.params_mut());
        p
    }
}

impl Trainable for FinetuneModel {
    type Sample = FinetuneSample;

    fn accumulate(&self, s: &FinetuneSample, rng: &mut Rng, grads: &mut [Vec<f64>], scale: f64) -> Result<(f64, bool)> {
        let (input, trace) = self.input(&s.vector, &s.matrix)?;
        let mut target = vec![0.0; self.mlp.output_dim()];
        *target
            .get_mut(s.label)
            .ok_or_else(|| Error::Shape(format!("label {} out of range", s.label)))? = 1.0;
        let split = self.mlp_groups();
        let (mlp_grads, lstm_grads) = grads.split_at_mut(split);
        let (loss, mlp_trace, dinput) =
            self.mlp
                .loss_and_grad(&input, &target, LossKind::CategoricalCrossEntropy, Some(rng), mlp_grads, scale)?;
        self.lstm.backward(
            s.matrix.active(),
            &trace,
            &dinput[self.doc_dim..],
            lstm_grads,
            scale,
        );
        Ok((loss / scale, crate::gender::argmax(&mlp_trace.output) == s.label))
    }

    fn lr_scales(&self) -> Vec<f64> {
        let mut s = vec![1.0; self.mlp_groups()];
        s.extend([self.lstm_lr_scale; 3]);
        s
    }
}

/// Builds the labeled source set from documents, dropping all-OOV ones.
pub fn labeled_items(
    docs: impl IntoIterator<Item = (String, Vec<String>, Polarity)>,
    table: &EmbeddingTable,
    width: usize,
    provenance: crate::domainsel::Provenance,
) -> LabeledDomainSet {
    let mut items = Vec::new();
    for (id, tokens, polarity) in docs {
        match (table.doc_matrix(&id, &tokens, width), table.doc_vector(&id, &tokens)) {
            (Ok(matrix), Ok(vector)) => items.push(LabeledItem {
                id,
                matrix,
                vector,
                polarity,
                provenance,
            }),
            _ => log::warn!("dropping `{id}`: no in-vocabulary tokens"),
        }
    }
    LabeledDomainSet { items }
}

/// Document vectors paired with matrices for a target user's virtual document.
pub fn target_inputs(id: &str, tokens: &[String], table: &EmbeddingTable, width: usize) -> Result<(DocVector, DocMatrix)> {
    Ok((table.doc_vector(id, tokens)?, table.doc_matrix(id, tokens, width)?))
}
