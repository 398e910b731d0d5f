//! Feature concatenation and the MLP gender classifier.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Gender;
use crate::error::{Error, Result};
use crate::nncore::{
    fit, rng_from_seed, Activation, Checkpoint, Control, DenseLayer, DropoutLayer, EpochStats, Layer, LossKind,
    Mlp, MlpLayer, Rng, TrainConfig, Trainable,
};
use crate::sentiment::{PolarityFeatures, SentimentRepresentation};

pub const CHECKPOINT_KIND: &str = "gender";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    DocVector,
    Sentiment,
    Polarity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub len: usize,
}

/// Classifier input `[doc_vector, sentiment]` with its segment layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub layout: Vec<Segment>,
}

/// What, if anything, is appended to the document representation.
#[derive(Debug, Clone, Copy)]
pub enum Extra<'a> {
    None,
    Sentiment(&'a SentimentRepresentation),
    Polarity(PolarityFeatures),
}

pub fn concat_features(v: &[f64], extra: Extra<'_>) -> Result<FeatureVector> {
    let mut values = v.to_vec();
    let mut layout = vec![Segment {
        kind: SegmentKind::DocVector,
        len: v.len(),
    }];
    let (kind, tail) = match extra {
        Extra::None => (None, Vec::new()),
        Extra::Sentiment(h) => (Some(SegmentKind::Sentiment), h.values.clone()),
        Extra::Polarity(p) => (Some(SegmentKind::Polarity), p.to_vec()),
    };
    if let Some(kind) = kind {
        layout.push(Segment { kind, len: tail.len() });
        values.extend(tail);
    }
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("feature vector".into()));
    }
    Ok(FeatureVector { values, layout })
}

/// Fails unless every feature vector shares the first one's layout.
pub fn check_uniform(features: &[FeatureVector]) -> Result<()> {
    if let Some(first) = features.first() {
        if let Some((i, bad)) = features.iter().enumerate().find(|(_, f)| f.layout != first.layout) {
            return Err(Error::Shape(format!(
                "feature vector {i} has layout {:?}, expected {:?}",
                bad.layout, first.layout
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    /// Hidden layer widths; dropout follows the first one.
    pub hidden: Vec<usize>,
    pub dropout: f64,
    /// Replace the hidden stack by a single softmax layer.
    pub logistic: bool,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: vec![50, 10],
            dropout: 0.4,
            logistic: false,
        }
    }
}

/// `dense(relu) → dropout → dense(relu) … → dense(2, softmax)`, initialized from `seed`.
pub fn build_mlp(input_dim: usize, config: &MlpConfig, seed: u64) -> Result<Mlp> {
    if input_dim == 0 {
        return Err(Error::Shape("classifier input must be non-empty".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut layers = Vec::new();
    let mut width = input_dim;
    if !config.logistic {
        for (i, &h) in config.hidden.iter().enumerate() {
            if h == 0 {
                return Err(Error::Config("hidden layer widths must be ≥ 1".into()));
            }
            layers.push(MlpLayer::Dense(DenseLayer::new(width, h, Activation::Relu, &mut rng)));
            if i == 0 {
                layers.push(MlpLayer::Dropout(DropoutLayer::new(config.dropout)?));
            }
            width = h;
        }
    }
    layers.push(MlpLayer::Dense(DenseLayer::new(width, 2, Activation::Softmax, &mut rng)));
    Mlp::new(layers)
}

pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in p.iter().enumerate() {
        if x > p[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct ClassSample {
    pub features: Vec<f64>,
    pub label: usize,
}

impl Trainable for Mlp {
    type Sample = ClassSample;

    fn accumulate(&self, s: &ClassSample, rng: &mut Rng, grads: &mut [Vec<f64>], scale: f64) -> Result<(f64, bool)> {
        let mut target = vec![0.0; self.output_dim()];
        *target
            .get_mut(s.label)
            .ok_or_else(|| Error::Shape(format!("label {} out of range", s.label)))? = 1.0;
        let (loss, trace, _) =
            self.loss_and_grad(&s.features, &target, LossKind::CategoricalCrossEntropy, Some(rng), grads, scale)?;
        Ok((loss / scale, argmax(&trace.output) == s.label))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenderModel {
    pub mlp: Mlp,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenderPrediction {
    pub label: Gender,
    pub probabilities: [f64; 2],
}

pub fn check_labels(labels: &[Gender]) -> Result<()> {
    for g in Gender::ALL {
        if !labels.contains(&g) {
            return Err(Error::Data(format!("gender training data has no `{g}` users")));
        }
    }
    Ok(())
}

/// Trains a fresh classifier with categorical cross-entropy. `on_epoch`
/// sees the model after every epoch.
pub fn train_gender(
    features: &[FeatureVector],
    labels: &[Gender],
    mlp: &MlpConfig,
    train: &TrainConfig,
    mut on_epoch: impl FnMut(&GenderModel, &EpochStats) -> Result<Control>,
) -> Result<(GenderModel, Vec<EpochStats>)> {
    train.validate()?;
    if features.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} feature vectors but {} labels",
            features.len(),
            labels.len()
        )));
    }
    check_labels(labels)?;
    check_uniform(features)?;
    let samples: Vec<ClassSample> = features
        .iter()
        .zip(labels)
        .map(|(f, g)| ClassSample {
            features: f.values.clone(),
            label: g.index(),
        })
        .collect();
    let mut model = GenderModel {
        mlp: build_mlp(features[0].values.len(), mlp, train.seed)?,
        seed: train.seed,
    };
    let seed = model.seed;
    let history = fit(&mut model.mlp, &samples, train, |m, stats| {
        // cheap wrapper so callers see a GenderModel
        let view = GenderModel { mlp: m.clone(), seed };
        on_epoch(&view, stats)
    })?;
    Ok((model, history))
}

impl GenderModel {
    pub fn input_dim(&self) -> usize {
        self.mlp.input_dim()
    }

    pub fn predict(&self, f: &[f64]) -> Result<GenderPrediction> {
        let p = self.mlp.predict(f)?;
        prediction(&p)
    }

    pub fn to_checkpoint(&self, layout: &[Segment]) -> Checkpoint {
        Checkpoint {
            kind: CHECKPOINT_KIND.into(),
            seed: self.seed,
            layers: self
                .mlp
                .layers()
                .iter()
                .map(|l| match l {
                    MlpLayer::Dense(d) => Layer::Dense(d.clone()),
                    MlpLayer::Dropout(d) => Layer::Dropout(*d),
                })
                .collect(),
            meta: serde_json::json!({ "layout": layout }),
        }
    }

    pub fn from_checkpoint(c: Checkpoint) -> Result<(Self, Vec<Segment>)> {
        if c.kind != CHECKPOINT_KIND {
            return Err(Error::Checkpoint(format!(
                "expected a `{CHECKPOINT_KIND}` checkpoint, found `{}`",
                c.kind
            )));
        }
        let layers = c
            .layers
            .into_iter()
            .map(|l| match l {
                Layer::Dense(d) => Ok(MlpLayer::Dense(d)),
                Layer::Dropout(d) => Ok(MlpLayer::Dropout(d)),
                Layer::Lstm(_) => Err(Error::Checkpoint("unexpected lstm layer in gender model".into())),
            })
            .collect::<Result<Vec<_>>>()?;
        let layout = serde_json::from_value(c.meta["layout"].clone())
            .map_err(|e| Error::Checkpoint(format!("bad layout metadata: {e}")))?;
        Ok((
            GenderModel {
                mlp: Mlp::new(layers)?,
                seed: c.seed,
            },
            layout,
        ))
    }
}

fn prediction(p: &[f64]) -> Result<GenderPrediction> {
    if p.len() != 2 {
        return Err(Error::Shape(format!("expected 2 class probabilities, got {}", p.len())));
    }
    Ok(GenderPrediction {
        label: Gender::from_index(argmax(p)).unwrap(),
        probabilities: [p[0], p[1]],
    })
}

/// Inference-mode prediction; exact ties go to the first class.
pub fn predict_gender(model: &GenderModel, f: &FeatureVector) -> Result<GenderPrediction> {
    model.predict(&f.values)
}

pub fn probabilities_to_prediction(p: &[f64]) -> Result<GenderPrediction> {
    prediction(p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub user_id: String,
    pub label: Gender,
    pub features: FeatureVector,
}

#[derive(Serialize, Deserialize)]
struct FeatureLine {
    user_id: String,
    label: Gender,
    layout: Vec<SegmentKind>,
    /// Segment lengths; optional when there is a single segment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lengths: Option<Vec<usize>>,
    values: Vec<f64>,
}

pub fn write_features(path: impl AsRef<Path>, records: &[FeatureRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for r in records {
        let line = FeatureLine {
            user_id: r.user_id.clone(),
            label: r.label,
            layout: r.features.layout.iter().map(|s| s.kind).collect(),
            lengths: Some(r.features.layout.iter().map(|s| s.len).collect()),
            values: r.features.values.clone(),
        };
        serde_json::to_writer(&mut out, &line).map_err(|e| Error::Data(e.to_string()))?;
        out.push(b'\n');
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(|e| Error::io(path, e))
}

pub fn read_features(path: impl AsRef<Path>) -> Result<Vec<FeatureRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let line_no = i + 1;
        let schema = |message: String| Error::Schema {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let line: FeatureLine = serde_json::from_str(raw).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        let lengths = match line.lengths {
            Some(l) => l,
            None if line.layout.len() == 1 => vec![line.values.len()],
            None => return Err(schema("multi-segment layout needs `lengths`".into())),
        };
        if lengths.len() != line.layout.len() || lengths.iter().sum::<usize>() != line.values.len() {
            return Err(schema("layout lengths do not add up to the value count".into()));
        }
        records.push(FeatureRecord {
            user_id: line.user_id,
            label: line.label,
            features: FeatureVector {
                values: line.values,
                layout: line
                    .layout
                    .into_iter()
                    .zip(lengths)
                    .map(|(kind, len)| Segment { kind, len })
                    .collect(),
            },
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::Parameterized;
    use crate::sentiment::LayerSource;
    use rand::Rng as _;

    fn rep(n: usize) -> SentimentRepresentation {
        SentimentRepresentation {
            values: vec![0.1; n],
            layer_source: LayerSource::FrozenLstm,
        }
    }

    #[test]
    fn concatenation_lengths() {
        let v = vec![0.5; 100];
        let f = concat_features(&v, Extra::Sentiment(&rep(64))).unwrap();
        assert_eq!(f.values.len(), 164);
        assert_eq!(f.layout.iter().map(|s| s.len).sum::<usize>(), 164);
        let b = concat_features(&v, Extra::None).unwrap();
        assert_eq!(b.values.len(), 100);
        assert_eq!(b.layout, vec![Segment { kind: SegmentKind::DocVector, len: 100 }]);
        let p = concat_features(
            &v,
            Extra::Polarity(PolarityFeatures {
                doc_polarity: 0.7,
                positive_rate: 0.25,
                posts: 4,
            }),
        )
        .unwrap();
        assert_eq!(p.values.len(), 102);
        assert_eq!(&p.values[100..], &[0.7, 0.25]);
        let mixed = [f.clone(), concat_features(&v, Extra::Sentiment(&rep(63))).unwrap()];
        assert!(check_uniform(&mixed).is_err());
    }

    #[test]
    fn zero_model_ties_to_first_class() {
        let mlp = Mlp::new(vec![MlpLayer::Dense(DenseLayer::zeros(3, 2, Activation::Softmax))]).unwrap();
        let m = GenderModel { mlp, seed: 0 };
        let p = m.predict(&[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(p.probabilities, [0.5, 0.5]);
        assert_eq!(p.label, Gender::Male);
        assert!(m.predict(&[1.0]).is_err());
    }

    #[test]
    fn softmax_shift_keeps_label() {
        let mut rng = rng_from_seed(2);
        for _ in 0..50 {
            let z = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let c = rng.gen_range(-50.0..50.0);
            let mut a = [0.0; 2];
            let mut b = [0.0; 2];
            Activation::Softmax.apply(&z, &mut a);
            Activation::Softmax.apply(&[z[0] + c, z[1] + c], &mut b);
            assert!((a[0] + a[1] - 1.0).abs() < 1e-12);
            assert_eq!(argmax(&a), argmax(&b));
        }
    }

    fn separable(n: usize, seed: u64) -> (Vec<FeatureVector>, Vec<Gender>) {
        let mut rng = rng_from_seed(seed);
        let mut f = Vec::new();
        let mut g = Vec::new();
        for i in 0..n {
            let label = Gender::from_index(i % 2).unwrap();
            let sign = if label == Gender::Male { 1.0 } else { -1.0 };
            let v: Vec<f64> = (0..4)
                .map(|k| if k == 0 { sign * rng.gen_range(0.5..1.5) } else { rng.gen_range(-1.0..1.0) })
                .collect();
            f.push(concat_features(&v, Extra::None).unwrap());
            g.push(label);
        }
        (f, g)
    }

    #[test]
    fn separable_data_is_learned() {
        let (f, g) = separable(200, 1);
        let cfg = TrainConfig {
            epochs: 200,
            learning_rate: 0.01,
            ..TrainConfig::default()
        };
        let mut reached = None;
        let (m, _) = train_gender(&f, &g, &MlpConfig::default(), &cfg, |model, stats| {
            let correct = f
                .iter()
                .zip(&g)
                .filter(|(x, y)| predict_gender(model, x).unwrap().label == **y)
                .count();
            if correct as f64 / f.len() as f64 >= 0.99 {
                reached = Some(stats.epoch);
                return Ok(Control::Stop);
            }
            Ok(Control::Continue)
        })
        .unwrap();
        assert!(reached.is_some());
        let (m2, _) = train_gender(&f, &g, &MlpConfig::default(), &TrainConfig { epochs: 3, ..cfg.clone() }, |_, _| {
            Ok(Control::Continue)
        })
        .unwrap();
        let (m3, _) = train_gender(&f, &g, &MlpConfig::default(), &TrainConfig { epochs: 3, ..cfg }, |_, _| {
            Ok(Control::Continue)
        })
        .unwrap();
        assert_eq!(m2.mlp.checksum(), m3.mlp.checksum());
        let _ = m;
    }

    #[test]
    fn single_class_is_rejected() {
        let (f, _) = separable(6, 2);
        let g = vec![Gender::Female; 6];
        let err = train_gender(&f, &g, &MlpConfig::default(), &TrainConfig::default(), |_, _| Ok(Control::Continue));
        assert!(matches!(err, Err(Error::Data(_))));
    }

    #[test]
    fn features_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.jsonl");
        let records = vec![
            FeatureRecord {
                user_id: "u1".into(),
                label: Gender::Female,
                features: concat_features(&[0.1, 1.0 / 3.0], Extra::Sentiment(&rep(3))).unwrap(),
            },
            FeatureRecord {
                user_id: "u2".into(),
                label: Gender::Male,
                features: concat_features(&[-2.5, 1e-300], Extra::Sentiment(&rep(3))).unwrap(),
            },
        ];
        write_features(&path, &records).unwrap();
        assert_eq!(read_features(&path).unwrap(), records);
        fs::write(&path, "{\"user_id\":\"a\",\"label\":\"male\",\"layout\":[\"doc_vector\"],\"values\":[1,2]}\n").unwrap();
        assert_eq!(read_features(&path).unwrap()[0].features.layout[0].len, 2);
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = GenderModel {
            mlp: build_mlp(5, &MlpConfig::default(), 4).unwrap(),
            seed: 4,
        };
        let layout = vec![Segment { kind: SegmentKind::DocVector, len: 5 }];
        let bytes = m.to_checkpoint(&layout).to_bytes().unwrap();
        let (back, l) = GenderModel::from_checkpoint(Checkpoint::from_bytes(&bytes).unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(l, layout);
    }
}
