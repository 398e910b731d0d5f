//! Synthetic testbed: polarity-labeled reviews and gender-labeled users whose
//! share of positive posts correlates with gender.
//!
//! A post's polarity is carried by marker words. Each marker is drawn from
//! the positive or the negative marker pool with equal probability and is
//! preceded by a negator exactly when its pool disagrees with the post's
//! polarity, so the bag of words of a post says nothing about its polarity;
//! only word order does. Users also lean slightly toward a gender-specific
//! vocabulary, which is what a bag-of-words model can pick up.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::{Gender, ManualSample, Polarity, SourceReview, UserRecord};
use crate::error::{Error, Result};
use crate::nncore::{rng_from_seed, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub users: usize,
    pub reviews: usize,
    pub manual: usize,
    /// Share of male users.
    pub male_fraction: f64,
    /// Target correlation between gender (female = 1) and the positive-post rate.
    pub correlation: f64,
    pub mean_positive_rate: f64,
    /// Gap between the female and male mean positive rates.
    pub rate_gap: f64,
    pub min_posts: usize,
    pub max_posts: usize,
    pub min_filler: usize,
    pub max_filler: usize,
    /// Chance that a filler word comes from the writer's gender pool.
    pub gender_word_rate: f64,
    /// Chance that a filler word comes from the other gender's pool.
    pub cross_gender_word_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            users: 1000,
            reviews: 2000,
            manual: 200,
            male_fraction: 0.5,
            correlation: 0.6,
            mean_positive_rate: 0.5,
            rate_gap: 0.3,
            min_posts: 6,
            max_posts: 12,
            min_filler: 2,
            max_filler: 5,
            gender_word_rate: 0.08,
            cross_gender_word_rate: 0.05,
            seed: 1,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in [0, 1], got {x}")))
            }
        };
        unit("male fraction", self.male_fraction)?;
        unit("mean positive rate", self.mean_positive_rate)?;
        unit("gender word rate", self.gender_word_rate + self.cross_gender_word_rate)?;
        if !(self.correlation > 0.0 && self.correlation < 1.0) {
            return Err(Error::Config(format!(
                "correlation must lie in (0, 1), got {}",
                self.correlation
            )));
        }
        if self.min_posts == 0 || self.min_posts > self.max_posts || self.min_filler > self.max_filler {
            return Err(Error::Config("post and filler ranges must be non-empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub users: Vec<UserRecord>,
    pub reviews: Vec<SourceReview>,
    pub manual: Vec<ManualSample>,
    pub stopwords: Vec<String>,
    /// Latent positive-post rate per user.
    pub positive_rates: Vec<f64>,
    /// Realized correlation between gender and the latent rate.
    pub correlation: f64,
}

const POSITIVE: [&str; 6] = ["great", "love", "perfect", "excellent", "happy", "nice"];
const NEGATIVE: [&str; 6] = ["awful", "hate", "broken", "terrible", "sad", "poor"];
const NEGATORS: [&str; 2] = ["not", "never"];
const STOPWORDS: [&str; 5] = ["the", "a", "of", "and", "is"];
const FILLER: usize = 120;
const GENDER_POOL: usize = 25;

struct Writer {
    filler: Vec<String>,
    male: Vec<String>,
    female: Vec<String>,
}

impl Writer {
    fn new() -> Self {
        Writer {
            filler: (0..FILLER).map(|i| format!("w{i:03}")).collect(),
            male: (0..GENDER_POOL).map(|i| format!("m{i:02}")).collect(),
            female: (0..GENDER_POOL).map(|i| format!("f{i:02}")).collect(),
        }
    }

    fn filler_word(&self, rng: &mut Rng, cfg: &SynthConfig, gender: Option<Gender>) -> String {
        if let Some(g) = gender {
            let (own, other) = match g {
                Gender::Male => (&self.male, &self.female),
                Gender::Female => (&self.female, &self.male),
            };
            let u: f64 = rng.gen();
            if u < cfg.gender_word_rate {
                return own.choose(rng).unwrap().clone();
            }
            if u < cfg.gender_word_rate + cfg.cross_gender_word_rate {
                return other.choose(rng).unwrap().clone();
            }
        }
        if rng.gen_bool(0.15) {
            return STOPWORDS.choose(rng).unwrap().to_string();
        }
        self.filler.choose(rng).unwrap().clone()
    }

    /// Filler words with one to three polarity markers spliced in.
    fn text(&self, rng: &mut Rng, cfg: &SynthConfig, polarity: Polarity, gender: Option<Gender>) -> Vec<String> {
        let n_filler = rng.gen_range(cfg.min_filler..=cfg.max_filler);
        let mut chunks: Vec<Vec<String>> = (0..n_filler)
            .map(|_| vec![self.filler_word(rng, cfg, gender)])
            .collect();
        for _ in 0..rng.gen_range(1..=3) {
            let from_positive = rng.gen_bool(0.5);
            let word = if from_positive { POSITIVE.choose(rng) } else { NEGATIVE.choose(rng) };
            let mut chunk = Vec::new();
            if from_positive != (polarity == Polarity::Positive) {
                chunk.push(NEGATORS.choose(rng).unwrap().to_string());
            }
            chunk.push(word.unwrap().to_string());
            let at = rng.gen_range(0..=chunks.len());
            chunks.insert(at, chunk);
        }
        if rng.gen_bool(0.05) {
            chunks.push(vec![format!("http://t.cn/{}", rng.gen_range(1000..10000))]);
        }
        chunks.concat()
    }
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let mut rng = rng_from_seed(cfg.seed);
    let writer = Writer::new();

    let reviews = (0..cfg.reviews)
        .map(|i| {
            let polarity = if i % 2 == 0 { Polarity::Positive } else { Polarity::Negative };
            SourceReview {
                review_id: format!("r{i:05}"),
                polarity,
                tokens: writer.text(&mut rng, cfg, polarity, None),
            }
        })
        .collect();

    // rate = base + gap·g + noise, with the noise variance chosen so that
    // corr(g, rate) equals the requested correlation before clamping
    let q = 1.0 - cfg.male_fraction;
    let c = cfg.correlation;
    let sd = cfg.rate_gap * (q * (1.0 - q) * (1.0 - c * c)).sqrt() / c;
    let noise = Normal::new(0.0, sd).map_err(|e| Error::Config(e.to_string()))?;
    let base = cfg.mean_positive_rate - cfg.rate_gap * q;

    let mut users = Vec::with_capacity(cfg.users);
    let mut rates = Vec::with_capacity(cfg.users);
    let mut post_polarity = Vec::with_capacity(cfg.users);
    let n_male = (cfg.male_fraction * cfg.users as f64).round() as usize;
    let mut genders: Vec<Gender> = (0..cfg.users)
        .map(|i| if i < n_male { Gender::Male } else { Gender::Female })
        .collect();
    genders.shuffle(&mut rng);
    for (i, &gender) in genders.iter().enumerate() {
        let g = gender.index() as f64;
        let rate = (base + cfg.rate_gap * g + noise.sample(&mut rng)).clamp(0.0, 1.0);
        let n_posts = rng.gen_range(cfg.min_posts..=cfg.max_posts);
        let mut posts = Vec::with_capacity(n_posts);
        let mut polarities = Vec::with_capacity(n_posts);
        for _ in 0..n_posts {
            let polarity = if rng.gen_bool(rate) { Polarity::Positive } else { Polarity::Negative };
            posts.push(writer.text(&mut rng, cfg, polarity, Some(gender)));
            polarities.push(polarity);
        }
        users.push(UserRecord {
            user_id: format!("u{i:05}"),
            gender,
            posts,
        });
        rates.push(rate);
        post_polarity.push(polarities);
    }

    let mut manual = Vec::with_capacity(cfg.manual);
    for n in 0..cfg.manual.min(cfg.users * cfg.min_posts) {
        let u = rng.gen_range(0..users.len());
        let p = rng.gen_range(0..users[u].posts.len());
        manual.push(ManualSample {
            id: format!("m{n:05}"),
            user_id: users[u].user_id.clone(),
            polarity: post_polarity[u][p],
            tokens: users[u].posts[p].clone(),
        });
    }

    let g: Vec<f64> = genders.iter().map(|g| g.index() as f64).collect();
    Ok(SynthData {
        correlation: pearson(&g, &rates),
        users,
        reviews,
        manual,
        stopwords: STOPWORDS.iter().map(|s| s.to_string()).collect(),
        positive_rates: rates,
    })
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut out = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut out, r).map_err(|e| Error::Data(e.to_string()))?;
        out.push(b'\n');
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(|e| Error::io(path, e))
}

pub const USERS_FILE: &str = "users.jsonl";
pub const SOURCE_FILE: &str = "source.jsonl";
pub const MANUAL_FILE: &str = "manual.jsonl";
pub const STOPWORDS_FILE: &str = "stopwords.txt";

/// Writes `users.jsonl`, `source.jsonl`, `manual.jsonl` and `stopwords.txt` into `dir`.
pub fn write_dataset(dir: impl AsRef<Path>, data: &SynthData) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_jsonl(&dir.join(USERS_FILE), &data.users)?;
    write_jsonl(&dir.join(SOURCE_FILE), &data.reviews)?;
    write_jsonl(&dir.join(MANUAL_FILE), &data.manual)?;
    let path = dir.join(STOPWORDS_FILE);
    let mut text = String::from("# synthetic stopwords\n");
    for w in &data.stopwords {
        text.push_str(w);
        text.push('\n');
    }
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{load_manual_samples, load_source_reviews, load_stopwords, load_user_records};
    use std::collections::HashMap;

    fn small() -> SynthConfig {
        SynthConfig {
            users: 400,
            reviews: 200,
            manual: 20,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn correlation_is_near_target() {
        let d = generate(&SynthConfig {
            users: 4000,
            ..small()
        })
        .unwrap();
        assert!((d.correlation - 0.6).abs() < 0.05, "{}", d.correlation);
    }

    #[test]
    fn word_counts_do_not_reveal_polarity() {
        let d = generate(&SynthConfig {
            reviews: 6000,
            ..small()
        })
        .unwrap();
        let mut counts: HashMap<(&str, Polarity), usize> = HashMap::new();
        for r in &d.reviews {
            for t in &r.tokens {
                *counts.entry((t.as_str(), r.polarity)).or_default() += 1;
            }
        }
        for w in POSITIVE.iter().chain(&NEGATIVE).chain(&NEGATORS) {
            let p = counts[&(*w, Polarity::Positive)] as f64;
            let n = counts[&(*w, Polarity::Negative)] as f64;
            assert!((p / n - 1.0).abs() < 0.2, "{w}: {p} vs {n}");
        }
    }

    #[test]
    fn deterministic_and_loadable() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a.users, b.users);
        assert_eq!(a.reviews, b.reviews);
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &a).unwrap();
        assert_eq!(load_user_records(dir.path().join(USERS_FILE)).unwrap(), a.users);
        assert_eq!(load_source_reviews(dir.path().join(SOURCE_FILE)).unwrap(), a.reviews);
        assert_eq!(load_manual_samples(dir.path().join(MANUAL_FILE)).unwrap(), a.manual);
        assert_eq!(load_stopwords(dir.path().join(STOPWORDS_FILE)).unwrap().len(), 5);
    }
}
