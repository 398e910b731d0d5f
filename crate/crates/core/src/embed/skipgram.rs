use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EmbeddingTable;
use crate::error::{Error, Result};
use crate::nncore::sigmoid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub min_count: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            min_count: 2,
            learning_rate: 0.025,
            seed: 1,
        }
    }
}

/// Cumulative unigram^0.75 table for negative sampling.
struct NoiseTable {
    cumulative: Vec<f64>,
}

impl NoiseTable {
    fn new(counts: &[usize]) -> Self {
        let mut acc = 0.0;
        let cumulative = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(0.75);
                acc
            })
            .collect();
        NoiseTable { cumulative }
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        let total = *self.cumulative.last().unwrap();
        let u = rng.gen::<f64>() * total;
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1)
    }
}

/// Skip-gram with negative sampling, single-threaded and fully determined
/// by `config.seed` and the document order.
pub fn train_skipgram(documents: &[Vec<String>], config: &SkipGramConfig) -> Result<EmbeddingTable> {
    if config.dim == 0 || config.window == 0 || config.epochs == 0 {
        return Err(Error::Config(
            "skip-gram dim, window and epochs must be ≥ 1".into(),
        ));
    }
    if !(config.learning_rate > 0.0) {
        return Err(Error::Config("skip-gram learning rate must be > 0".into()));
    }
    if documents.iter().all(|d| d.is_empty()) {
        return Err(Error::Data("cannot train embeddings on an empty corpus".into()));
    }

    let mut freq: HashMap<&str, usize> = HashMap::new();
    for tok in documents.iter().flatten() {
        *freq.entry(tok.as_str()).or_default() += 1;
    }
    let mut vocab: Vec<(&str, usize)> = freq
        .into_iter()
        .filter(|&(_, c)| c >= config.min_count)
        .collect();
    if vocab.is_empty() {
        return Err(Error::Data(format!(
            "no token reaches min_count {}; embedding table would be empty",
            config.min_count
        )));
    }
    vocab.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let index: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, (t, _))| (*t, i)).collect();
    let counts: Vec<usize> = vocab.iter().map(|&(_, c)| c).collect();
    let noise = NoiseTable::new(&counts);

    let dim = config.dim;
    let n = vocab.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut input: Vec<f64> = (0..n * dim)
        .map(|_| (rng.gen::<f64>() - 0.5) / dim as f64)
        .collect();
    let mut output = vec![0.0; n * dim];

    let sentences: Vec<Vec<usize>> = documents
        .iter()
        .map(|d| d.iter().filter_map(|t| index.get(t.as_str()).copied()).collect())
        .collect();
    let words_per_epoch: usize = sentences.iter().map(Vec::len).sum();
    let total = (words_per_epoch * config.epochs).max(1) as f64;
    let mut processed = 0usize;
    let mut grad_in = vec![0.0; dim];

    for _ in 0..config.epochs {
        for sentence in &sentences {
            for (pos, &center) in sentence.iter().enumerate() {
                let lr = (config.learning_rate * (1.0 - processed as f64 / total))
                    .max(config.learning_rate * 1e-4);
                processed += 1;
                let reach = config.window - rng.gen_range(0..config.window);
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach).min(sentence.len() - 1);
                for ctx_pos in lo..=hi {
                    if ctx_pos == pos {
                        continue;
                    }
                    let context = sentence[ctx_pos];
                    let center_vec = center * dim..(center + 1) * dim;
                    grad_in.iter_mut().for_each(|g| *g = 0.0);
                    for s in 0..=config.negatives {
                        let (target, label) = if s == 0 {
                            (context, 1.0)
                        } else {
                            let t = noise.sample(&mut rng);
                            if t == context {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let out = &mut output[target * dim..(target + 1) * dim];
                        let inp = &input[center_vec.clone()];
                        let dot: f64 = inp.iter().zip(out.iter()).map(|(a, b)| a * b).sum();
                        let g = (label - sigmoid(dot)) * lr;
                        for k in 0..dim {
                            grad_in[k] += g * out[k];
                            out[k] += g * inp[k];
                        }
                    }
                    for (w, g) in input[center_vec].iter_mut().zip(&grad_in) {
                        *w += g;
                    }
                }
            }
        }
    }

    let mut table = EmbeddingTable::new(dim);
    for (i, (tok, _)) in vocab.iter().enumerate() {
        table.insert(*tok, &input[i * dim..(i + 1) * dim])?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domainsel::cosine;

    /// Two disjoint token communities: {p*} only co-occur with each other, same for {q*}.
    fn community_corpus(seed: u64) -> Vec<Vec<String>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..400)
            .map(|i| {
                let group = if i % 2 == 0 { "p" } else { "q" };
                (0..8)
                    .map(|_| format!("{group}{}", rng.gen_range(1..=4)))
                    .collect()
            })
            .collect()
    }

    fn small_config() -> SkipGramConfig {
        SkipGramConfig {
            dim: 16,
            window: 3,
            epochs: 3,
            min_count: 1,
            ..SkipGramConfig::default()
        }
    }

    #[test]
    fn co_occurring_tokens_are_closer() {
        let table = train_skipgram(&community_corpus(7), &small_config()).unwrap();
        let p1 = table.get("p1").unwrap();
        let p2 = table.get("p2").unwrap();
        let q1 = table.get("q1").unwrap();
        let same = cosine(p1, p2).unwrap();
        let cross = cosine(p1, q1).unwrap();
        assert!(same > cross, "cos(p1,p2)={same} cos(p1,q1)={cross}");
    }

    #[test]
    fn deterministic_given_seed() {
        let corpus = community_corpus(3);
        let a = train_skipgram(&corpus, &small_config()).unwrap();
        let b = train_skipgram(&corpus, &small_config()).unwrap();
        assert_eq!(a, b);
        for tok in a.tokens() {
            assert!(a.get(tok).unwrap().iter().all(|x| x.is_finite()));
        }
    }

    #[test]
    fn min_count_filters_and_can_empty_the_table() {
        let corpus = vec![vec!["a".to_string(), "a".into(), "b".into()]];
        let cfg = SkipGramConfig {
            min_count: 2,
            ..small_config()
        };
        let t = train_skipgram(&corpus, &cfg).unwrap();
        assert_eq!(t.tokens(), ["a".to_string()]);
        let cfg = SkipGramConfig {
            min_count: 5,
            ..small_config()
        };
        assert!(train_skipgram(&corpus, &cfg).is_err());
        assert!(train_skipgram(&[], &small_config()).is_err());
    }
}
