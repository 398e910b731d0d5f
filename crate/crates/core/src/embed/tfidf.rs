use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::corpus::{Gender, VirtualDocument};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseVector {
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i] = v;
        }
        out
    }
}

/// Fitted tf·idf model with `idf = ln(N / df)` over a sorted vocabulary.
#[derive(Debug, Clone)]
pub struct TfIdf {
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    idf: Vec<f64>,
}

impl TfIdf {
    pub fn fit(documents: &[Vec<String>]) -> Result<Self> {
        if documents.is_empty() {
            return Err(Error::Data("tf-idf needs at least one document".into()));
        }
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in documents {
            let unique: BTreeSet<&str> = doc.iter().map(String::as_str).collect();
            for t in unique {
                *df.entry(t).or_default() += 1;
            }
        }
        let n = documents.len() as f64;
        let vocab: Vec<String> = df.keys().map(|t| t.to_string()).collect();
        let idf = df.values().map(|&d| (n / d as f64).ln()).collect();
        let index = vocab.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        Ok(TfIdf { vocab, index, idf })
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.index.get(term).map(|&i| self.idf[i])
    }

    /// Keeps only `terms`; idf values stay those of the full corpus.
    pub fn restrict(&self, terms: &BTreeSet<String>) -> TfIdf {
        let (vocab, idf): (Vec<String>, Vec<f64>) = self
            .vocab
            .iter()
            .zip(&self.idf)
            .filter(|(t, _)| terms.contains(*t))
            .map(|(t, &w)| (t.clone(), w))
            .unzip();
        let index = vocab.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        TfIdf { vocab, index, idf }
    }

    /// Raw-count tf times idf, L2-normalized. All-zero when no term carries weight.
    pub fn transform(&self, doc: &[String]) -> SparseVector {
        let mut tf: BTreeMap<usize, f64> = BTreeMap::new();
        for t in doc {
            if let Some(&i) = self.index.get(t) {
                *tf.entry(i).or_default() += 1.0;
            }
        }
        let mut v = SparseVector::default();
        for (i, c) in tf {
            let w = c * self.idf[i];
            if w != 0.0 {
                v.indices.push(i);
                v.values.push(w);
            }
        }
        let norm = v.norm();
        if norm > 0.0 {
            v.values.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }

    pub fn transform_all(&self, documents: &[Vec<String>]) -> Vec<SparseVector> {
        let out: Vec<SparseVector> = documents.iter().map(|d| self.transform(d)).collect();
        let zeros = out.iter().filter(|v| v.values.is_empty()).count();
        if zeros > 0 {
            log::warn!("{zeros} of {} tf-idf vectors are all-zero", out.len());
        }
        out
    }
}

/// Top-`top_n` most frequent tokens per gender, minus the tokens in both lists.
/// Frequency ties are broken by token order.
pub fn gender_keywords(documents: &[VirtualDocument], top_n: usize) -> Result<BTreeSet<String>> {
    let mut counts: [HashMap<&str, usize>; 2] = [HashMap::new(), HashMap::new()];
    for doc in documents {
        let c = &mut counts[doc.gender.index()];
        for t in &doc.tokens {
            *c.entry(t.as_str()).or_default() += 1;
        }
    }
    for g in Gender::ALL {
        if counts[g.index()].is_empty() {
            return Err(Error::Data(format!("no {g} documents for keyword selection")));
        }
    }
    let top = |c: &HashMap<&str, usize>| -> BTreeSet<String> {
        let mut v: Vec<(&str, usize)> = c.iter().map(|(t, n)| (*t, *n)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        v.into_iter().take(top_n).map(|(t, _)| t.to_string()).collect()
    };
    let male = top(&counts[0]);
    let female = top(&counts[1]);
    Ok(male.symmetric_difference(&female).cloned().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn vdoc(g: Gender, xs: &[&str]) -> VirtualDocument {
        VirtualDocument {
            user_id: format!("{g}"),
            gender: g,
            tokens: toks(xs),
            token_count: xs.len(),
        }
    }

    #[test]
    fn ubiquitous_term_has_zero_idf() {
        let docs = vec![toks(&["a", "b"]), toks(&["a", "c"])];
        let m = TfIdf::fit(&docs).unwrap();
        assert_eq!(m.idf("a"), Some(0.0));
        assert!((m.idf("b").unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((m.idf("b").unwrap() - 2f64.ln()).abs() < 1e-12);
        let v = m.transform(&docs[0]);
        assert_eq!(v.indices, vec![m.vocab().iter().position(|t| t == "b").unwrap()]);
        assert!((v.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_document_is_all_zero() {
        let docs = vec![toks(&["a", "b", "b"])];
        let m = TfIdf::fit(&docs).unwrap();
        let out = m.transform_all(&docs);
        assert!(out[0].values.is_empty());
        assert!(TfIdf::fit(&[]).is_err());
    }

    #[test]
    fn restriction_keeps_full_corpus_idf() {
        let docs = vec![toks(&["a", "b"]), toks(&["c", "b"]), toks(&["a"])];
        let m = TfIdf::fit(&docs).unwrap();
        let r = m.restrict(&["a".to_string()].into_iter().collect());
        assert_eq!(r.vocab(), ["a".to_string()]);
        assert_eq!(r.idf("a"), m.idf("a"));
        assert_eq!(r.transform(&docs[0]).values, vec![1.0]);
    }

    #[test]
    fn keywords_are_symmetric_difference_of_tops() {
        let docs = vec![
            vdoc(Gender::Male, &["a", "a", "a", "b", "b", "z"]),
            vdoc(Gender::Female, &["c", "c", "c", "b", "b", "y"]),
        ];
        let k = gender_keywords(&docs, 2).unwrap();
        assert_eq!(k, ["a", "c"].iter().map(|s| s.to_string()).collect());

        let same = vec![vdoc(Gender::Male, &["a", "b"]), vdoc(Gender::Female, &["a", "b"])];
        assert!(gender_keywords(&same, 2).unwrap().is_empty());

        assert!(gender_keywords(&docs[..1], 2).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn vectors_are_unit_or_zero(docs in proptest::collection::vec(
                proptest::collection::vec("[a-e]", 1..8), 1..6)) {
                let m = TfIdf::fit(&docs).unwrap();
                for v in m.transform_all(&docs) {
                    let n = v.norm();
                    prop_assert!(n == 0.0 || (n - 1.0).abs() < 1e-12);
                }
            }

            #[test]
            fn keyword_set_bounded(male in proptest::collection::vec("[a-h]", 1..30),
                                   female in proptest::collection::vec("[a-h]", 1..30),
                                   top_n in 1usize..6) {
                let docs = vec![
                    VirtualDocument { user_id: "m".into(), gender: Gender::Male, token_count: male.len(), tokens: male },
                    VirtualDocument { user_id: "f".into(), gender: Gender::Female, token_count: female.len(), tokens: female },
                ];
                let k = gender_keywords(&docs, top_n).unwrap();
                prop_assert!(k.len() <= 2 * top_n);
            }
        }
    }
}
