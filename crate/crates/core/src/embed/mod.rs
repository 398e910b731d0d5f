//! Word embeddings and the document representations built on them.

mod skipgram;
mod tfidf;

pub use skipgram::{train_skipgram, SkipGramConfig};
pub use tfidf::{gender_keywords, SparseVector, TfIdf};

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Token → dense vector lookup, all vectors of length `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        EmbeddingTable {
            dim,
            tokens: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn insert(&mut self, token: impl Into<String>, vector: &[f64]) -> Result<()> {
        let token = token.into();
        if vector.len() != self.dim {
            return Err(Error::Shape(format!(
                "vector for `{token}` has length {} (expected {})",
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("embedding for `{token}`")));
        }
        match self.index.get(&token) {
            Some(&i) => self.data[i * self.dim..(i + 1) * self.dim].copy_from_slice(vector),
            None => {
                self.index.insert(token.clone(), self.tokens.len());
                self.tokens.push(token);
                self.data.extend_from_slice(vector);
            }
        }
        Ok(())
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index
            .get(token)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// Mean of the in-vocabulary token vectors; OOV tokens are skipped.
    pub fn doc_vector(&self, id: &str, tokens: &[String]) -> Result<DocVector> {
        let mut sum = vec![0.0; self.dim];
        let mut count = 0usize;
        for v in tokens.iter().filter_map(|t| self.get(t)) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            count += 1;
        }
        if count == 0 {
            return Err(Error::AllOov { id: id.to_string() });
        }
        let n = count as f64;
        sum.iter_mut().for_each(|s| *s /= n);
        Ok(DocVector {
            id: id.to_string(),
            values: sum,
        })
    }

    /// First `width` in-vocabulary token vectors as columns; the rest is zero padding.
    pub fn doc_matrix(&self, id: &str, tokens: &[String], width: usize) -> Result<DocMatrix> {
        if width == 0 {
            return Err(Error::Config("document matrix width must be ≥ 1".into()));
        }
        let mut data = Vec::with_capacity(self.dim * width.min(tokens.len()));
        let mut effective = 0;
        for v in tokens.iter().filter_map(|t| self.get(t)) {
            if effective == width {
                break;
            }
            data.extend_from_slice(v);
            effective += 1;
        }
        if effective == 0 {
            return Err(Error::AllOov { id: id.to_string() });
        }
        Ok(DocMatrix {
            id: id.to_string(),
            dim: self.dim,
            width,
            effective_length: effective,
            data,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        writeln!(out, "{} {}", self.len(), self.dim).unwrap();
        for (i, token) in self.tokens.iter().enumerate() {
            if token.is_empty() || token.chars().any(char::is_whitespace) {
                return Err(Error::Data(format!(
                    "token `{token}` cannot be written in the text embedding format"
                )));
            }
            out.push_str(token);
            for x in &self.data[i * self.dim..(i + 1) * self.dim] {
                write!(out, " {x}").unwrap();
            }
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let fmt_err = |line: usize, message: String| Error::EmbeddingFormat {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines
            .next()
            .ok_or_else(|| fmt_err(1, "missing `<vocab_size> <d>` header".into()))?;
        let head: Vec<&str> = header.split_whitespace().collect();
        let (vocab, dim) = match head.as_slice() {
            [v, d] => (
                v.parse::<usize>()
                    .map_err(|e| fmt_err(1, format!("vocab size: {e}")))?,
                d.parse::<usize>()
                    .map_err(|e| fmt_err(1, format!("dimension: {e}")))?,
            ),
            _ => return Err(fmt_err(1, "expected `<vocab_size> <d>`".into())),
        };
        if dim == 0 {
            return Err(fmt_err(1, "dimension must be positive".into()));
        }
        let mut table = EmbeddingTable::new(dim);
        let mut vector = Vec::with_capacity(dim);
        for (line, text) in lines {
            if text.trim().is_empty() {
                continue;
            }
            let mut parts = text.split_whitespace();
            let token = parts.next().unwrap();
            vector.clear();
            for p in parts {
                let x: f64 = p
                    .parse()
                    .map_err(|e| fmt_err(line, format!("bad float `{p}`: {e}")))?;
                if !x.is_finite() {
                    return Err(fmt_err(line, format!("non-finite component `{p}`")));
                }
                vector.push(x);
            }
            if vector.len() != dim {
                return Err(fmt_err(
                    line,
                    format!("expected {dim} components, found {}", vector.len()),
                ));
            }
            if table.contains(token) {
                return Err(fmt_err(line, format!("duplicate token `{token}`")));
            }
            table.insert(token, &vector)?;
        }
        if table.len() != vocab {
            return Err(fmt_err(
                1,
                format!("header declares {vocab} entries, found {}", table.len()),
            ));
        }
        Ok(table)
    }
}

/// Averaged word vector of one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocVector {
    pub id: String,
    pub values: Vec<f64>,
}

/// A `dim × width` document matrix whose columns past `effective_length`
/// are zero. Only the non-padding columns are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct DocMatrix {
    pub id: String,
    dim: usize,
    width: usize,
    effective_length: usize,
    data: Vec<f64>,
}

impl DocMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn effective_length(&self) -> usize {
        self.effective_length
    }

    /// Column `j`; padding columns come back as `None`.
    pub fn column(&self, j: usize) -> Option<&[f64]> {
        (j < self.effective_length).then(|| &self.data[j * self.dim..(j + 1) * self.dim])
    }

    /// The non-padding columns, concatenated column by column.
    pub fn active(&self) -> &[f64] {
        &self.data
    }

    /// Column-major flattening of the full `dim × width` matrix.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = self.data.clone();
        out.resize(self.dim * self.width, 0.0);
        out
    }

    /// Builds a matrix from a column-major dense buffer. Every column at or
    /// beyond `effective_length` must be zero.
    pub fn from_dense(
        id: impl Into<String>,
        dim: usize,
        width: usize,
        dense: &[f64],
        effective_length: usize,
    ) -> Result<Self> {
        if dense.len() != dim * width {
            return Err(Error::Shape(format!(
                "dense buffer has {} values, expected {dim}×{width}",
                dense.len()
            )));
        }
        if effective_length > width {
            return Err(Error::Shape(format!(
                "effective length {effective_length} exceeds width {width}"
            )));
        }
        if dense.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("document matrix".into()));
        }
        let split = dim * effective_length;
        if dense[split..].iter().any(|&x| x != 0.0) {
            return Err(Error::Shape(
                "non-zero values in padding columns".to_string(),
            ));
        }
        Ok(DocMatrix {
            id: id.into(),
            dim,
            width,
            effective_length,
            data: dense[..split].to_vec(),
        })
    }

    /// Same content with a different padded width (must cover the active columns).
    pub fn with_width(&self, width: usize) -> Result<Self> {
        if width < self.effective_length {
            return Err(Error::Shape(format!(
                "width {width} would truncate {} active columns",
                self.effective_length
            )));
        }
        Ok(DocMatrix {
            width,
            ..self.clone()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn table() -> EmbeddingTable {
        let mut t = EmbeddingTable::new(2);
        t.insert("a", &[1.0, 2.0]).unwrap();
        t.insert("b", &[3.0, 4.0]).unwrap();
        t
    }

    #[test]
    fn doc_vector_means_in_vocab_tokens() {
        let t = table();
        assert_eq!(t.doc_vector("d", &toks(&["a", "b"])).unwrap().values, vec![2.0, 3.0]);
        assert_eq!(t.doc_vector("d", &toks(&["a", "a"])).unwrap().values, vec![1.0, 2.0]);
        assert_eq!(
            t.doc_vector("d", &toks(&["a", "oov", "b"])).unwrap().values,
            vec![2.0, 3.0]
        );
        assert!(matches!(
            t.doc_vector("d", &toks(&["zz"])),
            Err(Error::AllOov { .. })
        ));
    }

    #[test]
    fn doc_matrix_pads_and_truncates() {
        let t = table();
        let m = t.doc_matrix("d", &toks(&["a", "b"]), 4).unwrap();
        assert_eq!(m.effective_length(), 2);
        assert!(m.column(2).is_none() && m.column(3).is_none());
        assert_eq!(m.to_dense()[4..], [0.0; 4]);

        let six = toks(&["a", "b", "a", "b", "a", "b"]);
        let m = t.doc_matrix("d", &six, 4).unwrap();
        assert_eq!(m.effective_length(), 4);
        assert_eq!(m.column(3).unwrap(), &[3.0, 4.0]);

        // d=2, one token, r=2 → rows [[1,0],[2,0]]; column-major dense [1,2,0,0]
        let m = t.doc_matrix("d", &toks(&["a"]), 2).unwrap();
        assert_eq!(m.to_dense(), vec![1.0, 2.0, 0.0, 0.0]);

        assert!(matches!(
            t.doc_matrix("d", &toks(&["q"]), 3),
            Err(Error::AllOov { .. })
        ));
    }

    #[test]
    fn vector_is_column_mean_of_unpadded_matrix() {
        let t = table();
        let doc = toks(&["a", "x", "b", "b", "a", "b"]);
        let m = t.doc_matrix("d", &doc, 10).unwrap();
        let v = t.doc_vector("d", &doc).unwrap();
        let n = m.effective_length();
        for row in 0..2 {
            let mean: f64 = (0..n).map(|j| m.column(j).unwrap()[row]).sum::<f64>() / n as f64;
            assert!((mean - v.values[row]).abs() < 1e-15);
        }
    }

    #[test]
    fn from_dense_rejects_dirty_padding() {
        assert!(DocMatrix::from_dense("x", 2, 2, &[1.0, 2.0, 0.0, 0.5], 1).is_err());
        let m = DocMatrix::from_dense("x", 2, 2, &[1.0, 2.0, 0.0, 0.0], 1).unwrap();
        assert_eq!(m.effective_length(), 1);
    }

    #[test]
    fn save_load_round_trip() {
        let mut t = table();
        t.insert("好", &[0.1, -1.0 / 3.0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("emb.txt");
        t.save(&p).unwrap();
        assert_eq!(EmbeddingTable::load(&p).unwrap(), t);
    }

    #[test]
    fn load_parses_and_validates() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("emb.txt");
        fs::write(&p, "1 2\na 1.0 2.0\n").unwrap();
        let t = EmbeddingTable::load(&p).unwrap();
        assert_eq!(t.get("a").unwrap(), &[1.0, 2.0]);

        fs::write(&p, "2 2\na 1.0 2.0\nb 1.0\n").unwrap();
        match EmbeddingTable::load(&p) {
            Err(Error::EmbeddingFormat { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
