//! Instance-based source selection: keep the source documents whose mean
//! cosine similarity to the target documents exceeds a threshold, optionally
//! adding hand-labeled target samples.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::corpus::Polarity;
use crate::embed::{DocMatrix, DocVector};
use crate::error::{Error, Result};

/// Default similarity threshold.
pub const DEFAULT_THRESHOLD: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Source,
    ManualTarget,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledItem {
    pub id: String,
    pub matrix: DocMatrix,
    pub vector: DocVector,
    pub polarity: Polarity,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledDomainSet {
    pub items: Vec<LabeledItem>,
}

impl LabeledDomainSet {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn count(&self, polarity: Polarity) -> usize {
        self.items.iter().filter(|i| i.polarity == polarity).count()
    }

    /// Matrix shape `(d, r)` shared by all items, if any.
    pub fn shape(&self) -> Option<(usize, usize)> {
        self.items.first().map(|i| (i.matrix.dim(), i.matrix.width()))
    }

    pub fn validate_shape(&self) -> Result<()> {
        if let Some(shape) = self.shape() {
            if let Some(bad) = self
                .items
                .iter()
                .find(|i| (i.matrix.dim(), i.matrix.width()) != shape)
            {
                return Err(Error::Shape(format!(
                    "item `{}` has shape {}×{}, expected {}×{}",
                    bad.id,
                    bad.matrix.dim(),
                    bad.matrix.width(),
                    shape.0,
                    shape.1
                )));
            }
        }
        Ok(())
    }
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Shape(format!(
            "cosine of vectors with lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    let nu = dot(u, u).sqrt();
    let nv = dot(v, v).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Mean cosine similarity between `source` and each target vector.
pub fn avg_similarity(source: &[f64], targets: &[DocVector]) -> Result<f64> {
    if targets.is_empty() {
        return Err(Error::Data("average similarity needs at least one target vector".into()));
    }
    let mut sum = 0.0;
    for t in targets {
        sum += cosine(source, &t.values)?;
    }
    Ok(sum / targets.len() as f64)
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub set: LabeledDomainSet,
    pub kept: usize,
    pub total: usize,
    /// Average similarity of every input item, in input order.
    pub similarities: Vec<f64>,
}

/// Keeps, in input order, the items whose average similarity is strictly above `threshold`.
pub fn select_source(
    source: &LabeledDomainSet,
    targets: &[DocVector],
    threshold: f64,
) -> Result<Selection> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Config(format!(
            "similarity threshold must lie in (0, 1), got {threshold}"
        )));
    }
    let similarities = source
        .items
        .iter()
        .map(|item| avg_similarity(&item.vector.values, targets))
        .collect::<Result<Vec<f64>>>()?;
    let items: Vec<LabeledItem> = source
        .items
        .iter()
        .zip(&similarities)
        .filter(|(_, &s)| s > threshold)
        .map(|(item, _)| item.clone())
        .collect();
    if items.is_empty() {
        return Err(Error::EmptySelection {
            threshold,
            total: source.len(),
            max_similarity: similarities.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        });
    }
    log::info!(
        "kept {} of {} source items with average similarity > {threshold}",
        items.len(),
        source.len()
    );
    Ok(Selection {
        kept: items.len(),
        total: source.len(),
        set: LabeledDomainSet { items },
        similarities,
    })
}

/// Union of the source set with manually labeled target samples.
pub fn augment_with_manual(
    source: &LabeledDomainSet,
    manual: &LabeledDomainSet,
) -> Result<LabeledDomainSet> {
    if let (Some(a), Some(b)) = (source.shape(), manual.shape()) {
        if a != b {
            return Err(Error::Shape(format!(
                "source matrices are {}×{} but manual matrices are {}×{}",
                a.0, a.1, b.0, b.1
            )));
        }
    }
    manual.validate_shape()?;
    let mut ids: HashSet<&str> = source.items.iter().map(|i| i.id.as_str()).collect();
    for item in &manual.items {
        if !ids.insert(item.id.as_str()) {
            return Err(Error::Data(format!("duplicate id `{}` in manual samples", item.id)));
        }
    }
    let mut items = source.items.clone();
    items.extend(manual.items.iter().cloned().map(|mut i| {
        i.provenance = Provenance::ManualTarget;
        i
    }));
    Ok(LabeledDomainSet { items })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn item(id: &str, v: &[f64], provenance: Provenance) -> LabeledItem {
        LabeledItem {
            id: id.into(),
            matrix: DocMatrix::from_dense(id, v.len(), 1, v, 1).unwrap(),
            vector: DocVector {
                id: id.into(),
                values: v.to_vec(),
            },
            polarity: Polarity::Positive,
            provenance,
        }
    }

    fn dv(v: &[f64]) -> DocVector {
        DocVector {
            id: String::new(),
            values: v.to_vec(),
        }
    }

    #[test]
    fn cosine_cases() {
        assert!((cosine(&[3.0, -1.0], &[3.0, -1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine(&[1.0, 0.0], &[1.0, 1.0]).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert!(cosine(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn average_similarity_cases() {
        assert!((avg_similarity(&[2.0, 1.0], &[dv(&[2.0, 1.0])]).unwrap() - 1.0).abs() < 1e-15);
        let t = [dv(&[1.0, 0.0]), dv(&[0.0, 1.0])];
        assert_eq!(avg_similarity(&[1.0, 0.0], &t).unwrap(), 0.5);
        assert_eq!(avg_similarity(&[0.0, 0.0], &t).unwrap(), 0.0);
        assert!(avg_similarity(&[1.0, 0.0], &[]).is_err());
    }

    #[test]
    fn selection_thresholds() {
        let src = LabeledDomainSet {
            items: vec![
                item("a", &[1.0, 0.0], Provenance::Source),
                item("b", &[1.0, 1.0], Provenance::Source),
                item("c", &[0.2, 1.0], Provenance::Source),
            ],
        };
        let targets = [dv(&[1.0, 0.1]), dv(&[1.0, 0.3])];
        let all = select_source(&src, &targets, 0.01).unwrap();
        assert_eq!(all.kept, 3);
        assert!(matches!(
            select_source(&src, &targets, 0.999),
            Err(Error::EmptySelection { .. })
        ));
        let mid = select_source(&src, &targets, 0.8).unwrap();
        let ids: Vec<&str> = mid.set.items.iter().map(|i| i.id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
        assert!(select_source(&src, &targets, 0.0).is_err());
        assert!(select_source(&src, &targets, 1.0).is_err());
    }

    #[test]
    fn augmentation_union() {
        let src = LabeledDomainSet {
            items: (0..10)
                .map(|i| item(&format!("s{i}"), &[1.0, i as f64], Provenance::Source))
                .collect(),
        };
        assert_eq!(augment_with_manual(&src, &LabeledDomainSet::default()).unwrap(), src);
        let manual = LabeledDomainSet {
            items: (0..3)
                .map(|i| item(&format!("m{i}"), &[0.5, i as f64], Provenance::Source))
                .collect(),
        };
        let out = augment_with_manual(&src, &manual).unwrap();
        assert_eq!(out.len(), 13);
        assert_eq!(
            out.items.iter().filter(|i| i.provenance == Provenance::ManualTarget).count(),
            3
        );
        let dup = LabeledDomainSet {
            items: vec![item("s3", &[0.0, 1.0], Provenance::ManualTarget)],
        };
        assert!(augment_with_manual(&src, &dup).is_err());
        let wide = LabeledDomainSet {
            items: vec![item("w", &[0.0, 1.0, 2.0], Provenance::ManualTarget)],
        };
        assert!(matches!(augment_with_manual(&src, &wide), Err(Error::Shape(_))));
    }
}
