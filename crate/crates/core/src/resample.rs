//! SMOTE oversampling of the minority class.
//!
//! The default variant moves `x_old` toward the centroid of its `k` nearest
//! minority neighbours by one random `σ ∈ [0, 1)`:
//! `x_new = x_old + σ · (1/k) Σ (x_i − x_old)`. The classic variant
//! interpolates toward one randomly chosen neighbour instead.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::embed::DocMatrix;
use crate::error::{Error, Result};
use crate::nncore::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmoteVariant {
    Paper,
    Classic,
}

impl std::str::FromStr for SmoteVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(SmoteVariant::Paper),
            "classic" => Ok(SmoteVariant::Classic),
            other => Err(Error::Config(format!("unknown SMOTE variant `{other}` (expected paper|classic)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResampleConfig {
    pub k: usize,
    /// Desired minority/majority ratio after oversampling.
    pub target_ratio: f64,
    pub seed: u64,
    pub variant: SmoteVariant,
}

impl Default for ResampleConfig {
    fn default() -> Self {
        ResampleConfig {
            k: 5,
            target_ratio: 1.0,
            seed: 1,
            variant: SmoteVariant::Paper,
        }
    }
}

/// One synthetic sample: the base point, the neighbours it moves toward and σ.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub x_old: usize,
    pub neighbors: Vec<usize>,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmotePlan {
    pub minority_label: usize,
    pub synthetic: Vec<Synthetic>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Oversampled<T> {
    /// Originals in input order, then synthetic samples.
    pub samples: Vec<T>,
    pub labels: Vec<usize>,
    pub original_count: usize,
    pub plan: SmotePlan,
}

impl<T> Oversampled<T> {
    pub fn is_synthetic(&self, i: usize) -> bool {
        i >= self.original_count
    }
}

/// Decides which synthetic samples to create. `dist(i, j)` is the squared
/// Euclidean distance between samples `i` and `j`.
pub fn plan_smote(labels: &[usize], config: &ResampleConfig, dist: impl Fn(usize, usize) -> f64) -> Result<SmotePlan> {
    if config.k == 0 {
        return Err(Error::Config("SMOTE k must be ≥ 1".into()));
    }
    if !(config.target_ratio > 0.0 && config.target_ratio <= 1.0) {
        return Err(Error::Config(format!(
            "SMOTE target ratio must lie in (0, 1], got {}",
            config.target_ratio
        )));
    }
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() != 2 {
        return Err(Error::Data(format!(
            "SMOTE needs exactly two classes, found {}",
            classes.len()
        )));
    }
    let members = |c: usize| -> Vec<usize> { (0..labels.len()).filter(|&i| labels[i] == c).collect() };
    let (a, b) = (members(classes[0]), members(classes[1]));
    let (minority_label, minority, majority) = if b.len() < a.len() {
        (classes[1], b, a)
    } else {
        (classes[0], a, b)
    };
    let target = (config.target_ratio * majority.len() as f64).round() as usize;
    if target < minority.len() {
        return Err(Error::Config(format!(
            "target ratio {} is below the current minority/majority ratio {}/{}",
            config.target_ratio,
            minority.len(),
            majority.len()
        )));
    }
    let needed = target - minority.len();
    let mut plan = SmotePlan {
        minority_label,
        synthetic: Vec::with_capacity(needed),
    };
    if needed == 0 {
        return Ok(plan);
    }
    if config.k >= minority.len() {
        return Err(Error::Config(format!(
            "SMOTE k = {} needs more than {} minority samples",
            config.k,
            minority.len()
        )));
    }
    let mut neighbor_cache: Vec<Option<Vec<usize>>> = vec![None; minority.len()];
    let mut rng = rng_from_seed(config.seed);
    for n in 0..needed {
        let slot = n % minority.len();
        let x_old = minority[slot];
        let all = neighbor_cache[slot].get_or_insert_with(|| {
            let mut cand: Vec<(f64, usize)> = minority
                .iter()
                .filter(|&&j| j != x_old)
                .map(|&j| (dist(x_old, j), j))
                .collect();
            cand.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
            cand.truncate(config.k);
            cand.into_iter().map(|(_, j)| j).collect()
        });
        let sigma: f64 = rng.gen_range(0.0..1.0);
        let neighbors = match config.variant {
            SmoteVariant::Paper => all.clone(),
            SmoteVariant::Classic => vec![all[rng.gen_range(0..all.len())]],
        };
        plan.synthetic.push(Synthetic { x_old, neighbors, sigma });
    }
    Ok(plan)
}

fn squared_distance(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `x_old + σ · (centroid − x_old)`, the centroid taken over `neighbors`.
fn interpolate(x_old: &[f64], neighbors: &[&[f64]], sigma: f64) -> Vec<f64> {
    let k = neighbors.len() as f64;
    (0..x_old.len())
        .map(|j| {
            let centroid = neighbors.iter().map(|n| n[j]).sum::<f64>() / k;
            x_old[j] + sigma * (centroid - x_old[j])
        })
        .collect()
}

pub fn synthesize_vectors(samples: &[Vec<f64>], plan: &SmotePlan) -> Vec<Vec<f64>> {
    plan.synthetic
        .iter()
        .map(|s| {
            let nbs: Vec<&[f64]> = s.neighbors.iter().map(|&j| samples[j].as_slice()).collect();
            interpolate(&samples[s.x_old], &nbs, s.sigma)
        })
        .collect()
}

/// Applies a plan to document matrices. A synthetic matrix keeps the
/// largest effective length among its base point and neighbours.
pub fn synthesize_matrices(samples: &[DocMatrix], plan: &SmotePlan) -> Result<Vec<DocMatrix>> {
    let mut out = Vec::with_capacity(plan.synthetic.len());
    for (n, s) in plan.synthetic.iter().enumerate() {
        let base = &samples[s.x_old];
        let eff = s
            .neighbors
            .iter()
            .map(|&j| samples[j].effective_length())
            .chain([base.effective_length()])
            .max()
            .unwrap();
        let dense: Vec<Vec<f64>> = std::iter::once(s.x_old)
            .chain(s.neighbors.iter().copied())
            .map(|j| {
                let mut v = samples[j].active().to_vec();
                v.resize(base.dim() * eff, 0.0);
                v
            })
            .collect();
        let nbs: Vec<&[f64]> = dense[1..].iter().map(|v| v.as_slice()).collect();
        let mut values = interpolate(&dense[0], &nbs, s.sigma);
        values.resize(base.dim() * base.width(), 0.0);
        out.push(DocMatrix::from_dense(
            format!("{}#smote{n}", base.id),
            base.dim(),
            base.width(),
            &values,
            eff,
        )?);
    }
    Ok(out)
}

fn check_lengths(n_samples: usize, n_labels: usize) -> Result<()> {
    if n_samples != n_labels {
        return Err(Error::Shape(format!("{n_samples} samples but {n_labels} labels")));
    }
    Ok(())
}

pub fn smote(samples: &[Vec<f64>], labels: &[usize], config: &ResampleConfig) -> Result<Oversampled<Vec<f64>>> {
    check_lengths(samples.len(), labels.len())?;
    if let Some(first) = samples.first() {
        if let Some(i) = samples.iter().position(|s| s.len() != first.len()) {
            return Err(Error::Shape(format!(
                "sample {i} has length {}, expected {}",
                samples[i].len(),
                first.len()
            )));
        }
    }
    let plan = plan_smote(labels, config, |i, j| squared_distance(&samples[i], &samples[j]))?;
    let synthetic = synthesize_vectors(samples, &plan);
    Ok(assemble(samples.to_vec(), labels, synthetic, plan))
}

/// Squared Euclidean distance between the flattened `d × r` matrices.
pub fn matrix_distance(a: &DocMatrix, b: &DocMatrix) -> f64 {
    let (x, y) = (a.active(), b.active());
    let common = x.len().min(y.len());
    squared_distance(&x[..common], &y[..common])
        + x[common..].iter().map(|v| v * v).sum::<f64>()
        + y[common..].iter().map(|v| v * v).sum::<f64>()
}

pub fn smote_matrices(samples: &[DocMatrix], labels: &[usize], config: &ResampleConfig) -> Result<Oversampled<DocMatrix>> {
    check_lengths(samples.len(), labels.len())?;
    if let Some(first) = samples.first() {
        if let Some(bad) = samples
            .iter()
            .find(|m| (m.dim(), m.width()) != (first.dim(), first.width()))
        {
            return Err(Error::Shape(format!(
                "matrix `{}` is {}×{}, expected {}×{}",
                bad.id,
                bad.dim(),
                bad.width(),
                first.dim(),
                first.width()
            )));
        }
    }
    let plan = plan_smote(labels, config, |i, j| matrix_distance(&samples[i], &samples[j]))?;
    let synthetic = synthesize_matrices(samples, &plan)?;
    Ok(assemble(samples.to_vec(), labels, synthetic, plan))
}

fn assemble<T>(mut samples: Vec<T>, labels: &[usize], synthetic: Vec<T>, plan: SmotePlan) -> Oversampled<T> {
    let original_count = samples.len();
    let mut labels = labels.to_vec();
    labels.extend(std::iter::repeat_n(plan.minority_label, synthetic.len()));
    samples.extend(synthetic);
    Oversampled {
        samples,
        labels,
        original_count,
        plan,
    }
}
