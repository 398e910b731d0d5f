use std::collections::HashSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::Gender;
use crate::error::{Error, Result};
use crate::nncore::rng_from_seed;

/// A stratified partition of users into `k` test folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub seed: u64,
    pub folds: Vec<Vec<String>>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    pub fn test_users(&self, fold: usize) -> &[String] {
        &self.folds[fold]
    }

    /// Every user outside `fold`, in fold order.
    pub fn train_users(&self, fold: usize) -> Vec<String> {
        self.folds
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != fold)
            .flat_map(|(_, f)| f.iter().cloned())
            .collect()
    }
}

/// Shuffles each class, lays the classes end to end and deals the result
/// round-robin into `k` folds. Each class and each fold size then differ by
/// at most one between folds.
pub fn stratified_kfold(users: &[(String, Gender)], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    let mut seen = HashSet::new();
    for (id, _) in users {
        if !seen.insert(id.as_str()) {
            return Err(Error::Data(format!("duplicate user `{id}` in fold assignment")));
        }
    }
    let mut rng = rng_from_seed(seed);
    let mut dealt = Vec::with_capacity(users.len());
    for g in Gender::ALL {
        let mut members: Vec<&String> = users.iter().filter(|(_, x)| *x == g).map(|(id, _)| id).collect();
        if members.len() < k {
            return Err(Error::Data(format!(
                "class `{g}` has {} users, fewer than {k} folds",
                members.len()
            )));
        }
        members.sort();
        members.shuffle(&mut rng);
        dealt.extend(members);
    }
    let mut folds = vec![Vec::new(); k];
    for (i, id) in dealt.into_iter().enumerate() {
        folds[i % k].push(id.clone());
    }
    Ok(FoldPlan { seed, folds })
}
