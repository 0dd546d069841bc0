use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Train/validation/test fractions and shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, val: f64, test: f64, seed: u64) -> Result<Self> {
        let spec = Self {
            train,
            val,
            test,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// 80 % train, 10 % validation, 10 % test.
    pub fn standard(seed: u64) -> Self {
        Self {
            train: 0.8,
            val: 0.1,
            test: 0.1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let f = [self.train, self.val, self.test];
        if f.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::Validation(format!(
                "split fractions {f:?} must be >= 0"
            )));
        }
        if (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "split fractions {f:?} must sum to 1"
            )));
        }
        Ok(())
    }
}

/// Disjoint index sets covering `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }
}

/// Seeded shuffle of `0..n`; validation and test get `⌊n·fraction⌋` samples
/// and train keeps the remainder.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Validation("cannot split an empty dataset".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let n_val = (n as f64 * spec.val).floor() as usize;
    let n_test = (n as f64 * spec.test).floor() as usize;
    let n_train = n - n_val - n_test;
    let test = order.split_off(n_train + n_val);
    let val = order.split_off(n_train);
    Ok(Split {
        train: order,
        val,
        test,
    })
}

/// [`split_indices`] applied to a slice.
pub fn split<T: Clone>(data: &[T], spec: &SplitSpec) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let s = split_indices(data.len(), spec)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| data[i].clone()).collect();
    Ok((pick(&s.train), pick(&s.val), pick(&s.test)))
}

/// Fold index of every sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub k: usize,
    pub fold_of: Vec<usize>,
}

impl FoldAssignment {
    pub fn validation_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] == fold)
            .collect()
    }

    pub fn training_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] != fold)
            .collect()
    }

    /// `sizes[class][fold]` for the given labels.
    pub fn class_fold_sizes(&self, labels: &[usize]) -> BTreeMap<usize, Vec<usize>> {
        let mut out: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (&label, &fold) in labels.iter().zip(&self.fold_of) {
            out.entry(label).or_insert_with(|| vec![0; self.k])[fold] += 1;
        }
        out
    }
}

/// Stratified K-fold: each class is shuffled (seeded) and dealt round-robin
/// over the folds, so per-class fold sizes differ by at most one.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k == 0 {
        return Err(Error::Validation("k must be at least 1".into()));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &label) in labels.iter().enumerate() {
        by_class.entry(label).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0; labels.len()];
    for (&class, members) in by_class.iter_mut() {
        if members.len() < k {
            return Err(Error::Stratification {
                class,
                count: members.len(),
                k,
            });
        }
        members.shuffle(&mut rng);
        for (j, &i) in members.iter().enumerate() {
            fold_of[i] = j % k;
        }
    }
    Ok(FoldAssignment { k, fold_of })
}
