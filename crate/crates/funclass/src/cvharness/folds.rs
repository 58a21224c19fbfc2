use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_rng, fingerprint};

/// Fixed nested-CV split assignments, shared by every learner and ensemble
/// of a run.
///
/// `outer[o]` holds the sample indices of outer test fold `o`; `inner[o][f]`
/// partitions the complement of `outer[o]`. Regeneration from the same
/// (ids, labels, shape, seed) is byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub seed: u64,
    pub ids: Vec<String>,
    pub outer: Vec<Vec<usize>>,
    pub inner: Vec<Vec<Vec<usize>>>,
}

/// Stratified round-robin assignment: within each class, shuffled members
/// are dealt to folds in turn.
fn stratified_folds(
    indices: &[usize],
    labels: &[usize],
    k: usize,
    seed: u64,
    path: &[&str],
) -> Vec<Vec<usize>> {
    let mut folds = vec![Vec::new(); k];
    let max_class = indices.iter().map(|&i| labels[i]).max().unwrap_or(0);
    for class in 0..=max_class {
        let mut members: Vec<usize> = indices.iter().copied().filter(|&i| labels[i] == class).collect();
        let mut rng_path: Vec<&str> = path.to_vec();
        let class_str = class.to_string();
        rng_path.push(&class_str);
        members.shuffle(&mut derive_rng(seed, &rng_path));
        for (pos, idx) in members.into_iter().enumerate() {
            folds[pos % k].push(idx);
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    folds
}

impl FoldPlan {
    /// Build the stratified nested plan.
    ///
    /// Every class must have at least `k_out` members so each outer fold can
    /// be stratified; each outer complement must support `k_in` nonempty
    /// inner folds.
    pub fn make(
        ids: &[String],
        labels: &[usize],
        k_out: usize,
        k_in: usize,
        seed: u64,
    ) -> Result<FoldPlan> {
        let n = ids.len();
        if labels.len() != n {
            return Err(Error::invalid("ids and labels disagree in length"));
        }
        if n < k_out || k_out < 2 || k_in < 2 {
            return Err(Error::invalid(format!(
                "cannot split {n} samples into {k_out} outer / {k_in} inner folds"
            )));
        }
        let n_classes = labels.iter().max().map(|&m| m + 1).unwrap_or(0);
        for class in 0..n_classes {
            let count = labels.iter().filter(|&&l| l == class).count();
            if count < k_out {
                return Err(Error::invalid(format!(
                    "class {class} has only {count} members, need at least {k_out} for stratified outer folds"
                )));
            }
        }

        let all: Vec<usize> = (0..n).collect();
        let outer = stratified_folds(&all, labels, k_out, seed, &["folds", "outer"]);
        let mut inner = Vec::with_capacity(k_out);
        for (o, outer_fold) in outer.iter().enumerate() {
            let complement: Vec<usize> =
                (0..n).filter(|i| !outer_fold.contains(i)).collect();
            if complement.len() < k_in {
                return Err(Error::invalid(format!(
                    "outer fold {o} leaves only {} training samples for {k_in} inner folds",
                    complement.len()
                )));
            }
            let o_str = o.to_string();
            let folds =
                stratified_folds(&complement, labels, k_in, seed, &["folds", "inner", &o_str]);
            if folds.iter().any(|f| f.is_empty()) {
                return Err(Error::invalid(format!(
                    "outer fold {o} produces an empty inner fold"
                )));
            }
            inner.push(folds);
        }
        Ok(FoldPlan { seed, ids: ids.to_vec(), outer, inner })
    }

    pub fn n_samples(&self) -> usize {
        self.ids.len()
    }

    /// Sorted training indices for one outer fold (the fold's complement).
    pub fn outer_train(&self, o: usize) -> Vec<usize> {
        let fold = &self.outer[o];
        (0..self.n_samples()).filter(|i| !fold.contains(i)).collect()
    }

    /// Stable fingerprint over ids and every fold assignment.
    pub fn fingerprint(&self) -> String {
        fingerprint(serde_json::to_string(self).expect("plan serializes").as_bytes())
    }
}

/// Proportion of correctly classified observations.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() || predicted.is_empty() {
        return Err(Error::invalid(format!(
            "accuracy needs equal nonempty lengths, got {} vs {}",
            predicted.len(),
            truth.len()
        )));
    }
    let correct = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(correct as f64 / predicted.len() as f64)
}
