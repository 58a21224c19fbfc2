use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::FeatureTable;
use super::tree::{fit_classification, TreeModel};
use crate::error::{Error, Result};
use crate::rng::{derive_rng, derive_seed};

/// Random-forest settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Columns drawn per split.
    pub mtry: usize,
    pub min_leaf: usize,
    pub max_depth: usize,
    /// Test hook: disable bootstrap resampling so a 1-tree forest with
    /// mtry = all reduces to a plain tree.
    pub bootstrap: bool,
}

impl ForestParams {
    pub fn new(n_trees: usize, mtry: usize) -> Self {
        ForestParams { n_trees, mtry, min_leaf: 1, max_depth: usize::MAX, bootstrap: true }
    }
}

/// A bag of classification trees with their bootstrap seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeModel>,
    pub tree_seeds: Vec<u64>,
    pub mtry: usize,
    pub n_classes: usize,
    /// Out-of-bag accuracy on the training rows; absent when bootstrap was
    /// disabled.
    pub oob_accuracy: Option<f64>,
}

/// Fit `n_trees` trees on bootstrap resamples of `rows`, drawing `mtry`
/// columns per split. Trees are built in parallel from per-tree seeds, so
/// the model is identical for any schedule.
pub fn forest_fit(
    features: &FeatureTable,
    labels: &[usize],
    n_classes: usize,
    rows: &[usize],
    params: &ForestParams,
    seed: u64,
) -> Result<ForestModel> {
    if params.mtry == 0 || params.mtry > features.n_cols() {
        return Err(Error::invalid(format!(
            "mtry must be in 1..={}, got {}",
            features.n_cols(),
            params.mtry
        )));
    }
    if params.n_trees == 0 {
        return Err(Error::invalid("forest needs at least one tree"));
    }
    if rows.is_empty() {
        return Err(Error::invalid("cannot fit a forest on zero rows"));
    }

    let tree_seeds: Vec<u64> = (0..params.n_trees)
        .map(|t| derive_seed(seed, &["forest", "tree", &t.to_string()]))
        .collect();

    let fits: Vec<(TreeModel, Vec<usize>)> = tree_seeds
        .par_iter()
        .map(|&tree_seed| {
            let mut rng = derive_rng(tree_seed, &["bootstrap"]);
            let bag: Vec<usize> = if params.bootstrap {
                (0..rows.len()).map(|_| rows[rng.gen_range(0..rows.len())]).collect()
            } else {
                rows.to_vec()
            };
            let mut split_rng = derive_rng(tree_seed, &["splits"]);
            let tree = fit_classification(
                features,
                labels,
                n_classes,
                &bag,
                params.max_depth,
                params.min_leaf,
                Some(params.mtry),
                &mut Some(&mut split_rng),
            )?;
            Ok((tree, bag))
        })
        .collect::<Result<Vec<_>>>()?;

    let oob_accuracy = if params.bootstrap {
        let mut votes = vec![vec![0.0; n_classes]; rows.len()];
        let mut covered = vec![false; rows.len()];
        for (tree, bag) in &fits {
            for (pos, &row) in rows.iter().enumerate() {
                if !bag.contains(&row) {
                    let probs = tree.leaf_value(&features.row(row));
                    for (v, p) in votes[pos].iter_mut().zip(probs) {
                        *v += p;
                    }
                    covered[pos] = true;
                }
            }
        }
        let mut correct = 0usize;
        let mut total = 0usize;
        for (pos, &row) in rows.iter().enumerate() {
            if covered[pos] {
                let mut rng = derive_rng(seed, &["forest", "oob", &row.to_string()]);
                let pred = crate::weaklearners::fknn_predict(&votes[pos], &mut rng);
                correct += usize::from(pred == labels[row]);
                total += 1;
            }
        }
        (total > 0).then(|| correct as f64 / total as f64)
    } else {
        None
    };

    Ok(ForestModel {
        trees: fits.into_iter().map(|(t, _)| t).collect(),
        tree_seeds,
        mtry: params.mtry,
        n_classes,
        oob_accuracy,
    })
}

/// Mean of the per-tree leaf frequency vectors.
pub fn forest_predict(model: &ForestModel, row: &[f64]) -> Vec<f64> {
    let mut probs = vec![0.0; model.n_classes];
    for tree in &model.trees {
        for (p, v) in probs.iter_mut().zip(tree.leaf_value(row)) {
            *p += v;
        }
    }
    let n = model.trees.len() as f64;
    probs.iter_mut().for_each(|p| *p /= n);
    probs
}
