use serde::{Deserialize, Serialize};

use super::features::FeatureTable;
use super::tree::{fit_regression, Node, RegressionTree};
use crate::error::{Error, Result};

/// Gradient-boosting settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub n_trees: usize,
    pub shrinkage: f64,
    /// Maximum depth of each stage tree.
    pub interaction_depth: usize,
    pub min_leaf: usize,
}

impl BoostParams {
    pub fn new(n_trees: usize, shrinkage: f64, interaction_depth: usize) -> Self {
        BoostParams { n_trees, shrinkage, interaction_depth, min_leaf: 1 }
    }
}

const MAX_LEAF_VALUE: f64 = 10.0;

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// One binary logistic boosting chain: initial log-odds plus shrunken stage
/// trees fitted to pseudo-residuals with Newton leaf updates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryBoost {
    pub initial_log_odds: f64,
    pub trees: Vec<RegressionTree>,
    pub shrinkage: f64,
}

impl BinaryBoost {
    fn fit(
        features: &FeatureTable,
        positive: &[bool],
        rows: &[usize],
        params: &BoostParams,
    ) -> Result<BinaryBoost> {
        let n_pos = rows.iter().filter(|&&r| positive[r]).count();
        let prior = (n_pos as f64 / rows.len() as f64).clamp(1e-12, 1.0 - 1e-12);
        let initial_log_odds = (prior / (1.0 - prior)).ln();

        let mut score = vec![initial_log_odds; features.n_rows()];
        let mut residual = vec![0.0; features.n_rows()];
        let mut trees = Vec::with_capacity(params.n_trees);
        for _ in 0..params.n_trees {
            for &r in rows {
                residual[r] = f64::from(positive[r]) - sigmoid(score[r]);
            }
            let mut tree =
                fit_regression(features, &residual, rows, params.interaction_depth, params.min_leaf)?;

            // One Newton step per leaf: gamma = sum(residual) / sum(p (1-p)).
            let n_nodes = tree.nodes.len();
            let mut res_sum = vec![0.0; n_nodes];
            let mut hess_sum = vec![0.0; n_nodes];
            for &r in rows {
                let leaf = tree.leaf_for(&features.row(r));
                let p = sigmoid(score[r]);
                res_sum[leaf] += residual[r];
                hess_sum[leaf] += p * (1.0 - p);
            }
            for (idx, node) in tree.nodes.iter_mut().enumerate() {
                if let Node::Leaf { value } = node {
                    *value = if hess_sum[idx] > 1e-12 {
                        (res_sum[idx] / hess_sum[idx]).clamp(-MAX_LEAF_VALUE, MAX_LEAF_VALUE)
                    } else {
                        0.0
                    };
                }
            }
            for &r in rows {
                score[r] += params.shrinkage * tree.leaf_value(&features.row(r));
            }
            trees.push(tree);
        }
        Ok(BinaryBoost { initial_log_odds, trees, shrinkage: params.shrinkage })
    }

    fn score(&self, row: &[f64]) -> f64 {
        self.initial_log_odds
            + self.shrinkage * self.trees.iter().map(|t| t.leaf_value(row)).sum::<f64>()
    }
}

/// Gradient-boosting super-learner: native binary logistic boosting, or
/// one-vs-rest chains for more than two classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    pub n_classes: usize,
    chains: Vec<BinaryBoost>,
}

/// Fit a boosting model. Fully deterministic: stage trees involve no
/// resampling, so the seed only matters through the caller's tie-breaking.
pub fn boost_fit(
    features: &FeatureTable,
    labels: &[usize],
    n_classes: usize,
    rows: &[usize],
    params: &BoostParams,
) -> Result<BoostModel> {
    if rows.is_empty() {
        return Err(Error::invalid("cannot boost on zero rows"));
    }
    if !(params.shrinkage > 0.0) {
        return Err(Error::invalid("shrinkage must be positive"));
    }
    if n_classes < 2 {
        return Err(Error::invalid("boosting needs at least two classes"));
    }
    let chains = if n_classes == 2 {
        let positive: Vec<bool> = labels.iter().map(|&l| l == 1).collect();
        vec![BinaryBoost::fit(features, &positive, rows, params)?]
    } else {
        (0..n_classes)
            .map(|class| {
                let positive: Vec<bool> = labels.iter().map(|&l| l == class).collect();
                BinaryBoost::fit(features, &positive, rows, params)
            })
            .collect::<Result<Vec<_>>>()?
    };
    Ok(BoostModel { n_classes, chains })
}

/// Class probabilities: sigmoid of the score for binary problems, normalised
/// one-vs-rest sigmoids otherwise.
pub fn boost_predict(model: &BoostModel, row: &[f64]) -> Vec<f64> {
    if model.n_classes == 2 {
        let p1 = sigmoid(model.chains[0].score(row));
        vec![1.0 - p1, p1]
    } else {
        let mut scores: Vec<f64> = model.chains.iter().map(|c| sigmoid(c.score(row))).collect();
        let sum: f64 = scores.iter().sum();
        if sum > 0.0 {
            scores.iter_mut().for_each(|s| *s /= sum);
        } else {
            scores = vec![1.0 / model.n_classes as f64; model.n_classes];
        }
        scores
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::features::ColumnProvenance;
    use approx::assert_abs_diff_eq;

    fn table(cols: Vec<Vec<f64>>) -> FeatureTable {
        FeatureTable::from_columns(
            cols.into_iter()
                .enumerate()
                .map(|(i, c)| (ColumnProvenance::Measure { name: format!("f{i}") }, c))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_trees_returns_the_prior() {
        let t = table(vec![vec![0.1, 0.5, 0.9, 0.4]]);
        let labels = vec![0, 1, 1, 1];
        let rows: Vec<usize> = (0..4).collect();
        let model = boost_fit(&t, &labels, 2, &rows, &BoostParams::new(0, 0.1, 2)).unwrap();
        let probs = boost_predict(&model, &[0.3]);
        assert_abs_diff_eq!(probs[1], 0.75, epsilon = 1e-9);
    }

    #[test]
    fn balanced_labels_and_zero_trees_give_fifty_fifty() {
        let t = table(vec![vec![0.1, 0.9]]);
        let labels = vec![0, 1];
        let model = boost_fit(&t, &labels, 2, &[0, 1], &BoostParams::new(0, 0.1, 1)).unwrap();
        let probs = boost_predict(&model, &[0.5]);
        assert_abs_diff_eq!(probs[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(probs[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn separable_feature_reaches_training_accuracy_one() {
        // Frozen regression case: 100 rounds of shrinkage 0.1 stumps on a
        // perfectly separable single feature classify every training row.
        let n = 40;
        let col: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let labels: Vec<usize> = (0..n).map(|i| usize::from(i >= n / 2)).collect();
        let t = table(vec![col.clone()]);
        let rows: Vec<usize> = (0..n).collect();
        let model = boost_fit(&t, &labels, 2, &rows, &BoostParams::new(100, 0.1, 1)).unwrap();
        let correct = (0..n)
            .filter(|&i| {
                let probs = boost_predict(&model, &[col[i]]);
                usize::from(probs[1] > 0.5) == labels[i]
            })
            .count();
        assert_eq!(correct, n);
    }

    #[test]
    fn boosting_is_deterministic() {
        let t = table(vec![
            (0..30).map(|i| (i % 9) as f64).collect(),
            (0..30).map(|i| (i % 4) as f64).collect(),
        ]);
        let labels: Vec<usize> = (0..30).map(|i| usize::from((i % 9) >= 4)).collect();
        let rows: Vec<usize> = (0..30).collect();
        let params = BoostParams::new(25, 0.1, 2);
        let a = boost_fit(&t, &labels, 2, &rows, &params).unwrap();
        let b = boost_fit(&t, &labels, 2, &rows, &params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn one_vs_rest_covers_three_classes() {
        let col: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let labels: Vec<usize> = (0..30).map(|i| i / 10).collect();
        let t = table(vec![col.clone()]);
        let rows: Vec<usize> = (0..30).collect();
        let model = boost_fit(&t, &labels, 3, &rows, &BoostParams::new(50, 0.1, 2)).unwrap();
        for (probe, expected) in [(2.0, 0usize), (15.0, 1), (27.0, 2)] {
            let probs = boost_predict(&model, &[probe]);
            assert_abs_diff_eq!(probs.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
            let argmax = probs
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(argmax, expected, "probe {probe}");
        }
    }
}
