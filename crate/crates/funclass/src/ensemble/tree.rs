use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::FeatureTable;
use crate::error::{Error, Result};

/// Arena node of a binary decision tree with leaf payload `L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node<L> {
    Leaf { value: L },
    Split { col: usize, threshold: f64, left: usize, right: usize },
}

/// A binary tree stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree<L> {
    pub nodes: Vec<Node<L>>,
}

impl<L> Tree<L> {
    /// Index of the leaf a dense feature row falls into.
    pub fn leaf_for(&self, row: &[f64]) -> usize {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { .. } => return idx,
                Node::Split { col, threshold, left, right } => {
                    idx = if row[*col] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn leaf_value(&self, row: &[f64]) -> &L {
        match &self.nodes[self.leaf_for(row)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("leaf_for returns a leaf"),
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

/// A classification tree: leaves hold class-frequency vectors.
pub type TreeModel = Tree<Vec<f64>>;
/// A regression tree: leaves hold real values.
pub type RegressionTree = Tree<f64>;

/// The best split found on one column: (threshold, weighted child impurity).
struct ColumnSplit {
    threshold: f64,
    impurity: f64,
}

/// Sweep one sorted column for the impurity-minimising threshold.
/// `stats` accumulates left-side statistics; candidates sit at midpoints of
/// consecutive distinct values.
fn best_column_split<S: SplitStats>(
    values: &mut Vec<(f64, S::Item)>,
    min_leaf: usize,
) -> Option<ColumnSplit> {
    values.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));
    let n = values.len();
    let mut left = S::empty();
    let mut right = S::empty();
    for (_, item) in values.iter() {
        right.add(item);
    }
    let mut best: Option<ColumnSplit> = None;
    for i in 0..n - 1 {
        left.add(&values[i].1);
        right.remove(&values[i].1);
        if values[i + 1].0 <= values[i].0 {
            continue;
        }
        let n_left = i + 1;
        let n_right = n - n_left;
        if n_left < min_leaf || n_right < min_leaf {
            continue;
        }
        let impurity =
            (n_left as f64 * left.impurity() + n_right as f64 * right.impurity()) / n as f64;
        let threshold = 0.5 * (values[i].0 + values[i + 1].0);
        // Strict improvement keeps the lowest threshold on ties.
        if best.as_ref().map(|b| impurity < b.impurity).unwrap_or(true) {
            best = Some(ColumnSplit { threshold, impurity });
        }
    }
    best
}

trait SplitStats {
    type Item: Copy;
    fn empty() -> Self;
    fn add(&mut self, item: &Self::Item);
    fn remove(&mut self, item: &Self::Item);
    /// Mean per-sample impurity of this side (Gini or variance).
    fn impurity(&self) -> f64;
}

struct GiniStats {
    counts: Vec<f64>,
    n: f64,
}

impl SplitStats for GiniStats {
    type Item = usize;
    fn empty() -> Self {
        GiniStats { counts: Vec::new(), n: 0.0 }
    }
    fn add(&mut self, item: &usize) {
        if *item >= self.counts.len() {
            self.counts.resize(item + 1, 0.0);
        }
        self.counts[*item] += 1.0;
        self.n += 1.0;
    }
    fn remove(&mut self, item: &usize) {
        self.counts[*item] -= 1.0;
        self.n -= 1.0;
    }
    fn impurity(&self) -> f64 {
        if self.n == 0.0 {
            return 0.0;
        }
        let sum_sq: f64 = self.counts.iter().map(|c| c * c).sum();
        1.0 - sum_sq / (self.n * self.n)
    }
}

struct VarianceStats {
    sum: f64,
    sum_sq: f64,
    n: f64,
}

impl SplitStats for VarianceStats {
    type Item = f64;
    fn empty() -> Self {
        VarianceStats { sum: 0.0, sum_sq: 0.0, n: 0.0 }
    }
    fn add(&mut self, item: &f64) {
        self.sum += item;
        self.sum_sq += item * item;
        self.n += 1.0;
    }
    fn remove(&mut self, item: &f64) {
        self.sum -= item;
        self.sum_sq -= item * item;
        self.n -= 1.0;
    }
    fn impurity(&self) -> f64 {
        if self.n == 0.0 {
            return 0.0;
        }
        (self.sum_sq - self.sum * self.sum / self.n).max(0.0) / self.n
    }
}

/// Columns considered at one node: all, or a seeded draw of `mtry`.
fn candidate_columns(n_cols: usize, mtry: Option<usize>, rng: &mut Option<&mut ChaCha8Rng>) -> Vec<usize> {
    match (mtry, rng) {
        (Some(m), Some(rng)) if m < n_cols => {
            let mut cols: Vec<usize> = (0..n_cols).collect();
            cols.shuffle(rng);
            cols.truncate(m);
            cols.sort_unstable();
            cols
        }
        _ => (0..n_cols).collect(),
    }
}

struct TreeBuilder<'a> {
    features: &'a FeatureTable,
    max_depth: usize,
    min_leaf: usize,
    mtry: Option<usize>,
}

impl<'a> TreeBuilder<'a> {
    /// Find the impurity-minimising (column, threshold) over the candidate
    /// columns; ties prefer the lower column index, then the lower threshold.
    fn best_split<S: SplitStats>(
        &self,
        rows: &[usize],
        item_of: &dyn Fn(usize) -> S::Item,
        rng: &mut Option<&mut ChaCha8Rng>,
    ) -> Option<(usize, f64, f64)> {
        let cols = candidate_columns(self.features.n_cols(), self.mtry, rng);
        let mut best: Option<(usize, f64, f64)> = None;
        for col in cols {
            let mut values: Vec<(f64, S::Item)> = rows
                .iter()
                .map(|&r| (self.features.value(r, col), item_of(r)))
                .collect();
            if let Some(split) = best_column_split::<S>(&mut values, self.min_leaf) {
                let better = best
                    .as_ref()
                    .map(|&(_, _, imp)| split.impurity < imp)
                    .unwrap_or(true);
                if better {
                    best = Some((col, split.threshold, split.impurity));
                }
            }
        }
        best
    }

    fn build<S, L>(
        &self,
        nodes: &mut Vec<Node<L>>,
        rows: Vec<usize>,
        depth: usize,
        item_of: &dyn Fn(usize) -> S::Item,
        leaf_of: &dyn Fn(&[usize]) -> L,
        pure: &dyn Fn(&[usize]) -> bool,
        rng: &mut Option<&mut ChaCha8Rng>,
    ) -> usize
    where
        S: SplitStats,
    {
        let make_leaf = depth >= self.max_depth || rows.len() < 2 * self.min_leaf || pure(&rows);
        let split = if make_leaf { None } else { self.best_split::<S>(&rows, item_of, rng) };
        match split {
            None => {
                nodes.push(Node::Leaf { value: leaf_of(&rows) });
                nodes.len() - 1
            }
            Some((col, threshold, _)) => {
                let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
                    .into_iter()
                    .partition(|&r| self.features.value(r, col) <= threshold);
                let idx = nodes.len();
                nodes.push(Node::Split { col, threshold, left: 0, right: 0 });
                let left = self.build::<S, L>(nodes, left_rows, depth + 1, item_of, leaf_of, pure, rng);
                let right = self.build::<S, L>(nodes, right_rows, depth + 1, item_of, leaf_of, pure, rng);
                if let Node::Split { left: l, right: r, .. } = &mut nodes[idx] {
                    *l = left;
                    *r = right;
                }
                idx
            }
        }
    }
}

/// Fit a classification tree by greedy Gini minimisation.
///
/// Split candidates sit at midpoints of consecutive distinct column values;
/// leaves store class-frequency vectors. `max_depth` 0 yields the root leaf
/// with the class priors.
pub fn tree_fit(
    features: &FeatureTable,
    labels: &[usize],
    n_classes: usize,
    rows: &[usize],
    max_depth: usize,
    min_leaf: usize,
) -> Result<TreeModel> {
    fit_classification(features, labels, n_classes, rows, max_depth, min_leaf, None, &mut None)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn fit_classification(
    features: &FeatureTable,
    labels: &[usize],
    n_classes: usize,
    rows: &[usize],
    max_depth: usize,
    min_leaf: usize,
    mtry: Option<usize>,
    rng: &mut Option<&mut ChaCha8Rng>,
) -> Result<TreeModel> {
    if rows.is_empty() {
        return Err(Error::invalid("cannot fit a tree on zero rows"));
    }
    if min_leaf == 0 {
        return Err(Error::invalid("min_leaf must be at least 1"));
    }
    let builder = TreeBuilder { features, max_depth, min_leaf, mtry };
    let leaf_of = |rows: &[usize]| -> Vec<f64> {
        let mut counts = vec![0.0; n_classes];
        for &r in rows {
            counts[labels[r]] += 1.0;
        }
        let n = rows.len() as f64;
        counts.iter_mut().for_each(|c| *c /= n);
        counts
    };
    let pure = |rows: &[usize]| rows.iter().all(|&r| labels[r] == labels[rows[0]]);
    let mut nodes = Vec::new();
    builder.build::<GiniStats, Vec<f64>>(
        &mut nodes,
        rows.to_vec(),
        0,
        &|r| labels[r],
        &leaf_of,
        &pure,
        rng,
    );
    Ok(Tree { nodes })
}

/// Fit a regression tree by greedy variance minimisation; leaves hold the
/// target mean.
pub(crate) fn fit_regression(
    features: &FeatureTable,
    targets: &[f64],
    rows: &[usize],
    max_depth: usize,
    min_leaf: usize,
) -> Result<RegressionTree> {
    if rows.is_empty() {
        return Err(Error::invalid("cannot fit a tree on zero rows"));
    }
    let builder = TreeBuilder { features, max_depth, min_leaf, mtry: None };
    let leaf_of = |rows: &[usize]| -> f64 {
        rows.iter().map(|&r| targets[r]).sum::<f64>() / rows.len() as f64
    };
    let pure = |rows: &[usize]| rows.iter().all(|&r| targets[r] == targets[rows[0]]);
    let mut nodes = Vec::new();
    builder.build::<VarianceStats, f64>(
        &mut nodes,
        rows.to_vec(),
        0,
        &|r| targets[r],
        &leaf_of,
        &pure,
        &mut None,
    );
    Ok(Tree { nodes })
}
