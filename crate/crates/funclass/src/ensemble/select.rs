use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::boost::{boost_fit, boost_predict, BoostParams};
use super::features::FeatureTable;
use super::forest::{forest_fit, forest_predict, ForestParams};
use crate::error::{Error, Result};
use crate::rng::derive_rng;
use crate::weaklearners::{fknn_predict, ProbMatrix};

/// Which super-learner a stacked ensemble trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuperKind {
    RandomForest,
    GradientBoosting,
}

/// Symbolic mtry choices resolved against the feature count at fit time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MtrySpec {
    Sqrt,
    Third,
    All,
}

impl MtrySpec {
    pub fn resolve(&self, n_cols: usize) -> usize {
        let v = match self {
            MtrySpec::Sqrt => (n_cols as f64).sqrt().ceil() as usize,
            MtrySpec::Third => (n_cols as f64 / 3.0).ceil() as usize,
            MtrySpec::All => n_cols,
        };
        v.clamp(1, n_cols)
    }
}

/// Tuning grids for both super-learners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperGrids {
    pub rf_n_trees: Vec<usize>,
    pub rf_mtry: Vec<MtrySpec>,
    pub gb_n_trees: Vec<usize>,
    pub gb_shrinkage: Vec<f64>,
    pub gb_depth: Vec<usize>,
}

impl Default for SuperGrids {
    fn default() -> Self {
        SuperGrids {
            rf_n_trees: vec![100, 300, 500],
            rf_mtry: vec![MtrySpec::Sqrt, MtrySpec::Third, MtrySpec::All],
            gb_n_trees: vec![50, 100, 200],
            gb_shrinkage: vec![0.01, 0.1],
            gb_depth: vec![1, 2, 3],
        }
    }
}

/// A resolved super-learner parameter combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuperParams {
    Rf { n_trees: usize, mtry: MtrySpec },
    Gb { n_trees: usize, shrinkage: f64, depth: usize },
}

/// Best parameter combination and the mean inner accuracy it attained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunedSuper {
    pub params: SuperParams,
    pub mean_inner_accuracy: f64,
}

fn combos(kind: SuperKind, grids: &SuperGrids) -> Vec<SuperParams> {
    match kind {
        SuperKind::RandomForest => grids
            .rf_n_trees
            .iter()
            .flat_map(|&n| grids.rf_mtry.iter().map(move |&m| SuperParams::Rf { n_trees: n, mtry: m }))
            .collect(),
        SuperKind::GradientBoosting => grids
            .gb_n_trees
            .iter()
            .flat_map(|&n| {
                grids.gb_shrinkage.iter().flat_map(move |&s| {
                    grids
                        .gb_depth
                        .iter()
                        .map(move |&d| SuperParams::Gb { n_trees: n, shrinkage: s, depth: d })
                })
            })
            .collect(),
    }
}

/// Fit one parameter combination on `train_rows` and score accuracy on
/// `val_rows`. Tie-break randomness keys on (seed, context, fold, row), so
/// parallel evaluation order cannot change results.
#[allow(clippy::too_many_arguments)]
fn fold_accuracy(
    table: &FeatureTable,
    labels: &[usize],
    n_classes: usize,
    params: SuperParams,
    train_rows: &[usize],
    val_rows: &[usize],
    seed: u64,
    context: &str,
    fold: usize,
) -> Result<f64> {
    let predict: Box<dyn Fn(&[f64]) -> Vec<f64>> = match params {
        SuperParams::Rf { n_trees, mtry } => {
            let fp = ForestParams::new(n_trees, mtry.resolve(table.n_cols()));
            let model = forest_fit(table, labels, n_classes, train_rows, &fp, seed)?;
            Box::new(move |row| forest_predict(&model, row))
        }
        SuperParams::Gb { n_trees, shrinkage, depth } => {
            let model = boost_fit(
                table,
                labels,
                n_classes,
                train_rows,
                &BoostParams::new(n_trees, shrinkage, depth),
            )?;
            Box::new(move |row| boost_predict(&model, row))
        }
    };
    let mut correct = 0usize;
    for &row in val_rows {
        let probs = predict(&table.row(row));
        let mut rng =
            derive_rng(seed, &["super", context, &fold.to_string(), &row.to_string()]);
        correct += usize::from(fknn_predict(&probs, &mut rng) == labels[row]);
    }
    Ok(correct as f64 / val_rows.len().max(1) as f64)
}

/// Grid-search the super-learner over the shared inner folds, maximising
/// mean validation accuracy; ties keep the earliest grid combination.
pub fn tune_super(
    table: &FeatureTable,
    labels: &[usize],
    n_classes: usize,
    inner_folds: &[Vec<usize>],
    kind: SuperKind,
    grids: &SuperGrids,
    seed: u64,
    context: &str,
) -> Result<TunedSuper> {
    let combos = combos(kind, grids);
    if combos.is_empty() {
        return Err(Error::invalid("empty super-learner grid"));
    }
    let tasks: Vec<(usize, usize)> = (0..combos.len())
        .flat_map(|c| (0..inner_folds.len()).map(move |f| (c, f)))
        .collect();
    let accs: Vec<f64> = tasks
        .par_iter()
        .map(|&(c, f)| {
            let val = &inner_folds[f];
            let train: Vec<usize> = inner_folds
                .iter()
                .enumerate()
                .filter(|(g, _)| *g != f)
                .flat_map(|(_, rows)| rows.iter().copied())
                .collect();
            fold_accuracy(table, labels, n_classes, combos[c], &train, val, seed, context, f)
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut best: Option<(usize, f64)> = None;
    for c in 0..combos.len() {
        let mean = (0..inner_folds.len())
            .map(|f| accs[c * inner_folds.len() + f])
            .sum::<f64>()
            / inner_folds.len() as f64;
        if best.map(|(_, b)| mean > b).unwrap_or(true) {
            best = Some((c, mean));
        }
    }
    let (idx, mean_inner_accuracy) = best.expect("nonempty grid");
    Ok(TunedSuper { params: combos[idx], mean_inner_accuracy })
}

/// One row of the forward-selection trail. The first candidate of a pair
/// start carries no accuracy of its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep {
    pub learner: String,
    pub inner_accuracy: Option<f64>,
    pub accepted: bool,
}

/// Result of the forward weak-learner selection for one super-learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    /// Indices into the candidate list, in inclusion order.
    pub selected: Vec<usize>,
    pub trail: Vec<SelectionStep>,
    pub tuned: TunedSuper,
    pub inner_accuracy: f64,
}

fn build_table(
    candidate_ids: &[String],
    candidate_probs: &[&ProbMatrix],
    chosen: &[usize],
    measures: Option<&[(String, Vec<f64>)]>,
) -> Result<FeatureTable> {
    let ids: Vec<String> = chosen.iter().map(|&i| candidate_ids[i].clone()).collect();
    let probs: Vec<&ProbMatrix> = chosen.iter().map(|&i| candidate_probs[i]).collect();
    let mut table = FeatureTable::from_probs(&ids, &probs)?;
    if let Some(measures) = measures {
        table.append_measures(measures)?;
    }
    Ok(table)
}

/// Forward selection of weak learners for a tree-based super-learner.
///
/// Starts from the top two candidates (candidates arrive ordered
/// best-first), then offers each next candidate in turn, re-tuning the
/// super-learner on the same inner splits and keeping the candidate only if
/// the mean inner accuracy strictly increases. A single candidate
/// degenerates to that learner alone.
#[allow(clippy::too_many_arguments)]
pub fn forward_select(
    candidate_ids: &[String],
    candidate_probs: &[&ProbMatrix],
    measures: Option<&[(String, Vec<f64>)]>,
    labels: &[usize],
    n_classes: usize,
    inner_folds: &[Vec<usize>],
    kind: SuperKind,
    grids: &SuperGrids,
    seed: u64,
    context: &str,
) -> Result<SelectionOutcome> {
    if candidate_ids.is_empty() || candidate_ids.len() != candidate_probs.len() {
        return Err(Error::invalid("forward selection needs at least one candidate"));
    }

    let tune_set = |chosen: &[usize], step: usize| -> Result<TunedSuper> {
        let table = build_table(candidate_ids, candidate_probs, chosen, measures)?;
        tune_super(
            &table,
            labels,
            n_classes,
            inner_folds,
            kind,
            grids,
            seed,
            &format!("{context}/step{step}"),
        )
    };

    if candidate_ids.len() == 1 {
        let tuned = tune_set(&[0], 0)?;
        let acc = tuned.mean_inner_accuracy;
        return Ok(SelectionOutcome {
            selected: vec![0],
            trail: vec![SelectionStep {
                learner: candidate_ids[0].clone(),
                inner_accuracy: Some(acc),
                accepted: true,
            }],
            tuned,
            inner_accuracy: acc,
        });
    }

    let mut selected = vec![0usize, 1];
    let mut tuned = tune_set(&selected, 1)?;
    let mut current_acc = tuned.mean_inner_accuracy;
    let mut trail = vec![
        SelectionStep { learner: candidate_ids[0].clone(), inner_accuracy: None, accepted: true },
        SelectionStep {
            learner: candidate_ids[1].clone(),
            inner_accuracy: Some(current_acc),
            accepted: true,
        },
    ];

    for candidate in 2..candidate_ids.len() {
        let mut attempt = selected.clone();
        attempt.push(candidate);
        let candidate_tuned = tune_set(&attempt, candidate)?;
        let acc = candidate_tuned.mean_inner_accuracy;
        let accepted = acc > current_acc;
        trail.push(SelectionStep {
            learner: candidate_ids[candidate].clone(),
            inner_accuracy: Some(acc),
            accepted,
        });
        if accepted {
            selected = attempt;
            tuned = candidate_tuned;
            current_acc = acc;
        }
    }

    Ok(SelectionOutcome { selected, trail, tuned, inner_accuracy: current_acc })
}
