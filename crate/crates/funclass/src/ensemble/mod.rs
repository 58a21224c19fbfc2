//! Stacked-generalisation ensembles over weak-learner probabilities.
//!
//! Three super-learners combine the first-stage class probabilities: a
//! simplex-constrained linear combination minimising the Brier score (LCE),
//! random forests (RFE) and gradient boosting (GBE). The tree-based
//! ensembles select their weak learners forward, best-first, keeping a
//! candidate only when it strictly improves the shared inner-fold accuracy,
//! and optionally consume movement measures as extra covariates (type II).

mod boost;
mod features;
mod forest;
mod lce;
mod select;
mod tree;

pub use boost::{boost_fit, boost_predict, BinaryBoost, BoostModel, BoostParams};
pub use features::{ColumnProvenance, FeatureTable};
pub use forest::{forest_fit, forest_predict, ForestModel, ForestParams};
pub use lce::{brier_score, lce_fit, lce_predict, project_to_simplex, LceWeights};
pub use select::{
    forward_select, tune_super, MtrySpec, SelectionOutcome, SelectionStep, SuperGrids, SuperKind,
    SuperParams, TunedSuper,
};
pub use tree::{tree_fit, Node, RegressionTree, Tree, TreeModel};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weaklearners::fknn_predict;

/// Which ensemble family a fitted model belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnsembleKind {
    Lce,
    Rfe,
    Gbe,
}

impl EnsembleKind {
    pub fn label(&self) -> &'static str {
        match self {
            EnsembleKind::Lce => "LC",
            EnsembleKind::Rfe => "RF",
            EnsembleKind::Gbe => "GB",
        }
    }
}

/// How movement measures enter: as measure-based weak learners only (I) or
/// as extra super-learner covariates (II). Type II exists only for the
/// tree-based ensembles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnsembleType {
    I,
    II,
}

impl EnsembleType {
    pub fn label(&self) -> &'static str {
        match self {
            EnsembleType::I => "I",
            EnsembleType::II => "II",
        }
    }
}

/// The fitted second stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SuperLearner {
    Lce(LceWeights),
    Forest(ForestModel),
    Boost(BoostModel),
}

/// A fitted ensemble: the ordered weak learners it consumes plus the fitted
/// super-learner and, for type II, the measure covariate order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub kind: EnsembleKind,
    pub ensemble_type: EnsembleType,
    /// Weak-learner ids whose probability vectors feed the model, in feature
    /// order.
    pub selected: Vec<String>,
    pub super_learner: SuperLearner,
    pub n_classes: usize,
    /// Measure covariates appended after the probability features (type II).
    pub measure_names: Vec<String>,
}

impl EnsembleModel {
    pub fn validate(&self) -> Result<()> {
        if self.selected.is_empty() {
            return Err(Error::invalid("ensemble has no selected weak learners"));
        }
        if matches!(self.super_learner, SuperLearner::Lce(_))
            && self.ensemble_type == EnsembleType::II
        {
            return Err(Error::invalid("LCE cannot consume type II covariates"));
        }
        Ok(())
    }
}

/// Predict one observation: route to the fitted super-learner and take the
/// argmax class, breaking exact ties with the supplied stream.
///
/// `learner_probs` must align with `model.selected`; `measures` must align
/// with `model.measure_names` for type II models.
pub fn ensemble_predict(
    model: &EnsembleModel,
    learner_probs: &[&[f64]],
    measures: Option<&[f64]>,
    rng: &mut impl Rng,
) -> Result<(Vec<f64>, usize)> {
    if learner_probs.len() != model.selected.len() {
        return Err(Error::invalid(format!(
            "expected probabilities for {} learners, got {}",
            model.selected.len(),
            learner_probs.len()
        )));
    }
    let probs = match &model.super_learner {
        SuperLearner::Lce(weights) => lce_predict(&weights.weights, learner_probs)?,
        SuperLearner::Forest(_) | SuperLearner::Boost(_) => {
            let row = feature_row(model, learner_probs, measures)?;
            match &model.super_learner {
                SuperLearner::Forest(forest) => forest_predict(forest, &row),
                SuperLearner::Boost(boost) => boost_predict(boost, &row),
                SuperLearner::Lce(_) => unreachable!(),
            }
        }
    };
    let class = fknn_predict(&probs, rng);
    Ok((probs, class))
}

/// Assemble the dense feature row in the training column order: per learner
/// the kept probability columns, then the measure covariates.
pub fn feature_row(
    model: &EnsembleModel,
    learner_probs: &[&[f64]],
    measures: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let kept = if model.n_classes == 2 { 1 } else { model.n_classes };
    let mut row = Vec::with_capacity(model.selected.len() * kept + model.measure_names.len());
    for probs in learner_probs {
        if probs.len() != model.n_classes {
            return Err(Error::invalid("learner probability vector has wrong class count"));
        }
        row.extend_from_slice(&probs[..kept]);
    }
    match (model.measure_names.is_empty(), measures) {
        (true, _) => {}
        (false, Some(values)) if values.len() == model.measure_names.len() => {
            row.extend_from_slice(values);
        }
        (false, _) => {
            return Err(Error::invalid(format!(
                "model expects {} measure covariates",
                model.measure_names.len()
            )));
        }
    }
    Ok(row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use crate::weaklearners::ProbMatrix;

    #[test]
    fn lce_routing_with_vertex_weights_returns_learner_one() {
        let model = EnsembleModel {
            kind: EnsembleKind::Lce,
            ensemble_type: EnsembleType::I,
            selected: vec!["a".into(), "b".into()],
            super_learner: SuperLearner::Lce(LceWeights { weights: vec![1.0, 0.0], brier: 0.0 }),
            n_classes: 2,
            measure_names: vec![],
        };
        let mut rng = derive_rng(0, &["t"]);
        let (probs, class) =
            ensemble_predict(&model, &[&[0.9, 0.1], &[0.1, 0.9]], None, &mut rng).unwrap();
        assert_eq!(probs, vec![0.9, 0.1]);
        assert_eq!(class, 0);
    }

    #[test]
    fn forest_routing_reaches_a_pure_leaf() {
        let a = ProbMatrix::new(vec![0.9, 0.1, 0.1, 0.9, 0.8, 0.2, 0.2, 0.8], 2).unwrap();
        let table = FeatureTable::from_probs(&["a".into()], &[&a]).unwrap();
        let labels = vec![0, 1, 0, 1];
        let tree = tree_fit(&table, &labels, 2, &[0, 1, 2, 3], 4, 1).unwrap();
        let forest = ForestModel {
            trees: vec![tree],
            tree_seeds: vec![0],
            mtry: 1,
            n_classes: 2,
            oob_accuracy: None,
        };
        let model = EnsembleModel {
            kind: EnsembleKind::Rfe,
            ensemble_type: EnsembleType::I,
            selected: vec!["a".into()],
            super_learner: SuperLearner::Forest(forest),
            n_classes: 2,
            measure_names: vec![],
        };
        let mut rng = derive_rng(0, &["t"]);
        let (_, class) = ensemble_predict(&model, &[&[0.85, 0.15]], None, &mut rng).unwrap();
        assert_eq!(class, 0);
        let (_, class) = ensemble_predict(&model, &[&[0.15, 0.85]], None, &mut rng).unwrap();
        assert_eq!(class, 1);
    }

    #[test]
    fn boost_prior_model_predicts_the_majority_class() {
        let a = ProbMatrix::new(vec![0.9, 0.1, 0.1, 0.9, 0.8, 0.2], 2).unwrap();
        let table = FeatureTable::from_probs(&["a".into()], &[&a]).unwrap();
        let labels = vec![1, 1, 0];
        let boost =
            boost_fit(&table, &labels, 2, &[0, 1, 2], &BoostParams::new(0, 0.1, 1)).unwrap();
        let model = EnsembleModel {
            kind: EnsembleKind::Gbe,
            ensemble_type: EnsembleType::I,
            selected: vec!["a".into()],
            super_learner: SuperLearner::Boost(boost),
            n_classes: 2,
            measure_names: vec![],
        };
        let mut rng = derive_rng(0, &["t"]);
        let (_, class) = ensemble_predict(&model, &[&[0.5, 0.5]], None, &mut rng).unwrap();
        assert_eq!(class, 1);
    }

    #[test]
    fn mismatched_learner_sets_are_rejected() {
        let model = EnsembleModel {
            kind: EnsembleKind::Lce,
            ensemble_type: EnsembleType::I,
            selected: vec!["a".into(), "b".into()],
            super_learner: SuperLearner::Lce(LceWeights { weights: vec![0.5, 0.5], brier: 0.0 }),
            n_classes: 2,
            measure_names: vec![],
        };
        let mut rng = derive_rng(0, &["t"]);
        assert!(ensemble_predict(&model, &[&[0.9, 0.1]], None, &mut rng).is_err());
    }

    #[test]
    fn type_two_needs_measures_at_predict_time() {
        let a = ProbMatrix::new(vec![0.9, 0.1, 0.1, 0.9], 2).unwrap();
        let mut table = FeatureTable::from_probs(&["a".into()], &[&a]).unwrap();
        table.append_measures(&[("RT".into(), vec![1.0, 5.0])]).unwrap();
        let labels = vec![0, 1];
        let boost = boost_fit(&table, &labels, 2, &[0, 1], &BoostParams::new(5, 0.1, 1)).unwrap();
        let model = EnsembleModel {
            kind: EnsembleKind::Gbe,
            ensemble_type: EnsembleType::II,
            selected: vec!["a".into()],
            super_learner: SuperLearner::Boost(boost),
            n_classes: 2,
            measure_names: vec!["RT".into()],
        };
        let mut rng = derive_rng(0, &["t"]);
        assert!(ensemble_predict(&model, &[&[0.9, 0.1]], None, &mut rng).is_err());
        assert!(ensemble_predict(&model, &[&[0.9, 0.1]], Some(&[2.0]), &mut rng).is_ok());
    }

    #[test]
    fn lce_type_two_is_invalid() {
        let model = EnsembleModel {
            kind: EnsembleKind::Lce,
            ensemble_type: EnsembleType::II,
            selected: vec!["a".into()],
            super_learner: SuperLearner::Lce(LceWeights { weights: vec![1.0], brier: 0.0 }),
            n_classes: 2,
            measure_names: vec![],
        };
        assert!(model.validate().is_err());
    }
}
