use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weaklearners::ProbMatrix;

/// Where a feature column came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnProvenance {
    /// Probability of `class` estimated by the weak learner `learner`.
    LearnerProb { learner: String, class: usize },
    /// A movement-measure covariate (type II ensembles).
    Measure { name: String },
}

impl ColumnProvenance {
    pub fn label(&self) -> String {
        match self {
            ColumnProvenance::LearnerProb { learner, class } => format!("{learner}#p{class}"),
            ColumnProvenance::Measure { name } => format!("measure#{name}"),
        }
    }
}

/// Column-major design matrix for the super-learners: weak-learner class
/// probabilities (one redundant class column dropped for binary problems)
/// plus, for type II ensembles, measure covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    columns: Vec<(ColumnProvenance, Vec<f64>)>,
    n_rows: usize,
}

impl FeatureTable {
    pub fn from_columns(columns: Vec<(ColumnProvenance, Vec<f64>)>) -> Result<Self> {
        let n_rows = columns.first().map(|(_, c)| c.len()).unwrap_or(0);
        if columns.is_empty() || n_rows == 0 {
            return Err(Error::invalid("feature table needs at least one nonempty column"));
        }
        if columns.iter().any(|(_, c)| c.len() != n_rows) {
            return Err(Error::invalid("feature columns have unequal lengths"));
        }
        Ok(FeatureTable { columns, n_rows })
    }

    /// Build probability columns for the given learners. For binary problems
    /// only the class-0 probability is kept per learner (the other column is
    /// its exact complement).
    pub fn from_probs(learner_ids: &[String], probs: &[&ProbMatrix]) -> Result<Self> {
        if learner_ids.len() != probs.len() || probs.is_empty() {
            return Err(Error::invalid("learner ids and probability matrices disagree"));
        }
        let n_rows = probs[0].n_rows();
        let n_classes = probs[0].n_classes;
        if probs.iter().any(|p| p.n_rows() != n_rows || p.n_classes != n_classes) {
            return Err(Error::invalid("probability matrices are misaligned"));
        }
        let kept_classes = if n_classes == 2 { 1 } else { n_classes };
        let mut columns = Vec::with_capacity(learner_ids.len() * kept_classes);
        for (id, matrix) in learner_ids.iter().zip(probs) {
            for class in 0..kept_classes {
                let col: Vec<f64> = (0..n_rows).map(|i| matrix.row(i)[class]).collect();
                columns.push((
                    ColumnProvenance::LearnerProb { learner: id.clone(), class },
                    col,
                ));
            }
        }
        FeatureTable::from_columns(columns)
    }

    /// Append measure covariate columns.
    pub fn append_measures(&mut self, measures: &[(String, Vec<f64>)]) -> Result<()> {
        for (name, col) in measures {
            if col.len() != self.n_rows {
                return Err(Error::invalid(format!(
                    "measure column '{name}' has {} rows, expected {}",
                    col.len(),
                    self.n_rows
                )));
            }
            self.columns
                .push((ColumnProvenance::Measure { name: name.clone() }, col.clone()));
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.columns[col].1[row]
    }

    pub fn column(&self, col: usize) -> &[f64] {
        &self.columns[col].1
    }

    pub fn provenance(&self) -> Vec<ColumnProvenance> {
        self.columns.iter().map(|(p, _)| p.clone()).collect()
    }

    /// Materialise one dense row in column order.
    pub fn row(&self, row: usize) -> Vec<f64> {
        self.columns.iter().map(|(_, c)| c[row]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_probs_drop_the_redundant_column() {
        let a = ProbMatrix::new(vec![0.9, 0.1, 0.2, 0.8], 2).unwrap();
        let b = ProbMatrix::new(vec![0.5, 0.5, 0.6, 0.4], 2).unwrap();
        let t = FeatureTable::from_probs(&["wl1".into(), "wl2".into()], &[&a, &b]).unwrap();
        assert_eq!(t.n_cols(), 2);
        assert_eq!(t.n_rows(), 2);
        assert_eq!(t.value(0, 0), 0.9);
        assert_eq!(t.value(1, 1), 0.6);
        assert_eq!(t.row(0), vec![0.9, 0.5]);
    }

    #[test]
    fn multiclass_probs_keep_all_columns() {
        let a = ProbMatrix::new(vec![0.2, 0.3, 0.5, 0.1, 0.1, 0.8], 3).unwrap();
        let t = FeatureTable::from_probs(&["wl".into()], &[&a]).unwrap();
        assert_eq!(t.n_cols(), 3);
    }

    #[test]
    fn measures_append_with_provenance() {
        let a = ProbMatrix::new(vec![0.9, 0.1, 0.2, 0.8], 2).unwrap();
        let mut t = FeatureTable::from_probs(&["wl".into()], &[&a]).unwrap();
        t.append_measures(&[("RT".into(), vec![100.0, 200.0])]).unwrap();
        assert_eq!(t.n_cols(), 2);
        assert_eq!(t.value(1, 1), 200.0);
        assert_eq!(t.provenance()[1].label(), "measure#RT");
        assert!(t.append_measures(&[("bad".into(), vec![1.0])]).is_err());
    }

    #[test]
    fn misaligned_matrices_are_rejected() {
        let a = ProbMatrix::new(vec![0.9, 0.1], 2).unwrap();
        let b = ProbMatrix::new(vec![0.5, 0.5, 0.6, 0.4], 2).unwrap();
        assert!(FeatureTable::from_probs(&["a".into(), "b".into()], &[&a, &b]).is_err());
    }
}
