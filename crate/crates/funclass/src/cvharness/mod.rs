//! The nested cross-validation protocol.
//!
//! A single seeded [`FoldPlan`] (10 outer folds, 5 inner folds per outer
//! fold by default) drives every weak learner and every ensemble of a run:
//! hyperparameters tune on the inner splits, the outer folds estimate
//! generalisation accuracy, and an accuracy gate (default 0.55 on mean outer
//! accuracy, as published) picks the ensemble candidates.

mod folds;
mod pipeline;
mod report;

pub use folds::{accuracy, FoldPlan};
pub use pipeline::{
    evaluate_weak, run_pipeline, select_gate, PipelineOutput, WeakEvaluation, WeakFoldOutput,
    WeakJob,
};
pub use report::{
    AuditReport, EnsembleFoldReport, EnsembleReport, GateReport, RunReport, WeakLearnerReport,
};
