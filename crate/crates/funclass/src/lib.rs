//! Classification of multivariate functional observations (e.g. mouse cursor
//! trajectories) by ensembles of semi-metric-based weak learners.
//!
//! The crate is organised along the processing pipeline:
//!
//! - [`funcdata`]: curve representation and preprocessing (standardisation,
//!   derivatives, time normalisation, scalar movement measures, AOI symbol
//!   sequences and time compositions).
//! - [`semimetrics`]: the distance families used to compare two preprocessed
//!   observations (lock-step, elastic, summary-based, compositional,
//!   symbol-sequence), plus cached pairwise distance matrices.
//! - [`weaklearners`]: distance-based class-probability estimators (fkNN and
//!   kernel-weighted kNCD) with grid tuning.
//! - [`ensemble`]: stacked generalisation over weak-learner probabilities —
//!   a simplex-constrained linear combination, random forests and gradient
//!   boosting, with forward learner selection.
//! - [`cvharness`]: nested cross-validation protocol, accuracy gate, run
//!   reports and the leakage audit.
//! - [`synth`]: deterministic synthetic trajectory generators used by the
//!   CLI and the acceptance suite.

pub mod config;
pub mod cvharness;
pub mod ensemble;
pub mod error;
pub mod funcdata;
pub mod rng;
pub mod semimetrics;
pub mod synth;
pub mod weaklearners;

pub use error::{Error, Result};
