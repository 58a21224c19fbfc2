//! Run configuration: one JSON document drives the whole pipeline.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ensemble::SuperGrids;
use crate::error::{Error, Result};
use crate::funcdata::{PreprocessSettings, CANONICAL_MEASURES};
use crate::rng::fingerprint;
use crate::semimetrics::SemiMetricSpec;
use crate::weaklearners::{Kernel, WeakLearnerBase};

/// Input file locations. Relative paths are resolved against the config
/// file's directory by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub trajectories: PathBuf,
    pub labels: PathBuf,
    #[serde(default)]
    pub aoi: Option<PathBuf>,
    #[serde(default)]
    pub external_measures: Option<PathBuf>,
}

/// Weak-learner settings: which estimator bases to build per semi-metric and
/// the tuning grids (None = derive the defaults from the data).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakConfig {
    pub bases: Vec<WeakLearnerBase>,
    pub kernel: Kernel,
    #[serde(default)]
    pub k_grid: Option<Vec<usize>>,
    #[serde(default)]
    pub h_grid: Option<Vec<f64>>,
}

impl Default for WeakConfig {
    fn default() -> Self {
        WeakConfig {
            bases: vec![WeakLearnerBase::Fknn],
            kernel: Kernel::Gaussian,
            k_grid: None,
            h_grid: None,
        }
    }
}

/// Where the accuracy gate reads its per-learner accuracy from.
///
/// `Outer` reproduces the published protocol (and couples the loops through
/// the gate); `Inner` is the leakage-free variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateMode {
    Outer,
    Inner,
}

/// Ensemble-stage settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    /// Weak learners at or above this mean accuracy become ensemble
    /// candidates.
    pub gate_threshold: f64,
    pub gate_mode: GateMode,
    pub grids: SuperGrids,
    /// Measure covariates appended for type II ensembles.
    pub type2_measures: Vec<String>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            gate_threshold: 0.55,
            gate_mode: GateMode::Outer,
            grids: SuperGrids::default(),
            type2_measures: CANONICAL_MEASURES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Nested cross-validation shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldConfig {
    pub outer: usize,
    pub inner: usize,
}

impl Default for FoldConfig {
    fn default() -> Self {
        FoldConfig { outer: 10, inner: 5 }
    }
}

/// The full run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub version: u32,
    pub data: DataConfig,
    pub preprocess: PreprocessSettings,
    /// Collapse consecutive repeated symbols before Levenshtein.
    #[serde(default)]
    pub levenshtein_collapse_repeats: bool,
    pub semimetrics: Vec<SemiMetricSpec>,
    pub weak: WeakConfig,
    pub ensemble: EnsembleConfig,
    pub folds: FoldConfig,
    /// Master seed; every random decision derives from it. Required — there
    /// is no wall-clock default.
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl RunConfig {
    /// A ready-to-edit default configuration pointing at the given data
    /// files.
    pub fn default_with(trajectories: PathBuf, labels: PathBuf, out_dir: PathBuf, seed: u64) -> Self {
        RunConfig {
            version: 1,
            data: DataConfig { trajectories, labels, aoi: None, external_measures: None },
            preprocess: PreprocessSettings::default(),
            levenshtein_collapse_repeats: false,
            semimetrics: default_roster(),
            weak: WeakConfig::default(),
            ensemble: EnsembleConfig::default(),
            folds: FoldConfig::default(),
            seed,
            out_dir,
        }
    }

    pub fn from_json(text: &str) -> Result<RunConfig> {
        let config: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("config serializes");
        text.push('\n');
        text
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        let mut config = RunConfig::from_json(&text)?;
        if let Some(dir) = path.parent() {
            config.resolve_paths(dir);
        }
        Ok(config)
    }

    /// Interpret relative data paths against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        resolve(&mut self.data.trajectories);
        resolve(&mut self.data.labels);
        if let Some(p) = self.data.aoi.as_mut() {
            if p.is_relative() {
                *p = base.join(&p);
            }
        }
        if let Some(p) = self.data.external_measures.as_mut() {
            if p.is_relative() {
                *p = base.join(&p);
            }
        }
        resolve(&mut self.out_dir);
    }

    pub fn validate(&self) -> Result<()> {
        if self.semimetrics.is_empty() {
            return Err(Error::config("semi-metric roster is empty"));
        }
        if self.weak.bases.is_empty() {
            return Err(Error::config("no weak-learner base configured"));
        }
        if !(0.0..=1.0).contains(&self.ensemble.gate_threshold) {
            return Err(Error::config("gate threshold must lie in [0,1]"));
        }
        if self.folds.outer < 2 || self.folds.inner < 2 {
            return Err(Error::config("need at least 2 outer and 2 inner folds"));
        }
        if self.preprocess.grid_size < 2 {
            return Err(Error::config("normalised grid size must be at least 2"));
        }
        if let Some(grid) = &self.weak.k_grid {
            if grid.is_empty() || grid.contains(&0) {
                return Err(Error::config("k grid must be nonempty with positive entries"));
            }
        }
        if let Some(grid) = &self.weak.h_grid {
            if grid.is_empty() || grid.iter().any(|&h| !(h > 0.0)) {
                return Err(Error::config("h grid must be nonempty with positive entries"));
            }
        }
        Ok(())
    }

    /// Stable fingerprint of the canonical JSON serialisation.
    pub fn fingerprint(&self) -> String {
        fingerprint(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

/// The default semi-metric roster: a representative pick across all five
/// families at derivative orders 0..2 (AOI-based entries appear only when a
/// partition is configured; see `with_aoi_roster`).
pub fn default_roster() -> Vec<SemiMetricSpec> {
    let names: &[(&str, usize)] = &[
        ("L1", 0),
        ("L2", 0),
        ("L2", 1),
        ("L4", 0),
        ("dcor", 0),
        ("dtw", 0),
        ("frechet", 0),
        ("hausdorff", 0),
        ("mean", 0),
        ("mean", 1),
        ("globMax", 0),
        ("globMax-x", 0),
        ("globMax-y", 0),
        ("globMin", 0),
        ("globRange", 0),
        ("measure:RT", 0),
        ("measure:hovers", 0),
        ("measure:hover_time", 0),
        ("measure:y_flips", 0),
        ("measure:flips2d", 0),
        ("measure:length", 0),
    ];
    names
        .iter()
        .map(|(name, a)| SemiMetricSpec::parse(name, *a).expect("default roster parses"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_config() -> RunConfig {
        RunConfig::default_with(
            PathBuf::from("traj.csv"),
            PathBuf::from("labels.csv"),
            PathBuf::from("out"),
            42,
        )
    }

    #[test]
    fn round_trip_is_identity() {
        let config = sample_config();
        let json = config.to_json();
        let back = RunConfig::from_json(&json).unwrap();
        assert_eq!(config, back);
        assert_eq!(back.to_json(), json);
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = sample_config();
        let mut b = sample_config();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.seed = 43;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn validation_catches_bad_configs() {
        let mut config = sample_config();
        config.semimetrics.clear();
        assert!(config.validate().is_err());

        let mut config = sample_config();
        config.ensemble.gate_threshold = 1.5;
        assert!(config.validate().is_err());

        let mut config = sample_config();
        config.folds.outer = 1;
        assert!(config.validate().is_err());
    }

    #[test]
    fn missing_seed_is_rejected() {
        let mut value: serde_json::Value = serde_json::from_str(&sample_config().to_json()).unwrap();
        value.as_object_mut().unwrap().remove("seed");
        assert!(RunConfig::from_json(&value.to_string()).is_err());
    }

    #[test]
    fn relative_paths_resolve_against_base() {
        let mut config = sample_config();
        config.resolve_paths(Path::new("/base"));
        assert_eq!(config.data.trajectories, PathBuf::from("/base/traj.csv"));
        assert_eq!(config.out_dir, PathBuf::from("/base/out"));
    }
}
