//! Frozen-report regression: a pinned synthetic run must keep producing the
//! committed report bytes. Regenerate with
//! `UPDATE_GOLDEN=1 cargo test -p funclass --test golden` after an
//! intentional behaviour change.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use funclass::config::RunConfig;
use funclass::cvharness::run_pipeline;
use funclass::ensemble::{MtrySpec, SuperGrids};
use funclass::funcdata::io::{build_dataset, load_labels, load_trajectories};
use funclass::funcdata::PreprocessSettings;
use funclass::semimetrics::SemiMetricSpec;
use funclass::synth::{generate, Scenario};

fn golden_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden_report.json")
}

#[test]
fn pinned_amplitude_run_matches_frozen_report() {
    let dir = tempfile::tempdir().unwrap();
    generate(Scenario::Amplitude, 40, 13).write(dir.path()).unwrap();
    let trajs = load_trajectories(&dir.path().join("trajectories.csv")).unwrap();
    let labels = load_labels(&dir.path().join("labels.csv")).unwrap();
    let dataset =
        build_dataset(trajs, &labels, &BTreeMap::new(), &PreprocessSettings::default()).unwrap();

    let mut config = RunConfig::default_with(
        PathBuf::from("trajectories.csv"),
        PathBuf::from("labels.csv"),
        PathBuf::from("out"),
        13,
    );
    config.semimetrics = vec![
        SemiMetricSpec::parse("globMax-x", 0).unwrap(),
        SemiMetricSpec::parse("L2", 0).unwrap(),
        SemiMetricSpec::parse("measure:RT", 0).unwrap(),
    ];
    config.ensemble.grids = SuperGrids {
        rf_n_trees: vec![50],
        rf_mtry: vec![MtrySpec::All],
        gb_n_trees: vec![50],
        gb_shrinkage: vec![0.1],
        gb_depth: vec![2],
    };

    let report = run_pipeline(&config, &dataset, None, None).unwrap().report;
    let json = report.to_json();

    if std::env::var("UPDATE_GOLDEN").is_ok() {
        std::fs::write(golden_path(), &json).unwrap();
        return;
    }
    let frozen = std::fs::read_to_string(golden_path())
        .expect("golden_report.json missing; run with UPDATE_GOLDEN=1 to create it");
    assert_eq!(json, frozen, "report drifted from the frozen golden file");
}
