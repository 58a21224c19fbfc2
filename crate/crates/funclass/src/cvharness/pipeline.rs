use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::folds::{accuracy, FoldPlan};
use super::report::{
    AuditReport, EnsembleFoldReport, EnsembleReport, GateReport, RunReport, WeakLearnerReport,
};
use crate::config::{GateMode, RunConfig};
use crate::ensemble::{
    boost_fit, boost_predict, ensemble_predict, feature_row, forest_fit, forest_predict,
    forward_select, lce_fit, lce_predict, BoostParams, EnsembleKind, EnsembleModel, EnsembleType,
    FeatureTable, ForestParams, SuperKind, SuperLearner, SuperParams,
};
use crate::error::{Error, Result};
use crate::funcdata::io::Dataset;
use crate::funcdata::AoiPartition;
use crate::rng::derive_rng;
use crate::semimetrics::{
    dataset_fingerprint, pairwise_matrix_cached, AoiFeatures, DistanceContext, DistanceMatrix,
    Kind, SemiMetricSpec,
};
use crate::weaklearners::{
    default_h_grid, default_k_grid, fknn_predict, tune_param, weak_proba, Kernel, ParamGrid,
    ProbMatrix, TunedParam, WeakLearnerBase, WeakParam,
};

/// One weak-learner build job: an estimator base applied to one semi-metric.
#[derive(Debug, Clone)]
pub struct WeakJob {
    pub base: WeakLearnerBase,
    pub kernel: Kernel,
    pub spec: SemiMetricSpec,
}

impl WeakJob {
    pub fn id(&self) -> String {
        format!("{}:{}", self.base.label(), self.spec.id())
    }
}

/// Per-outer-fold outputs of one weak learner.
#[derive(Debug, Clone)]
pub struct WeakFoldOutput {
    pub tuned: TunedParam,
    /// Cross-validated probabilities for the outer-training rows, aligned
    /// with `FoldPlan::outer_train`.
    pub oof: ProbMatrix,
    /// Probabilities for the outer-test rows (learner refitted on the full
    /// outer-training set).
    pub test: ProbMatrix,
    pub outer_accuracy: f64,
    pub outer_brier: f64,
    pub fallbacks: usize,
    /// Sample indices that entered tuning, for the leakage audit.
    pub tuning_indices: BTreeSet<usize>,
}

/// One weak learner evaluated across every outer fold of the shared plan.
#[derive(Debug, Clone)]
pub struct WeakEvaluation {
    pub id: String,
    pub job: WeakJob,
    pub folds: Vec<WeakFoldOutput>,
    pub mean_inner_accuracy: f64,
    pub mean_outer_accuracy: f64,
    pub mean_outer_brier: f64,
    pub plan_fingerprint: String,
}

fn clamp_k(param: WeakParam, n_train: usize) -> WeakParam {
    match param {
        WeakParam::K(k) => WeakParam::K(k.min(n_train)),
        h => h,
    }
}

fn brier_of(probs: &[f64], label: usize) -> f64 {
    probs
        .iter()
        .enumerate()
        .map(|(l, &p)| {
            let y = f64::from(l == label);
            (y - p) * (y - p)
        })
        .sum()
}

/// Tune, cross-predict and score one weak learner on every outer fold.
///
/// For each outer fold: the parameter is tuned on the fold's shared inner
/// splits; out-of-fold probabilities are produced for every outer-training
/// row (predicting each inner fold from the remaining ones); the tuned
/// learner, refitted conceptually on the full outer-training set, scores the
/// held-out fold.
pub fn evaluate_weak(
    job: &WeakJob,
    matrix: &DistanceMatrix,
    labels: &[usize],
    n_classes: usize,
    plan: &FoldPlan,
    k_grid: Option<&Vec<usize>>,
    h_grid: Option<&Vec<f64>>,
    seed: u64,
) -> Result<WeakEvaluation> {
    let id = job.id();
    let folds: Vec<WeakFoldOutput> = (0..plan.outer.len())
        .into_par_iter()
        .map(|o| {
            let outer_train = plan.outer_train(o);
            let outer_test = &plan.outer[o];
            let inner = &plan.inner[o];

            let grid = match job.base {
                WeakLearnerBase::Fknn => ParamGrid::K(
                    k_grid.cloned().unwrap_or_else(|| default_k_grid(outer_train.len())),
                ),
                WeakLearnerBase::Kncd => ParamGrid::H(h_grid.cloned().unwrap_or_else(|| {
                    default_h_grid(outer_train.iter().enumerate().flat_map(|(pos, &i)| {
                        outer_train[pos + 1..].iter().map(move |&j| matrix.get(i, j))
                    }))
                })),
            };

            let context = format!("{id}/fold{o}");
            let tuned = tune_param(
                job.base,
                job.kernel,
                matrix,
                labels,
                n_classes,
                inner,
                &grid,
                seed,
                &context,
            )?;
            let mut fallbacks = tuned.kncd_fallbacks;

            // Out-of-fold probabilities for the outer-training rows.
            let mut oof_rows = vec![Vec::new(); outer_train.len()];
            for (f, val) in inner.iter().enumerate() {
                let train: Vec<usize> = inner
                    .iter()
                    .enumerate()
                    .filter(|(g, _)| *g != f)
                    .flat_map(|(_, rows)| rows.iter().copied())
                    .collect();
                let train_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
                let param = clamp_k(tuned.param, train.len());
                for &i in val {
                    let dists: Vec<f64> = train.iter().map(|&t| matrix.get(i, t)).collect();
                    let (probs, fell_back) =
                        weak_proba(job.base, job.kernel, &dists, &train_labels, n_classes, param)?;
                    fallbacks += usize::from(fell_back);
                    let pos = outer_train.binary_search(&i).expect("inner id in outer train");
                    oof_rows[pos] = probs;
                }
            }
            let oof = ProbMatrix::new(oof_rows.concat(), n_classes)?;

            // Held-out predictions from the full outer-training set.
            let train_labels: Vec<usize> = outer_train.iter().map(|&i| labels[i]).collect();
            let param = clamp_k(tuned.param, outer_train.len());
            let mut test_rows = Vec::with_capacity(outer_test.len());
            let mut predictions = Vec::with_capacity(outer_test.len());
            let mut brier_sum = 0.0;
            for &t in outer_test {
                let dists: Vec<f64> = outer_train.iter().map(|&tr| matrix.get(t, tr)).collect();
                let (probs, fell_back) =
                    weak_proba(job.base, job.kernel, &dists, &train_labels, n_classes, param)?;
                fallbacks += usize::from(fell_back);
                let mut rng = derive_rng(seed, &["weak", &id, &o.to_string(), &plan.ids[t]]);
                predictions.push(fknn_predict(&probs, &mut rng));
                brier_sum += brier_of(&probs, labels[t]);
                test_rows.push(probs);
            }
            let truth: Vec<usize> = outer_test.iter().map(|&t| labels[t]).collect();
            let outer_accuracy = accuracy(&predictions, &truth)?;
            let outer_brier = brier_sum / outer_test.len().max(1) as f64;
            let test = ProbMatrix::new(test_rows.concat(), n_classes)?;

            Ok(WeakFoldOutput {
                tuned,
                oof,
                test,
                outer_accuracy,
                outer_brier,
                fallbacks,
                tuning_indices: inner.iter().flatten().copied().collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let k = folds.len() as f64;
    Ok(WeakEvaluation {
        id,
        job: job.clone(),
        mean_inner_accuracy: folds.iter().map(|f| f.tuned.mean_inner_accuracy).sum::<f64>() / k,
        mean_outer_accuracy: folds.iter().map(|f| f.outer_accuracy).sum::<f64>() / k,
        mean_outer_brier: folds.iter().map(|f| f.outer_brier).sum::<f64>() / k,
        plan_fingerprint: plan.fingerprint(),
        folds,
    })
}

/// Candidates at or above the accuracy threshold, best first; equal
/// accuracies order by learner id.
pub fn select_gate(results: &[(String, f64)], threshold: f64) -> Vec<usize> {
    let mut passing: Vec<usize> = (0..results.len())
        .filter(|&i| results[i].1 >= threshold)
        .collect();
    passing.sort_by(|&a, &b| {
        results[b]
            .1
            .partial_cmp(&results[a].1)
            .expect("finite accuracies")
            .then_with(|| results[a].0.cmp(&results[b].0))
    });
    passing
}

/// Map global sample indices to positions within `sorted_rows`.
fn positions_of(global: &[usize], sorted_rows: &[usize]) -> Vec<usize> {
    global
        .iter()
        .map(|&g| sorted_rows.binary_search(&g).expect("index in rows"))
        .collect()
}

struct EnsembleSpec {
    key: &'static str,
    kind: EnsembleKind,
    ensemble_type: EnsembleType,
}

const ENSEMBLE_SPECS: [EnsembleSpec; 5] = [
    EnsembleSpec { key: "LC", kind: EnsembleKind::Lce, ensemble_type: EnsembleType::I },
    EnsembleSpec { key: "RF-I", kind: EnsembleKind::Rfe, ensemble_type: EnsembleType::I },
    EnsembleSpec { key: "GB-I", kind: EnsembleKind::Gbe, ensemble_type: EnsembleType::I },
    EnsembleSpec { key: "RF-II", kind: EnsembleKind::Rfe, ensemble_type: EnsembleType::II },
    EnsembleSpec { key: "GB-II", kind: EnsembleKind::Gbe, ensemble_type: EnsembleType::II },
];

/// Measure covariate columns for the given rows, in config order.
fn measure_columns(
    dataset: &Dataset,
    names: &[String],
    rows: &[usize],
) -> Result<Vec<(String, Vec<f64>)>> {
    names
        .iter()
        .map(|name| {
            let col = rows
                .iter()
                .map(|&i| dataset.samples[i].measures.get(name))
                .collect::<Result<Vec<f64>>>()?;
            Ok((name.clone(), col))
        })
        .collect()
}

/// Everything a run produces: the report plus, per ensemble, the fitted
/// per-outer-fold models for audit and re-prediction.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: RunReport,
    pub models: BTreeMap<String, Vec<EnsembleModel>>,
}

/// Execute the full protocol: preprocess inputs are given; computes distance
/// matrices (through the cache), evaluates every weak learner on the shared
/// fold plan, applies the accuracy gate, builds the LC/RF/GB ensembles per
/// incorporation type and assembles the report. Deterministic given
/// (dataset, config, seed).
pub fn run_pipeline(
    config: &RunConfig,
    dataset: &Dataset,
    aoi: Option<&AoiPartition>,
    cache_dir: Option<&Path>,
) -> Result<PipelineOutput> {
    config.validate()?;
    let n = dataset.samples.len();
    let n_classes = dataset.n_classes();
    let labels = dataset.labels();
    let ids = dataset.ids();
    let seed = config.seed;

    let plan = FoldPlan::make(&ids, &labels, config.folds.outer, config.folds.inner, seed)?;
    let plan_fp = plan.fingerprint();

    let needs_aoi = config.semimetrics.iter().any(|s| s.needs_aoi());
    let aoi_features = match (needs_aoi, aoi) {
        (true, None) => {
            return Err(Error::config(
                "roster contains AOI-based semi-metrics but no partition was supplied",
            ))
        }
        (true, Some(partition)) => Some(AoiFeatures::build(
            &dataset.samples,
            partition,
            config.levenshtein_collapse_repeats,
        )?),
        (false, _) => None,
    };

    // Validate type II covariates up front.
    for name in &config.ensemble.type2_measures {
        dataset.samples[0]
            .measures
            .get(name)
            .map_err(|_| Error::config(format!("type II measure '{name}' not present in data")))?;
    }

    let ds_fp = dataset_fingerprint(&dataset.samples);
    let ctx = DistanceContext::new(&dataset.samples, aoi_features.as_ref());
    let matrices: Vec<DistanceMatrix> = config
        .semimetrics
        .iter()
        .map(|spec| pairwise_matrix_cached(&ctx, spec, &ds_fp, cache_dir))
        .collect::<Result<Vec<_>>>()?;

    // Weak learner evaluation: every configured base on every semi-metric.
    let jobs: Vec<(WeakJob, usize)> = config
        .weak
        .bases
        .iter()
        .flat_map(|&base| {
            config.semimetrics.iter().enumerate().map(move |(m, spec)| {
                (WeakJob { base, kernel: Kernel::Gaussian, spec: spec.clone() }, m)
            })
        })
        .map(|(mut job, m)| {
            job.kernel = config.weak.kernel;
            (job, m)
        })
        .collect();

    let evaluations: Vec<WeakEvaluation> = jobs
        .par_iter()
        .map(|(job, m)| {
            evaluate_weak(
                job,
                &matrices[*m],
                &labels,
                n_classes,
                &plan,
                config.weak.k_grid.as_ref(),
                config.weak.h_grid.as_ref(),
                seed,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    // The accuracy gate.
    let gate_accs: Vec<(String, f64)> = evaluations
        .iter()
        .map(|e| {
            let acc = match config.ensemble.gate_mode {
                GateMode::Outer => e.mean_outer_accuracy,
                GateMode::Inner => e.mean_inner_accuracy,
            };
            (e.id.clone(), acc)
        })
        .collect();
    let candidates = select_gate(&gate_accs, config.ensemble.gate_threshold);

    let mut audit_notes = Vec::new();
    if config.ensemble.gate_mode == GateMode::Outer {
        audit_notes.push(
            "gate consumes mean outer accuracies: outer-test labels influence ensemble candidate \
             selection through the gate, reproducing the published protocol (gate_mode=inner \
             avoids this)"
                .to_string(),
        );
    }

    let (ensembles, models) = if candidates.is_empty() {
        audit_notes.push(format!(
            "no weak learner reached the {} gate; ensembles skipped",
            config.ensemble.gate_threshold
        ));
        (BTreeMap::new(), BTreeMap::new())
    } else {
        let built = run_ensembles(config, dataset, &plan, &evaluations, &candidates, seed)?;
        for spec in &ENSEMBLE_SPECS {
            if !built.0.contains_key(spec.key) {
                audit_notes.push(format!(
                    "{} skipped: every gate candidate is measure-based",
                    spec.key
                ));
            }
        }
        built
    };

    // Leakage audit: tuning index sets recorded by every learner must avoid
    // the fold's outer-test ids, and the fold structure must partition.
    let mut leakage_free = true;
    for e in &evaluations {
        for (o, fold) in e.folds.iter().enumerate() {
            if fold.tuning_indices.iter().any(|i| plan.outer[o].contains(i)) {
                leakage_free = false;
                audit_notes.push(format!("learner {} tuned on outer-test ids in fold {o}", e.id));
            }
        }
    }
    for o in 0..plan.outer.len() {
        let mut seen: Vec<usize> = plan.inner[o].iter().flatten().copied().collect();
        seen.sort_unstable();
        if seen != plan.outer_train(o) {
            leakage_free = false;
            audit_notes.push(format!("inner folds of outer fold {o} do not partition its complement"));
        }
    }
    let fold_plan_consistent = evaluations.iter().all(|e| e.plan_fingerprint == plan_fp);

    let weak_learners: Vec<WeakLearnerReport> = evaluations
        .iter()
        .map(|e| WeakLearnerReport {
            id: e.id.clone(),
            family: e.job.spec.family().label().to_string(),
            name: e.job.spec.name.clone(),
            a: e.job.spec.a,
            base: e.job.base.label().to_string(),
            tuned_params: e.folds.iter().map(|f| f.tuned.param).collect(),
            inner_accuracy_per_fold: e.folds.iter().map(|f| f.tuned.mean_inner_accuracy).collect(),
            outer_accuracy_per_fold: e.folds.iter().map(|f| f.outer_accuracy).collect(),
            mean_inner_accuracy: e.mean_inner_accuracy,
            mean_outer_accuracy: e.mean_outer_accuracy,
            mean_outer_brier: e.mean_outer_brier,
            kncd_fallbacks: e.folds.iter().map(|f| f.fallbacks).sum(),
            passed_gate: candidates.iter().any(|&c| evaluations[c].id == e.id),
        })
        .collect();

    let report = RunReport {
        version: 1,
        config_fingerprint: config.fingerprint(),
        dataset_fingerprint: ds_fp,
        seed,
        n_samples: n,
        classes: dataset.classes.clone(),
        weak_learners,
        gate: GateReport {
            threshold: config.ensemble.gate_threshold,
            mode: config.ensemble.gate_mode,
            candidates: candidates.iter().map(|&c| evaluations[c].id.clone()).collect(),
        },
        ensembles,
        audit: AuditReport {
            fold_plan_fingerprint: plan_fp,
            fold_plan_consistent,
            leakage_free,
            notes: audit_notes,
        },
    };
    Ok(PipelineOutput { report, models })
}

#[allow(clippy::type_complexity)]
fn run_ensembles(
    config: &RunConfig,
    dataset: &Dataset,
    plan: &FoldPlan,
    evaluations: &[WeakEvaluation],
    candidates: &[usize],
    seed: u64,
) -> Result<(BTreeMap<String, EnsembleReport>, BTreeMap<String, Vec<EnsembleModel>>)> {
    let labels = dataset.labels();
    let n_classes = dataset.n_classes();
    let grids = &config.ensemble.grids;
    let mut reports = BTreeMap::new();
    let mut archives = BTreeMap::new();

    for spec in &ENSEMBLE_SPECS {
        // Type II excludes measure-based weak learners; their information
        // enters as covariates instead.
        let member_ids: Vec<usize> = match spec.ensemble_type {
            EnsembleType::I => candidates.to_vec(),
            EnsembleType::II => candidates
                .iter()
                .copied()
                .filter(|&c| !matches!(evaluations[c].job.spec.kind, Kind::Measures(_)))
                .collect(),
        };
        if spec.kind == EnsembleKind::Lce && spec.ensemble_type == EnsembleType::II {
            continue;
        }
        if member_ids.is_empty() {
            continue;
        }
        let candidate_names: Vec<String> =
            member_ids.iter().map(|&c| evaluations[c].id.clone()).collect();
        let use_measures = spec.ensemble_type == EnsembleType::II;

        let mut fold_reports = Vec::with_capacity(plan.outer.len());
        let mut fold_models = Vec::with_capacity(plan.outer.len());
        // label -> (summed accuracy drop, folds using the column)
        let mut importance_acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for o in 0..plan.outer.len() {
            let outer_train = plan.outer_train(o);
            let outer_test = &plan.outer[o];
            let train_labels: Vec<usize> = outer_train.iter().map(|&i| labels[i]).collect();
            let inner_rows: Vec<Vec<usize>> = plan.inner[o]
                .iter()
                .map(|fold| positions_of(fold, &outer_train))
                .collect();
            let oof: Vec<&ProbMatrix> =
                member_ids.iter().map(|&c| &evaluations[c].folds[o].oof).collect();
            let test: Vec<&ProbMatrix> =
                member_ids.iter().map(|&c| &evaluations[c].folds[o].test).collect();
            let train_measures = use_measures
                .then(|| measure_columns(dataset, &config.ensemble.type2_measures, &outer_train))
                .transpose()?;

            let (model, fold_report) = match spec.kind {
                EnsembleKind::Lce => {
                    let fit = lce_fit(&oof, &train_labels)?;
                    let model = EnsembleModel {
                        kind: spec.kind,
                        ensemble_type: spec.ensemble_type,
                        selected: candidate_names.clone(),
                        super_learner: SuperLearner::Lce(fit.clone()),
                        n_classes,
                        measure_names: Vec::new(),
                    };
                    // In-sample stacked accuracy on the out-of-fold
                    // probabilities, as the inner diagnostic.
                    let mut train_preds = Vec::with_capacity(outer_train.len());
                    for (pos, &i) in outer_train.iter().enumerate() {
                        let rows: Vec<&[f64]> = oof.iter().map(|p| p.row(pos)).collect();
                        let combined = lce_predict(&fit.weights, &rows)?;
                        let mut rng = derive_rng(
                            seed,
                            &["ensemble", spec.key, &o.to_string(), "train", &plan.ids[i]],
                        );
                        train_preds.push(fknn_predict(&combined, &mut rng));
                    }
                    let inner_accuracy = accuracy(&train_preds, &train_labels)?;

                    let mut preds = Vec::with_capacity(outer_test.len());
                    let mut brier_sum = 0.0;
                    for (pos, &t) in outer_test.iter().enumerate() {
                        let rows: Vec<&[f64]> = test.iter().map(|p| p.row(pos)).collect();
                        let mut rng = derive_rng(
                            seed,
                            &["ensemble", spec.key, &o.to_string(), &plan.ids[t]],
                        );
                        let (combined, class) = ensemble_predict(&model, &rows, None, &mut rng)?;
                        preds.push(class);
                        brier_sum += brier_of(&combined, labels[t]);
                    }
                    let truth: Vec<usize> = outer_test.iter().map(|&t| labels[t]).collect();
                    let report = EnsembleFoldReport {
                        selected: candidate_names.clone(),
                        inner_accuracy,
                        outer_accuracy: accuracy(&preds, &truth)?,
                        trail: Vec::new(),
                        lce_weights: Some(fit.weights),
                        super_params: None,
                    }
                    .with_brier(brier_sum / outer_test.len().max(1) as f64);
                    (model, report)
                }
                EnsembleKind::Rfe | EnsembleKind::Gbe => {
                    let super_kind = match spec.kind {
                        EnsembleKind::Rfe => SuperKind::RandomForest,
                        _ => SuperKind::GradientBoosting,
                    };
                    let context = format!("{}/fold{o}", spec.key);
                    let outcome = forward_select(
                        &candidate_names,
                        &oof,
                        train_measures.as_deref(),
                        &train_labels,
                        n_classes,
                        &inner_rows,
                        super_kind,
                        grids,
                        seed,
                        &context,
                    )?;

                    // Refit the tuned super-learner on every outer-training
                    // row and score the held-out fold.
                    let selected_names: Vec<String> =
                        outcome.selected.iter().map(|&i| candidate_names[i].clone()).collect();
                    let selected_oof: Vec<&ProbMatrix> =
                        outcome.selected.iter().map(|&i| oof[i]).collect();
                    let mut table = FeatureTable::from_probs(&selected_names, &selected_oof)?;
                    if let Some(measures) = &train_measures {
                        table.append_measures(measures)?;
                    }
                    let all_rows: Vec<usize> = (0..outer_train.len()).collect();
                    let final_seed = crate::rng::derive_seed(
                        seed,
                        &["ensemble", spec.key, &o.to_string(), "final"],
                    );
                    let super_learner = match outcome.tuned.params {
                        SuperParams::Rf { n_trees, mtry } => {
                            let fp = ForestParams::new(n_trees, mtry.resolve(table.n_cols()));
                            SuperLearner::Forest(forest_fit(
                                &table,
                                &train_labels,
                                n_classes,
                                &all_rows,
                                &fp,
                                final_seed,
                            )?)
                        }
                        SuperParams::Gb { n_trees, shrinkage, depth } => {
                            SuperLearner::Boost(boost_fit(
                                &table,
                                &train_labels,
                                n_classes,
                                &all_rows,
                                &BoostParams::new(n_trees, shrinkage, depth),
                            )?)
                        }
                    };
                    let model = EnsembleModel {
                        kind: spec.kind,
                        ensemble_type: spec.ensemble_type,
                        selected: selected_names.clone(),
                        super_learner,
                        n_classes,
                        measure_names: use_measures
                            .then(|| config.ensemble.type2_measures.clone())
                            .unwrap_or_default(),
                    };

                    let test_measures = use_measures
                        .then(|| {
                            measure_columns(dataset, &config.ensemble.type2_measures, outer_test)
                        })
                        .transpose()?;
                    let mut preds = Vec::with_capacity(outer_test.len());
                    let mut dense_rows = Vec::with_capacity(outer_test.len());
                    let mut brier_sum = 0.0;
                    for (pos, &t) in outer_test.iter().enumerate() {
                        let rows: Vec<&[f64]> =
                            outcome.selected.iter().map(|&sel| test[sel].row(pos)).collect();
                        let measure_row: Option<Vec<f64>> = test_measures
                            .as_ref()
                            .map(|cols| cols.iter().map(|(_, col)| col[pos]).collect());
                        dense_rows.push(feature_row(&model, &rows, measure_row.as_deref())?);
                        let mut rng = derive_rng(
                            seed,
                            &["ensemble", spec.key, &o.to_string(), &plan.ids[t]],
                        );
                        let (probs, class) =
                            ensemble_predict(&model, &rows, measure_row.as_deref(), &mut rng)?;
                        preds.push(class);
                        brier_sum += brier_of(&probs, labels[t]);
                    }
                    let truth: Vec<usize> = outer_test.iter().map(|&t| labels[t]).collect();
                    let outer_accuracy = accuracy(&preds, &truth)?;

                    // Permutation importance: accuracy drop on the held-out
                    // fold when one feature column is shuffled.
                    let raw_predict = |row: &[f64]| match &model.super_learner {
                        SuperLearner::Forest(f) => forest_predict(f, row),
                        SuperLearner::Boost(b) => boost_predict(b, row),
                        SuperLearner::Lce(_) => unreachable!("tree-based arm"),
                    };
                    for (c, label) in table.provenance().iter().enumerate() {
                        let mut order: Vec<usize> = (0..dense_rows.len()).collect();
                        order.shuffle(&mut derive_rng(
                            seed,
                            &["permimp", spec.key, &o.to_string(), &c.to_string()],
                        ));
                        let mut permuted_preds = Vec::with_capacity(dense_rows.len());
                        for (pos, &t) in outer_test.iter().enumerate() {
                            let mut row = dense_rows[pos].clone();
                            row[c] = dense_rows[order[pos]][c];
                            let probs = raw_predict(&row);
                            let mut rng = derive_rng(
                                seed,
                                &["permimp", spec.key, &o.to_string(), &c.to_string(), &plan.ids[t]],
                            );
                            permuted_preds.push(fknn_predict(&probs, &mut rng));
                        }
                        let drop = outer_accuracy - accuracy(&permuted_preds, &truth)?;
                        let entry = importance_acc.entry(label.label()).or_insert((0.0, 0));
                        entry.0 += drop;
                        entry.1 += 1;
                    }

                    let report = EnsembleFoldReport {
                        selected: selected_names,
                        inner_accuracy: outcome.inner_accuracy,
                        outer_accuracy,
                        trail: outcome.trail,
                        lce_weights: None,
                        super_params: Some(outcome.tuned.params),
                    }
                    .with_brier(brier_sum / outer_test.len().max(1) as f64);
                    (model, report)
                }
            };
            model.validate()?;
            fold_models.push(model);
            fold_reports.push(fold_report);
        }

        let k = fold_reports.len() as f64;
        reports.insert(
            spec.key.to_string(),
            EnsembleReport {
                kind: spec.kind.label().to_string(),
                ensemble_type: (spec.kind != EnsembleKind::Lce)
                    .then(|| spec.ensemble_type.label().to_string()),
                outer_accuracy_per_fold: fold_reports.iter().map(|f| f.0.outer_accuracy).collect(),
                mean_outer_accuracy: fold_reports.iter().map(|f| f.0.outer_accuracy).sum::<f64>() / k,
                mean_outer_brier: fold_reports.iter().map(|f| f.1).sum::<f64>() / k,
                mean_inner_accuracy: fold_reports.iter().map(|f| f.0.inner_accuracy).sum::<f64>() / k,
                permutation_importance: importance_acc
                    .into_iter()
                    .map(|(label, (sum, count))| (label, sum / count as f64))
                    .collect(),
                folds: fold_reports.into_iter().map(|f| f.0).collect(),
            },
        );
        archives.insert(spec.key.to_string(), fold_models);
    }
    Ok((reports, archives))
}

/// Internal pairing of a fold report with its Brier score.
struct FoldWithBrier(EnsembleFoldReport, f64);

impl EnsembleFoldReport {
    fn with_brier(self, brier: f64) -> FoldWithBrier {
        FoldWithBrier(self, brier)
    }
}
