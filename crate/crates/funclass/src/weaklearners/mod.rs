//! Distance-based class-probability estimators.
//!
//! Both learners consume a row of precomputed distances from a query
//! observation to every training observation:
//!
//! - fkNN: class frequencies inside the k-nearest neighbourhood, enlarged to
//!   include every training point tied with the k-th order-statistic
//!   distance.
//! - kNCD: kernel-weighted class frequencies over all training points,
//!   `p_l = Σ 1{y_i=l} K(D_i/h) / Σ K(D_i/h)`.
//!
//! Parameters k and h are tuned by grid search over shared inner folds.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::semimetrics::{DistanceMatrix, SemiMetricSpec};

/// Which probability estimator a weak learner uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeakLearnerBase {
    Fknn,
    Kncd,
}

impl WeakLearnerBase {
    pub fn label(&self) -> &'static str {
        match self {
            WeakLearnerBase::Fknn => "fknn",
            WeakLearnerBase::Kncd => "kncd",
        }
    }
}

/// Kernel for kNCD weights; `gaussian(u) = exp(-u²/2)`, `uniform(u) = 1{u<=1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Gaussian,
    Uniform,
}

impl Kernel {
    fn weight(&self, u: f64) -> f64 {
        match self {
            Kernel::Gaussian => (-0.5 * u * u).exp(),
            Kernel::Uniform => {
                if u <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Tuned parameter of a weak learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeakParam {
    K(usize),
    H(f64),
}

/// A fully specified weak learner: estimator, semi-metric, tuned parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakLearnerSpec {
    pub base: WeakLearnerBase,
    pub semimetric: SemiMetricSpec,
    pub kernel: Kernel,
    pub param: WeakParam,
}

impl WeakLearnerSpec {
    pub fn id(&self) -> String {
        format!("{}:{}", self.base.label(), self.semimetric.id())
    }
}

/// Per-observation class-probability rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbMatrix {
    pub n_classes: usize,
    rows: Vec<f64>,
}

impl ProbMatrix {
    /// Validate that every row is a probability vector.
    pub fn new(rows: Vec<f64>, n_classes: usize) -> Result<Self> {
        if n_classes == 0 || rows.len() % n_classes != 0 {
            return Err(Error::invalid("probability table shape mismatch"));
        }
        for row in rows.chunks_exact(n_classes) {
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::invalid("probability outside [0,1]"));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!("probability row sums to {sum}")));
            }
        }
        Ok(ProbMatrix { n_classes, rows })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len() / self.n_classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.n_classes..(i + 1) * self.n_classes]
    }
}

/// fkNN probability vector from distances to the training set.
///
/// The neighbourhood contains every training point whose distance does not
/// exceed the k-th order statistic, so distance ties enlarge it; the class
/// frequencies are normalised by the actual neighbourhood size.
pub fn fknn_proba(dists: &[f64], labels: &[usize], n_classes: usize, k: usize) -> Result<Vec<f64>> {
    let n = dists.len();
    if labels.len() != n {
        return Err(Error::invalid("distances and labels disagree in length"));
    }
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k must be in 1..={n}, got {k}")));
    }
    let mut sorted = dists.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let kth = sorted[k - 1];

    let mut probs = vec![0.0; n_classes];
    let mut count = 0usize;
    for (d, &label) in dists.iter().zip(labels) {
        if *d <= kth {
            probs[label] += 1.0;
            count += 1;
        }
    }
    for p in &mut probs {
        *p /= count as f64;
    }
    Ok(probs)
}

/// kNCD probability vector. The boolean flags the degenerate case of an
/// all-zero kernel weight sum (e.g. a uniform kernel with h below the
/// smallest distance), where the estimate falls back to the nearest-neighbour
/// probabilities.
pub fn kncd_proba(
    dists: &[f64],
    labels: &[usize],
    n_classes: usize,
    h: f64,
    kernel: Kernel,
) -> Result<(Vec<f64>, bool)> {
    let n = dists.len();
    if labels.len() != n {
        return Err(Error::invalid("distances and labels disagree in length"));
    }
    if n == 0 {
        return Err(Error::invalid("kncd needs at least one training point"));
    }
    if !(h > 0.0) {
        return Err(Error::invalid(format!("bandwidth must be positive, got {h}")));
    }
    let mut probs = vec![0.0; n_classes];
    let mut denom = 0.0;
    for (d, &label) in dists.iter().zip(labels) {
        let w = kernel.weight(d / h);
        probs[label] += w;
        denom += w;
    }
    if denom > 0.0 {
        for p in &mut probs {
            *p /= denom;
        }
        Ok((probs, false))
    } else {
        Ok((fknn_proba(dists, labels, n_classes, 1)?, true))
    }
}

/// Argmax class with exact probability ties broken by the supplied stream.
pub fn fknn_predict(probs: &[f64], rng: &mut impl Rng) -> usize {
    let max = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> = probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| p == max)
        .map(|(l, _)| l)
        .collect();
    if tied.len() == 1 {
        tied[0]
    } else {
        tied[rng.gen_range(0..tied.len())]
    }
}

/// Probability vector of either learner; the flag is kNCD's fallback marker.
pub fn weak_proba(
    base: WeakLearnerBase,
    kernel: Kernel,
    dists: &[f64],
    labels: &[usize],
    n_classes: usize,
    param: WeakParam,
) -> Result<(Vec<f64>, bool)> {
    match (base, param) {
        (WeakLearnerBase::Fknn, WeakParam::K(k)) => {
            Ok((fknn_proba(dists, labels, n_classes, k)?, false))
        }
        (WeakLearnerBase::Kncd, WeakParam::H(h)) => kncd_proba(dists, labels, n_classes, h, kernel),
        _ => Err(Error::invalid("parameter type does not match the learner base")),
    }
}

/// Default k grid: odd values 1, 3, ..., min(31, n_train).
pub fn default_k_grid(n_train: usize) -> Vec<usize> {
    (1..=n_train.min(31)).step_by(2).collect()
}

/// Default h grid: the {0.05, 0.10, ..., 0.95} quantiles (type-7, linear
/// interpolation) of the positive training distances, deduplicated.
pub fn default_h_grid(train_dists: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut positive: Vec<f64> = train_dists.filter(|&d| d > 0.0).collect();
    if positive.is_empty() {
        return vec![1.0];
    }
    positive.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let mut grid = Vec::new();
    for step in 1..=19 {
        let q = step as f64 * 0.05;
        let pos = q * (positive.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let value = positive[lo] + (pos - lo as f64) * (positive[hi] - positive[lo]);
        if value > 0.0 && grid.last() != Some(&value) {
            grid.push(value);
        }
    }
    if grid.is_empty() {
        grid.push(positive[positive.len() - 1]);
    }
    grid
}

/// Grid of candidate parameters for one learner base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ParamGrid {
    K(Vec<usize>),
    H(Vec<f64>),
}

impl ParamGrid {
    /// Candidates in tie-break order: ascending k (prefer smaller), then
    /// descending h (prefer larger). The first strict maximum wins.
    fn candidates(&self) -> Vec<WeakParam> {
        match self {
            ParamGrid::K(ks) => {
                let mut ks = ks.clone();
                ks.sort_unstable();
                ks.into_iter().map(WeakParam::K).collect()
            }
            ParamGrid::H(hs) => {
                let mut hs = hs.clone();
                hs.sort_by(|a, b| b.partial_cmp(a).expect("finite bandwidths"));
                hs.into_iter().map(WeakParam::H).collect()
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            ParamGrid::K(ks) => ks.is_empty(),
            ParamGrid::H(hs) => hs.is_empty(),
        }
    }
}

/// Result of tuning one learner on a set of inner folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunedParam {
    pub param: WeakParam,
    pub mean_inner_accuracy: f64,
    /// Number of kNCD degenerate-denominator fallbacks seen while tuning.
    pub kncd_fallbacks: usize,
}

/// Tune k or h by maximising mean validation accuracy over the inner folds.
///
/// `inner_folds` partitions the tuning index set; each fold serves once as
/// validation against the union of the others. Accuracy ties prefer smaller
/// k / larger h. Tie-break randomness for class prediction flows from
/// (`seed`, `context`, fold, validation id), so results are order- and
/// schedule-independent.
pub fn tune_param(
    base: WeakLearnerBase,
    kernel: Kernel,
    matrix: &DistanceMatrix,
    labels: &[usize],
    n_classes: usize,
    inner_folds: &[Vec<usize>],
    grid: &ParamGrid,
    seed: u64,
    context: &str,
) -> Result<TunedParam> {
    if grid.is_empty() {
        return Err(Error::invalid("empty tuning grid"));
    }
    if inner_folds.is_empty() {
        return Err(Error::invalid("tuning needs at least one inner fold"));
    }

    let mut best: Option<(WeakParam, f64, usize)> = None;
    for param in grid.candidates() {
        let mut total_acc = 0.0;
        let mut fallbacks = 0usize;
        for (fold_idx, val) in inner_folds.iter().enumerate() {
            let train: Vec<usize> = inner_folds
                .iter()
                .enumerate()
                .filter(|(f, _)| *f != fold_idx)
                .flat_map(|(_, ids)| ids.iter().copied())
                .collect();
            // k can exceed a small training fold; clamp per evaluation.
            let effective = match param {
                WeakParam::K(k) => WeakParam::K(k.min(train.len())),
                h => h,
            };
            let train_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
            let mut correct = 0usize;
            for &v in val {
                let dists: Vec<f64> = train.iter().map(|&t| matrix.get(v, t)).collect();
                let (probs, fell_back) =
                    weak_proba(base, kernel, &dists, &train_labels, n_classes, effective)?;
                fallbacks += usize::from(fell_back);
                let mut rng = crate::rng::derive_rng(
                    seed,
                    &["tune", context, &fold_idx.to_string(), &matrix.ids[v]],
                );
                if fknn_predict(&probs, &mut rng) == labels[v] {
                    correct += 1;
                }
            }
            total_acc += correct as f64 / val.len().max(1) as f64;
        }
        let mean_acc = total_acc / inner_folds.len() as f64;
        let improved = match &best {
            None => true,
            Some((_, best_acc, _)) => mean_acc > *best_acc,
        };
        if improved {
            best = Some((param, mean_acc, fallbacks));
        }
    }
    let (param, mean_inner_accuracy, kncd_fallbacks) = best.expect("nonempty grid");
    Ok(TunedParam { param, mean_inner_accuracy, kncd_fallbacks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fknn_with_k_equal_n_gives_class_frequencies() {
        let dists = [3.0, 1.0, 2.0, 5.0, 4.0];
        let labels = [0, 1, 0, 0, 1];
        let probs = fknn_proba(&dists, &labels, 2, 5).unwrap();
        assert_eq!(probs, vec![0.6, 0.4]);
    }

    #[test]
    fn fknn_with_unique_nearest_neighbor() {
        let dists = [2.0, 0.5, 3.0];
        let labels = [0, 1, 0];
        let probs = fknn_proba(&dists, &labels, 2, 1).unwrap();
        assert_eq!(probs, vec![0.0, 1.0]);
    }

    #[test]
    fn fknn_distance_ties_enlarge_the_neighborhood() {
        // k=1 but two points at distance 1 -> both vote.
        let dists = [1.0, 1.0, 2.0, 3.0];
        let labels = [0, 1, 0, 1];
        let probs = fknn_proba(&dists, &labels, 2, 1).unwrap();
        assert_eq!(probs, vec![0.5, 0.5]);
    }

    #[test]
    fn fknn_rejects_out_of_range_k() {
        let dists = [1.0, 2.0];
        let labels = [0, 1];
        assert!(fknn_proba(&dists, &labels, 2, 0).is_err());
        assert!(fknn_proba(&dists, &labels, 2, 3).is_err());
    }

    #[test]
    fn fknn_is_invariant_under_monotone_distance_transforms() {
        let dists = [0.3, 1.2, 0.7, 2.0, 0.3];
        let labels = [0, 1, 1, 0, 1];
        for k in 1..=5 {
            let base = fknn_proba(&dists, &labels, 2, k).unwrap();
            let squared: Vec<f64> = dists.iter().map(|d| d * d + 1.0).collect();
            let transformed = fknn_proba(&squared, &labels, 2, k).unwrap();
            assert_eq!(base, transformed);
        }
    }

    #[test]
    fn fknn_is_permutation_equivariant() {
        let dists = [0.3, 1.2, 0.7, 2.0];
        let labels = [0, 1, 1, 0];
        let perm = [2usize, 0, 3, 1];
        let pd: Vec<f64> = perm.iter().map(|&i| dists[i]).collect();
        let pl: Vec<usize> = perm.iter().map(|&i| labels[i]).collect();
        for k in 1..=4 {
            assert_eq!(
                fknn_proba(&dists, &labels, 2, k).unwrap(),
                fknn_proba(&pd, &pl, 2, k).unwrap()
            );
        }
    }

    #[test]
    fn predict_takes_argmax_and_breaks_ties_reproducibly() {
        let mut rng = derive_rng(0, &["t"]);
        assert_eq!(fknn_predict(&[0.8, 0.2], &mut rng), 0);
        assert_eq!(fknn_predict(&[0.0, 1.0], &mut rng), 1);
        let picks: Vec<usize> = (0..10)
            .map(|i| {
                let mut rng = derive_rng(99, &["tie", &i.to_string()]);
                fknn_predict(&[0.5, 0.5], &mut rng)
            })
            .collect();
        let again: Vec<usize> = (0..10)
            .map(|i| {
                let mut rng = derive_rng(99, &["tie", &i.to_string()]);
                fknn_predict(&[0.5, 0.5], &mut rng)
            })
            .collect();
        assert_eq!(picks, again);
        assert!(picks.contains(&0) && picks.contains(&1), "both classes should appear");
    }

    #[test]
    fn kncd_limit_of_huge_bandwidth_is_class_frequencies() {
        let dists = [3.0, 1.0, 2.0, 5.0];
        let labels = [0, 1, 0, 0];
        let h = 1e6 * 5.0;
        let (probs, fell_back) = kncd_proba(&dists, &labels, 2, h, Kernel::Gaussian).unwrap();
        assert!(!fell_back);
        assert_abs_diff_eq!(probs[0], 0.75, epsilon = 1e-6);
        assert_abs_diff_eq!(probs[1], 0.25, epsilon = 1e-6);
    }

    #[test]
    fn kncd_single_training_point_is_certain() {
        for h in [0.1, 1.0, 100.0] {
            let (probs, _) = kncd_proba(&[2.0], &[0], 2, h, Kernel::Gaussian).unwrap();
            assert_eq!(probs, vec![1.0, 0.0]);
        }
    }

    #[test]
    fn kncd_gaussian_weights_match_hand_evaluation() {
        // distances {1,2}, h=1: weights e^{-1/2}, e^{-2}.
        let (probs, _) = kncd_proba(&[1.0, 2.0], &[0, 1], 2, 1.0, Kernel::Gaussian).unwrap();
        let w1 = (-0.5f64).exp();
        let w2 = (-2.0f64).exp();
        assert_abs_diff_eq!(probs[0], w1 / (w1 + w2), epsilon = 1e-12);
        assert_abs_diff_eq!(probs[0], 0.81757, epsilon = 1e-5);
    }

    #[test]
    fn kncd_uniform_zero_denominator_falls_back_to_nearest_neighbor() {
        let dists = [2.0, 3.0];
        let labels = [1, 0];
        let (probs, fell_back) = kncd_proba(&dists, &labels, 2, 1.0, Kernel::Uniform).unwrap();
        assert!(fell_back);
        assert_eq!(probs, vec![0.0, 1.0]);
    }

    #[test]
    fn kncd_rejects_nonpositive_bandwidth() {
        assert!(kncd_proba(&[1.0], &[0], 2, 0.0, Kernel::Gaussian).is_err());
        assert!(kncd_proba(&[1.0], &[0], 2, -1.0, Kernel::Gaussian).is_err());
    }

    #[test]
    fn uniform_kernel_at_kth_distance_reproduces_fknn() {
        // Seeded random instances; h = k-th order statistic.
        let mut state = 17u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) as f64 / (1u64 << 31) as f64
        };
        for trial in 0..50 {
            let n = 5 + (trial % 10);
            let dists: Vec<f64> = (0..n).map(|_| next() + 0.01).collect();
            let labels: Vec<usize> = (0..n).map(|_| usize::from(next() > 0.5)).collect();
            let k = 1 + trial % n;
            let mut sorted = dists.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let h = sorted[k - 1];
            let fknn = fknn_proba(&dists, &labels, 2, k).unwrap();
            let (kncd, _) = kncd_proba(&dists, &labels, 2, h, Kernel::Uniform).unwrap();
            assert_eq!(fknn, kncd, "trial {trial}");
        }
    }

    #[test]
    fn probability_rows_always_sum_to_one() {
        let mut state = 23u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) as f64 / (1u64 << 31) as f64
        };
        for _ in 0..100 {
            let n = 8;
            let dists: Vec<f64> = (0..n).map(|_| next()).collect();
            let labels: Vec<usize> = (0..n).map(|_| ((next() * 3.0) as usize).min(2)).collect();
            let k = 1 + ((next() * n as f64) as usize).min(n - 1);
            let probs = fknn_proba(&dists, &labels, 3, k).unwrap();
            assert_abs_diff_eq!(probs.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
            assert!(probs.iter().all(|&p| (0.0..=1.0).contains(&p)));
            let (probs, _) = kncd_proba(&dists, &labels, 3, 0.5, Kernel::Gaussian).unwrap();
            assert_abs_diff_eq!(probs.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn default_grids() {
        assert_eq!(default_k_grid(7), vec![1, 3, 5, 7]);
        assert_eq!(default_k_grid(100), vec![1, 3, 5, 7, 9, 11, 13, 15, 17, 19, 21, 23, 25, 27, 29, 31]);
        let h = default_h_grid([0.0, 1.0, 2.0, 3.0, 4.0].into_iter());
        assert!(!h.is_empty());
        assert!(h.iter().all(|&v| v > 0.0));
        assert_eq!(default_h_grid(std::iter::empty()), vec![1.0]);
    }

    #[test]
    fn prob_matrix_validates_rows() {
        assert!(ProbMatrix::new(vec![0.5, 0.5, 1.0, 0.0], 2).is_ok());
        assert!(ProbMatrix::new(vec![0.7, 0.7], 2).is_err());
        assert!(ProbMatrix::new(vec![1.2, -0.2], 2).is_err());
        assert!(ProbMatrix::new(vec![0.5, 0.5, 1.0], 2).is_err());
    }
}
