use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weaklearners::ProbMatrix;

const MAX_ITERATIONS: usize = 100_000;
const OBJECTIVE_TOLERANCE: f64 = 1e-12;

/// Simplex weights of the linear-combination ensemble plus the Brier score
/// they attain on the training probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LceWeights {
    pub weights: Vec<f64>,
    pub brier: f64,
}

/// Exact Euclidean projection onto the probability simplex
/// (sort-based algorithm).
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite weights"));
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            tau = candidate;
        }
    }
    v.iter().map(|&u| (u - tau).max(0.0)).collect()
}

/// The quadratic form of the Brier objective:
/// S(w) = w'Qw - 2 b'w + c with Q_mn = mean_i,l p_ilm p_iln and
/// b_m = mean_i,l 1{y_i=l} p_ilm.
struct QuadraticObjective {
    q: Vec<f64>,
    b: Vec<f64>,
    c: f64,
    m: usize,
}

impl QuadraticObjective {
    fn build(probs: &[&ProbMatrix], labels: &[usize]) -> QuadraticObjective {
        let m = probs.len();
        let n = labels.len();
        let n_classes = probs[0].n_classes;
        let mut q = vec![0.0; m * m];
        let mut b = vec![0.0; m];
        for i in 0..n {
            for l in 0..n_classes {
                let y = f64::from(labels[i] == l);
                for (a, pa) in probs.iter().enumerate() {
                    let va = pa.row(i)[l];
                    b[a] += y * va;
                    for (bb, pb) in probs.iter().enumerate().skip(a) {
                        q[a * m + bb] += va * pb.row(i)[l];
                    }
                }
            }
        }
        let nf = n as f64;
        for a in 0..m {
            for bb in a..m {
                q[a * m + bb] /= nf;
                q[bb * m + a] = q[a * m + bb];
            }
            b[a] /= nf;
        }
        QuadraticObjective { q, b, c: 1.0, m }
    }

    fn value(&self, w: &[f64]) -> f64 {
        let mut quad = 0.0;
        let mut lin = 0.0;
        for a in 0..self.m {
            let mut qw = 0.0;
            for bb in 0..self.m {
                qw += self.q[a * self.m + bb] * w[bb];
            }
            quad += w[a] * qw;
            lin += self.b[a] * w[a];
        }
        quad - 2.0 * lin + self.c
    }

    fn gradient(&self, w: &[f64], out: &mut [f64]) {
        for a in 0..self.m {
            let mut qw = 0.0;
            for bb in 0..self.m {
                qw += self.q[a * self.m + bb] * w[bb];
            }
            out[a] = 2.0 * (qw - self.b[a]);
        }
    }

    /// Step size 1/L from the row-sum bound on the largest eigenvalue of Q
    /// (Q has nonnegative entries).
    fn step_size(&self) -> f64 {
        let max_row_sum = (0..self.m)
            .map(|a| self.q[a * self.m..(a + 1) * self.m].iter().sum::<f64>())
            .fold(0.0, f64::max);
        if max_row_sum > 0.0 {
            1.0 / (2.0 * max_row_sum)
        } else {
            1.0
        }
    }

    /// Projected gradient descent from `start`; monotone in the objective for
    /// steps at most 1/L, so the endpoint never exceeds the start value.
    fn descend(&self, start: Vec<f64>) -> (Vec<f64>, f64) {
        let step = self.step_size();
        let mut w = project_to_simplex(&start);
        let mut value = self.value(&w);
        let mut grad = vec![0.0; self.m];
        for _ in 0..MAX_ITERATIONS {
            self.gradient(&w, &mut grad);
            let candidate: Vec<f64> =
                w.iter().zip(&grad).map(|(wi, gi)| wi - step * gi).collect();
            let next = project_to_simplex(&candidate);
            let next_value = self.value(&next);
            if value - next_value < OBJECTIVE_TOLERANCE {
                if next_value < value {
                    return (next, next_value);
                }
                return (w, value);
            }
            w = next;
            value = next_value;
        }
        (w, value)
    }
}

/// Direct evaluation of the Brier score of a convex combination, from the
/// definition (used by reports and as a cross-check on the quadratic form).
pub fn brier_score(probs: &[&ProbMatrix], labels: &[usize], weights: &[f64]) -> f64 {
    let n = labels.len();
    let n_classes = probs[0].n_classes;
    let mut total = 0.0;
    for i in 0..n {
        for l in 0..n_classes {
            let y = f64::from(labels[i] == l);
            let combined: f64 = probs
                .iter()
                .zip(weights)
                .map(|(p, w)| w * p.row(i)[l])
                .sum();
            total += (y - combined) * (y - combined);
        }
    }
    total / n as f64
}

/// Estimate the simplex weights minimising the training Brier score by
/// projected gradient descent from the uniform start.
///
/// Because each vertex is feasible and the descent is monotone, a second
/// descent from the best vertex guarantees the returned objective never
/// exceeds any single learner's Brier score.
pub fn lce_fit(probs: &[&ProbMatrix], labels: &[usize]) -> Result<LceWeights> {
    let m = probs.len();
    if m == 0 {
        return Err(Error::invalid("LCE needs at least one weak learner"));
    }
    let n = labels.len();
    let n_classes = probs[0].n_classes;
    for p in probs {
        if p.n_rows() != n || p.n_classes != n_classes {
            return Err(Error::invalid("probability matrices are misaligned with the labels"));
        }
    }
    if m == 1 {
        return Ok(LceWeights { weights: vec![1.0], brier: brier_score(probs, labels, &[1.0]) });
    }

    let objective = QuadraticObjective::build(probs, labels);
    let uniform = vec![1.0 / m as f64; m];
    let (mut best_w, best_value) = objective.descend(uniform);

    let best_vertex = (0..m)
        .map(|v| {
            let mut e = vec![0.0; m];
            e[v] = 1.0;
            (objective.value(&e), e)
        })
        .min_by(|a, b| a.0.partial_cmp(&b.0).expect("finite objectives"))
        .expect("at least one vertex");
    if best_vertex.0 < best_value {
        let (w, value) = objective.descend(best_vertex.1);
        if value < best_value {
            best_w = w;
        }
    }

    // Clean up projection dust and renormalise exactly.
    let sum: f64 = best_w.iter().sum();
    let weights: Vec<f64> = best_w.iter().map(|&w| (w / sum).max(0.0)).collect();
    let brier = brier_score(probs, labels, &weights);
    Ok(LceWeights { weights, brier })
}

/// Combine per-learner probability vectors with the fitted weights.
pub fn lce_predict(weights: &[f64], learner_probs: &[&[f64]]) -> Result<Vec<f64>> {
    if weights.len() != learner_probs.len() {
        return Err(Error::invalid(format!(
            "{} weights for {} learners",
            weights.len(),
            learner_probs.len()
        )));
    }
    if learner_probs.is_empty() {
        return Err(Error::invalid("no learner probabilities supplied"));
    }
    let n_classes = learner_probs[0].len();
    if learner_probs.iter().any(|p| p.len() != n_classes) {
        return Err(Error::invalid("learner probability vectors have unequal lengths"));
    }
    let mut combined = vec![0.0; n_classes];
    for (w, p) in weights.iter().zip(learner_probs) {
        for (c, v) in combined.iter_mut().zip(*p) {
            *c += w * v;
        }
    }
    Ok(combined)
}
