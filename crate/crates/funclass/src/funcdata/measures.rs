use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::curve::Curve;
use super::preprocess::derivative_values;
use crate::error::{Error, Result};

/// The ten movement measures extracted from every raw trajectory.
pub const CANONICAL_MEASURES: [&str; 10] = [
    "RT",
    "initiation_time",
    "total_distance",
    "max_velocity",
    "max_acceleration",
    "hovers",
    "hover_time",
    "x_flips",
    "y_flips",
    "length",
];

/// Named scalar features of one trajectory.
///
/// Holds the canonical measures plus any externally supplied (personalised)
/// variants, keyed by name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MeasureVector {
    map: BTreeMap<String, f64>,
}

impl MeasureVector {
    pub fn get(&self, name: &str) -> Result<f64> {
        self.map
            .get(name)
            .copied()
            .ok_or_else(|| Error::invalid(format!("unknown measure '{name}'")))
    }

    pub fn insert(&mut self, name: String, value: f64) {
        self.map.insert(name, value);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(|s| s.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.map.iter().map(|(k, &v)| (k.as_str(), v))
    }
}

fn step_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn max_point_norm(values: &[f64], d: usize) -> f64 {
    values
        .chunks_exact(d)
        .map(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// Count sign changes among the successive deltas of dimension `k`, ignoring
/// deltas with magnitude at or below `threshold`.
fn count_flips(curve: &Curve, k: usize, threshold: f64) -> f64 {
    let mut flips = 0u64;
    let mut last_sign = 0i8;
    for j in 1..curve.len() {
        let delta = curve.values[j * curve.d + k] - curve.values[(j - 1) * curve.d + k];
        if delta.abs() <= threshold {
            continue;
        }
        let sign = if delta > 0.0 { 1 } else { -1 };
        if last_sign != 0 && sign != last_sign {
            flips += 1;
        }
        last_sign = sign;
    }
    flips as f64
}

/// Compute the ten movement measures from a raw (pre-standardisation)
/// trajectory.
///
/// - `RT`: last minus first timestamp.
/// - `initiation_time`: time until the first nonzero displacement; equals
///   `RT` when the cursor never moves.
/// - `total_distance`: summed Euclidean step lengths (grid-independent).
/// - `max_velocity` / `max_acceleration`: largest point norm of the first /
///   second finite-difference derivative.
/// - `hovers` / `hover_time`: maximal motionless runs lasting at least
///   `hover_threshold_ms`, and their total duration.
/// - `x_flips` / `y_flips`: direction sign changes per axis among deltas
///   exceeding `flip_threshold` in magnitude.
/// - `length`: the sample count T.
pub fn extract_measures(curve: &Curve, hover_threshold_ms: f64, flip_threshold: f64) -> Result<MeasureVector> {
    if hover_threshold_ms < 0.0 || flip_threshold < 0.0 {
        return Err(Error::invalid("hover and flip thresholds must be nonnegative"));
    }
    let t = curve.len();
    let rt = curve.grid[t - 1] - curve.grid[0];

    let mut initiation = None;
    let mut total_distance = 0.0;
    for j in 1..t {
        let step = step_norm(curve.point(j), curve.point(j - 1));
        total_distance += step;
        if step > 0.0 && initiation.is_none() {
            initiation = Some(curve.grid[j] - curve.grid[0]);
        }
    }
    // A trajectory that never moves gets the full duration (censored).
    let initiation = initiation.unwrap_or(rt);

    let max_velocity = max_point_norm(&derivative_values(curve, 1), curve.d);
    let max_acceleration = max_point_norm(&derivative_values(curve, 2), curve.d);

    // Maximal runs of zero displacement; a run from sample i to sample j
    // (inclusive) lasts grid[j] - grid[i].
    let mut hovers = 0u64;
    let mut hover_time = 0.0;
    let mut run_start: Option<usize> = None;
    for j in 1..t {
        let moved = step_norm(curve.point(j), curve.point(j - 1)) > 0.0;
        if !moved && run_start.is_none() {
            run_start = Some(j - 1);
        }
        if (moved || j == t - 1) && run_start.is_some() {
            let start = run_start.take().unwrap();
            let end = if moved { j - 1 } else { j };
            let duration = curve.grid[end] - curve.grid[start];
            if duration >= hover_threshold_ms {
                hovers += 1;
                hover_time += duration;
            }
        }
    }

    let mut mv = MeasureVector::default();
    mv.insert("RT".into(), rt);
    mv.insert("initiation_time".into(), initiation);
    mv.insert("total_distance".into(), total_distance);
    mv.insert("max_velocity".into(), max_velocity);
    mv.insert("max_acceleration".into(), max_acceleration);
    mv.insert("hovers".into(), hovers as f64);
    mv.insert("hover_time".into(), hover_time);
    mv.insert("x_flips".into(), count_flips(curve, 0, flip_threshold));
    mv.insert(
        "y_flips".into(),
        if curve.d > 1 { count_flips(curve, 1, flip_threshold) } else { 0.0 },
    );
    mv.insert("length".into(), t as f64);
    Ok(mv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bivariate(grid: Vec<f64>, pts: &[(f64, f64)]) -> Curve {
        let values = pts.iter().flat_map(|&(x, y)| [x, y]).collect();
        Curve::new(grid, values, 2).unwrap()
    }

    #[test]
    fn stationary_trajectory_is_one_long_hover() {
        let grid: Vec<f64> = (0..6).map(|i| i as f64 * 1000.0).collect();
        let c = bivariate(grid, &[(400.0, 300.0); 6]);
        let m = extract_measures(&c, 1000.0, 0.0).unwrap();
        assert_eq!(m.get("total_distance").unwrap(), 0.0);
        assert_eq!(m.get("hovers").unwrap(), 1.0);
        assert_eq!(m.get("hover_time").unwrap(), 5000.0);
        assert_eq!(m.get("x_flips").unwrap(), 0.0);
        assert_eq!(m.get("RT").unwrap(), 5000.0);
        assert_eq!(m.get("initiation_time").unwrap(), 5000.0);
        assert_eq!(m.get("length").unwrap(), 6.0);
    }

    #[test]
    fn straight_move_has_euclidean_distance() {
        let c = bivariate(vec![0.0, 10.0], &[(0.0, 0.0), (3.0, 4.0)]);
        let m = extract_measures(&c, 1000.0, 0.0).unwrap();
        assert_abs_diff_eq!(m.get("total_distance").unwrap(), 5.0, epsilon = 1e-12);
        assert_eq!(m.get("initiation_time").unwrap(), 10.0);
        assert_eq!(m.get("length").unwrap(), 2.0);
    }

    #[test]
    fn sign_changes_count_as_flips() {
        // x deltas +1,+1,-1,+1 -> two sign changes.
        let xs = [0.0, 1.0, 2.0, 1.0, 2.0];
        let pts: Vec<(f64, f64)> = xs.iter().map(|&x| (x, 0.0)).collect();
        let c = bivariate((0..5).map(|i| i as f64).collect(), &pts);
        let m = extract_measures(&c, 1000.0, 0.0).unwrap();
        assert_eq!(m.get("x_flips").unwrap(), 2.0);
        assert_eq!(m.get("y_flips").unwrap(), 0.0);
    }

    #[test]
    fn flip_threshold_filters_jitter() {
        // Deltas +10, -0.1, +10: the tiny reversal is ignored at threshold 0.5.
        let xs = [0.0, 10.0, 9.9, 19.9];
        let pts: Vec<(f64, f64)> = xs.iter().map(|&x| (x, 0.0)).collect();
        let c = bivariate((0..4).map(|i| i as f64).collect(), &pts);
        let strict = extract_measures(&c, 1000.0, 0.0).unwrap();
        let loose = extract_measures(&c, 1000.0, 0.5).unwrap();
        assert_eq!(strict.get("x_flips").unwrap(), 2.0);
        assert_eq!(loose.get("x_flips").unwrap(), 0.0);
    }

    #[test]
    fn total_distance_ignores_time_reparameterization() {
        let pts = [(0.0, 0.0), (1.0, 2.0), (4.0, 1.0), (2.0, 2.0)];
        let a = bivariate(vec![0.0, 1.0, 2.0, 3.0], &pts);
        let b = bivariate(vec![0.0, 50.0, 51.0, 500.0], &pts);
        let ma = extract_measures(&a, 1000.0, 0.0).unwrap();
        let mb = extract_measures(&b, 1000.0, 0.0).unwrap();
        assert_abs_diff_eq!(
            ma.get("total_distance").unwrap(),
            mb.get("total_distance").unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn short_hovers_do_not_count() {
        // Motionless for 500ms in the middle; threshold 1000ms.
        let c = bivariate(
            vec![0.0, 100.0, 600.0, 700.0],
            &[(0.0, 0.0), (1.0, 0.0), (1.0, 0.0), (2.0, 0.0)],
        );
        let m = extract_measures(&c, 1000.0, 0.0).unwrap();
        assert_eq!(m.get("hovers").unwrap(), 0.0);
        assert_eq!(m.get("hover_time").unwrap(), 0.0);
        let m = extract_measures(&c, 400.0, 0.0).unwrap();
        assert_eq!(m.get("hovers").unwrap(), 1.0);
        assert_eq!(m.get("hover_time").unwrap(), 500.0);
    }

    #[test]
    fn velocity_of_linear_motion() {
        // x advances 2 units per ms.
        let grid: Vec<f64> = (0..5).map(|i| i as f64).collect();
        let pts: Vec<(f64, f64)> = grid.iter().map(|&t| (2.0 * t, 0.0)).collect();
        let c = bivariate(grid, &pts);
        let m = extract_measures(&c, 1000.0, 0.0).unwrap();
        assert_abs_diff_eq!(m.get("max_velocity").unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.get("max_acceleration").unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn unknown_measure_lookup_fails() {
        let c = bivariate(vec![0.0, 1.0], &[(0.0, 0.0), (1.0, 1.0)]);
        let m = extract_measures(&c, 1000.0, 0.0).unwrap();
        assert!(m.get("nope").is_err());
        for name in CANONICAL_MEASURES {
            assert!(m.get(name).is_ok(), "missing canonical measure {name}");
        }
    }
}
