use serde::{Deserialize, Serialize};

use super::curve::{Curve, NormalizedCurve};
use super::measures::extract_measures;
use super::{LabeledSample, DEFAULT_GRID_SIZE};
use crate::error::{Error, Result};

/// How raw pixel coordinates are made comparable across trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StandardizeMode {
    /// Divide x by the recorded viewport width and y by its height.
    Viewport,
    /// Per-dimension min-max scaling to [0,1]; used when no viewport is
    /// recorded.
    MinMax,
}

/// Settings consumed by [`preprocess_sample`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessSettings {
    /// Normalised grid size m.
    pub grid_size: usize,
    /// Minimum duration of a motionless run to count as a hover, in ms.
    pub hover_threshold_ms: f64,
    /// Deltas with magnitude at or below this are ignored when counting
    /// direction flips.
    pub flip_threshold: f64,
    pub standardize: StandardizeMode,
    /// Take derivatives of the normalised curve instead of the raw one.
    /// Off by default: derivatives are computed on the raw timestamp grid
    /// and time-normalised afterwards.
    pub derivatives_after_normalize: bool,
}

impl Default for PreprocessSettings {
    fn default() -> Self {
        PreprocessSettings {
            grid_size: DEFAULT_GRID_SIZE,
            hover_threshold_ms: 1000.0,
            flip_threshold: 0.0,
            standardize: StandardizeMode::Viewport,
            derivatives_after_normalize: false,
        }
    }
}

/// Divide x-coordinates by the viewport width and y-coordinates by its
/// height; further dimensions pass through unchanged. The grid is preserved
/// and outputs are not clamped.
pub fn standardize(curve: &Curve, viewport: (f64, f64)) -> Result<Curve> {
    let (w, h) = viewport;
    if !(w > 0.0) || !(h > 0.0) {
        return Err(Error::invalid(format!(
            "viewport dimensions must be positive, got {w}x{h}"
        )));
    }
    let mut values = curve.values.clone();
    for row in values.chunks_exact_mut(curve.d) {
        row[0] /= w;
        if curve.d > 1 {
            row[1] /= h;
        }
    }
    Curve::new(curve.grid.clone(), values, curve.d)
}

/// Fallback standardisation: per-dimension min-max scaling to [0,1].
/// A constant dimension maps to 0.5.
pub fn standardize_minmax(curve: &Curve) -> Result<Curve> {
    let mut values = curve.values.clone();
    for k in 0..curve.d {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for j in 0..curve.len() {
            let v = curve.values[j * curve.d + k];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        for j in 0..curve.len() {
            let v = &mut values[j * curve.d + k];
            *v = if hi > lo { (*v - lo) / (hi - lo) } else { 0.5 };
        }
    }
    Curve::new(curve.grid.clone(), values, curve.d)
}

/// One central-difference pass on a (possibly nonuniform) grid, one-sided at
/// the endpoints. Works for any T >= 2; precondition checks live in
/// [`finite_derivative`].
fn diff_once(grid: &[f64], values: &[f64], d: usize) -> Vec<f64> {
    let t = grid.len();
    let mut out = vec![0.0; values.len()];
    for j in 0..t {
        let (lo, hi) = if j == 0 {
            (0, 1)
        } else if j == t - 1 {
            (t - 2, t - 1)
        } else {
            (j - 1, j + 1)
        };
        let dt = grid[hi] - grid[lo];
        for k in 0..d {
            out[j * d + k] = (values[hi * d + k] - values[lo * d + k]) / dt;
        }
    }
    out
}

/// Finite-difference derivative of the given order on the raw grid.
///
/// Central differences `(x(t_{j+1}) - x(t_{j-1})) / (t_{j+1} - t_{j-1})` at
/// interior points, one-sided at the endpoints; the second derivative is the
/// first derivative applied twice. The grid is preserved.
pub fn finite_derivative(curve: &Curve, order: usize) -> Result<Curve> {
    let min_len = match order {
        1 => 3,
        2 => 5,
        _ => return Err(Error::invalid(format!("derivative order must be 1 or 2, got {order}"))),
    };
    if curve.len() < min_len {
        return Err(Error::invalid(format!(
            "derivative of order {order} needs at least {min_len} samples, got {}",
            curve.len()
        )));
    }
    let mut values = diff_once(&curve.grid, &curve.values, curve.d);
    if order == 2 {
        values = diff_once(&curve.grid, &values, curve.d);
    }
    Curve::new(curve.grid.clone(), values, curve.d)
}

/// Derivative pass without the length preconditions, for internal consumers
/// (measure extraction) that must handle very short curves.
pub(crate) fn derivative_values(curve: &Curve, order: usize) -> Vec<f64> {
    let mut values = diff_once(&curve.grid, &curve.values, curve.d);
    for _ in 1..order {
        values = diff_once(&curve.grid, &values, curve.d);
    }
    values
}

/// Rescale time affinely to [0,1] and linearly interpolate each dimension at
/// `m` equidistant points. Endpoints are reproduced exactly.
pub fn time_normalize(curve: &Curve, m: usize) -> Result<NormalizedCurve> {
    if m < 2 {
        return Err(Error::invalid(format!("normalised grid size must be >= 2, got {m}")));
    }
    let t = curve.len();
    let t0 = curve.grid[0];
    let span = curve.grid[t - 1] - t0;
    if !(span > 0.0) {
        return Err(Error::invalid("curve grid spans zero duration"));
    }
    // Knot positions rescaled to [0,1].
    let knots: Vec<f64> = curve.grid.iter().map(|&g| (g - t0) / span).collect();

    let mut values = vec![0.0; m * curve.d];
    let mut seg = 0usize;
    for i in 0..m {
        let u = if i == m - 1 { 1.0 } else { i as f64 / (m - 1) as f64 };
        while seg + 2 < t && knots[seg + 1] < u {
            seg += 1;
        }
        let (a, b) = (knots[seg], knots[seg + 1]);
        let w = if b > a { ((u - a) / (b - a)).clamp(0.0, 1.0) } else { 0.0 };
        for k in 0..curve.d {
            let va = curve.values[seg * curve.d + k];
            let vb = curve.values[(seg + 1) * curve.d + k];
            values[i * curve.d + k] = va + w * (vb - va);
        }
    }
    NormalizedCurve::new(values, m, curve.d)
}

/// Run the full preprocessing chain for one observation.
///
/// Measures come from the raw pixel trajectory; coordinates are then
/// standardised; derivative orders 0..2 are taken on the raw timestamp grid
/// (unless configured otherwise) and each is time-normalised to the
/// configured grid.
pub fn preprocess_sample(
    id: String,
    raw: &Curve,
    viewport: Option<(f64, f64)>,
    label: usize,
    settings: &PreprocessSettings,
    external_measures: &[(String, f64)],
) -> Result<LabeledSample> {
    let mut measures = extract_measures(raw, settings.hover_threshold_ms, settings.flip_threshold)?;
    for (name, value) in external_measures {
        measures.insert(name.clone(), *value);
    }

    let standardized = match (settings.standardize, viewport) {
        (StandardizeMode::Viewport, Some(vp)) => standardize(raw, vp)?,
        (StandardizeMode::Viewport, None) | (StandardizeMode::MinMax, _) => standardize_minmax(raw)?,
    };

    let normalized = if settings.derivatives_after_normalize {
        let base = time_normalize(&standardized, settings.grid_size)?;
        // Reinterpret the normalised curve as a curve on [0,1] and
        // differentiate there.
        let grid: Vec<f64> = (0..base.m).map(|j| base.t(j)).collect();
        let as_curve = Curve::new(grid, base.values.clone(), base.d)?;
        let d1 = finite_derivative(&as_curve, 1)?;
        let d2 = finite_derivative(&as_curve, 2)?;
        [
            base,
            NormalizedCurve::new(d1.values, settings.grid_size, raw.d)?,
            NormalizedCurve::new(d2.values, settings.grid_size, raw.d)?,
        ]
    } else {
        let d1 = finite_derivative(&standardized, 1)?;
        let d2 = finite_derivative(&standardized, 2)?;
        [
            time_normalize(&standardized, settings.grid_size)?,
            time_normalize(&d1, settings.grid_size)?,
            time_normalize(&d2, settings.grid_size)?,
        ]
    };

    Ok(LabeledSample {
        id,
        curve: standardized,
        normalized,
        measures,
        label,
    })
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
    fn standardize_maps_viewport_corners_to_unit_box() {
        let c = bivariate(vec![0.0, 1.0], &[(0.0, 0.0), (800.0, 600.0)]);
        let s = standardize(&c, (800.0, 600.0)).unwrap();
        assert_eq!(s.point(0), &[0.0, 0.0]);
        assert_eq!(s.point(1), &[1.0, 1.0]);
        assert_eq!(s.grid, c.grid);
    }

    #[test]
    fn standardize_keeps_constant_center() {
        let c = bivariate(vec![0.0, 1.0, 2.0], &[(400.0, 300.0); 3]);
        let s = standardize(&c, (800.0, 600.0)).unwrap();
        for j in 0..3 {
            assert_eq!(s.point(j), &[0.5, 0.5]);
        }
    }

    #[test]
    fn standardize_does_not_clamp() {
        // Oracle: direct division, 1000/800 = 1.25, -50/600 = -0.08333...
        let c = bivariate(vec![0.0, 1.0], &[(1000.0, -50.0), (0.0, 0.0)]);
        let s = standardize(&c, (800.0, 600.0)).unwrap();
        assert_abs_diff_eq!(s.point(0)[0], 1.25, epsilon = 1e-12);
        assert_abs_diff_eq!(s.point(0)[1], -50.0 / 600.0, epsilon = 1e-12);
    }

    #[test]
    fn standardize_rejects_bad_viewport() {
        let c = bivariate(vec![0.0, 1.0], &[(1.0, 1.0), (2.0, 2.0)]);
        assert!(standardize(&c, (0.0, 600.0)).is_err());
        assert!(standardize(&c, (800.0, -1.0)).is_err());
    }

    #[test]
    fn standardize_is_scale_consistent() {
        // standardize(k*curve, k*viewport) == standardize(curve, viewport)
        let c = bivariate(vec![0.0, 1.0, 3.0], &[(10.0, 20.0), (400.0, 30.0), (80.0, 550.0)]);
        let k = 3.5;
        let scaled = bivariate(
            vec![0.0, 1.0, 3.0],
            &[(k * 10.0, k * 20.0), (k * 400.0, k * 30.0), (k * 80.0, k * 550.0)],
        );
        let a = standardize(&c, (800.0, 600.0)).unwrap();
        let b = standardize(&scaled, (k * 800.0, k * 600.0)).unwrap();
        for (u, v) in a.values.iter().zip(&b.values) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-12);
        }
    }

    #[test]
    fn minmax_maps_to_unit_interval_and_centers_constants() {
        let c = bivariate(vec![0.0, 1.0, 2.0], &[(10.0, 5.0), (20.0, 5.0), (15.0, 5.0)]);
        let s = standardize_minmax(&c).unwrap();
        assert_eq!(s.point(0), &[0.0, 0.5]);
        assert_eq!(s.point(1), &[1.0, 0.5]);
        assert_eq!(s.point(2), &[0.5, 0.5]);
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let c = Curve::new(vec![0.0, 1.0, 2.5, 4.0], vec![7.0; 4], 1).unwrap();
        let d = finite_derivative(&c, 1).unwrap();
        assert!(d.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn derivative_of_linear_is_exact_slope() {
        // x(t) = 3t on {0,1,2}: exact for a degree-1 polynomial at every point.
        let c = Curve::new(vec![0.0, 1.0, 2.0], vec![0.0, 3.0, 6.0], 1).unwrap();
        let d = finite_derivative(&c, 1).unwrap();
        for &v in &d.values {
            assert_abs_diff_eq!(v, 3.0, epsilon = 1e-12);
        }
        // Also on an irregular grid.
        let grid = vec![0.0, 0.7, 1.1, 2.9, 4.0];
        let vals: Vec<f64> = grid.iter().map(|t| 3.0 * t - 1.0).collect();
        let c = Curve::new(grid, vals, 1).unwrap();
        let d = finite_derivative(&c, 1).unwrap();
        for &v in &d.values {
            assert_abs_diff_eq!(v, 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn derivative_of_quadratic_is_exact_at_interior_points() {
        // Symbolic check: (t_{j+1}^2 - t_{j-1}^2)/(t_{j+1} - t_{j-1}) = 2 t_j
        // on the uniform grid {0..4}, so interior values are {2,4,6}.
        let grid = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let vals: Vec<f64> = grid.iter().map(|t| t * t).collect();
        let c = Curve::new(grid, vals, 1).unwrap();
        let d = finite_derivative(&c, 1).unwrap();
        assert_abs_diff_eq!(d.values[1], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.values[2], 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.values[3], 6.0, epsilon = 1e-12);
    }

    #[test]
    fn derivative_rejects_short_curves() {
        let c = Curve::new(vec![0.0, 1.0], vec![0.0, 1.0], 1).unwrap();
        assert!(finite_derivative(&c, 1).is_err());
        let c = Curve::new(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 1.0, 2.0, 3.0], 1).unwrap();
        assert!(finite_derivative(&c, 2).is_err());
        assert!(finite_derivative(&c, 3).is_err());
    }

    #[test]
    fn second_derivative_of_quadratic_is_constant_inside() {
        let grid: Vec<f64> = (0..9).map(|i| i as f64).collect();
        let vals: Vec<f64> = grid.iter().map(|t| t * t).collect();
        let c = Curve::new(grid, vals, 1).unwrap();
        let d2 = finite_derivative(&c, 2).unwrap();
        // First derivative is exactly 2t at interior points, so the second
        // pass is exact at indices 2..=6.
        for j in 2..=6 {
            assert_abs_diff_eq!(d2.values[j], 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn time_normalize_reproduces_knots() {
        let m = DEFAULT_GRID_SIZE;
        let grid: Vec<f64> = (0..m).map(|i| i as f64 * 10.0).collect();
        let vals: Vec<f64> = grid.iter().map(|t| (t / 37.0).sin()).collect();
        let c = Curve::new(grid, vals.clone(), 1).unwrap();
        let n = time_normalize(&c, m).unwrap();
        for (a, b) in n.values.iter().zip(&vals) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn time_normalize_interpolates_segment_midpoint() {
        let c = bivariate(vec![0.0, 100.0], &[(0.0, 0.0), (1.0, 2.0)]);
        let n = time_normalize(&c, 3).unwrap();
        assert_eq!(n.point(0), &[0.0, 0.0]);
        assert_abs_diff_eq!(n.point(1)[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(n.point(1)[1], 1.0, epsilon = 1e-12);
        assert_eq!(n.point(2), &[1.0, 2.0]);
    }

    #[test]
    fn time_normalize_handles_uneven_grids() {
        // Knots rescale to {0, 0.1, 1}; queries {0,.25,.5,.75,1} fall in the
        // second segment (constant 1) except the first.
        let c = Curve::new(vec![0.0, 10.0, 100.0], vec![0.0, 1.0, 1.0], 1).unwrap();
        let n = time_normalize(&c, 5).unwrap();
        let expect = [0.0, 1.0, 1.0, 1.0, 1.0];
        for (a, b) in n.values.iter().zip(&expect) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn time_normalize_is_idempotent() {
        let mut rng_state = 123u64;
        let mut next = move || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (rng_state >> 33) as f64 / (1u64 << 31) as f64
        };
        for _ in 0..20 {
            let m = 31;
            let grid: Vec<f64> = (0..m).map(|i| i as f64 / (m - 1) as f64).collect();
            let vals: Vec<f64> = (0..m * 2).map(|_| next()).collect();
            let c = Curve::new(grid, vals.clone(), 2).unwrap();
            let n = time_normalize(&c, m).unwrap();
            for (a, b) in n.values.iter().zip(&vals) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }
}
