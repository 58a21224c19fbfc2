use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcdata::{MeasureVector, NormalizedCurve};

/// Summary functionals available to the svs family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SummaryKind {
    /// Trapezoidal integral over [0,1] (the mean, since the interval has
    /// unit length).
    Mean,
    Max,
    Min,
    Range,
}

/// A scalar summary: one functional applied to one dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScalarSummary {
    pub kind: SummaryKind,
    pub dim: usize,
}

fn dim_summary(curve: &NormalizedCurve, kind: SummaryKind, k: usize) -> f64 {
    match kind {
        SummaryKind::Mean => {
            let h = 1.0 / (curve.m - 1) as f64;
            let mut integral = 0.0;
            for j in 0..curve.m {
                let w = if j == 0 || j == curve.m - 1 { 0.5 } else { 1.0 };
                integral += w * curve.values[j * curve.d + k];
            }
            integral * h
        }
        SummaryKind::Max => (0..curve.m)
            .map(|j| curve.values[j * curve.d + k])
            .fold(f64::NEG_INFINITY, f64::max),
        SummaryKind::Min => (0..curve.m)
            .map(|j| curve.values[j * curve.d + k])
            .fold(f64::INFINITY, f64::min),
        SummaryKind::Range => {
            dim_summary(curve, SummaryKind::Max, k) - dim_summary(curve, SummaryKind::Min, k)
        }
    }
}

/// Absolute difference of one scalar summary.
pub fn svs_scalar_distance(
    x: &NormalizedCurve,
    y: &NormalizedCurve,
    summary: &ScalarSummary,
) -> Result<f64> {
    if summary.dim >= x.d || summary.dim >= y.d {
        return Err(Error::invalid(format!(
            "summary dimension {} out of range for {}-variate curves",
            summary.dim,
            x.d.min(y.d)
        )));
    }
    Ok((dim_summary(x, summary.kind, summary.dim) - dim_summary(y, summary.kind, summary.dim)).abs())
}

/// Euclidean distance between the per-dimension summary vectors.
pub fn svs_vector_distance(
    x: &NormalizedCurve,
    y: &NormalizedCurve,
    kind: SummaryKind,
) -> Result<f64> {
    if x.d != y.d {
        return Err(Error::invalid(format!("dimension mismatch: {} vs {}", x.d, y.d)));
    }
    let mut sum = 0.0;
    for k in 0..x.d {
        let diff = dim_summary(x, kind, k) - dim_summary(y, kind, k);
        sum += diff * diff;
    }
    Ok(sum.sqrt())
}

/// Euclidean distance over the selected measure components.
pub fn measure_distance(a: &MeasureVector, b: &MeasureVector, names: &[String]) -> Result<f64> {
    if names.is_empty() {
        return Err(Error::invalid("measure distance needs at least one measure name"));
    }
    let mut sum = 0.0;
    for name in names {
        let diff = a.get(name)? - b.get(name)?;
        sum += diff * diff;
    }
    Ok(sum.sqrt())
}
