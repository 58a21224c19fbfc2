use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A d-variate function observed on a strictly increasing time grid.
///
/// Values are stored row-major: row `j` holds the d coordinates at `grid[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    /// Timestamps in milliseconds, strictly increasing, length T >= 2.
    pub grid: Vec<f64>,
    /// T*d coordinate table, row-major.
    pub values: Vec<f64>,
    /// Dimension count.
    pub d: usize,
}

impl Curve {
    /// Build a validated curve.
    pub fn new(grid: Vec<f64>, values: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("curve dimension must be positive"));
        }
        if grid.len() < 2 {
            return Err(Error::invalid(format!(
                "curve needs at least 2 samples, got {}",
                grid.len()
            )));
        }
        if values.len() != grid.len() * d {
            return Err(Error::invalid(format!(
                "value table has {} entries, expected {} ({} samples x {} dims)",
                values.len(),
                grid.len() * d,
                grid.len(),
                d
            )));
        }
        for w in grid.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::invalid(format!(
                    "grid must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if grid.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("curve contains non-finite values"));
        }
        Ok(Curve { grid, values, d })
    }

    /// Number of samples T.
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Coordinates at sample index `j`.
    pub fn point(&self, j: usize) -> &[f64] {
        &self.values[j * self.d..(j + 1) * self.d]
    }

    /// Iterator over sample points in time order.
    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.d)
    }
}

/// A d-variate curve on the implicit equidistant grid {0, 1/(m-1), ..., 1}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedCurve {
    /// m*d coordinate table, row-major.
    pub values: Vec<f64>,
    /// Grid size m >= 2.
    pub m: usize,
    /// Dimension count.
    pub d: usize,
}

impl NormalizedCurve {
    pub fn new(values: Vec<f64>, m: usize, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("curve dimension must be positive"));
        }
        if m < 2 {
            return Err(Error::invalid(format!("grid size must be >= 2, got {m}")));
        }
        if values.len() != m * d {
            return Err(Error::invalid(format!(
                "value table has {} entries, expected {}",
                values.len(),
                m * d
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("curve contains non-finite values"));
        }
        Ok(NormalizedCurve { values, m, d })
    }

    /// Grid coordinate of row `j`.
    pub fn t(&self, j: usize) -> f64 {
        j as f64 / (self.m - 1) as f64
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.values[j * self.d..(j + 1) * self.d]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.d)
    }

    /// Column `k` as a vector of length m.
    pub fn dim(&self, k: usize) -> Vec<f64> {
        (0..self.m).map(|j| self.values[j * self.d + k]).collect()
    }
}
