//! Raw and preprocessed multivariate functional observations.
//!
//! A [`Curve`] is a d-variate function sampled on a strictly increasing
//! millisecond grid. Preprocessing derives, per observation, the secondary
//! encodings every distance family consumes: time-normalised curves per
//! derivative order, scalar movement measures, AOI symbol sequences and AOI
//! time compositions.

mod aoi;
mod curve;
mod measures;
mod preprocess;

pub mod io;

pub use aoi::{
    aoi_composition, aoi_composition_with, aoi_symbols, aoi_symbols_normalized, AoiPartition,
    Composition, Rect, SymbolSequence,
};
pub use curve::{Curve, NormalizedCurve};
pub use measures::{extract_measures, MeasureVector, CANONICAL_MEASURES};
pub use preprocess::{
    finite_derivative, preprocess_sample, standardize, standardize_minmax, time_normalize,
    PreprocessSettings, StandardizeMode,
};

use serde::{Deserialize, Serialize};

/// Default size of the normalised evaluation grid.
pub const DEFAULT_GRID_SIZE: usize = 101;

/// A fully preprocessed observation with its class label.
///
/// `normalized[a]` holds the time-normalised curve of derivative order
/// `a ∈ {0,1,2}`; `curve` keeps the standardised trajectory on its raw
/// timestamp grid (elastic distances and symbol sequences of order 0 consume
/// it directly).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledSample {
    pub id: String,
    pub curve: Curve,
    pub normalized: [NormalizedCurve; 3],
    pub measures: MeasureVector,
    /// Class index in `0..n_classes`.
    pub label: usize,
}
