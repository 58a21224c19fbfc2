use serde::{Deserialize, Serialize};

use super::curve::{Curve, NormalizedCurve};
use crate::error::{Error, Result};

/// Axis-aligned box in standardised coordinates (edges inclusive).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }
}

/// Ordered list of labelled screen regions; the first matching box wins,
/// points in no box get the fallback symbol.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AoiPartition {
    pub boxes: Vec<(char, Rect)>,
    pub fallback: char,
}

impl AoiPartition {
    pub fn new(boxes: Vec<(char, Rect)>, fallback: char) -> Result<Self> {
        for (i, (sym, rect)) in boxes.iter().enumerate() {
            if *sym == fallback {
                return Err(Error::invalid(format!(
                    "AOI symbol '{sym}' collides with the fallback symbol"
                )));
            }
            if boxes[..i].iter().any(|(s, _)| s == sym) {
                return Err(Error::invalid(format!("duplicate AOI symbol '{sym}'")));
            }
            if !(rect.x1 > rect.x0) || !(rect.y1 > rect.y0) {
                return Err(Error::invalid(format!(
                    "AOI box '{sym}' must have positive area"
                )));
            }
        }
        Ok(AoiPartition { boxes, fallback })
    }

    /// Symbol for one point (first two coordinates).
    pub fn classify(&self, point: &[f64]) -> char {
        let x = point[0];
        let y = if point.len() > 1 { point[1] } else { 0.0 };
        self.boxes
            .iter()
            .find(|(_, r)| r.contains(x, y))
            .map(|(s, _)| *s)
            .unwrap_or(self.fallback)
    }
}

/// The per-sample-point AOI symbols of one trajectory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolSequence(pub Vec<char>);

impl SymbolSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Collapse consecutive repeated symbols ("AAB B" -> "AB B").
    pub fn collapse_repeats(&self) -> SymbolSequence {
        let mut out = Vec::new();
        for &c in &self.0 {
            if out.last() != Some(&c) {
                out.push(c);
            }
        }
        SymbolSequence(out)
    }
}

impl std::fmt::Display for SymbolSequence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.0 {
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// A vector of positive parts summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Composition(pub Vec<f64>);

impl Composition {
    pub fn new(parts: Vec<f64>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::invalid("composition needs at least one part"));
        }
        if parts.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::invalid("composition parts must be strictly positive"));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "composition parts sum to {sum}, expected 1"
            )));
        }
        Ok(Composition(parts))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn symbols_of<'a>(points: impl Iterator<Item = &'a [f64]>, partition: &AoiPartition) -> SymbolSequence {
    SymbolSequence(points.map(|p| partition.classify(p)).collect())
}

/// One AOI symbol per sample point, in time order.
pub fn aoi_symbols(curve: &Curve, partition: &AoiPartition) -> SymbolSequence {
    symbols_of(curve.points(), partition)
}

/// Same as [`aoi_symbols`] on the time-normalised grid, yielding sequences of
/// equal length across observations.
pub fn aoi_symbols_normalized(curve: &NormalizedCurve, partition: &AoiPartition) -> SymbolSequence {
    symbols_of(curve.points(), partition)
}

/// Fraction of (normalised) time spent in each AOI, with additive half-count
/// smoothing so every part is strictly positive.
///
/// `include_fallback` decides whether time outside every box becomes an extra
/// final part; callers comparing compositions across a dataset must use a
/// consistent choice for all observations.
pub fn aoi_composition_with(
    curve: &NormalizedCurve,
    partition: &AoiPartition,
    include_fallback: bool,
) -> Result<Composition> {
    let symbols = aoi_symbols_normalized(curve, partition);
    let n_parts = partition.boxes.len() + usize::from(include_fallback);
    if n_parts == 0 {
        return Err(Error::invalid("partition has no AOI boxes"));
    }
    let mut counts = vec![0.0f64; n_parts];
    for &s in &symbols.0 {
        if let Some(i) = partition.boxes.iter().position(|(sym, _)| *sym == s) {
            counts[i] += 1.0;
        } else if include_fallback {
            counts[n_parts - 1] += 1.0;
        } else {
            return Err(Error::invalid(format!(
                "point outside every AOI but fallback part disabled (symbol '{s}')"
            )));
        }
    }
    let denom = symbols.len() as f64 + 0.5 * n_parts as f64;
    let mut parts: Vec<f64> = counts.iter().map(|c| (c + 0.5) / denom).collect();
    // Exact renormalisation.
    let sum: f64 = parts.iter().sum();
    for p in &mut parts {
        *p /= sum;
    }
    Composition::new(parts)
}

/// Composition with the fallback part included only when some point actually
/// falls outside every box.
pub fn aoi_composition(curve: &NormalizedCurve, partition: &AoiPartition) -> Result<Composition> {
    let any_outside = curve
        .points()
        .any(|p| partition.classify(p) == partition.fallback);
    aoi_composition_with(curve, partition, any_outside)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn part(boxes: &[(char, (f64, f64, f64, f64))]) -> AoiPartition {
        AoiPartition::new(
            boxes
                .iter()
                .map(|&(s, (x0, y0, x1, y1))| (s, Rect { x0, y0, x1, y1 }))
                .collect(),
            '_',
        )
        .unwrap()
    }

    fn norm(points: &[(f64, f64)]) -> NormalizedCurve {
        let values = points.iter().flat_map(|&(x, y)| [x, y]).collect();
        NormalizedCurve::new(values, points.len(), 2).unwrap()
    }

    #[test]
    fn rejects_invalid_partitions() {
        let r = Rect { x0: 0.0, y0: 0.0, x1: 1.0, y1: 1.0 };
        assert!(AoiPartition::new(vec![('A', r), ('A', r)], '_').is_err());
        assert!(AoiPartition::new(vec![('_', r)], '_').is_err());
        let degenerate = Rect { x0: 0.0, y0: 0.0, x1: 0.0, y1: 1.0 };
        assert!(AoiPartition::new(vec![('A', degenerate)], '_').is_err());
    }

    #[test]
    fn all_points_inside_one_box() {
        let p = part(&[('A', (0.0, 0.0, 1.0, 1.0))]);
        let c = norm(&[(0.1, 0.1), (0.5, 0.5), (0.9, 0.9)]);
        let s = aoi_symbols_normalized(&c, &p);
        assert_eq!(s.to_string(), "AAA");
    }

    #[test]
    fn outside_points_get_fallback() {
        let p = part(&[('A', (0.0, 0.0, 0.4, 0.4))]);
        let c = norm(&[(0.1, 0.1), (0.9, 0.9)]);
        let s = aoi_symbols_normalized(&c, &p);
        assert_eq!(s.to_string(), "A_");
    }

    #[test]
    fn first_matching_box_wins_on_overlap() {
        let p = part(&[('A', (0.0, 0.0, 1.0, 1.0)), ('B', (0.0, 0.0, 1.0, 1.0))]);
        let c = norm(&[(0.5, 0.5), (0.5, 0.5)]);
        assert_eq!(aoi_symbols_normalized(&c, &p).to_string(), "AA");
    }

    #[test]
    fn raw_curve_symbols_follow_the_raw_length() {
        let p = part(&[('A', (0.0, 0.0, 1.0, 1.0))]);
        let c = Curve::new(vec![0.0, 5.0, 50.0], vec![0.1, 0.1, 0.2, 0.2, 0.3, 0.3], 2).unwrap();
        assert_eq!(aoi_symbols(&c, &p).len(), 3);
    }

    #[test]
    fn composition_smoothing_matches_half_count_formula() {
        // 101 points all in 'A' of a 2-AOI partition: (101.5, 0.5) / 102.
        let p = part(&[('A', (0.0, 0.0, 1.0, 1.0)), ('B', (2.0, 2.0, 3.0, 3.0))]);
        let pts: Vec<(f64, f64)> = (0..101).map(|i| (0.5, i as f64 / 100.0 * 0.9)).collect();
        let c = norm(&pts);
        let comp = aoi_composition(&c, &p).unwrap();
        assert_eq!(comp.len(), 2);
        assert_abs_diff_eq!(comp.0[0], 101.5 / 102.0, epsilon = 1e-12);
        assert_abs_diff_eq!(comp.0[1], 0.5 / 102.0, epsilon = 1e-12);
    }

    #[test]
    fn composition_smoothing_on_even_split() {
        // 50/51 split over two AOIs -> (50.5, 51.5) / 102.
        let p = part(&[('A', (0.0, 0.0, 0.5, 1.0)), ('B', (0.5001, 0.0, 1.0, 1.0))]);
        let mut pts = vec![(0.25, 0.5); 50];
        pts.extend(vec![(0.75, 0.5); 51]);
        let comp = aoi_composition(&norm(&pts), &p).unwrap();
        assert_abs_diff_eq!(comp.0[0], 50.5 / 102.0, epsilon = 1e-12);
        assert_abs_diff_eq!(comp.0[1], 51.5 / 102.0, epsilon = 1e-12);
    }

    #[test]
    fn symmetric_occupancy_gives_symmetric_parts() {
        let p = part(&[('A', (0.0, 0.0, 0.5, 1.0)), ('B', (0.5001, 0.0, 1.0, 1.0))]);
        let mut pts = vec![(0.25, 0.5); 40];
        pts.extend(vec![(0.75, 0.5); 40]);
        let comp = aoi_composition(&norm(&pts), &p).unwrap();
        assert_abs_diff_eq!(comp.0[0], comp.0[1], epsilon = 1e-15);
    }

    #[test]
    fn fallback_becomes_extra_part_when_needed() {
        let p = part(&[('A', (0.0, 0.0, 0.4, 1.0))]);
        let pts = vec![(0.2, 0.5), (0.9, 0.5)];
        let comp = aoi_composition(&norm(&pts), &p).unwrap();
        assert_eq!(comp.len(), 2);
        let sum: f64 = comp.0.iter().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn composition_invariants_hold_for_random_occupancy() {
        let p = part(&[('A', (0.0, 0.0, 0.3, 1.0)), ('B', (0.3001, 0.0, 0.7, 1.0))]);
        let mut state = 5u64;
        for _ in 0..50 {
            let pts: Vec<(f64, f64)> = (0..30)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    (((state >> 33) as f64 / (1u64 << 31) as f64).fract(), 0.5)
                })
                .collect();
            let comp = aoi_composition(&norm(&pts), &p).unwrap();
            assert!(comp.0.iter().all(|&v| v > 0.0));
            let sum: f64 = comp.0.iter().sum();
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn collapse_repeats_removes_runs() {
        let s = SymbolSequence("AABBBA_".chars().collect());
        assert_eq!(s.collapse_repeats().to_string(), "ABA_");
    }
}
