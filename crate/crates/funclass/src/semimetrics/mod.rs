//! Semi-metric families for comparing two preprocessed observations.
//!
//! Five families, differing in what part of the trajectory information they
//! keep: lock-step distances compare values at identical (normalised) time
//! points; elastic distances allow time stretching; svs distances compare
//! scalar or vector summaries (including the movement measures); the
//! compositional family compares AOI time compositions; the symbol-sequence
//! family applies edit distances to AOI symbol strings.
//!
//! All distances are nonnegative, symmetric and zero on identical inputs.
//! DTW deliberately violates the triangle inequality; the svs family returns
//! zero for distinct curves sharing a summary. Both are properties of the
//! definitions, not bugs.

mod compositional;
mod elastic;
mod lockstep;
mod matrix;
mod svs;
mod symbols;

pub use compositional::aitchison_distance;
pub use elastic::{dtw_distance, frechet_distance, hausdorff_distance};
pub use lockstep::{dcor_distance, lp_distance};
pub use matrix::{dataset_fingerprint, pairwise_matrix, pairwise_matrix_cached, DistanceMatrix};
pub use svs::{measure_distance, svs_scalar_distance, svs_vector_distance, ScalarSummary, SummaryKind};
pub use symbols::{hamming_distance, levenshtein_distance};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcdata::{
    aoi_composition_with, aoi_symbols, aoi_symbols_normalized, AoiPartition, Composition,
    LabeledSample, SymbolSequence,
};
use crate::rng::fingerprint;

/// The family a semi-metric belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    LockStep,
    Elastic,
    Svs,
    Composition,
    SymbolSequence,
}

impl Family {
    pub fn label(&self) -> &'static str {
        match self {
            Family::LockStep => "lock-step",
            Family::Elastic => "elastic",
            Family::Svs => "svs",
            Family::Composition => "composition",
            Family::SymbolSequence => "symbol-sequence",
        }
    }
}

/// What a parsed semi-metric computes.
#[derive(Debug, Clone, PartialEq)]
pub enum Kind {
    Lp { p: f64 },
    Dcor,
    Dtw,
    Frechet,
    Hausdorff,
    SvsScalar(ScalarSummary),
    SvsVector(SummaryKind),
    Measures(Vec<String>),
    Aitchison,
    Levenshtein,
    Hamming,
}

/// A named, parameterised distance definition: the distance name plus the
/// derivative order `a` of the curves it is evaluated on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "SpecRepr")]
pub struct SemiMetricSpec {
    pub name: String,
    pub kind: Kind,
    /// Derivative order, 0..=2. Forced to 0 for the composition,
    /// symbol-sequence and measure-based distances.
    pub a: usize,
}

#[derive(Serialize, Deserialize, Clone)]
struct SpecRepr {
    name: String,
    #[serde(default)]
    a: usize,
}

impl TryFrom<SpecRepr> for SemiMetricSpec {
    type Error = Error;
    fn try_from(repr: SpecRepr) -> Result<Self> {
        SemiMetricSpec::parse(&repr.name, repr.a)
    }
}

impl From<SemiMetricSpec> for SpecRepr {
    fn from(spec: SemiMetricSpec) -> SpecRepr {
        SpecRepr { name: spec.name, a: spec.a }
    }
}

fn parse_dim(suffix: &str) -> Result<usize> {
    match suffix {
        "x" => Ok(0),
        "y" => Ok(1),
        other => other
            .parse::<usize>()
            .map_err(|_| Error::config(format!("unknown dimension suffix '{other}'"))),
    }
}

impl SemiMetricSpec {
    /// Parse a semi-metric name and derivative order.
    ///
    /// Recognised names: `L<p>` (p >= 1), `dcor`, `dtw`, `frechet`,
    /// `hausdorff`; vector summaries `mean`, `globMax`, `globMin`,
    /// `globRange`; per-dimension scalar summaries with an `-x`/`-y`/`-<k>`
    /// suffix; `measure:<name>[+<name>...]` with the alias
    /// `measure:flips2d`; `aitchison`, `levenshtein`, `hamming`.
    pub fn parse(name: &str, a: usize) -> Result<Self> {
        if a > 2 {
            return Err(Error::config(format!("derivative order must be 0..=2, got {a}")));
        }
        let kind = if let Some(p_str) = name.strip_prefix('L') {
            let p: f64 = p_str
                .parse()
                .map_err(|_| Error::config(format!("cannot parse L^p exponent in '{name}'")))?;
            if !(p >= 1.0) {
                return Err(Error::config(format!("L^p needs p >= 1, got {p}")));
            }
            Kind::Lp { p }
        } else if name == "dcor" {
            Kind::Dcor
        } else if name == "dtw" {
            Kind::Dtw
        } else if name == "frechet" {
            Kind::Frechet
        } else if name == "hausdorff" {
            Kind::Hausdorff
        } else if name == "aitchison" {
            Kind::Aitchison
        } else if name == "levenshtein" {
            Kind::Levenshtein
        } else if name == "hamming" {
            Kind::Hamming
        } else if let Some(rest) = name.strip_prefix("measure:") {
            if rest == "flips2d" {
                Kind::Measures(vec!["x_flips".into(), "y_flips".into()])
            } else {
                let names: Vec<String> = rest.split('+').map(str::to_string).collect();
                if names.iter().any(|n| n.is_empty()) {
                    return Err(Error::config(format!("empty measure name in '{name}'")));
                }
                Kind::Measures(names)
            }
        } else {
            let (base, dim) = match name.split_once('-') {
                Some((base, suffix)) => (base, Some(parse_dim(suffix)?)),
                None => (name, None),
            };
            let summary = match base {
                "mean" => SummaryKind::Mean,
                "globMax" => SummaryKind::Max,
                "globMin" => SummaryKind::Min,
                "globRange" => SummaryKind::Range,
                _ => return Err(Error::config(format!("unknown semi-metric '{name}'"))),
            };
            match dim {
                Some(dim) => Kind::SvsScalar(ScalarSummary { kind: summary, dim }),
                None => Kind::SvsVector(summary),
            }
        };
        let spec = SemiMetricSpec { name: name.to_string(), kind, a };
        if spec.a != 0
            && matches!(
                spec.kind,
                Kind::Aitchison | Kind::Levenshtein | Kind::Hamming | Kind::Measures(_)
            )
        {
            return Err(Error::config(format!(
                "'{name}' is only defined for derivative order 0, got a={a}"
            )));
        }
        Ok(spec)
    }

    pub fn family(&self) -> Family {
        match self.kind {
            Kind::Lp { .. } | Kind::Dcor => Family::LockStep,
            Kind::Dtw | Kind::Frechet | Kind::Hausdorff => Family::Elastic,
            Kind::SvsScalar(_) | Kind::SvsVector(_) | Kind::Measures(_) => Family::Svs,
            Kind::Aitchison => Family::Composition,
            Kind::Levenshtein | Kind::Hamming => Family::SymbolSequence,
        }
    }

    /// Whether this spec needs an AOI partition to be evaluable.
    pub fn needs_aoi(&self) -> bool {
        matches!(self.kind, Kind::Aitchison | Kind::Levenshtein | Kind::Hamming)
    }

    /// Stable identifier, e.g. `globMax-x@a1`.
    pub fn id(&self) -> String {
        format!("{}@a{}", self.name, self.a)
    }

    pub fn fingerprint(&self) -> String {
        fingerprint(self.id().as_bytes())
    }
}

/// AOI-derived per-sample encodings shared by the composition and
/// symbol-sequence families.
///
/// Compositions use a dataset-consistent part count: the fallback region
/// becomes a part exactly when some observation leaves every box.
#[derive(Debug, Clone)]
pub struct AoiFeatures {
    /// Symbol sequences on the raw grids (Levenshtein input), optionally with
    /// consecutive repeats collapsed.
    pub raw_symbols: Vec<SymbolSequence>,
    /// Symbol sequences on the normalised grid (Hamming input).
    pub norm_symbols: Vec<SymbolSequence>,
    pub compositions: Vec<Composition>,
}

impl AoiFeatures {
    pub fn build(
        samples: &[LabeledSample],
        partition: &AoiPartition,
        collapse_levenshtein_repeats: bool,
    ) -> Result<AoiFeatures> {
        let raw_symbols: Vec<SymbolSequence> = samples
            .iter()
            .map(|s| {
                let seq = aoi_symbols(&s.curve, partition);
                if collapse_levenshtein_repeats {
                    seq.collapse_repeats()
                } else {
                    seq
                }
            })
            .collect();
        let norm_symbols: Vec<SymbolSequence> = samples
            .iter()
            .map(|s| aoi_symbols_normalized(&s.normalized[0], partition))
            .collect();
        let any_outside = norm_symbols
            .iter()
            .any(|seq| seq.0.iter().any(|&c| c == partition.fallback));
        let compositions = samples
            .iter()
            .map(|s| aoi_composition_with(&s.normalized[0], partition, any_outside))
            .collect::<Result<Vec<_>>>()?;
        Ok(AoiFeatures { raw_symbols, norm_symbols, compositions })
    }
}

/// Everything needed to evaluate any roster semi-metric between two samples.
pub struct DistanceContext<'a> {
    pub samples: &'a [LabeledSample],
    pub aoi: Option<&'a AoiFeatures>,
}

impl<'a> DistanceContext<'a> {
    pub fn new(samples: &'a [LabeledSample], aoi: Option<&'a AoiFeatures>) -> Self {
        DistanceContext { samples, aoi }
    }

    fn aoi(&self, spec: &SemiMetricSpec) -> Result<&AoiFeatures> {
        self.aoi.ok_or_else(|| {
            Error::config(format!("semi-metric '{}' requires an AOI partition", spec.id()))
        })
    }

    /// Evaluate `spec` between samples `i` and `j`.
    ///
    /// Lock-step and svs distances run on the time-normalised curve of order
    /// `spec.a`; elastic distances run on the raw standardised trajectory for
    /// a = 0 and on the normalised derivative point sequences otherwise.
    pub fn evaluate(&self, spec: &SemiMetricSpec, i: usize, j: usize) -> Result<f64> {
        let (si, sj) = (&self.samples[i], &self.samples[j]);
        match &spec.kind {
            Kind::Lp { p } => lp_distance(&si.normalized[spec.a], &sj.normalized[spec.a], *p),
            Kind::Dcor => dcor_distance(&si.normalized[spec.a], &sj.normalized[spec.a]),
            Kind::Dtw | Kind::Frechet | Kind::Hausdorff => {
                let (xa, xb, d) = if spec.a == 0 {
                    (&si.curve.values, &sj.curve.values, si.curve.d)
                } else {
                    (
                        &si.normalized[spec.a].values,
                        &sj.normalized[spec.a].values,
                        si.normalized[spec.a].d,
                    )
                };
                match spec.kind {
                    Kind::Dtw => dtw_distance(xa, xb, d),
                    Kind::Frechet => frechet_distance(xa, xb, d),
                    _ => hausdorff_distance(xa, xb, d),
                }
            }
            Kind::SvsScalar(summary) => {
                svs_scalar_distance(&si.normalized[spec.a], &sj.normalized[spec.a], summary)
            }
            Kind::SvsVector(kind) => {
                svs_vector_distance(&si.normalized[spec.a], &sj.normalized[spec.a], *kind)
            }
            Kind::Measures(names) => measure_distance(&si.measures, &sj.measures, names),
            Kind::Aitchison => {
                let aoi = self.aoi(spec)?;
                aitchison_distance(&aoi.compositions[i], &aoi.compositions[j])
            }
            Kind::Levenshtein => {
                let aoi = self.aoi(spec)?;
                Ok(levenshtein_distance(&aoi.raw_symbols[i], &aoi.raw_symbols[j]))
            }
            Kind::Hamming => {
                let aoi = self.aoi(spec)?;
                hamming_distance(&aoi.norm_symbols[i], &aoi.norm_symbols[j])
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_roster_names() {
        for (name, a, family) in [
            ("L1", 0, Family::LockStep),
            ("L2", 1, Family::LockStep),
            ("L4", 0, Family::LockStep),
            ("dcor", 2, Family::LockStep),
            ("dtw", 0, Family::Elastic),
            ("frechet", 0, Family::Elastic),
            ("hausdorff", 0, Family::Elastic),
            ("mean", 1, Family::Svs),
            ("globMax", 2, Family::Svs),
            ("globMax-x", 0, Family::Svs),
            ("globMin-y", 0, Family::Svs),
            ("globRange-y", 1, Family::Svs),
            ("measure:RT", 0, Family::Svs),
            ("measure:flips2d", 0, Family::Svs),
            ("aitchison", 0, Family::Composition),
            ("levenshtein", 0, Family::SymbolSequence),
            ("hamming", 0, Family::SymbolSequence),
        ] {
            let spec = SemiMetricSpec::parse(name, a).unwrap();
            assert_eq!(spec.family(), family, "{name}");
            assert_eq!(spec.id(), format!("{name}@a{a}"));
        }
    }

    #[test]
    fn rejects_malformed_specs() {
        assert!(SemiMetricSpec::parse("L0.5", 0).is_err());
        assert!(SemiMetricSpec::parse("Lx", 0).is_err());
        assert!(SemiMetricSpec::parse("nonsense", 0).is_err());
        assert!(SemiMetricSpec::parse("globMax-z", 0).is_err());
        assert!(SemiMetricSpec::parse("measure:", 0).is_err());
        assert!(SemiMetricSpec::parse("dtw", 3).is_err());
        // Composition, symbol and measure families exist only at order 0.
        assert!(SemiMetricSpec::parse("aitchison", 1).is_err());
        assert!(SemiMetricSpec::parse("hamming", 1).is_err());
        assert!(SemiMetricSpec::parse("levenshtein", 2).is_err());
        assert!(SemiMetricSpec::parse("measure:RT", 1).is_err());
    }

    #[test]
    fn flips2d_expands_to_both_axes() {
        let spec = SemiMetricSpec::parse("measure:flips2d", 0).unwrap();
        match &spec.kind {
            Kind::Measures(names) => assert_eq!(names, &["x_flips", "y_flips"]),
            other => panic!("unexpected kind {other:?}"),
        }
    }

    #[test]
    fn spec_serde_round_trip() {
        let spec = SemiMetricSpec::parse("globMax-y", 2).unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        let back: SemiMetricSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);
        assert_eq!(json, r#"{"name":"globMax-y","a":2}"#);
    }
}
