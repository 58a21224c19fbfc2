use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use super::{DistanceContext, SemiMetricSpec};
use crate::error::{Error, Result};
use crate::rng::fingerprint;

const CACHE_MAGIC: &[u8; 4] = b"FCDM";
const CACHE_VERSION: u32 = 1;

/// A full symmetric matrix of one semi-metric over a sample set.
///
/// Stored dense (n*n, row-major) with a zero diagonal; the disk cache keeps
/// only the strict upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub spec_id: String,
    pub spec_fingerprint: String,
    pub dataset_fingerprint: String,
    pub ids: Vec<String>,
    entries: Vec<f64>,
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n() + j]
    }

    /// Row `i` as a slice over all columns.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n()..(i + 1) * self.n()]
    }

    /// Write the binary cache: magic, version, fingerprints, n, id list,
    /// then the strict upper triangle as little-endian f64.
    pub fn write_cache(&self, path: &Path) -> Result<()> {
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(CACHE_MAGIC);
        buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
        for fp in [&self.spec_fingerprint, &self.dataset_fingerprint] {
            let bytes = fp.as_bytes();
            if bytes.len() != 16 {
                return Err(Error::internal("fingerprint must be 16 hex chars"));
            }
            buf.extend_from_slice(bytes);
        }
        let spec_id = self.spec_id.as_bytes();
        buf.extend_from_slice(&(spec_id.len() as u32).to_le_bytes());
        buf.extend_from_slice(spec_id);
        buf.extend_from_slice(&(self.n() as u64).to_le_bytes());
        for id in &self.ids {
            buf.extend_from_slice(&(id.len() as u32).to_le_bytes());
            buf.extend_from_slice(id.as_bytes());
        }
        let n = self.n();
        for i in 0..n {
            for j in (i + 1)..n {
                buf.extend_from_slice(&self.get(i, j).to_le_bytes());
            }
        }
        let mut file = std::fs::File::create(path)?;
        file.write_all(&buf)?;
        Ok(())
    }

    /// Read a cache file written by [`DistanceMatrix::write_cache`].
    pub fn read_cache(path: &Path) -> Result<DistanceMatrix> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .map_err(|e| Error::data(format!("{}: {e}", path.display())))?
            .read_to_end(&mut bytes)?;
        let mut pos = 0usize;
        let take = |pos: &mut usize, len: usize| -> Result<&[u8]> {
            if *pos + len > bytes.len() {
                return Err(Error::data(format!("{}: truncated cache file", path.display())));
            }
            let slice = &bytes[*pos..*pos + len];
            *pos += len;
            Ok(slice)
        };
        if take(&mut pos, 4)? != CACHE_MAGIC {
            return Err(Error::data(format!("{}: not a distance cache", path.display())));
        }
        let version = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap());
        if version != CACHE_VERSION {
            return Err(Error::data(format!(
                "{}: cache version {version}, expected {CACHE_VERSION}",
                path.display()
            )));
        }
        let spec_fingerprint = String::from_utf8(take(&mut pos, 16)?.to_vec())
            .map_err(|_| Error::data("bad fingerprint encoding"))?;
        let dataset_fingerprint = String::from_utf8(take(&mut pos, 16)?.to_vec())
            .map_err(|_| Error::data("bad fingerprint encoding"))?;
        let id_len = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        let spec_id = String::from_utf8(take(&mut pos, id_len)?.to_vec())
            .map_err(|_| Error::data("bad spec id encoding"))?;
        let n = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()) as usize;
        let mut ids = Vec::with_capacity(n);
        for _ in 0..n {
            let len = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
            ids.push(
                String::from_utf8(take(&mut pos, len)?.to_vec())
                    .map_err(|_| Error::data("bad id encoding"))?,
            );
        }
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = f64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        if pos != bytes.len() {
            return Err(Error::data(format!("{}: trailing bytes in cache", path.display())));
        }
        Ok(DistanceMatrix { spec_id, spec_fingerprint, dataset_fingerprint, ids, entries })
    }

    /// Human-readable export: header `id,<ids...>`, one row per sample.
    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str("id");
        for id in &self.ids {
            out.push(',');
            out.push_str(id);
        }
        out.push('\n');
        for i in 0..self.n() {
            out.push_str(&self.ids[i]);
            for j in 0..self.n() {
                out.push(',');
                out.push_str(&format!("{}", self.get(i, j)));
            }
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Evaluate `spec` on every pair of samples.
///
/// Pairs are computed in parallel; the assembled matrix depends only on the
/// inputs, never on the schedule. Per-pair failures name the offending pair.
pub fn pairwise_matrix(
    ctx: &DistanceContext<'_>,
    spec: &SemiMetricSpec,
    dataset_fingerprint: &str,
) -> Result<DistanceMatrix> {
    let n = ctx.samples.len();
    if n == 0 {
        return Err(Error::invalid("pairwise matrix needs at least one sample"));
    }
    let pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    let upper: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            ctx.evaluate(spec, i, j).map_err(|e| {
                Error::invalid(format!(
                    "{} on pair ({}, {}): {e}",
                    spec.id(),
                    ctx.samples[i].id,
                    ctx.samples[j].id
                ))
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut entries = vec![0.0; n * n];
    for (&(i, j), &v) in pairs.iter().zip(&upper) {
        entries[i * n + j] = v;
        entries[j * n + i] = v;
    }
    Ok(DistanceMatrix {
        spec_id: spec.id(),
        spec_fingerprint: spec.fingerprint(),
        dataset_fingerprint: dataset_fingerprint.to_string(),
        ids: ctx.samples.iter().map(|s| s.id.clone()).collect(),
        entries,
    })
}

/// Compute a matrix through the file cache: load when a valid file for
/// (dataset, spec) exists, otherwise compute and persist.
pub fn pairwise_matrix_cached(
    ctx: &DistanceContext<'_>,
    spec: &SemiMetricSpec,
    dataset_fingerprint: &str,
    cache_dir: Option<&Path>,
) -> Result<DistanceMatrix> {
    let path = cache_dir.map(|dir| {
        dir.join(format!("{}_{}.fcdm", dataset_fingerprint, spec.fingerprint()))
    });
    if let Some(path) = &path {
        if path.exists() {
            if let Ok(cached) = DistanceMatrix::read_cache(path) {
                if cached.spec_fingerprint == spec.fingerprint()
                    && cached.dataset_fingerprint == dataset_fingerprint
                    && cached.n() == ctx.samples.len()
                {
                    return Ok(cached);
                }
            }
        }
    }
    let matrix = pairwise_matrix(ctx, spec, dataset_fingerprint)?;
    if let Some(path) = &path {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        matrix.write_cache(path)?;
    }
    Ok(matrix)
}

/// Fingerprint of a preprocessed sample set, used to key caches.
pub fn dataset_fingerprint(samples: &[crate::funcdata::LabeledSample]) -> String {
    let canonical = serde_json::to_vec(samples).expect("samples serialize");
    fingerprint(&canonical)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcdata::{preprocess_sample, Curve, LabeledSample, PreprocessSettings};

    fn sample(id: &str, points: &[(f64, f64)], label: usize) -> LabeledSample {
        let grid: Vec<f64> = (0..points.len()).map(|i| i as f64 * 10.0).collect();
        let values: Vec<f64> = points.iter().flat_map(|&(x, y)| [x, y]).collect();
        let curve = Curve::new(grid, values, 2).unwrap();
        preprocess_sample(
            id.to_string(),
            &curve,
            Some((1.0, 1.0)),
            label,
            &PreprocessSettings { grid_size: 21, ..PreprocessSettings::default() },
            &[],
        )
        .unwrap()
    }

    fn wiggle(seed: u64, n_pts: usize) -> Vec<(f64, f64)> {
        let mut state = seed;
        (0..n_pts)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let x = (state >> 33) as f64 / (1u64 << 31) as f64;
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let y = (state >> 33) as f64 / (1u64 << 31) as f64;
                (x, y)
            })
            .collect()
    }

    #[test]
    fn single_sample_matrix_is_zero() {
        let samples = vec![sample("a", &wiggle(1, 8), 0)];
        let ctx = DistanceContext::new(&samples, None);
        let spec = SemiMetricSpec::parse("L2", 0).unwrap();
        let m = pairwise_matrix(&ctx, &spec, "0000000000000000").unwrap();
        assert_eq!(m.n(), 1);
        assert_eq!(m.get(0, 0), 0.0);
    }

    #[test]
    fn duplicate_samples_have_zero_off_diagonal() {
        let pts = wiggle(2, 8);
        let samples = vec![sample("a", &pts, 0), sample("b", &pts, 1)];
        let ctx = DistanceContext::new(&samples, None);
        let spec = SemiMetricSpec::parse("L2", 0).unwrap();
        let m = pairwise_matrix(&ctx, &spec, "0000000000000000").unwrap();
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.get(1, 0), 0.0);
    }

    #[test]
    fn matrix_matches_single_pair_calls() {
        let samples = vec![
            sample("a", &wiggle(3, 8), 0),
            sample("b", &wiggle(4, 8), 1),
            sample("c", &wiggle(5, 8), 0),
        ];
        let ctx = DistanceContext::new(&samples, None);
        let spec = SemiMetricSpec::parse("L2", 0).unwrap();
        let m = pairwise_matrix(&ctx, &spec, "0000000000000000").unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let direct = if i == j { 0.0 } else { ctx.evaluate(&spec, i, j).unwrap() };
                assert_eq!(m.get(i, j), direct);
                assert_eq!(m.get(i, j), m.get(j, i));
            }
        }
    }

    #[test]
    fn cache_round_trip_is_exact() {
        let samples = vec![
            sample("a", &wiggle(6, 8), 0),
            sample("b", &wiggle(7, 8), 1),
            sample("c", &wiggle(8, 8), 0),
        ];
        let ctx = DistanceContext::new(&samples, None);
        let spec = SemiMetricSpec::parse("dtw", 0).unwrap();
        let fp = dataset_fingerprint(&samples);
        let m = pairwise_matrix(&ctx, &spec, &fp).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.fcdm");
        m.write_cache(&path).unwrap();
        let back = DistanceMatrix::read_cache(&path).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn cached_computation_is_byte_identical_across_runs() {
        let samples = vec![
            sample("a", &wiggle(9, 8), 0),
            sample("b", &wiggle(10, 8), 1),
        ];
        let ctx = DistanceContext::new(&samples, None);
        let spec = SemiMetricSpec::parse("hausdorff", 0).unwrap();
        let fp = dataset_fingerprint(&samples);
        let dir = tempfile::tempdir().unwrap();
        let m1 = pairwise_matrix_cached(&ctx, &spec, &fp, Some(dir.path())).unwrap();
        let cache_file = dir
            .path()
            .read_dir()
            .unwrap()
            .next()
            .unwrap()
            .unwrap()
            .path();
        let bytes1 = std::fs::read(&cache_file).unwrap();
        let m2 = pairwise_matrix_cached(&ctx, &spec, &fp, Some(dir.path())).unwrap();
        let bytes2 = std::fs::read(&cache_file).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(bytes1, bytes2);
    }

    #[test]
    fn csv_export_writes_square_table() {
        let samples = vec![sample("a", &wiggle(11, 8), 0), sample("b", &wiggle(12, 8), 1)];
        let ctx = DistanceContext::new(&samples, None);
        let spec = SemiMetricSpec::parse("L1", 0).unwrap();
        let m = pairwise_matrix(&ctx, &spec, "0000000000000000").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        m.export_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("id,a,b"));
        assert!(lines[1].starts_with("a,0,"));
    }
}
