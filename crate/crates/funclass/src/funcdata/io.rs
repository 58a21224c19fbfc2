//! File formats for trajectories, labels, AOI partitions and externally
//! supplied measures.
//!
//! - Trajectories: CSV `id,question,t_ms,x,y,viewport_w,viewport_h`, rows
//!   grouped by (id, question) with ascending `t_ms` inside a group. Empty
//!   viewport fields mean "not recorded".
//! - Labels: CSV `id,question,label`.
//! - AOI partition: JSON `{"boxes": [{"symbol","x0","y0","x1","y1"}, ...],
//!   "fallback": "_"}`.
//! - External (personalised) measures: CSV `id,question,measure_name,value`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    preprocess_sample, AoiPartition, Curve, LabeledSample, PreprocessSettings, Rect,
};
use crate::error::{Error, Result};

/// One (id, question) trajectory as read from disk, before preprocessing.
#[derive(Debug, Clone)]
pub struct RawTrajectory {
    pub id: String,
    pub question: String,
    pub curve: Curve,
    pub viewport: Option<(f64, f64)>,
}

impl RawTrajectory {
    /// The opaque sample identifier used throughout a run.
    pub fn sample_id(&self) -> String {
        format!("{}/{}", self.id, self.question)
    }
}

/// A preprocessed dataset: samples in deterministic (id, question) order plus
/// the ordered class alphabet their integer labels index into.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Vec<LabeledSample>,
    pub classes: Vec<String>,
}

impl Dataset {
    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn ids(&self) -> Vec<String> {
        self.samples.iter().map(|s| s.id.clone()).collect()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Dataset> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn parse_f64(field: &str, line: usize, what: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::data(format!("line {line}: cannot parse {what} '{field}'")))
}

/// Read a trajectory CSV. Rows must be grouped by (id, question); timestamps
/// must strictly increase within a group.
pub fn load_trajectories(path: &Path) -> Result<Vec<RawTrajectory>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;

    let headers = reader.headers()?.clone();
    let expected = ["id", "question", "t_ms", "x", "y", "viewport_w", "viewport_h"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::data(format!(
            "{}: expected header {:?}, got {:?}",
            path.display(),
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }

    struct Group {
        id: String,
        question: String,
        grid: Vec<f64>,
        values: Vec<f64>,
        viewport: Option<(f64, f64)>,
    }

    let mut out = Vec::new();
    let mut current: Option<Group> = None;
    let mut seen: BTreeMap<(String, String), ()> = BTreeMap::new();

    let flush = |g: Group, out: &mut Vec<RawTrajectory>| -> Result<()> {
        let curve = Curve::new(g.grid, g.values, 2).map_err(|e| {
            Error::data(format!("trajectory {}/{}: {e}", g.id, g.question))
        })?;
        out.push(RawTrajectory {
            id: g.id,
            question: g.question,
            curve,
            viewport: g.viewport,
        });
        Ok(())
    };

    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record?;
        if record.len() != 7 {
            return Err(Error::data(format!("line {line}: expected 7 fields")));
        }
        let id = record[0].to_string();
        let question = record[1].to_string();
        let t = parse_f64(&record[2], line, "t_ms")?;
        let x = parse_f64(&record[3], line, "x")?;
        let y = parse_f64(&record[4], line, "y")?;
        let viewport = if record[5].trim().is_empty() || record[6].trim().is_empty() {
            None
        } else {
            Some((
                parse_f64(&record[5], line, "viewport_w")?,
                parse_f64(&record[6], line, "viewport_h")?,
            ))
        };

        let same_group = current
            .as_ref()
            .map(|g| g.id == id && g.question == question)
            .unwrap_or(false);
        if !same_group {
            if let Some(g) = current.take() {
                flush(g, &mut out)?;
            }
            if seen.insert((id.clone(), question.clone()), ()).is_some() {
                return Err(Error::data(format!(
                    "line {line}: rows for {id}/{question} are not contiguous"
                )));
            }
            current = Some(Group {
                id,
                question,
                grid: Vec::new(),
                values: Vec::new(),
                viewport,
            });
        }
        let g = current.as_mut().expect("group exists");
        if let Some(&last) = g.grid.last() {
            if t <= last {
                return Err(Error::data(format!(
                    "line {line}: t_ms must strictly increase within {}/{} ({t} after {last})",
                    g.id, g.question
                )));
            }
        }
        g.grid.push(t);
        g.values.extend([x, y]);
    }
    if let Some(g) = current.take() {
        flush(g, &mut out)?;
    }
    Ok(out)
}

/// Read a label CSV into a (id, question) -> label map.
pub fn load_labels(path: &Path) -> Result<BTreeMap<(String, String), String>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != 3 {
            return Err(Error::data(format!("line {}: expected 3 fields", i + 2)));
        }
        map.insert(
            (record[0].to_string(), record[1].to_string()),
            record[2].to_string(),
        );
    }
    Ok(map)
}

/// Read external measures into (id, question) -> [(name, value)].
pub fn load_external_measures(
    path: &Path,
) -> Result<BTreeMap<(String, String), Vec<(String, f64)>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    let mut map: BTreeMap<(String, String), Vec<(String, f64)>> = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != 4 {
            return Err(Error::data(format!("line {}: expected 4 fields", i + 2)));
        }
        let value = parse_f64(&record[3], i + 2, "value")?;
        map.entry((record[0].to_string(), record[1].to_string()))
            .or_default()
            .push((record[2].to_string(), value));
    }
    Ok(map)
}

#[derive(Serialize, Deserialize)]
struct AoiBoxFile {
    symbol: String,
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

#[derive(Serialize, Deserialize)]
struct AoiFile {
    boxes: Vec<AoiBoxFile>,
    fallback: String,
}

/// Read an AOI partition from JSON.
pub fn load_aoi(path: &Path) -> Result<AoiPartition> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    let file: AoiFile = serde_json::from_str(&text)?;
    let single = |s: &str| -> Result<char> {
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => Ok(c),
            _ => Err(Error::data(format!("AOI symbol '{s}' must be a single character"))),
        }
    };
    let boxes = file
        .boxes
        .iter()
        .map(|b| Ok((single(&b.symbol)?, Rect { x0: b.x0, y0: b.y0, x1: b.x1, y1: b.y1 })))
        .collect::<Result<Vec<_>>>()?;
    AoiPartition::new(boxes, single(&file.fallback)?)
        .map_err(|e| Error::data(e.to_string()))
}

/// Write an AOI partition as JSON.
pub fn save_aoi(partition: &AoiPartition, path: &Path) -> Result<()> {
    let file = AoiFile {
        boxes: partition
            .boxes
            .iter()
            .map(|(s, r)| AoiBoxFile { symbol: s.to_string(), x0: r.x0, y0: r.y0, x1: r.x1, y1: r.y1 })
            .collect(),
        fallback: partition.fallback.to_string(),
    };
    std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

/// Join trajectories with labels and external measures, preprocess every
/// observation, and produce the dataset in deterministic (id, question)
/// order. Every trajectory must have a label; classes are the sorted distinct
/// label strings.
pub fn build_dataset(
    mut trajectories: Vec<RawTrajectory>,
    labels: &BTreeMap<(String, String), String>,
    external: &BTreeMap<(String, String), Vec<(String, f64)>>,
    settings: &PreprocessSettings,
) -> Result<Dataset> {
    trajectories.sort_by(|a, b| (&a.id, &a.question).cmp(&(&b.id, &b.question)));

    let mut classes: Vec<String> = labels.values().cloned().collect();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::data(format!(
            "need at least 2 classes, found {}",
            classes.len()
        )));
    }

    let empty = Vec::new();
    let mut samples = Vec::with_capacity(trajectories.len());
    for traj in &trajectories {
        let key = (traj.id.clone(), traj.question.clone());
        let label_str = labels.get(&key).ok_or_else(|| {
            Error::data(format!("no label for trajectory {}/{}", traj.id, traj.question))
        })?;
        let label = classes.iter().position(|c| c == label_str).expect("label in alphabet");
        let extra = external.get(&key).unwrap_or(&empty);
        let sample = preprocess_sample(
            traj.sample_id(),
            &traj.curve,
            traj.viewport,
            label,
            settings,
            extra,
        )
        .map_err(|e| Error::data(format!("preprocessing {}/{}: {e}", traj.id, traj.question)))?;
        samples.push(sample);
    }
    Ok(Dataset { samples, classes })
}
