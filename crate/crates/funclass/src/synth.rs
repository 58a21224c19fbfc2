//! Deterministic synthetic trajectory generators.
//!
//! Three scenarios with different sources of class separation:
//!
//! - `amplitude`: the classes differ in the peak height of the x coordinate
//!   (class means 1 and 2, spread 0.1), so summary-maximum distances
//!   dominate.
//! - `timewarp`: both classes traverse the same path under random monotone
//!   time warps; class "difficult" additionally revisits part of the path
//!   twice (back-and-forth dips), which elastic alignment picks up.
//! - `xor`: the class depends on the interaction of two latent attributes —
//!   the y peak level and the presence of x zig-zagging — with cell
//!   probabilities chosen so that neither attribute alone separates the
//!   classes but their combination does. Flexible super-learners can exploit
//!   the interaction; a convex combination cannot.
//!
//! Generators emit the trajectory/label CSV formats consumed by the loader
//! and are byte-deterministic in (scenario, n, seed).

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::{RunConfig, WeakConfig};
use crate::error::{Error, Result};
use crate::rng::derive_rng;
use crate::semimetrics::SemiMetricSpec;
use crate::weaklearners::{Kernel, WeakLearnerBase};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Amplitude,
    Timewarp,
    Xor,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Amplitude => "amplitude",
            Scenario::Timewarp => "timewarp",
            Scenario::Xor => "xor",
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Scenario> {
        match s {
            "amplitude" => Ok(Scenario::Amplitude),
            "timewarp" => Ok(Scenario::Timewarp),
            "xor" => Ok(Scenario::Xor),
            other => Err(Error::config(format!(
                "unknown scenario '{other}' (expected amplitude, timewarp or xor)"
            ))),
        }
    }
}

/// The generated CSV documents.
#[derive(Debug, Clone)]
pub struct SynthFiles {
    pub trajectories: String,
    pub labels: String,
}

impl SynthFiles {
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("trajectories.csv"), &self.trajectories)?;
        std::fs::write(dir.join("labels.csv"), &self.labels)?;
        Ok(())
    }
}

const VIEWPORT: (f64, f64) = (800.0, 600.0);
const LABEL_NAMES: [&str; 2] = ["easy", "difficult"];

fn std_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; u1 bounded away from zero.
    let u1: f64 = rng.gen_range(1e-12..1.0);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

struct TrajectoryRows {
    id: String,
    /// (t_ms, x_px, y_px)
    points: Vec<(f64, f64, f64)>,
    label: usize,
}

/// Random strictly increasing millisecond grid of the given length.
fn time_grid(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let mut t = 0.0;
    (0..len)
        .map(|_| {
            let current = t;
            t += rng.gen_range(10.0..20.0);
            current
        })
        .collect()
}

fn to_pixels(points: Vec<(f64, f64)>, grid: Vec<f64>) -> Vec<(f64, f64, f64)> {
    grid.into_iter()
        .zip(points)
        .map(|(t, (x, y))| (t, 100.0 + 600.0 * x, 100.0 + 400.0 * y))
        .collect()
}

fn amplitude_sample(i: usize, seed: u64) -> TrajectoryRows {
    let mut rng = derive_rng(seed, &["synth", "amplitude", &i.to_string()]);
    let class = i % 2;
    let peak = (1.0 + class as f64) + 0.1 * std_normal(&mut rng);
    let len = rng.gen_range(60..=100);
    let grid = time_grid(&mut rng, len);
    let points: Vec<(f64, f64)> = (0..len)
        .map(|j| {
            let u = j as f64 / (len - 1) as f64;
            let x = 0.25 * peak * (std::f64::consts::PI * u).sin() + 0.01 * std_normal(&mut rng);
            let y = u + 0.02 * std_normal(&mut rng);
            (x, y)
        })
        .collect();
    TrajectoryRows { id: format!("p{i:04}"), points: to_pixels(points, grid), label: class }
}

fn timewarp_sample(i: usize, seed: u64) -> TrajectoryRows {
    let mut rng = derive_rng(seed, &["synth", "timewarp", &i.to_string()]);
    let class = i % 2;
    let alpha = (0.35 * std_normal(&mut rng)).exp().clamp(0.5, 2.0);
    let len = rng.gen_range(60..=100);
    let grid = time_grid(&mut rng, len);
    // Revisit dips for the difficult class: the path parameter locally runs
    // backwards twice.
    let dips: Vec<(f64, f64)> = if class == 1 {
        vec![
            (rng.gen_range(0.25..0.45), rng.gen_range(0.12..0.18)),
            (rng.gen_range(0.55..0.75), rng.gen_range(0.12..0.18)),
        ]
    } else {
        Vec::new()
    };
    let points: Vec<(f64, f64)> = (0..len)
        .map(|j| {
            let u = j as f64 / (len - 1) as f64;
            let mut s = u.powf(alpha);
            for &(center, depth) in &dips {
                let z = (u - center) / 0.04;
                s -= depth * (-0.5 * z * z).exp();
            }
            let s = s.clamp(0.0, 1.0);
            let x = s + 0.01 * std_normal(&mut rng);
            let y = 0.5 * (std::f64::consts::PI * s).sin() + 0.01 * std_normal(&mut rng);
            (x, y)
        })
        .collect();
    TrajectoryRows { id: format!("p{i:04}"), points: to_pixels(points, grid), label: class }
}

/// Class-1 probability per (peak, zigzag) attribute cell. Balanced classes,
/// symmetric attribute conditionals (0.425 / 0.575), cell-wise Bayes
/// accuracy 0.80.
const XOR_CELL_PROBS: [[f64; 2]; 2] = [[0.05, 0.80], [0.80, 0.35]];

fn xor_sample(i: usize, seed: u64) -> TrajectoryRows {
    let mut rng = derive_rng(seed, &["synth", "xor", &i.to_string()]);
    let attr_peak = (i / 2) % 2;
    let attr_zigzag = i % 2;
    let label = usize::from(rng.gen::<f64>() < XOR_CELL_PROBS[attr_peak][attr_zigzag]);
    let len = rng.gen_range(60..=100);
    let grid = time_grid(&mut rng, len);
    let peak = 0.3 + 0.4 * attr_peak as f64 + 0.02 * std_normal(&mut rng);
    let points: Vec<(f64, f64)> = (0..len)
        .map(|j| {
            let u = j as f64 / (len - 1) as f64;
            let zigzag = if attr_zigzag == 1 {
                0.05 * (14.0 * std::f64::consts::PI * u).sin()
            } else {
                0.0
            };
            let x = u + zigzag + 0.002 * std_normal(&mut rng);
            let y = peak * (std::f64::consts::PI * u).sin() + 0.02 * std_normal(&mut rng);
            (x, y)
        })
        .collect();
    TrajectoryRows { id: format!("p{i:04}"), points: to_pixels(points, grid), label }
}

/// Generate `n` trajectories plus their labels. `n = 0` yields header-only
/// files.
pub fn generate(scenario: Scenario, n: usize, seed: u64) -> SynthFiles {
    let mut trajectories = String::from("id,question,t_ms,x,y,viewport_w,viewport_h\n");
    let mut labels = String::from("id,question,label\n");
    for i in 0..n {
        let sample = match scenario {
            Scenario::Amplitude => amplitude_sample(i, seed),
            Scenario::Timewarp => timewarp_sample(i, seed),
            Scenario::Xor => xor_sample(i, seed),
        };
        for (t, x, y) in &sample.points {
            writeln!(
                trajectories,
                "{},q1,{t},{x},{y},{},{}",
                sample.id, VIEWPORT.0, VIEWPORT.1
            )
            .expect("write to string");
        }
        writeln!(labels, "{},q1,{}", sample.id, LABEL_NAMES[sample.label]).expect("write to string");
    }
    SynthFiles { trajectories, labels }
}

fn roster(names: &[(&str, usize)]) -> Vec<SemiMetricSpec> {
    names
        .iter()
        .map(|(name, a)| SemiMetricSpec::parse(name, *a).expect("scenario roster parses"))
        .collect()
}

/// The run configuration bundled with each scenario. Paths are relative to
/// the directory the data files were generated into.
pub fn scenario_config(scenario: Scenario, seed: u64) -> RunConfig {
    let mut config = RunConfig::default_with(
        "trajectories.csv".into(),
        "labels.csv".into(),
        "out".into(),
        seed,
    );
    match scenario {
        Scenario::Amplitude => {
            config.semimetrics = roster(&[
                ("globMax-x", 0),
                ("globMax", 0),
                ("mean", 0),
                ("L2", 0),
                ("dtw", 0),
                ("hausdorff", 0),
                ("measure:RT", 0),
                ("measure:flips2d", 0),
            ]);
        }
        Scenario::Timewarp => {
            config.semimetrics = roster(&[
                ("dtw", 0),
                ("frechet", 0),
                ("L2", 0),
                ("globMax-y", 0),
                ("mean", 0),
                ("measure:RT", 0),
            ]);
        }
        Scenario::Xor => {
            // Only single-attribute detectors: lock-step distances would see
            // both attributes jointly and separate the classes on their own.
            config.semimetrics = roster(&[
                ("globMax-y", 0),
                ("measure:x_flips", 0),
                ("measure:RT", 0),
            ]);
            // Attribute conditionals sit at 0.425/0.575: individual learners
            // hover near 0.6 accuracy, so the published 0.55 gate would be a
            // coin flip on them. Large neighbourhoods keep the stacked
            // probability features stable.
            config.ensemble.gate_threshold = 0.50;
            config.weak = WeakConfig {
                bases: vec![WeakLearnerBase::Fknn],
                kernel: Kernel::Gaussian,
                k_grid: Some(vec![51, 75, 101]),
                h_grid: None,
            };
        }
    }
    config
}
