//! Command-line front end: synthetic data generation, preprocessing,
//! distance caches and full pipeline runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use funclass::config::{GateMode, RunConfig};
use funclass::cvharness::run_pipeline;
use funclass::error::Error;
use funclass::funcdata::io::{
    build_dataset, load_aoi, load_external_measures, load_labels, load_trajectories, Dataset,
};
use funclass::funcdata::AoiPartition;
use funclass::semimetrics::{
    dataset_fingerprint, pairwise_matrix_cached, AoiFeatures, DistanceContext,
};
use funclass::synth::{generate, scenario_config, Scenario};

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_INTERNAL: u8 = 4;

#[derive(Parser)]
#[command(
    name = "funclass",
    about = "Classify multivariate functional observations with semi-metric ensembles",
    version
)]
struct Cli {
    /// Worker threads (0 = all cores). Parallelism never changes outputs.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Path to the run configuration JSON.
    #[arg(long)]
    config: PathBuf,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a default configuration file.
    Config {
        /// Emit the default configuration.
        #[arg(long)]
        init: bool,
        /// Where to write it.
        #[arg(long, default_value = "config.json")]
        out: PathBuf,
    },
    /// Generate a synthetic scenario: trajectories, labels and a matching
    /// run configuration.
    Synth {
        /// amplitude, timewarp or xor.
        #[arg(long)]
        scenario: String,
        /// Number of trajectories.
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// Output directory for trajectories.csv, labels.csv, config.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Preprocess the configured data into a dataset file.
    Preprocess(ConfigArgs),
    /// Compute (and cache) the pairwise distance matrix of every configured
    /// semi-metric.
    Distances {
        #[command(flatten)]
        common: ConfigArgs,
        /// Also export each matrix as CSV.
        #[arg(long)]
        export_csv: bool,
    },
    /// Run the full nested-CV pipeline and write the report files.
    Run {
        #[command(flatten)]
        common: ConfigArgs,
        /// Gate accuracy source: outer (published protocol) or inner.
        #[arg(long)]
        gate: Option<String>,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) => EXIT_CONFIG,
        Error::Data(_) | Error::InvalidInput(_) => EXIT_DATA,
        Error::Internal(_) => EXIT_INTERNAL,
    }
}

fn load_inputs(config: &RunConfig) -> Result<(Dataset, Option<AoiPartition>), Error> {
    if config.semimetrics.iter().any(|s| s.needs_aoi()) && config.data.aoi.is_none() {
        return Err(Error::config(
            "roster contains AOI-based semi-metrics but no AOI partition is configured",
        ));
    }
    let trajectories = load_trajectories(&config.data.trajectories)?;
    let labels = load_labels(&config.data.labels)?;
    let external = match &config.data.external_measures {
        Some(path) => load_external_measures(path)?,
        None => BTreeMap::new(),
    };
    let dataset = build_dataset(trajectories, &labels, &external, &config.preprocess)?;
    let aoi = config.data.aoi.as_ref().map(|p| load_aoi(p)).transpose()?;
    Ok((dataset, aoi))
}

fn with_overrides(mut config: RunConfig, common: &ConfigArgs, gate: Option<&str>) -> Result<RunConfig, Error> {
    if let Some(out) = &common.out {
        config.out_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(gate) = gate {
        config.ensemble.gate_mode = match gate {
            "outer" => GateMode::Outer,
            "inner" => GateMode::Inner,
            other => return Err(Error::config(format!("unknown gate mode '{other}'"))),
        };
    }
    Ok(config)
}

fn cmd_config(init: bool, out: &Path) -> Result<(), Error> {
    if !init {
        return Err(Error::config("config: nothing to do (pass --init)"));
    }
    let config = RunConfig::default_with(
        "trajectories.csv".into(),
        "labels.csv".into(),
        "out".into(),
        42,
    );
    std::fs::write(out, config.to_json())?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_synth(scenario: &str, n: usize, seed: u64, out: &Path) -> Result<(), Error> {
    let scenario: Scenario = scenario.parse()?;
    let files = generate(scenario, n, seed);
    files.write(out)?;
    let config = scenario_config(scenario, seed);
    std::fs::write(out.join("config.json"), config.to_json())?;
    println!(
        "wrote {} trajectories for scenario {} under {}",
        n,
        scenario.name(),
        out.display()
    );
    Ok(())
}

fn cmd_preprocess(args: &ConfigArgs) -> Result<(), Error> {
    let config = with_overrides(RunConfig::load(&args.config)?, args, None)?;
    let (dataset, _) = load_inputs(&config)?;
    std::fs::create_dir_all(&config.out_dir)?;
    let path = config.out_dir.join("preprocessed.json");
    dataset.save_json(&path)?;
    println!(
        "preprocessed {} samples ({} classes) into {}",
        dataset.samples.len(),
        dataset.classes.len(),
        path.display()
    );
    Ok(())
}

fn cmd_distances(args: &ConfigArgs, export_csv: bool) -> Result<(), Error> {
    let config = with_overrides(RunConfig::load(&args.config)?, args, None)?;
    let (dataset, aoi) = load_inputs(&config)?;
    let cache_dir = config.out_dir.join("cache");
    std::fs::create_dir_all(&cache_dir)?;

    let aoi_features = match (&aoi, config.semimetrics.iter().any(|s| s.needs_aoi())) {
        (Some(partition), true) => Some(AoiFeatures::build(
            &dataset.samples,
            partition,
            config.levenshtein_collapse_repeats,
        )?),
        _ => None,
    };
    let ctx = DistanceContext::new(&dataset.samples, aoi_features.as_ref());
    let ds_fp = dataset_fingerprint(&dataset.samples);
    for spec in &config.semimetrics {
        let matrix = pairwise_matrix_cached(&ctx, spec, &ds_fp, Some(&cache_dir))?;
        if export_csv {
            let csv_path = cache_dir.join(format!("{}.csv", spec.id().replace([':', '/'], "_")));
            matrix.export_csv(&csv_path)?;
        }
        println!("cached {} ({} x {})", spec.id(), matrix.n(), matrix.n());
    }
    Ok(())
}

fn cmd_run(args: &ConfigArgs, gate: Option<&str>) -> Result<(), Error> {
    let config = with_overrides(RunConfig::load(&args.config)?, args, gate)?;
    let (dataset, aoi) = load_inputs(&config)?;
    std::fs::create_dir_all(&config.out_dir)?;
    let cache_dir = config.out_dir.join("cache");

    let output = run_pipeline(&config, &dataset, aoi.as_ref(), Some(&cache_dir))?;
    let report = &output.report;

    report.save(&config.out_dir.join("report.json"))?;
    std::fs::write(config.out_dir.join("weak_accuracy.csv"), report.weak_table_csv())?;
    std::fs::write(config.out_dir.join("ensemble_table.csv"), report.ensemble_table_csv())?;
    let archive = serde_json::json!({
        "version": 1,
        "per_fold_models": output.models,
    });
    std::fs::write(
        config.out_dir.join("ensembles.json"),
        serde_json::to_string(&archive).map_err(Error::from)? + "\n",
    )?;

    println!("report written to {}", config.out_dir.join("report.json").display());
    for w in &report.weak_learners {
        println!(
            "weak {:<28} outer accuracy {:.4}{}",
            w.id,
            w.mean_outer_accuracy,
            if w.passed_gate { "  [gate]" } else { "" }
        );
    }
    for (key, e) in &report.ensembles {
        println!("ensemble {:<8} outer accuracy {:.4}", key, e.mean_outer_accuracy);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            eprintln!("funclass: cannot configure {} worker threads: {e}", cli.jobs);
            return ExitCode::from(EXIT_INTERNAL);
        }
    }
    let result = match &cli.command {
        Command::Config { init, out } => cmd_config(*init, out),
        Command::Synth { scenario, n, seed, out } => cmd_synth(scenario, *n, *seed, out),
        Command::Preprocess(args) => cmd_preprocess(args),
        Command::Distances { common, export_csv } => cmd_distances(common, *export_csv),
        Command::Run { common, gate } => cmd_run(common, gate.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("funclass: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
