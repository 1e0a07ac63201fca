use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use epic_core::epicnet::{init_weights, load_weights, save_weights, ModelWeights};
use epic_core::numerics::Tensor;
use epic_core::physics::{generate_dataset, load_dataset, save_dataset, Family, Sample};
use epic_core::runtime::{attach_fidelity, run_baseline, FaultPlan, PipelineMode, RunReport};
use epic_core::toolkit::{
    bench, sample_rows, summarize, write_csv, write_json, RunConfig, SsimParams,
};

#[derive(Debug, Parser)]
#[command(name = "epic", version, about = "Distributed split-inference for seismic velocity reconstruction")]
struct Cli {
    /// JSON run configuration.
    #[arg(short, long, global = true, default_value = "epic.json")]
    config: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a seeded synthetic dataset.
    GenData {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        family: Option<Family>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write seeded untrained model weights.
    GenWeights {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n_devices: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one pipeline over the dataset and write its report.
    Run {
        #[arg(long, default_value = "epic")]
        mode: PipelineMode,
        /// Seeded-random devices dropped from every sample.
        #[arg(long, default_value_t = 0)]
        drop: usize,
        /// Label for the network profile in the tables.
        #[arg(long, default_value = "config")]
        profile: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep modes x device counts x network profiles.
    Bench {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Turn saved run reports into summary and per-sample tables.
    Report {
        /// Run report JSON files written by `run`.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "config")]
        profile: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: &Path) -> Result<RunConfig> {
    let config = RunConfig::load(path)?.with_env_seed()?;
    Ok(config)
}

fn dataset(config: &RunConfig) -> Result<Vec<Sample>> {
    let dir = &config.paths.data;
    if dir.join("manifest.json").exists() {
        let (_, samples) = load_dataset(dir).with_context(|| format!("loading dataset from {}", dir.display()))?;
        return Ok(samples);
    }
    eprintln!("no dataset at {}, simulating {} samples in memory", dir.display(), config.samples);
    Ok(generate_dataset(config.seeds.data, config.samples, config.family, &config.geometry())?)
}

fn weights_for(config: &RunConfig, n_devices: usize) -> Result<ModelWeights> {
    let path = &config.paths.weights;
    let model = config.model_config(n_devices);
    if path.exists() {
        let weights = load_weights(path).with_context(|| format!("loading weights from {}", path.display()))?;
        if weights.config != model {
            bail!("weights in {} do not match the configured model for {n_devices} devices", path.display());
        }
        return Ok(weights);
    }
    Ok(init_weights(&model, config.seeds.weights)?)
}

fn split(samples: &[Sample]) -> (Vec<Tensor>, Vec<Tensor>) {
    samples.iter().map(|s| (s.waveform.data().clone(), s.velocity.grid().clone())).unzip()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn ssim_params(weights: &ModelWeights) -> SsimParams {
    let (lo, hi) = weights.config.velocity_range;
    SsimParams::for_range(lo as f64, hi as f64)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let config = load_config(&cli.config)?;
    match cli.command {
        Command::GenData { seed, n, family, out } => {
            let seed = seed.unwrap_or(config.seeds.data);
            let n = n.unwrap_or(config.samples);
            let family = family.unwrap_or(config.family);
            let out = out.unwrap_or_else(|| config.paths.data.clone());
            let geom = config.geometry();
            let samples = generate_dataset(seed, n, family, &geom)?;
            save_dataset(&out, &samples, seed, family, &geom)?;
            println!("wrote {n} samples to {}", out.display());
        }
        Command::GenWeights { seed, n_devices, out } => {
            let n = n_devices.unwrap_or(config.n_devices);
            let weights = init_weights(&config.model_config(n), seed.unwrap_or(config.seeds.weights))?;
            let out = out.unwrap_or_else(|| config.paths.weights.clone());
            if let Some(parent) = out.parent() {
                fs::create_dir_all(parent)?;
            }
            save_weights(&weights, &out)?;
            println!("wrote {} parameters to {}", weights.parameter_count(), out.display());
        }
        Command::Run { mode, drop, profile, out } => {
            let n = config.n_devices;
            if drop > n {
                bail!("--drop {drop} exceeds the {n} configured devices");
            }
            let (waves, truths) = split(&dataset(&config)?);
            let weights = weights_for(&config, n)?;
            let infra = config.infra(n, config.network)?;
            let faults = FaultPlan::random_drops(waves.len(), n, drop, config.seeds.faults)?;
            let (maps, mut report) = run_baseline(mode, &waves, &weights, &infra, &faults)?;
            attach_fidelity(&mut report, &maps, &truths, &ssim_params(&weights))?;
            let out = out.unwrap_or_else(|| config.paths.reports.clone());
            write_json(create(&out.join(format!("run_{mode}.json")))?, &report)?;
            write_csv(create(&out.join(format!("samples_{mode}.csv")))?, &sample_rows(&report, &profile))?;
            let summary = summarize(&report, &profile);
            write_csv(std::io::stdout().lock(), &[summary])?;
        }
        Command::Bench { out } => {
            let spec = config.bench.clone().unwrap_or_default();
            let data = dataset(&config)?;
            let rows = bench(&spec, &config, &data)?;
            let out = out.unwrap_or_else(|| config.paths.reports.clone());
            write_csv(create(&out.join("bench.csv"))?, &rows)?;
            write_json(create(&out.join("bench.json"))?, &rows)?;
            write_csv(std::io::stdout().lock(), &rows)?;
        }
        Command::Report { inputs, profile, out } => {
            let mut summaries = Vec::new();
            let mut samples = Vec::new();
            for path in &inputs {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let report: RunReport =
                    serde_json::from_str(&text).with_context(|| format!("parsing run report {}", path.display()))?;
                summaries.push(summarize(&report, &profile));
                samples.extend(sample_rows(&report, &profile));
            }
            let out = out.unwrap_or_else(|| config.paths.reports.clone());
            write_csv(create(&out.join("summary.csv"))?, &summaries)?;
            write_json(create(&out.join("summary.json"))?, &summaries)?;
            write_csv(create(&out.join("samples.csv"))?, &samples)?;
            write_csv(std::io::stdout().lock(), &summaries)?;
        }
    }
    Ok(())
}
