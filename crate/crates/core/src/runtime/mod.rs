//! Edge workers, the central collector with timeout release, decoder
//! profiling and the baseline pipelines.

mod buffer;
mod config;
mod report;
mod sim;
mod socket;

pub use buffer::{BufferStats, Collected, HashBuffer, InsertOutcome, Nanos, SampleState, SharedBuffer};
pub use config::{
    partition_receivers, ComputeModel, FaultPlan, InfraConfig, Jitter, SocketConfig, Transport,
};
pub use report::{PipelineMode, RunReport, SampleReport};

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::epicnet::{self, reconstruct, LatentSet, LatentVector, ModelWeights, VelocityMap};
use crate::netem::ProtocolError;
use crate::numerics::{self, Tensor};
use crate::toolkit::{ssim, SsimParams};

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("config error: {0}")]
    Config(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error(transparent)]
    Model(#[from] epicnet::Error),
    #[error(transparent)]
    Frame(#[from] ProtocolError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<numerics::Error> for RuntimeError {
    fn from(e: numerics::Error) -> Self {
        Self::Model(e.into())
    }
}

pub type Result<T> = std::result::Result<T, RuntimeError>;

/// Run EPIC over `samples` (each `[sources, time, receivers]`).
///
/// Returns one map per sample (`None` when nothing arrived in time) and the
/// per-sample report.
pub fn run_epic(
    samples: &[Tensor],
    weights: &ModelWeights,
    infra: &InfraConfig,
    faults: &FaultPlan,
) -> Result<(Vec<Option<VelocityMap>>, RunReport)> {
    infra.check_model(&weights.config)?;
    sim::check_samples(samples, weights)?;
    match infra.transport {
        Transport::Simulated => sim::run_epic(samples, weights, infra, faults),
        Transport::Socket => socket::run_epic(samples, weights, infra, faults),
    }
}

/// Run one of the comparison pipelines on the virtual clock.
pub fn run_baseline(
    mode: PipelineMode,
    samples: &[Tensor],
    weights: &ModelWeights,
    infra: &InfraConfig,
    faults: &FaultPlan,
) -> Result<(Vec<Option<VelocityMap>>, RunReport)> {
    infra.check_model(&weights.config)?;
    sim::check_samples(samples, weights)?;
    if mode == PipelineMode::Epic {
        return run_epic(samples, weights, infra, faults);
    }
    if mode == PipelineMode::Sla && weights.config.n_devices > 1 && weights.sla_merge.is_none() {
        return Err(RuntimeError::Config("split-learning mode needs merge weights".into()));
    }
    sim::run_baseline(mode, samples, weights, infra, faults)
}

/// Median wall time of a full central reconstruction over seeded dummy latents.
pub fn profile_decoder(weights: &ModelWeights, trials: usize, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Err(RuntimeError::Config("profiling needs at least one trial".into()));
    }
    let c = &weights.config;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut times = Vec::with_capacity(trials);
    for t in 0..trials {
        let latents = (0..c.n_devices).map(|d| {
            let v = Tensor::from_fn(&[c.latent_dim], |_| rng.gen_range(-1.0..1.0));
            LatentVector::new(v, d, t as u64)
        });
        let set = LatentSet::from_latents(c.n_devices, latents.collect::<epicnet::Result<Vec<_>>>()?)?;
        let start = Instant::now();
        reconstruct(&set, weights)?;
        times.push(start.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    Ok(times[times.len() / 2])
}

/// Fill each sample's SSIM against its ground-truth velocity grid.
pub fn attach_fidelity(report: &mut RunReport, maps: &[Option<VelocityMap>], truths: &[Tensor], params: &SsimParams) -> Result<()> {
    for (row, (map, truth)) in report.samples.iter_mut().zip(maps.iter().zip(truths)) {
        row.ssim = match map {
            Some(m) => Some(ssim(m.values(), truth, params).map_err(|e| RuntimeError::Config(e.to_string()))?),
            None => None,
        };
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessRow {
    pub drops: usize,
    pub mode: PipelineMode,
    pub samples: usize,
    /// Samples that produced an in-range map of the model's output extents.
    pub valid_maps: usize,
    pub failed: usize,
    pub mean_ssim: Option<f64>,
    pub deadline_met_fraction: f64,
}

fn valid_map(map: &VelocityMap, weights: &ModelWeights) -> bool {
    let (lo, hi) = weights.config.velocity_range;
    map.dims() == weights.config.output_dims
        && map.values().data().iter().all(|v| (lo..=hi).contains(v))
}

/// For each `k` in `drop_counts`, drop `k` seeded-random devices per sample
/// and run every requested mode.
pub fn run_robustness_sweep(
    samples: &[Tensor],
    truths: &[Tensor],
    weights: &ModelWeights,
    infra: &InfraConfig,
    drop_counts: &[usize],
    modes: &[PipelineMode],
    seed: u64,
) -> Result<Vec<RobustnessRow>> {
    if truths.len() != samples.len() {
        return Err(RuntimeError::Config(format!(
            "{} ground-truth maps for {} samples",
            truths.len(),
            samples.len()
        )));
    }
    let (lo, hi) = weights.config.velocity_range;
    let params = SsimParams::for_range(lo as f64, hi as f64);
    let mut rows = Vec::new();
    for &k in drop_counts {
        let faults = FaultPlan::random_drops(samples.len(), infra.n_devices, k, seed ^ k as u64)?;
        for &mode in modes {
            let (maps, mut report) = run_baseline(mode, samples, weights, infra, &faults)?;
            attach_fidelity(&mut report, &maps, truths, &params)?;
            let scores: Vec<f64> = report.samples.iter().filter_map(|s| s.ssim).collect();
            rows.push(RobustnessRow {
                drops: k,
                mode,
                samples: samples.len(),
                valid_maps: maps.iter().flatten().filter(|m| valid_map(m, weights)).count(),
                failed: report.failed(),
                mean_ssim: (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64),
                deadline_met_fraction: report.samples.iter().filter(|s| s.deadline_met).count() as f64
                    / samples.len().max(1) as f64,
            });
        }
    }
    Ok(rows)
}
